#ifndef MOCSIM_LINALG_H
#define MOCSIM_LINALG_H

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mocsim {

/*
 * Minimal dense matrix support for the detector statistics.  Matrices here
 * are tiny (feature dimension, typically <= 16), so a plain row-major
 * vector<double> with an O(n^3) Cholesky factorization covers every need
 * without dragging in a linear-algebra dependency.
 */
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

    static Matrix identity(size_t n) {
        Matrix m(n, n);
        for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(size_t i, size_t j) { return a_[i * cols_ + j]; }
    double operator()(size_t i, size_t j) const { return a_[i * cols_ + j]; }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    const std::vector<double>& raw() const { return a_; }
    std::vector<double>& raw() { return a_; }

    double trace() const;
    Matrix operator*(const Matrix& rhs) const;
    std::vector<double> mul(const std::vector<double>& v) const;

private:
    size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

// thrown when a matrix that must be positive definite is not
class singular_matrix_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inverse of a symmetric positive definite matrix via Cholesky
// factorization.  Throws singular_matrix_error when a non-positive pivot
// shows up (singular or indefinite input).
Matrix spd_inverse(const Matrix& m);

// quadratic form v' * m * v
double quadratic_form(const Matrix& m, const std::vector<double>& v);

} // namespace mocsim

#endif // MOCSIM_LINALG_H
