#include "mocsim/linalg.hpp"

#include <cmath>

namespace mocsim {

double Matrix::trace() const {
    double t = 0.0;
    for (size_t i = 0; i < rows_ && i < cols_; ++i) t += (*this)(i, i);
    return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
    if (cols_ != rhs.rows_) throw std::invalid_argument("matrix product shape mismatch");
    Matrix out(rows_, rhs.cols_);
    for (size_t i = 0; i < rows_; ++i)
        for (size_t k = 0; k < cols_; ++k) {
            const double aik = (*this)(i, k);
            if (aik == 0.0) continue;
            for (size_t j = 0; j < rhs.cols_; ++j) out(i, j) += aik * rhs(k, j);
        }
    return out;
}

std::vector<double> Matrix::mul(const std::vector<double>& v) const {
    if (v.size() != cols_) throw std::invalid_argument("matrix-vector shape mismatch");
    std::vector<double> out(rows_, 0.0);
    for (size_t i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < cols_; ++j) s += (*this)(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

/*
 * Cholesky: m = L L'.  Then inv(m) = inv(L)' inv(L), assembled column by
 * column by forward/back substitution against unit vectors.
 */
Matrix spd_inverse(const Matrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("spd_inverse: square matrix required");
    const size_t n = m.rows();
    Matrix L(n, n);
    for (size_t j = 0; j < n; ++j) {
        double diag = m(j, j);
        for (size_t k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag))
            throw singular_matrix_error("covariance not positive definite");
        L(j, j) = std::sqrt(diag);
        for (size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / L(j, j);
        }
    }

    Matrix inv(n, n);
    std::vector<double> y(n), x(n);
    for (size_t col = 0; col < n; ++col) {
        // solve L y = e_col
        for (size_t i = 0; i < n; ++i) {
            double s = (i == col) ? 1.0 : 0.0;
            for (size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
            y[i] = s / L(i, i);
        }
        // solve L' x = y
        for (size_t ii = n; ii-- > 0;) {
            double s = y[ii];
            for (size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * x[k];
            x[ii] = s / L(ii, ii);
        }
        for (size_t i = 0; i < n; ++i) inv(i, col) = x[i];
    }
    // symmetrize away round-off drift so quadratic forms stay exact on axis
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (inv(i, j) + inv(j, i));
            inv(i, j) = v;
            inv(j, i) = v;
        }
    return inv;
}

double quadratic_form(const Matrix& m, const std::vector<double>& v) {
    if (m.rows() != v.size() || m.cols() != v.size())
        throw std::invalid_argument("quadratic_form shape mismatch");
    double total = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        double row = 0.0;
        for (size_t j = 0; j < v.size(); ++j) row += m(i, j) * v[j];
        total += v[i] * row;
    }
    return total;
}

} // namespace mocsim
