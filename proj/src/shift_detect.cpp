#include "mocsim/shift_detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mocsim/bytes.hpp"

namespace mocsim {

GaussianStats fit_stats(const std::vector<std::vector<double>>& samples,
                        const std::vector<uint16_t>& labels, double epsilon) {
    if (samples.empty()) throw std::invalid_argument("fit_stats: empty sample set");
    if (samples.size() != labels.size())
        throw std::invalid_argument("fit_stats: sample/label count mismatch");
    const size_t dim = samples[0].size();
    if (dim == 0) throw std::invalid_argument("fit_stats: zero-dimensional features");
    for (const auto& s : samples)
        if (s.size() != dim) throw std::invalid_argument("fit_stats: ragged feature dimensions");

    // group samples per class
    std::map<uint16_t, std::vector<size_t>> by_class;
    for (size_t i = 0; i < samples.size(); ++i) by_class[labels[i]].push_back(i);
    for (const auto& [cls, idx] : by_class)
        if (idx.size() < 2)
            throw std::invalid_argument("fit_stats: class " + std::to_string(cls) +
                                        " has fewer than 2 samples");

    GaussianStats st;
    st.dim = dim;
    st.sample_count = samples.size();

    // per-class means
    for (const auto& [cls, idx] : by_class) {
        std::vector<double> mu(dim, 0.0);
        for (size_t i : idx)
            for (size_t dd = 0; dd < dim; ++dd) mu[dd] += samples[i][dd];
        for (size_t dd = 0; dd < dim; ++dd) mu[dd] /= static_cast<double>(idx.size());
        st.class_ids.push_back(cls);
        st.means.push_back(std::move(mu));
    }

    // pooled within-class scatter over the full set, 1/N normalization
    Matrix cov(dim, dim);
    for (size_t c = 0; c < st.class_ids.size(); ++c) {
        const auto& idx = by_class[st.class_ids[c]];
        const auto& mu = st.means[c];
        for (size_t i : idx)
            for (size_t r = 0; r < dim; ++r) {
                const double dr = samples[i][r] - mu[r];
                for (size_t cc = 0; cc < dim; ++cc)
                    cov(r, cc) += dr * (samples[i][cc] - mu[cc]);
            }
    }
    const double n = static_cast<double>(samples.size());
    for (size_t r = 0; r < dim; ++r)
        for (size_t c = 0; c < dim; ++c) cov(r, c) /= n;
    st.covariance = cov;

    st.epsilon = epsilon < 0.0 ? 1e-6 * cov.trace() / static_cast<double>(dim) : epsilon;
    Matrix reg = cov;
    for (size_t i = 0; i < dim; ++i) reg(i, i) += st.epsilon;
    st.inverse = spd_inverse(reg); // throws singular_matrix_error if degenerate

    // score distribution of the fit set under the final statistics
    double sum = 0.0, sumsq = 0.0;
    for (const auto& s : samples) {
        const double sc = score_sample(st, s);
        sum += sc;
        sumsq += sc * sc;
    }
    st.train_score_mean = sum / n;
    const double var = std::max(0.0, sumsq / n - st.train_score_mean * st.train_score_mean);
    st.train_score_std = std::sqrt(var);
    return st;
}

double score_sample(const GaussianStats& stats, const std::vector<double>& x) {
    if (x.size() != stats.dim)
        throw std::invalid_argument("score_sample: feature dimension mismatch");
    if (stats.means.empty()) throw std::invalid_argument("score_sample: unfitted stats");
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> diff(stats.dim);
    for (const auto& mu : stats.means) {
        for (size_t d = 0; d < stats.dim; ++d) diff[d] = x[d] - mu[d];
        const double m2 = quadratic_form(stats.inverse, diff);
        if (-m2 > best) best = -m2;
    }
    return best;
}

double score_window(const GaussianStats& stats,
                    const std::vector<std::vector<double>>& window) {
    if (window.empty()) throw std::invalid_argument("score_window: empty window");
    double sum = 0.0;
    for (const auto& x : window) sum += score_sample(stats, x);
    return sum / static_cast<double>(window.size());
}

/*
 * Blob layout (big-endian):
 *   u16 dim, u16 class count, u64 sample count,
 *   f64 epsilon, f64 train mean, f64 train std,
 *   per class: u16 id + dim f64 mean,
 *   dim*dim f64 covariance (row major).
 * The inverse is recomputed on decode from covariance + epsilon, which is
 * deterministic, so it does not travel.
 */
std::vector<uint8_t> GaussianStats::encode() const {
    ByteWriter w;
    w.put_u16(static_cast<uint16_t>(dim));
    w.put_u16(static_cast<uint16_t>(class_ids.size()));
    w.put_u64(sample_count);
    w.put_f64(epsilon);
    w.put_f64(train_score_mean);
    w.put_f64(train_score_std);
    for (size_t c = 0; c < class_ids.size(); ++c) {
        w.put_u16(class_ids[c]);
        for (double v : means[c]) w.put_f64(v);
    }
    for (size_t r = 0; r < dim; ++r)
        for (size_t c = 0; c < dim; ++c) w.put_f64(covariance(r, c));
    return w.take();
}

GaussianStats GaussianStats::decode(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    GaussianStats st;
    st.dim = r.get_u16();
    const uint16_t classes = r.get_u16();
    st.sample_count = r.get_u64();
    st.epsilon = r.get_f64();
    st.train_score_mean = r.get_f64();
    st.train_score_std = r.get_f64();
    for (uint16_t c = 0; c < classes; ++c) {
        st.class_ids.push_back(r.get_u16());
        std::vector<double> mu(st.dim);
        for (size_t d = 0; d < st.dim; ++d) mu[d] = r.get_f64();
        st.means.push_back(std::move(mu));
    }
    st.covariance = Matrix(st.dim, st.dim);
    for (size_t rr = 0; rr < st.dim; ++rr)
        for (size_t cc = 0; cc < st.dim; ++cc) st.covariance(rr, cc) = r.get_f64();
    if (!r.at_end()) throw decode_error(r.pos(), "trailing bytes after stats blob");
    if (st.dim > 0 && classes > 0) {
        Matrix reg = st.covariance;
        for (size_t i = 0; i < st.dim; ++i) reg(i, i) += st.epsilon;
        st.inverse = spd_inverse(reg);
    }
    return st;
}

bool GaussianStats::operator==(const GaussianStats& o) const {
    return dim == o.dim && class_ids == o.class_ids && means == o.means &&
           covariance.raw() == o.covariance.raw() && epsilon == o.epsilon &&
           sample_count == o.sample_count && train_score_mean == o.train_score_mean &&
           train_score_std == o.train_score_std;
}

} // namespace mocsim
