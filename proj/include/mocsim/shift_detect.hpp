#ifndef MOCSIM_SHIFT_DETECT_H
#define MOCSIM_SHIFT_DETECT_H

#include <cstdint>
#include <map>
#include <vector>

#include "mocsim/linalg.hpp"

namespace mocsim {

/*
 * Feature-space distribution summary used for out-of-distribution detection.
 *
 * Fitting estimates one mean per class plus a single covariance shared by
 * all classes (within-class scatter pooled over the whole fit set, divided
 * by the total sample count).  A sample is scored by its smallest squared
 * Mahalanobis distance to any class mean, negated:
 *
 *     S(x) = max_c -(x - mu_c)' inv(Sigma + eps I) (x - mu_c)
 *
 * so scores are always <= 0 and a class mean scores exactly 0.  A window of
 * samples is summarized by its mean score; the alarm threshold is derived
 * from the score distribution of the fit set itself.
 */
struct GaussianStats {
    size_t dim = 0;
    std::vector<uint16_t> class_ids;          // sorted, parallel to means
    std::vector<std::vector<double>> means;   // one per class
    Matrix covariance;                        // pooled, before regularization
    Matrix inverse;                           // inv(covariance + epsilon I)
    double epsilon = 0.0;
    size_t sample_count = 0;
    double train_score_mean = 0.0;            // mean of S(x) over the fit set
    double train_score_std = 0.0;             // population std of the same

    // serialized blob carried inside model dispatch payloads
    std::vector<uint8_t> encode() const;
    static GaussianStats decode(const std::vector<uint8_t>& bytes);

    bool operator==(const GaussianStats& o) const;
};

/*
 * Fit statistics from labeled samples.
 *
 * epsilon < 0 selects the default ridge 1e-6 * trace(Sigma) / dim; pass an
 * explicit value (including 0) to override.  Requires at least two samples
 * per present class and throws singular_matrix_error when the regularized
 * covariance cannot be inverted.
 */
GaussianStats fit_stats(const std::vector<std::vector<double>>& samples,
                        const std::vector<uint16_t>& labels, double epsilon = -1.0);

// negated squared Mahalanobis distance to the nearest class mean (always <= 0)
double score_sample(const GaussianStats& stats, const std::vector<double>& x);

// mean sample score over a window; the window must be non-empty
double score_window(const GaussianStats& stats,
                    const std::vector<std::vector<double>>& window);

// alarm threshold for sensitivity k: larger k => higher threshold => more alarms
inline double alarm_threshold(const GaussianStats& stats, double k) {
    return stats.train_score_mean + k * stats.train_score_std;
}

// true when the window score falls strictly below the threshold
inline bool detect_shift(const GaussianStats& stats, double window_score, double k) {
    return window_score < alarm_threshold(stats, k);
}

} // namespace mocsim

#endif // MOCSIM_SHIFT_DETECT_H
