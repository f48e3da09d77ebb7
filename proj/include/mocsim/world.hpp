#ifndef MOCSIM_WORLD_H
#define MOCSIM_WORLD_H

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mocsim/shift_detect.hpp"
#include "mocsim/taxonomy.hpp"

namespace mocsim {

/*
 * Synthetic ground truth.
 *
 * The world replaces real video, real DNNs and real labeling services with
 * a calibrated analytical stand-in:
 *
 *  - every domain owns a Gaussian cluster in feature space, embedded
 *    hierarchically so that semantically close domains are also close in
 *    feature space;
 *  - a model's true accuracy on a domain decays exponentially with the
 *    taxonomy hop distance between its home domain and the data domain;
 *  - fine-tuning approaches (but never reaches) retrained accuracy, faster
 *    when the start domain is closer;
 *  - labeling (teacher) and domain discrimination (foundation-model) are
 *    noisy oracles with configurable error rates.
 *
 * Every stochastic draw is keyed by (world seed, purpose, identifiers), so
 * equal configurations replay identically.
 */

struct ExpertModel {
    SemanticPath home;       // domain the weights were trained on
    uint32_t version = 0;
    double quality = 1.0;    // fraction of fully-retrained accuracy achieved
    uint64_t weight_bytes = 0;
    GaussianStats stats;     // feature statistics captured at training time

    bool operator==(const ExpertModel& o) const {
        return home == o.home && version == o.version && quality == o.quality &&
               weight_bytes == o.weight_bytes && stats == o.stats;
    }
};

// local, transient fine-tune progress attached to one deployment
struct FinetuneState {
    SemanticPath target;
    double acc_on_target = 0.0;
};

struct AccuracyModel {
    double a_max = 0.6;      // peak accuracy, distance 0, quality 1
    double a_floor = 0.2;    // asymptote at large distance
    double beta = 0.35;      // exponential decay rate per hop
    double delta_ft = 0.05;  // fine-tune gap below retrained accuracy
    double lambda0 = 0.05;   // fine-tune convergence rate per iteration at d=0
    double difficulty_weight = 0.1;
};

struct WorldConfig {
    uint64_t seed = 1;
    size_t feature_dim = 6;
    size_t classes_per_domain = 4;
    double class_offset = 3.0;             // class mean displacement scale
    std::vector<double> level_scales = {8.0, 4.0, 2.0}; // domain offset per tree layer
    double noise_scale = 1.0;              // within-class feature std
    double window_spread = 0.7;            // fraction of spread inside one window
    AccuracyModel accuracy;
    double teacher_flip = 0.05;            // annotation label error rate
    double fm_error = 0.05;                // discriminator error rate
    uint64_t model_weight_bytes = 14000000;
    size_t fit_samples = 400;              // samples drawn when (re)training stats
};

struct DomainSpec {
    SemanticPath path;
    double difficulty = 0.0; // [0,1]; shaves peak accuracy via difficulty_weight
    bool pretrained = false;
};

struct LabeledSamples {
    std::vector<std::vector<double>> features;
    std::vector<uint16_t> labels; // synthetic class ids
};

struct TraceEntry {
    SemanticPath domain;
    uint32_t dwell_windows = 1;
};

struct TraceConfig {
    size_t shifts = 20;          // number of domain changes after the start
    uint32_t dwell_min = 5;      // windows spent per domain
    uint32_t dwell_max = 9;
    double p_local = 0.7;        // probability the next domain is a near neighbor
    size_t local_radius = 2;     // hop distance counted as "near"
};

class World {
public:
    World(WorldConfig config, std::vector<DomainSpec> domains);

    const WorldConfig& config() const { return config_; }
    const TaxonomyTree& tree() const { return tree_; } // full ground-truth taxonomy
    const std::vector<DomainSpec>& domains() const { return domains_; }
    const DomainSpec& domain(const SemanticPath& path) const;

    // deterministic cluster center of a domain (hierarchical embedding)
    std::vector<double> domain_mean(const SemanticPath& path) const;
    std::vector<double> class_mean(const SemanticPath& path, uint16_t cls) const;

    /*
     * Draw labeled feature samples from a domain.  `spread` scales the
     * within-class noise: 1.0 for a training corpus, the configured
     * window_spread for a single inference window (a 30 s slice of one
     * scene shows far less diversity than a whole training set).
     */
    LabeledSamples sample_features(const SemanticPath& domain, size_t count,
                                   uint64_t stream_key, double spread = 1.0) const;

    // true accuracy of a model evaluated on data from a domain
    double oracle_accuracy(const ExpertModel& model, const SemanticPath& data_domain) const;

    // accuracy including any fine-tune overlay targeting the active domain
    double effective_accuracy(const ExpertModel& model,
                              const std::optional<FinetuneState>& ft,
                              const SemanticPath& data_domain) const;

    /*
     * Accuracy on `target` after `iterations` fine-tune steps starting from
     * the model's current effective accuracy there.  Approaches
     * (peak(target) - delta_ft) at rate lambda0 / (1 + start distance);
     * never decreases.
     */
    double finetune_result(const ExpertModel& model,
                           const std::optional<FinetuneState>& ft,
                           const SemanticPath& target, uint64_t iterations) const;

    /*
     * Produce a freshly retrained expert for a domain (leaf or interior
     * node).  Interior models are fitted on a balanced mixture over the
     * descendant leaves carrying data; both cases yield quality 1 and
     * version prev+1.  `sampled_leaves` lists the leaf domains whose pooled
     * data the retrain consumed (leaf retrains pass just the domain).
     */
    ExpertModel retrain_result(const SemanticPath& domain, uint32_t prev_version,
                               const std::vector<SemanticPath>& sampled_leaves) const;

    // noisy annotation: each true label flips to another class with
    // probability teacher_flip
    std::vector<uint16_t> annotate(const std::vector<uint16_t>& true_labels,
                                   uint64_t stream_key) const;

    // noisy domain discrimination: returns the true leaf with probability
    // 1 - fm_error, otherwise a uniformly chosen leaf at hop distance 2
    // (the true leaf when no such neighbor exists)
    SemanticPath discriminate_domain(const SemanticPath& true_domain,
                                     uint64_t stream_key) const;

    // random walk over leaf domains with locality; consecutive entries differ
    std::vector<TraceEntry> generate_trace(const TraceConfig& cfg, uint64_t stream_key) const;

    // leaves at exactly `radius` hops from `from`
    std::vector<SemanticPath> leaves_within(const SemanticPath& from, size_t radius,
                                            bool exact) const;

private:
    double peak_accuracy(const SemanticPath& domain) const;

    WorldConfig config_;
    std::vector<DomainSpec> domains_;
    std::map<SemanticPath, size_t> domain_index_;
    TaxonomyTree tree_;
    std::vector<SemanticPath> leaves_;
};

} // namespace mocsim

#endif // MOCSIM_WORLD_H
