#include "mocsim/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mocsim/prng.hpp"

namespace mocsim {

namespace {

uint64_t path_key(const SemanticPath& p) {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (const auto& v : p.values) h = mix_keys({h, hash_str(v.data(), v.size())});
    return h;
}

constexpr uint64_t kPurposeGeometry = 0x67656f6dull;  // per-level offsets
constexpr uint64_t kPurposeClass = 0x636c6173ull;     // class directions
constexpr uint64_t kPurposeSample = 0x73616d70ull;
constexpr uint64_t kPurposeFit = 0x66697474ull;
constexpr uint64_t kPurposeLabel = 0x6c61626cull;
constexpr uint64_t kPurposeFm = 0x666d6469ull;
constexpr uint64_t kPurposeTrace = 0x74726163ull;

} // namespace

World::World(WorldConfig config, std::vector<DomainSpec> domains)
    : config_(std::move(config)), domains_(std::move(domains)) {
    if (domains_.empty()) throw std::invalid_argument("world needs at least one domain");
    for (size_t i = 0; i < domains_.size(); ++i) {
        const auto& d = domains_[i];
        if (!domain_index_.emplace(d.path, i).second)
            throw std::invalid_argument("duplicate domain " + d.path.to_string());
        tree_.insert_domain(d.path);
    }
    // the listed domains are the world's leaves; keep them in sorted order
    for (const auto& [path, idx] : domain_index_) leaves_.push_back(path);
    for (const auto& d : domains_)
        if (d.path.layer() != leaves_.front().layer())
            throw std::invalid_argument("world domains must share one depth");
}

const DomainSpec& World::domain(const SemanticPath& path) const {
    auto it = domain_index_.find(path);
    if (it == domain_index_.end())
        throw std::out_of_range("unknown world domain " + path.to_string());
    return domains_[it->second];
}

/*
 * Hierarchical embedding: each prefix of the path contributes an offset
 * vector whose scale shrinks with depth.  Two leaves sharing a longer
 * prefix therefore share more of their center, i.e. semantic distance and
 * feature distance agree in expectation.
 */
std::vector<double> World::domain_mean(const SemanticPath& path) const {
    std::vector<double> mean(config_.feature_dim, 0.0);
    SemanticPath prefix;
    for (size_t level = 0; level < path.layer(); ++level) {
        prefix.values.push_back(path.values[level]);
        const double scale = level < config_.level_scales.size()
                                 ? config_.level_scales[level]
                                 : config_.level_scales.empty() ? 1.0 : config_.level_scales.back();
        Rng rng(mix_keys({config_.seed, kPurposeGeometry, path_key(prefix)}));
        const double per_coord = scale / std::sqrt(static_cast<double>(config_.feature_dim));
        for (size_t d = 0; d < config_.feature_dim; ++d)
            mean[d] += per_coord * rng.next_normal();
    }
    return mean;
}

std::vector<double> World::class_mean(const SemanticPath& path, uint16_t cls) const {
    std::vector<double> mean = domain_mean(path);
    // class geometry is shared across domains: one global direction per class
    Rng rng(mix_keys({config_.seed, kPurposeClass, cls}));
    const double per_coord =
        config_.class_offset / std::sqrt(static_cast<double>(config_.feature_dim));
    for (size_t d = 0; d < config_.feature_dim; ++d) mean[d] += per_coord * rng.next_normal();
    return mean;
}

LabeledSamples World::sample_features(const SemanticPath& domain, size_t count,
                                      uint64_t stream_key, double spread) const {
    LabeledSamples out;
    out.features.reserve(count);
    out.labels.reserve(count);
    Rng rng(mix_keys({config_.seed, kPurposeSample, path_key(domain), stream_key}));
    std::vector<std::vector<double>> class_means;
    for (uint16_t c = 0; c < config_.classes_per_domain; ++c)
        class_means.push_back(class_mean(domain, c));
    const double sigma = config_.noise_scale * spread;
    for (size_t i = 0; i < count; ++i) {
        const auto cls = static_cast<uint16_t>(rng.next_below(config_.classes_per_domain));
        std::vector<double> x = class_means[cls];
        for (size_t d = 0; d < config_.feature_dim; ++d) x[d] += sigma * rng.next_normal();
        out.features.push_back(std::move(x));
        out.labels.push_back(cls);
    }
    return out;
}

double World::peak_accuracy(const SemanticPath& dom) const {
    double difficulty = 0.0;
    auto it = domain_index_.find(dom);
    if (it != domain_index_.end()) difficulty = domains_[it->second].difficulty;
    return config_.accuracy.a_max - config_.accuracy.difficulty_weight * difficulty;
}

double World::oracle_accuracy(const ExpertModel& model, const SemanticPath& data_domain) const {
    const auto& acc = config_.accuracy;
    const double d = static_cast<double>(path_distance(model.home, data_domain));
    const double peak = peak_accuracy(data_domain);
    return model.quality * (acc.a_floor + (peak - acc.a_floor) * std::exp(-acc.beta * d));
}

double World::effective_accuracy(const ExpertModel& model,
                                 const std::optional<FinetuneState>& ft,
                                 const SemanticPath& data_domain) const {
    const double base = oracle_accuracy(model, data_domain);
    if (ft && ft->target == data_domain) return std::max(base, ft->acc_on_target);
    return base;
}

double World::finetune_result(const ExpertModel& model,
                              const std::optional<FinetuneState>& ft,
                              const SemanticPath& target, uint64_t iterations) const {
    const auto& acc = config_.accuracy;
    const double start = effective_accuracy(model, ft, target);
    const double limit = peak_accuracy(target) - acc.delta_ft;
    if (start >= limit) return start; // already past the fine-tune ceiling
    const double d = static_cast<double>(path_distance(model.home, target));
    const double rate = acc.lambda0 / (1.0 + d);
    return limit - (limit - start) * std::exp(-rate * static_cast<double>(iterations));
}

ExpertModel World::retrain_result(const SemanticPath& domain, uint32_t prev_version,
                                  const std::vector<SemanticPath>& sampled_leaves) const {
    ExpertModel m;
    m.home = domain;
    m.version = prev_version + 1;
    m.quality = 1.0;
    m.weight_bytes = config_.model_weight_bytes;

    // fit detector statistics on a balanced draw over the contributing leaves
    std::vector<SemanticPath> sources = sampled_leaves;
    if (sources.empty()) sources.push_back(domain);
    const size_t per_leaf = std::max<size_t>(config_.fit_samples / sources.size(),
                                             2 * config_.classes_per_domain);
    std::vector<std::vector<double>> feats;
    std::vector<uint16_t> labels;
    for (const auto& leaf : sources) {
        LabeledSamples s = sample_features(
            leaf, per_leaf, mix_keys({kPurposeFit, static_cast<uint64_t>(m.version)}), 1.0);
        for (auto& f : s.features) feats.push_back(std::move(f));
        labels.insert(labels.end(), s.labels.begin(), s.labels.end());
    }
    m.stats = fit_stats(feats, labels);
    return m;
}

std::vector<uint16_t> World::annotate(const std::vector<uint16_t>& true_labels,
                                      uint64_t stream_key) const {
    Rng rng(mix_keys({config_.seed, kPurposeLabel, stream_key}));
    std::vector<uint16_t> out;
    out.reserve(true_labels.size());
    const size_t classes = config_.classes_per_domain;
    for (uint16_t truth : true_labels) {
        if (classes > 1 && rng.next_bernoulli(config_.teacher_flip)) {
            // flip to a different class, uniform over the others
            auto wrong = static_cast<uint16_t>(rng.next_below(classes - 1));
            if (wrong >= truth) ++wrong;
            out.push_back(wrong);
        } else {
            out.push_back(truth);
        }
    }
    return out;
}

SemanticPath World::discriminate_domain(const SemanticPath& true_domain,
                                        uint64_t stream_key) const {
    Rng rng(mix_keys({config_.seed, kPurposeFm, stream_key}));
    if (!rng.next_bernoulli(config_.fm_error)) return true_domain;
    const auto neighbors = leaves_within(true_domain, 2, true);
    if (neighbors.empty()) return true_domain;
    return neighbors[rng.next_below(neighbors.size())];
}

std::vector<SemanticPath> World::leaves_within(const SemanticPath& from, size_t radius,
                                               bool exact) const {
    std::vector<SemanticPath> out;
    for (const auto& leaf : leaves_) {
        if (leaf == from) continue;
        const size_t d = path_distance(from, leaf);
        if (exact ? d == radius : d <= radius) out.push_back(leaf);
    }
    return out;
}

std::vector<TraceEntry> World::generate_trace(const TraceConfig& cfg,
                                              uint64_t stream_key) const {
    if (leaves_.size() < 2 && cfg.shifts > 0)
        throw std::invalid_argument("trace needs at least two leaf domains");
    if (cfg.dwell_min == 0 || cfg.dwell_max < cfg.dwell_min)
        throw std::invalid_argument("bad dwell bounds");
    Rng rng(mix_keys({config_.seed, kPurposeTrace, stream_key}));

    std::vector<TraceEntry> trace;
    auto dwell = [&]() {
        return cfg.dwell_min +
               static_cast<uint32_t>(rng.next_below(cfg.dwell_max - cfg.dwell_min + 1));
    };

    SemanticPath cur = leaves_[rng.next_below(leaves_.size())];
    trace.push_back(TraceEntry{cur, dwell()});
    for (size_t s = 0; s < cfg.shifts; ++s) {
        std::vector<SemanticPath> pool;
        if (rng.next_bernoulli(cfg.p_local)) pool = leaves_within(cur, cfg.local_radius, false);
        if (pool.empty()) pool = leaves_within(cur, SIZE_MAX, false); // all other leaves
        cur = pool[rng.next_below(pool.size())];
        trace.push_back(TraceEntry{cur, dwell()});
    }
    return trace;
}

} // namespace mocsim
