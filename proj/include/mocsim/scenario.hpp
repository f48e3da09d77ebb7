#ifndef MOCSIM_SCENARIO_H
#define MOCSIM_SCENARIO_H

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mocsim/link.hpp"
#include "mocsim/taxonomy.hpp"
#include "mocsim/world.hpp"

namespace mocsim {

/*
 * Full description of one simulated deployment: the semantic schema, the
 * synthetic world, device behaviour, cloud behaviour, link shaping and the
 * run parameters.  Serializable to/from JSON so scenarios can live in
 * files; every field has a default, so a config file only lists overrides.
 */

enum class Variant {
    Mocha,            // full system: detect, cache reuse, fine-tune, retrain, MLQ
    NoAdapt,          // static model, no detection, no adaptation
    CloudReuseOnly,   // continuous upload, cloud-side select + dispatch, FIFO retrain
    CloudRetrainOnly, // onboard detect, adaptation only by cloud retraining, FIFO
    EmbeddingReuse,   // like CloudReuseOnly but nearest-feature-centroid selection
    MochaNoFT,        // ablation: fine-tuning disabled
    MochaNoCache,     // ablation: no model cache beyond the deployed slot
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// behaviour switches implied by a variant
struct VariantTraits {
    bool adapt = true;             // false: ignore shifts entirely
    bool onboard_detect = true;    // run the window detector on-device
    bool continuous_upload = false; // upload every window, detection on the cloud
    bool reuse = true;             // apply cached/dispatched models on shift
    bool use_cache = true;         // keep a multi-slot cache + prefetch
    bool fine_tune = true;
    bool cloud_auto_dispatch = false; // cloud picks + pushes a model on confirm
    bool centroid_selection = false;  // cloud selection by feature centroid
    bool retrain_on_every_shift = false; // request retraining for each confirmed shift
    bool mlq_default = true;       // default scheduler policy for the variant
};

VariantTraits variant_traits(Variant v);

struct ScenarioConfig {
    // semantic space and synthetic world
    TaxonomySchema schema;
    std::vector<DomainSpec> domains;
    WorldConfig world;
    TraceConfig trace;

    // transport
    LinkModel link;
    uint64_t bytes_per_frame = 65536;

    // device agent
    double window_s = 30.0;
    double detector_k = 0.4;
    double accuracy_threshold = 0.35; // post-reuse fine-tune trigger
    size_t cache_slots = 3;          // total resident models incl. deployed
    size_t upload_frames_per_window = 30; // 1 frame/s equivalent
    size_t detector_samples = 30;    // features scored per window
    size_t eval_samples = 20;        // labeled subset for post-reuse evaluation
    size_t ft_min_samples = 30;      // labeled samples needed to start fine-tune
    uint64_t ft_iterations = 100;
    double onboard_load_s = 0.47;
    double finetune_s = 120.0;
    bool prefetch = true;

    // cloud
    double retrain_s = 160.0;
    size_t pool_cap = 1000;
    size_t retrain_min = 600;
    uint32_t active_horizon_windows = 2;
    double fm_s_per_frame = 0.5;
    size_t fm_frames_per_batch = 1; // frames the discriminator actually reads
    double annotate_s_per_frame = 0.05;
    std::optional<bool> mlq_override; // unset: use the variant's default policy

    // run
    size_t devices = 4;
    size_t duration_windows = 200;
    uint64_t seed = 1;
    Variant variant = Variant::Mocha;

    // metrics
    uint32_t recovery_horizon_windows = 6; // fixed fallback horizon
    bool anchored_horizons = true; // derive per-shift horizons from a
                                   // CloudRetrainOnly run on the same trace

    // optional per-device radio silence interval [from, to) in windows
    std::map<int64_t, std::pair<int64_t, int64_t>> offline_windows;

    // socket transport: wall seconds per simulated second, listening port
    double socket_time_scale = 0.01;
    uint16_t socket_port = 45617;

    bool mlq_enabled() const {
        return mlq_override ? *mlq_override : variant_traits(variant).mlq_default;
    }

    std::string to_json() const;
    static ScenarioConfig from_json(const std::string& text);
    static ScenarioConfig load_file(const std::string& path);

    // returns human-readable problems; empty means the config is usable
    std::vector<std::string> validate() const;
};

// the stock 12-leaf scenario: 3 locations x 2 weathers x 2 daytimes,
// 8 domains pretrained, 4 initially unseen
ScenarioConfig default_scenario();

// stress trace for cache experiments: rapid shifts between pretrained domains
ScenarioConfig high_shift_scenario();

} // namespace mocsim

#endif // MOCSIM_SCENARIO_H
