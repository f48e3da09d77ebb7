#ifndef MOCSIM_MOBILE_AGENT_H
#define MOCSIM_MOBILE_AGENT_H

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mocsim/event_log.hpp"
#include "mocsim/runtime.hpp"
#include "mocsim/scenario.hpp"
#include "mocsim/taxonomy.hpp"
#include "mocsim/wire.hpp"
#include "mocsim/world.hpp"

namespace mocsim {

/*
 * Per-device state machine.
 *
 * Life is a sequence of fixed-length inference windows.  At each window
 * boundary the agent finalizes the closing window's accuracy, reports it,
 * runs the onboard shift detector, launches any scheduled fine-tune, and
 * issues background prefetches.  An alarm moves the agent from regular
 * inference into the potential-shift state: it uploads a subsampled frame
 * batch and waits for the cloud's verdict.  A confirmed verdict triggers
 * reuse selection over the cached models and the synced taxonomy; a miss
 * additionally requests the globally optimal model from the cloud.
 * Inference never pauses: the deployed model keeps serving through every
 * adaptation step, swapped only when a load or transfer completes.
 */

enum class AgentMode { RegularInference, PotentialShift };

struct AgentConfig {
    size_t device_id = 0;
    VariantTraits traits;
    uint64_t seed = 1;
    double window_s = 30.0;
    double detector_k = 0.4;
    double accuracy_threshold = 0.35;
    size_t cache_slots = 3;
    size_t upload_frames_per_window = 30;
    size_t detector_samples = 30;
    size_t eval_samples = 20;
    size_t ft_min_samples = 30;
    uint64_t ft_iterations = 100;
    double onboard_load_s = 0.47;
    double finetune_s = 120.0;
    bool prefetch = true;
    uint64_t bytes_per_frame = 65536;
    std::optional<std::pair<int64_t, int64_t>> offline; // [from,to) window span
};

struct CacheEntry {
    ExpertModel model;
    std::optional<FinetuneState> ft; // onboard adapter, travels with the slot
    double last_used = 0.0;
};

class MobileAgent {
public:
    using SendFn = std::function<void(double now, const WireMessage&)>;

    MobileAgent(AgentConfig cfg, const World* world, std::vector<TraceEntry> trace,
                TaxonomyTree snapshot, ExpertModel initial_model, Scheduler* sched,
                EventLog* log, SendFn send);

    // begin serving at t0 with the provisioned model
    void start(double t0);

    // `closing_window` just ended at `now`
    void on_window_boundary(double now, int64_t closing_window);

    // a cloud frame arrived on the downlink
    void on_message(double now, const WireMessage& msg);

    // observation points (tests and harness)
    AgentMode mode() const { return mode_; }
    const SemanticPath& active_domain() const { return active_domain_; }
    const std::vector<CacheEntry>& cache() const { return cache_; }
    const ExpertModel& deployed() const;
    const TaxonomyTree& snapshot() const { return snapshot_; }
    double current_accuracy() const { return current_acc_; }
    SemanticPath domain_for_window(int64_t w) const;
    bool awaiting_verdict() const { return awaiting_verdict_; }

private:
    struct ModelKey {
        SemanticPath home;
        uint32_t version = 0;
        bool operator==(const ModelKey& o) const {
            return home == o.home && version == o.version;
        }
    };
    struct PendingRequest {
        SemanticPath path;
        bool prefetch = false;
    };

    bool offline_in(int64_t window) const;
    size_t cache_find(const ModelKey& key) const; // cache_.size() when absent
    CacheEntry& deployed_entry();
    const CacheEntry& deployed_entry() const;
    void touch_accuracy(double now);   // close the running accuracy segment
    void refresh_accuracy(double now); // segment boundary: recompute rate
    void run_detection(double now, int64_t window);
    void send_upload(double now, int64_t window);
    void resolve_shift(double now, const SemanticPath& target,
                       const std::vector<uint16_t>& labels);
    void request_retrain(double now, const SemanticPath& target);
    void deploy_resident(double now, const ModelKey& key, const char* how);
    void deploy_arrival(double now, const ExpertModel& model, const char* how);
    void activate(double now, const ExpertModel& model, EventKind kind, const std::string& how);
    void post_deploy_check(double now);
    void cache_insert(double now, const ExpertModel& model, bool protect_previous,
                      const char* how);
    void start_fine_tune(double now);
    void maybe_issue_prefetch(double now);

    AgentConfig cfg_;
    const World* world_;
    EventLog* log_;
    Scheduler* sched_;
    SendFn send_;

    std::vector<TraceEntry> trace_;
    std::vector<int64_t> trace_starts_; // window index where each entry begins

    TaxonomyTree snapshot_;
    std::vector<CacheEntry> cache_;
    ModelKey deployed_key_;
    SemanticPath previous_home_; // just-unloaded model, protected from eviction

    AgentMode mode_ = AgentMode::RegularInference;
    bool awaiting_verdict_ = false;
    SemanticPath active_domain_;
    int64_t current_window_ = 0;

    double current_acc_ = 0.0;
    double seg_start_ = 0.0;
    double acc_accum_ = 0.0;

    std::map<SemanticPath, size_t> labels_for_; // cloud-annotated samples per domain
    std::optional<SemanticPath> pending_ft_;    // armed post-reuse, starts at boundary
    struct RunningFt {
        ModelKey model;
        SemanticPath target;
    };
    std::optional<RunningFt> running_ft_;

    std::deque<PendingRequest> outstanding_;
    std::set<SemanticPath> awaiting_retrain_;
    bool prefetch_armed_ = false;
    std::optional<SemanticPath> prefetch_inflight_;
    bool prefetch_cancelled_ = false;
};

} // namespace mocsim

#endif // MOCSIM_MOBILE_AGENT_H
