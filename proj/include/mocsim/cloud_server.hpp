#ifndef MOCSIM_CLOUD_SERVER_H
#define MOCSIM_CLOUD_SERVER_H

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
 * Cloud side: annotation + domain-verdict service over uploaded frame
 * batches, the per-domain data pools, the model database and taxonomy of
 * record, and a single-processor non-preemptive retraining pipeline fed by
 * a three-level queue:
 *
 *   High  active domains without a model yet          (FIFO)
 *   Mid   active domains with a model                 (ascending last accuracy)
 *   Low   inactive domains and non-leaf nodes         (FIFO)
 *
 * Lower queues drain only while the higher ones are empty.  A FIFO-only
 * ablation replaces the whole policy with global enqueue order.
 */

enum class QueueLevel { High, Mid, Low };
const char* queue_level_name(QueueLevel level);

struct RetrainTask {
    int64_t id = 0;
    SemanticPath domain;
    QueueLevel level = QueueLevel::Low;
    double enqueue_t = 0.0;
    int64_t enqueue_order = 0;
    double accuracy_key = 0.0; // Mid ordering key: min reported accuracy
};

struct CloudConfig {
    VariantTraits traits;
    uint64_t seed = 1;
    size_t devices = 1;
    double window_s = 30.0;
    double retrain_s = 160.0;
    size_t pool_cap = 1000;
    size_t retrain_min = 600;
    uint32_t active_horizon_windows = 2;
    double fm_s_per_frame = 0.5;
    size_t fm_frames_per_batch = 1;
    double annotate_s_per_frame = 0.05;
    bool mlq = true;
};

class CloudServer {
public:
    using SendFn = std::function<void(double now, size_t device, const WireMessage&)>;

    CloudServer(CloudConfig cfg, const World* world, TaxonomyTree tree,
                std::map<SemanticPath, ExpertModel> model_db, Scheduler* sched,
                EventLog* log, SendFn send);

    void on_message(double now, size_t device, const WireMessage& msg);
    void on_window_boundary(double now, int64_t closing_window);

    // observation points (tests and harness)
    const TaxonomyTree& tree() const { return tree_; }
    const std::map<SemanticPath, ExpertModel>& model_db() const { return db_; }
    size_t pool_count(const SemanticPath& leaf) const;
    std::vector<uint64_t> pool_ids(const SemanticPath& leaf) const;
    const std::vector<RetrainTask>& pending_tasks() const { return pending_; }
    bool retraining() const { return running_.has_value(); }
    std::optional<SemanticPath> running_domain() const;
    std::optional<SemanticPath> last_confirmed(size_t device) const;
    QueueLevel classify(const SemanticPath& domain, int64_t at_window) const;
    size_t assign_device_id(); // hello handshake (socket transport)

private:
    struct Report {
        int64_t window = 0;
        double accuracy = 0.0;
    };
    struct Running {
        RetrainTask task;
    };

    bool domain_active(const SemanticPath& domain, int64_t at_window) const;
    double mid_key(const SemanticPath& domain, int64_t at_window) const;
    void handle_upload(double now, size_t device, const FrameBatchUpload& up);
    void handle_request(double now, size_t device, const ModelRequest& req);
    void handle_notice(double now, size_t device, const RetrainNotice& notice);
    void handle_report(double now, size_t device, const WindowReport& report);
    void dispatch_model(double now, size_t device, const ExpertModel& model);
    void send_nack(double now, size_t device, const SemanticPath& path);
    void maybe_trigger_retrain(double now);
    void reclassify_pending(double now);
    void start_next(double now);
    void finish_retrain(double now, RetrainTask task);
    std::vector<SemanticPath> subtree_leaf_pools(const SemanticPath& node) const;
    const ExpertModel* select_for(const SemanticPath& domain,
                                  const std::vector<double>& centroid) const;

    CloudConfig cfg_;
    const World* world_;
    EventLog* log_;
    Scheduler* sched_;
    SendFn send_;

    TaxonomyTree tree_;
    std::map<SemanticPath, ExpertModel> db_;
    std::map<SemanticPath, std::deque<uint64_t>> pools_;
    uint64_t next_sample_id_ = 0;

    std::map<size_t, std::optional<SemanticPath>> last_confirmed_;
    std::map<SemanticPath, std::deque<Report>> reports_;
    std::map<SemanticPath, std::set<size_t>> requesters_;

    std::vector<RetrainTask> pending_;
    std::optional<Running> running_;
    int64_t next_task_id_ = 0;
    int64_t enqueue_counter_ = 0;
    int64_t window_ = 0; // most recently closed window boundary

    // children of each interior node that had contributed data at its last retrain
    std::map<SemanticPath, std::set<std::string>> trained_children_;
    size_t next_device_id_ = 0;
};

} // namespace mocsim

#endif // MOCSIM_CLOUD_SERVER_H
