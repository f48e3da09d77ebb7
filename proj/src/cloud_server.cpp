#include "mocsim/cloud_server.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mocsim/prng.hpp"

namespace mocsim {

const char* queue_level_name(QueueLevel level) {
    switch (level) {
        case QueueLevel::High: return "high";
        case QueueLevel::Mid: return "mid";
        case QueueLevel::Low: return "low";
    }
    return "?";
}

CloudServer::CloudServer(CloudConfig cfg, const World* world, TaxonomyTree tree,
                         std::map<SemanticPath, ExpertModel> model_db, Scheduler* sched,
                         EventLog* log, SendFn send)
    : cfg_(std::move(cfg)),
      world_(world),
      log_(log),
      sched_(sched),
      send_(std::move(send)),
      tree_(std::move(tree)),
      db_(std::move(model_db)) {
    for (const auto& [path, model] : db_)
        if (!tree_.contains(path) || !tree_.model_present(path))
            throw std::invalid_argument("model database disagrees with taxonomy: " +
                                        path.to_string());
}

size_t CloudServer::pool_count(const SemanticPath& leaf) const {
    auto it = pools_.find(leaf);
    return it == pools_.end() ? 0 : it->second.size();
}

std::vector<uint64_t> CloudServer::pool_ids(const SemanticPath& leaf) const {
    auto it = pools_.find(leaf);
    if (it == pools_.end()) return {};
    return {it->second.begin(), it->second.end()};
}

std::optional<SemanticPath> CloudServer::running_domain() const {
    if (!running_) return std::nullopt;
    return running_->task.domain;
}

std::optional<SemanticPath> CloudServer::last_confirmed(size_t device) const {
    auto it = last_confirmed_.find(device);
    if (it == last_confirmed_.end()) return std::nullopt;
    return it->second;
}

size_t CloudServer::assign_device_id() { return ++next_device_id_; }

bool CloudServer::domain_active(const SemanticPath& domain, int64_t at_window) const {
    auto it = reports_.find(domain);
    if (it == reports_.end()) return false;
    const int64_t oldest = at_window - static_cast<int64_t>(cfg_.active_horizon_windows) + 1;
    for (const Report& r : it->second)
        if (r.window >= oldest) return true;
    return false;
}

double CloudServer::mid_key(const SemanticPath& domain, int64_t at_window) const {
    auto it = reports_.find(domain);
    double key = std::numeric_limits<double>::infinity();
    if (it == reports_.end()) return key;
    const int64_t oldest = at_window - static_cast<int64_t>(cfg_.active_horizon_windows) + 1;
    for (const Report& r : it->second)
        if (r.window >= oldest) key = std::min(key, r.accuracy);
    return key;
}

QueueLevel CloudServer::classify(const SemanticPath& domain, int64_t at_window) const {
    if (domain.layer() != tree_.schema().depth()) return QueueLevel::Low; // non-leaf
    if (!domain_active(domain, at_window)) return QueueLevel::Low;
    const bool seen = tree_.contains(domain) && tree_.model_present(domain);
    return seen ? QueueLevel::Mid : QueueLevel::High;
}

void CloudServer::on_message(double now, size_t device, const WireMessage& msg) {
    if (std::holds_alternative<Hello>(msg.payload)) {
        WireMessage ack;
        ack.device_id = msg.device_id;
        ack.payload = Hello{};
        send_(now, device, ack);
        return;
    }
    if (const auto* up = std::get_if<FrameBatchUpload>(&msg.payload)) {
        handle_upload(now, device, *up);
        return;
    }
    if (const auto* req = std::get_if<ModelRequest>(&msg.payload)) {
        handle_request(now, device, *req);
        return;
    }
    if (const auto* notice = std::get_if<RetrainNotice>(&msg.payload)) {
        handle_notice(now, device, *notice);
        return;
    }
    if (const auto* report = std::get_if<WindowReport>(&msg.payload)) {
        handle_report(now, device, *report);
        return;
    }
    auto& r = log_->append(now, EventKind::ProtocolError);
    r.detail = "unexpected-message-at-cloud";
}

void CloudServer::handle_upload(double now, size_t device, const FrameBatchUpload& up) {
    const auto& domains = world_->domains();
    if (up.truth_handle >= domains.size() || up.frame_count == 0) {
        auto& r = log_->append(now, EventKind::ProtocolError);
        r.detail = "malformed-frame-batch";
        return;
    }
    const SemanticPath true_domain = domains[up.truth_handle].path;
    const uint64_t w = up.window_id;

    const LabeledSamples batch = world_->sample_features(
        true_domain, up.frame_count,
        mix_keys({cfg_.seed, kStreamUpload, device, w}), world_->config().window_spread);
    const std::vector<uint16_t> labels =
        world_->annotate(batch.labels, mix_keys({cfg_.seed, kStreamAnnotate, device, w}));
    const SemanticPath verdict_domain = world_->discriminate_domain(
        true_domain, mix_keys({cfg_.seed, kStreamDiscriminate, device, w}));

    // labeled samples land in the discriminated domain's pool, oldest dropped at cap
    auto& pool = pools_[verdict_domain];
    for (uint16_t i = 0; i < up.frame_count; ++i) {
        pool.push_back(next_sample_id_++);
        if (pool.size() > cfg_.pool_cap) pool.pop_front();
    }

    auto& confirmed_slot = last_confirmed_[device];
    const bool confirmed = !confirmed_slot || *confirmed_slot != verdict_domain;
    if (confirmed) confirmed_slot = verdict_domain;

    const double verdict_delay =
        std::max(cfg_.fm_s_per_frame * static_cast<double>(cfg_.fm_frames_per_batch),
                 cfg_.annotate_s_per_frame * static_cast<double>(up.frame_count));
    const double reply_t = now + verdict_delay;

    WireMessage verdict;
    verdict.device_id = device + 1;
    verdict.payload = DomainVerdict{confirmed, verdict_domain, labels};
    sched_->call_at(reply_t, [this, reply_t, device, verdict]() {
        send_(reply_t, device, verdict);
    });

    if (confirmed && cfg_.traits.cloud_auto_dispatch) {
        std::vector<double> centroid;
        if (cfg_.traits.centroid_selection && !batch.features.empty()) {
            centroid.assign(batch.features[0].size(), 0.0);
            for (const auto& f : batch.features)
                for (size_t i = 0; i < f.size(); ++i) centroid[i] += f[i];
            for (double& c : centroid) c /= static_cast<double>(batch.features.size());
        }
        const ExpertModel* pick = select_for(verdict_domain, centroid);
        if (pick) {
            const ExpertModel model = *pick;
            sched_->call_at(reply_t, [this, reply_t, device, model]() {
                dispatch_model(reply_t, device, model);
            });
        }
    }
}

const ExpertModel* CloudServer::select_for(const SemanticPath& domain,
                                           const std::vector<double>& centroid) const {
    if (db_.empty()) return nullptr;
    if (cfg_.traits.centroid_selection && !centroid.empty()) {
        const ExpertModel* best = nullptr;
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& [path, model] : db_) {
            if (model.stats.means.empty()) continue;
            std::vector<double> mean(model.stats.dim, 0.0);
            for (const auto& m : model.stats.means)
                for (size_t i = 0; i < m.size(); ++i) mean[i] += m[i];
            for (double& v : mean) v /= static_cast<double>(model.stats.means.size());
            double d2 = 0.0;
            for (size_t i = 0; i < mean.size() && i < centroid.size(); ++i) {
                const double diff = mean[i] - centroid[i];
                d2 += diff * diff;
            }
            if (d2 < best_d) {
                best_d = d2;
                best = &model;
            }
        }
        return best;
    }
    TaxonomyTree scratch = tree_;
    if (!scratch.contains(domain)) scratch.insert_domain(domain);
    std::vector<SemanticPath> candidates;
    candidates.reserve(db_.size());
    for (const auto& [path, model] : db_) candidates.push_back(path);
    const auto ranked = scratch.rank_candidates(domain, candidates);
    return &db_.at(ranked.front().path);
}

void CloudServer::handle_request(double now, size_t device, const ModelRequest& req) {
    auto it = db_.find(req.domain);
    if (it == db_.end()) {
        send_nack(now, device, req.domain);
        return;
    }
    dispatch_model(now, device, it->second);
}

void CloudServer::handle_notice(double now, size_t device, const RetrainNotice& notice) {
    auto it = db_.find(notice.domain);
    if (it != db_.end() && it->second.version > notice.known_version) {
        dispatch_model(now, device, it->second); // already trained since the device last heard
        return;
    }
    requesters_[notice.domain].insert(device);
}

void CloudServer::handle_report(double, size_t, const WindowReport& report) {
    auto& window_reports = reports_[report.domain];
    window_reports.push_back(Report{static_cast<int64_t>(report.window_id), report.accuracy});
    const int64_t prune_before =
        static_cast<int64_t>(report.window_id) - 2 * static_cast<int64_t>(cfg_.active_horizon_windows);
    while (!window_reports.empty() && window_reports.front().window < prune_before)
        window_reports.pop_front();
}

void CloudServer::dispatch_model(double now, size_t device, const ExpertModel& model) {
    WireMessage msg;
    msg.device_id = device + 1;
    msg.payload = ModelDispatch{model};
    send_(now, device, msg);
}

void CloudServer::send_nack(double now, size_t device, const SemanticPath& path) {
    ExpertModel none;
    none.home = path;
    none.version = 0;
    none.quality = 0.0;
    none.weight_bytes = 0;
    WireMessage msg;
    msg.device_id = device + 1;
    msg.payload = ModelDispatch{none};
    send_(now, device, msg);
}

void CloudServer::on_window_boundary(double now, int64_t closing_window) {
    window_ = closing_window;
    maybe_trigger_retrain(now);
    reclassify_pending(now);
    if (!running_) start_next(now);
}

std::vector<SemanticPath> CloudServer::subtree_leaf_pools(const SemanticPath& node) const {
    std::vector<SemanticPath> leaves;
    for (const auto& [leaf, pool] : pools_)
        if (!pool.empty() && node.is_prefix_of(leaf) && leaf != node) leaves.push_back(leaf);
    return leaves;
}

void CloudServer::maybe_trigger_retrain(double now) {
    const auto has_task = [&](const SemanticPath& d) {
        if (running_ && running_->task.domain == d) return true;
        for (const auto& t : pending_)
            if (t.domain == d) return true;
        return false;
    };
    const auto enqueue = [&](const SemanticPath& d) {
        RetrainTask task;
        task.id = next_task_id_++;
        task.domain = d;
        task.level = classify(d, window_);
        task.enqueue_t = now;
        task.enqueue_order = enqueue_counter_++;
        task.accuracy_key = task.level == QueueLevel::Mid
                                ? mid_key(d, window_)
                                : std::numeric_limits<double>::quiet_NaN();
        auto& r = log_->append(now, EventKind::TaskEnqueued);
        r.domain = d;
        r.task = task.id;
        r.detail = queue_level_name(task.level);
        if (task.level == QueueLevel::Mid) r.value = task.accuracy_key;
        r.window = window_;
        pending_.push_back(std::move(task));
    };

    // leaf pools crossing the threshold
    for (const auto& [leaf, pool] : pools_)
        if (pool.size() >= cfg_.retrain_min && !has_task(leaf)) enqueue(leaf);

    // interior nodes: at least two child subtrees with data, balanced draw big enough
    std::set<SemanticPath> interiors;
    for (const auto& [leaf, pool] : pools_) {
        if (pool.empty()) continue;
        for (SemanticPath p = leaf.parent(); p.layer() >= 1; p = p.parent())
            interiors.insert(p);
    }
    for (const auto& node : interiors) {
        if (has_task(node)) continue;
        std::map<std::string, size_t> by_child;
        for (const auto& leaf : subtree_leaf_pools(node))
            by_child[leaf.values[node.layer()]] += pool_count(leaf);
        if (by_child.size() < 2) continue;
        size_t min_c = std::numeric_limits<size_t>::max();
        for (const auto& [child, count] : by_child) min_c = std::min(min_c, count);
        if (by_child.size() * min_c >= cfg_.retrain_min) enqueue(node);
    }
}

void CloudServer::reclassify_pending(double now) {
    for (auto& task : pending_) {
        const QueueLevel level = classify(task.domain, window_);
        const double key = level == QueueLevel::Mid
                               ? mid_key(task.domain, window_)
                               : std::numeric_limits<double>::quiet_NaN();
        const bool level_changed = level != task.level;
        const bool key_changed =
            (key == key) != (task.accuracy_key == task.accuracy_key) ||
            ((key == key) && key != task.accuracy_key);
        if (!level_changed && !key_changed) continue;
        task.level = level;
        task.accuracy_key = key;
        auto& r = log_->append(now, EventKind::TaskReclassified);
        r.domain = task.domain;
        r.task = task.id;
        r.detail = queue_level_name(level);
        if (key == key) r.value = key;
        r.window = window_;
    }
}

void CloudServer::start_next(double now) {
    while (!running_ && !pending_.empty()) {
        size_t pick = pending_.size();
        if (cfg_.mlq) {
            auto better = [&](const RetrainTask& a, const RetrainTask& b) {
                if (a.level != b.level) return static_cast<int>(a.level) < static_cast<int>(b.level);
                if (a.level == QueueLevel::Mid && a.accuracy_key != b.accuracy_key)
                    return a.accuracy_key < b.accuracy_key;
                return a.enqueue_order < b.enqueue_order;
            };
            for (size_t i = 0; i < pending_.size(); ++i)
                if (pick == pending_.size() || better(pending_[i], pending_[pick])) pick = i;
        } else {
            for (size_t i = 0; i < pending_.size(); ++i)
                if (pick == pending_.size() ||
                    pending_[i].enqueue_order < pending_[pick].enqueue_order)
                    pick = i;
        }
        RetrainTask task = pending_[pick];
        pending_.erase(pending_.begin() + static_cast<long>(pick));

        // the pool may have been consumed by another task while this one waited
        bool enough = false;
        if (task.domain.layer() == tree_.schema().depth()) {
            enough = pool_count(task.domain) >= cfg_.retrain_min;
        } else {
            std::map<std::string, size_t> by_child;
            for (const auto& leaf : subtree_leaf_pools(task.domain))
                by_child[leaf.values[task.domain.layer()]] += pool_count(leaf);
            if (by_child.size() >= 2) {
                size_t min_c = std::numeric_limits<size_t>::max();
                for (const auto& [child, count] : by_child) min_c = std::min(min_c, count);
                enough = by_child.size() * min_c >= cfg_.retrain_min;
            }
        }
        if (!enough) {
            auto& r = log_->append(now, EventKind::TaskAborted);
            r.domain = task.domain;
            r.task = task.id;
            r.detail = "pool-drained";
            r.window = window_;
            continue;
        }

        auto& r = log_->append(now, EventKind::TaskStarted);
        r.domain = task.domain;
        r.task = task.id;
        r.detail = queue_level_name(task.level);
        if (task.level == QueueLevel::Mid) r.value = task.accuracy_key;
        r.window = window_;
        running_ = Running{task};
        const double done_at = now + cfg_.retrain_s;
        sched_->call_at(done_at, [this, done_at, task]() { finish_retrain(done_at, task); });
    }
}

void CloudServer::finish_retrain(double now, RetrainTask task) {
    std::vector<SemanticPath> contributed;
    if (task.domain.layer() == tree_.schema().depth()) {
        if (pool_count(task.domain) > 0) {
            contributed.push_back(task.domain);
            pools_[task.domain].clear();
        }
    } else {
        // balanced draw: the minimum subtree count from each child, oldest first
        std::map<std::string, std::vector<SemanticPath>> children;
        for (const auto& leaf : subtree_leaf_pools(task.domain))
            children[leaf.values[task.domain.layer()]].push_back(leaf);
        size_t min_c = std::numeric_limits<size_t>::max();
        for (const auto& [child, leaves] : children) {
            size_t total = 0;
            for (const auto& leaf : leaves) total += pool_count(leaf);
            min_c = std::min(min_c, total);
        }
        if (children.size() >= 2 && min_c > 0) {
            std::set<SemanticPath> used;
            for (auto& [child, leaves] : children) {
                for (size_t taken = 0; taken < min_c; ++taken) {
                    SemanticPath oldest;
                    uint64_t oldest_id = std::numeric_limits<uint64_t>::max();
                    for (const auto& leaf : leaves) {
                        const auto& pool = pools_[leaf];
                        if (!pool.empty() && pool.front() < oldest_id) {
                            oldest_id = pool.front();
                            oldest = leaf;
                        }
                    }
                    if (oldest_id == std::numeric_limits<uint64_t>::max()) break;
                    pools_[oldest].pop_front();
                    used.insert(oldest);
                }
            }
            contributed.assign(used.begin(), used.end());
        }
    }

    if (contributed.empty()) {
        auto& r = log_->append(now, EventKind::TaskAborted);
        r.domain = task.domain;
        r.task = task.id;
        r.detail = "pool-drained";
        running_.reset();
        start_next(now);
        return;
    }

    const uint32_t prev = db_.count(task.domain) ? db_[task.domain].version : 0;
    const ExpertModel model = world_->retrain_result(task.domain, prev, contributed);
    db_[task.domain] = model;
    tree_.insert_domain(task.domain);
    tree_.set_model(task.domain, model.version);

    {
        auto& r = log_->append(now, EventKind::TaskCompleted);
        r.domain = task.domain;
        r.task = task.id;
        r.version = model.version;
        r.window = window_;
    }

    // everyone learns the new taxonomy; requesters get the weights immediately
    const TaxonomySync sync{tree_.encode_table()};
    for (size_t dev = 0; dev < cfg_.devices; ++dev) {
        WireMessage msg;
        msg.device_id = dev + 1;
        msg.payload = sync;
        send_(now, dev, msg);
    }
    auto rq = requesters_.find(task.domain);
    if (rq != requesters_.end()) {
        for (size_t dev : rq->second) dispatch_model(now, dev, model);
        requesters_.erase(rq);
    }

    running_.reset();
    start_next(now);
}

} // namespace mocsim
