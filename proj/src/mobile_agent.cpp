#include "mocsim/mobile_agent.hpp"

#include <algorithm>
#include <stdexcept>

#include "mocsim/prng.hpp"
#include "mocsim/shift_detect.hpp"

namespace mocsim {

MobileAgent::MobileAgent(AgentConfig cfg, const World* world, std::vector<TraceEntry> trace,
                         TaxonomyTree snapshot, ExpertModel initial_model, Scheduler* sched,
                         EventLog* log, SendFn send)
    : cfg_(std::move(cfg)),
      world_(world),
      log_(log),
      sched_(sched),
      send_(std::move(send)),
      trace_(std::move(trace)),
      snapshot_(std::move(snapshot)) {
    if (trace_.empty()) throw std::invalid_argument("agent needs a nonempty trace");
    trace_starts_.reserve(trace_.size());
    int64_t w = 0;
    for (const auto& e : trace_) {
        trace_starts_.push_back(w);
        w += static_cast<int64_t>(e.dwell_windows);
    }
    deployed_key_ = {initial_model.home, initial_model.version};
    cache_.push_back(CacheEntry{std::move(initial_model), std::nullopt, 0.0});
}

SemanticPath MobileAgent::domain_for_window(int64_t w) const {
    if (w < 0) w = 0;
    auto it = std::upper_bound(trace_starts_.begin(), trace_starts_.end(), w);
    const size_t idx = static_cast<size_t>(it - trace_starts_.begin()) - 1;
    return trace_[idx].domain; // windows past the trace end stay in the last domain
}

const ExpertModel& MobileAgent::deployed() const { return deployed_entry().model; }

bool MobileAgent::offline_in(int64_t window) const {
    return cfg_.offline && window >= cfg_.offline->first && window < cfg_.offline->second;
}

size_t MobileAgent::cache_find(const ModelKey& key) const {
    for (size_t i = 0; i < cache_.size(); ++i)
        if (cache_[i].model.home == key.home && cache_[i].model.version == key.version)
            return i;
    return cache_.size();
}

CacheEntry& MobileAgent::deployed_entry() {
    const size_t i = cache_find(deployed_key_);
    if (i == cache_.size()) throw std::logic_error("deployed model not resident");
    return cache_[i];
}

const CacheEntry& MobileAgent::deployed_entry() const {
    return const_cast<MobileAgent*>(this)->deployed_entry();
}

void MobileAgent::touch_accuracy(double now) {
    acc_accum_ += (now - seg_start_) * current_acc_;
    seg_start_ = now;
}

void MobileAgent::refresh_accuracy(double now) {
    touch_accuracy(now);
    const CacheEntry& e = deployed_entry();
    current_acc_ = world_->effective_accuracy(e.model, e.ft, active_domain_);
}

void MobileAgent::start(double t0) {
    active_domain_ = domain_for_window(0);
    current_window_ = 0;
    seg_start_ = t0;
    acc_accum_ = 0.0;
    const CacheEntry& e = deployed_entry();
    current_acc_ = world_->effective_accuracy(e.model, e.ft, active_domain_);
}

void MobileAgent::on_window_boundary(double now, int64_t w) {
    const bool offline = offline_in(w);

    // 1. finalize the closing window's accuracy
    touch_accuracy(now);
    const double win_acc = acc_accum_ / cfg_.window_s;
    acc_accum_ = 0.0;
    {
        auto& r = log_->append(now, EventKind::WindowAccuracy);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.domain = active_domain_;
        r.model = deployed_key_.home;
        r.version = deployed_key_.version;
        r.value = win_acc;
        r.window = w;
    }

    if (offline) {
        auto& r = log_->append(now, EventKind::DeviceOffline);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.window = w;
    } else {
        // 2. report the window to the cloud
        WireMessage report;
        report.device_id = cfg_.device_id;
        report.payload = WindowReport{static_cast<uint32_t>(w), active_domain_, win_acc};
        send_(now, report);

        // 3. onboard detection on the closing window's data
        if (cfg_.traits.adapt && cfg_.traits.onboard_detect &&
            mode_ == AgentMode::RegularInference && !awaiting_verdict_)
            run_detection(now, w);

        // 4. baselines that stream every window regardless of alarms
        if (cfg_.traits.continuous_upload) send_upload(now, w);
    }

    // 5. advance the trace into the next window
    const SemanticPath next_domain = domain_for_window(w + 1);
    if (next_domain != active_domain_) {
        auto& r = log_->append(now, EventKind::TraceShift);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.domain = next_domain;
        r.window = w + 1;
        active_domain_ = next_domain;
        refresh_accuracy(now);
        if (pending_ft_ && *pending_ft_ != active_domain_) pending_ft_.reset();
    }

    // 6. launch a scheduled fine-tune at the boundary
    if (pending_ft_ && cfg_.traits.fine_tune && !running_ft_ &&
        *pending_ft_ == active_domain_ &&
        labels_for_[*pending_ft_] >= cfg_.ft_min_samples)
        start_fine_tune(now);

    // 7. background prefetch on an idle window
    if (!offline) maybe_issue_prefetch(now);

    current_window_ = w + 1;
}

void MobileAgent::run_detection(double now, int64_t w) {
    const GaussianStats& stats = deployed_entry().model.stats;
    const uint64_t key = mix_keys(
        {cfg_.seed, kStreamDetector, cfg_.device_id, static_cast<uint64_t>(w)});
    const LabeledSamples batch = world_->sample_features(
        active_domain_, cfg_.detector_samples, key, world_->config().window_spread);
    const double s_win = score_window(stats, batch.features);
    if (!detect_shift(stats, s_win, cfg_.detector_k)) return;

    auto& r = log_->append(now, EventKind::AlarmRaised);
    r.device = static_cast<int64_t>(cfg_.device_id);
    r.domain = active_domain_;
    r.value = s_win;
    r.window = w;

    mode_ = AgentMode::PotentialShift;
    awaiting_verdict_ = true;
    if (prefetch_inflight_) prefetch_cancelled_ = true;
    prefetch_armed_ = false;
    send_upload(now, w);
}

void MobileAgent::send_upload(double now, int64_t w) {
    const auto& domains = world_->domains();
    uint64_t handle = 0;
    for (size_t i = 0; i < domains.size(); ++i)
        if (domains[i].path == active_domain_) {
            handle = i;
            break;
        }
    FrameBatchUpload up;
    up.window_id = static_cast<uint32_t>(w);
    up.frame_count = static_cast<uint16_t>(cfg_.upload_frames_per_window);
    up.truth_handle = handle;
    up.payload_bytes = cfg_.upload_frames_per_window * cfg_.bytes_per_frame;
    WireMessage msg;
    msg.device_id = cfg_.device_id;
    msg.payload = up;
    send_(now, msg);
}

void MobileAgent::on_message(double now, const WireMessage& msg) {
    const auto protocol_error = [&](const char* what) {
        auto& r = log_->append(now, EventKind::ProtocolError);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.detail = what;
    };

    if (std::holds_alternative<Hello>(msg.payload)) return; // registration ack

    if (const auto* v = std::get_if<DomainVerdict>(&msg.payload)) {
        if (!cfg_.traits.adapt) {
            protocol_error("verdict-without-adaptation");
            return;
        }
        if (!cfg_.traits.onboard_detect) {
            // cloud-driven variants: the verdict is informational, the model push follows
            if (v->shift_confirmed) {
                auto& r = log_->append(now, EventKind::ShiftConfirmed);
                r.device = static_cast<int64_t>(cfg_.device_id);
                r.domain = v->domain;
                labels_for_[v->domain] += v->labels.size();
            }
            return;
        }
        if (!awaiting_verdict_) {
            protocol_error("verdict-in-regular-inference");
            return;
        }
        awaiting_verdict_ = false;
        if (!v->shift_confirmed) {
            auto& r = log_->append(now, EventKind::FalseAlarm);
            r.device = static_cast<int64_t>(cfg_.device_id);
            r.domain = v->domain;
            mode_ = AgentMode::RegularInference;
            return;
        }
        auto& r = log_->append(now, EventKind::ShiftConfirmed);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.domain = v->domain;
        labels_for_[v->domain] += v->labels.size();
        mode_ = AgentMode::RegularInference; // inference continues while adapting
        resolve_shift(now, v->domain, v->labels);
        return;
    }

    if (const auto* d = std::get_if<ModelDispatch>(&msg.payload)) {
        // match against this device's outstanding requests, FIFO by path
        auto match = outstanding_.end();
        for (auto it = outstanding_.begin(); it != outstanding_.end(); ++it)
            if (it->path == d->model.home) {
                match = it;
                break;
            }
        if (d->is_nack()) {
            if (match == outstanding_.end()) {
                protocol_error("unmatched-nack");
                return;
            }
            if (match->prefetch) {
                prefetch_inflight_.reset();
                prefetch_cancelled_ = false;
            }
            outstanding_.erase(match);
            return; // keep serving the local optimum until the taxonomy changes
        }
        if (match != outstanding_.end()) {
            const bool was_prefetch = match->prefetch;
            outstanding_.erase(match);
            if (was_prefetch) {
                prefetch_inflight_.reset();
                // drop answers that raced a swap onto the same home: the
                // deployed slot must keep the weights it is serving
                if (!prefetch_cancelled_ && cfg_.traits.use_cache &&
                    d->model.home != deployed_key_.home)
                    cache_insert(now, d->model, true, "prefetch");
                prefetch_cancelled_ = false;
            } else {
                deploy_arrival(now, d->model, "dispatch");
            }
            return;
        }
        if (awaiting_retrain_.count(d->model.home)) {
            awaiting_retrain_.erase(d->model.home);
            deploy_arrival(now, d->model, "retrain");
            return;
        }
        if (cfg_.traits.cloud_auto_dispatch) {
            deploy_arrival(now, d->model, "dispatch");
            return;
        }
        protocol_error("unsolicited-dispatch");
        return;
    }

    if (const auto* s = std::get_if<TaxonomySync>(&msg.payload)) {
        try {
            TaxonomyTree t = TaxonomyTree::decode_table(s->table, snapshot_.schema());
            if (t.revision() > snapshot_.revision()) {
                snapshot_ = std::move(t);
                auto& r = log_->append(now, EventKind::TaxonomySynced);
                r.device = static_cast<int64_t>(cfg_.device_id);
                r.version = snapshot_.revision();
            }
        } catch (const std::exception&) {
            protocol_error("bad-taxonomy-table");
        }
        return;
    }

    protocol_error("unexpected-message-at-device");
}

void MobileAgent::resolve_shift(double now, const SemanticPath& target,
                                const std::vector<uint16_t>&) {
    if (!cfg_.traits.reuse) {
        request_retrain(now, target);
        return;
    }

    TaxonomyTree scratch = snapshot_;
    if (!scratch.contains(target)) scratch.insert_domain(target);
    const std::vector<SemanticPath> candidates = scratch.model_present_nodes();
    if (candidates.empty()) {
        request_retrain(now, target);
        return;
    }

    const auto ranked = scratch.rank_candidates(target, candidates);
    const RankedCandidate& global = ranked.front();
    const ModelKey global_key{global.path, global.model_version};
    const bool hit = cache_find(global_key) < cache_.size();

    {
        auto& r = log_->append(now, EventKind::CacheLookup);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.domain = target;
        r.model = global.path;
        r.version = global.model_version;
        r.detail = hit ? "hit" : "miss";
    }

    if (hit) {
        deploy_resident(now, global_key, "hit");
    } else {
        // local optimum from the resident models while the global one downloads
        std::vector<SemanticPath> resident;
        for (const auto& e : cache_) {
            if (!scratch.contains(e.model.home)) scratch.insert_domain(e.model.home);
            resident.push_back(e.model.home);
        }
        std::sort(resident.begin(), resident.end());
        resident.erase(std::unique(resident.begin(), resident.end()), resident.end());
        if (!resident.empty()) {
            const auto local_ranked = scratch.rank_candidates(target, resident);
            const SemanticPath& local_home = local_ranked.front().path;
            uint32_t best_version = 0;
            for (const auto& e : cache_)
                if (e.model.home == local_home) best_version = std::max(best_version, e.model.version);
            const ModelKey local_key{local_home, best_version};
            if (!(local_key == deployed_key_)) deploy_resident(now, local_key, "local");
        }
        WireMessage req;
        req.device_id = cfg_.device_id;
        req.payload = ModelRequest{global.path};
        send_(now, req);
        outstanding_.push_back(PendingRequest{global.path, false});
    }

    if (!scratch.model_present(target)) request_retrain(now, target);
}

void MobileAgent::request_retrain(double now, const SemanticPath& target) {
    if (awaiting_retrain_.count(target)) return;
    awaiting_retrain_.insert(target);
    uint32_t known = 0;
    if (snapshot_.contains(target) && snapshot_.model_present(target))
        known = snapshot_.model_version(target);
    WireMessage msg;
    msg.device_id = cfg_.device_id;
    msg.payload = RetrainNotice{target, known};
    send_(now, msg);
    auto& r = log_->append(now, EventKind::RetrainRequested);
    r.device = static_cast<int64_t>(cfg_.device_id);
    r.domain = target;
    r.version = known;
}

void MobileAgent::deploy_resident(double now, const ModelKey& key, const char* how) {
    const size_t i = cache_find(key);
    if (i == cache_.size()) return; // evicted in the meantime
    const ExpertModel model = cache_[i].model;
    const std::string how_s = how;
    const double at = now + cfg_.onboard_load_s;
    sched_->call_at(at, [this, at, model, how_s]() {
        activate(at, model, EventKind::ReuseApplied, how_s);
    });
}

void MobileAgent::deploy_arrival(double now, const ExpertModel& model, const char* how) {
    const ExpertModel copy = model;
    const std::string how_s = how;
    const double at = now + cfg_.onboard_load_s;
    sched_->call_at(at, [this, at, copy, how_s]() {
        activate(at, copy, EventKind::ModelDeployed, how_s);
    });
}

void MobileAgent::activate(double now, const ExpertModel& model, EventKind kind,
                           const std::string& how) {
    const ModelKey key{model.home, model.version};
    if (!(key == deployed_key_)) {
        previous_home_ = deployed_key_.home;
        deployed_key_ = key;
    }
    cache_insert(now, model, true, "insert");
    refresh_accuracy(now);
    auto& r = log_->append(now, kind);
    r.device = static_cast<int64_t>(cfg_.device_id);
    r.domain = active_domain_;
    r.model = model.home;
    r.version = model.version;
    r.value = current_acc_;
    r.detail = how;
    post_deploy_check(now);
    if (cfg_.traits.use_cache && cfg_.prefetch) prefetch_armed_ = true;
}

void MobileAgent::post_deploy_check(double) {
    const CacheEntry& e = deployed_entry();
    const double measured = world_->effective_accuracy(e.model, e.ft, active_domain_);
    if (cfg_.traits.fine_tune && measured < cfg_.accuracy_threshold)
        pending_ft_ = active_domain_;
    else if (pending_ft_ && *pending_ft_ == active_domain_)
        pending_ft_.reset();
}

void MobileAgent::cache_insert(double now, const ExpertModel& model, bool protect_previous,
                               const char* how) {
    // one slot per home domain: a newly arrived version replaces the old one
    size_t idx = cache_.size();
    for (size_t i = 0; i < cache_.size(); ++i)
        if (cache_[i].model.home == model.home) {
            idx = i;
            break;
        }
    if (idx == cache_.size()) {
        cache_.push_back(CacheEntry{model, std::nullopt, now});
        idx = cache_.size() - 1;
        auto& r = log_->append(now, EventKind::CacheReplaced);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.model = model.home;
        r.version = model.version;
        r.detail = how;
    } else if (cache_[idx].model.version != model.version) {
        cache_[idx] = CacheEntry{model, std::nullopt, now}; // fresh weights drop the adapter
        auto& r = log_->append(now, EventKind::CacheReplaced);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.model = model.home;
        r.version = model.version;
        r.detail = how;
    } else {
        cache_[idx].last_used = now;
    }

    auto evict_one = [&](bool keep_previous) -> bool {
        size_t victim = cache_.size();
        for (size_t i = 0; i < cache_.size(); ++i) {
            const auto& c = cache_[i];
            if (c.model.home == deployed_key_.home && c.model.version == deployed_key_.version)
                continue;
            if (i == idx) continue;
            if (keep_previous && c.model.home == previous_home_) continue;
            if (victim == cache_.size() || c.last_used < cache_[victim].last_used) victim = i;
        }
        if (victim == cache_.size()) return false;
        auto& r = log_->append(now, EventKind::CacheReplaced);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.model = cache_[victim].model.home;
        r.version = cache_[victim].model.version;
        r.detail = "evict";
        cache_.erase(cache_.begin() + static_cast<long>(victim));
        if (victim < idx) --idx;
        return true;
    };
    while (cache_.size() > cfg_.cache_slots) {
        if (!evict_one(protect_previous) && !evict_one(false)) break;
    }
}

void MobileAgent::start_fine_tune(double now) {
    const SemanticPath target = *pending_ft_;
    pending_ft_.reset();
    running_ft_ = RunningFt{deployed_key_, target};
    {
        auto& r = log_->append(now, EventKind::FineTuneStarted);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.domain = target;
        r.model = deployed_key_.home;
        r.version = deployed_key_.version;
        r.value = current_acc_;
    }
    const double done_at = now + cfg_.finetune_s;
    sched_->call_at(done_at, [this, done_at]() {
        if (!running_ft_) return;
        const RunningFt ft = *running_ft_;
        running_ft_.reset();
        const size_t i = cache_find(ft.model);
        if (i == cache_.size()) return; // model left the cache; adapter discarded
        CacheEntry& e = cache_[i];
        const double acc = world_->finetune_result(e.model, e.ft, ft.target, cfg_.ft_iterations);
        e.ft = FinetuneState{ft.target, acc};
        auto& r = log_->append(done_at, EventKind::FineTuneApplied);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.domain = ft.target;
        r.model = ft.model.home;
        r.version = ft.model.version;
        r.value = acc;
        if (ft.model == deployed_key_) refresh_accuracy(done_at);
    });
}

void MobileAgent::maybe_issue_prefetch(double now) {
    if (!prefetch_armed_ || !cfg_.prefetch || !cfg_.traits.use_cache) return;
    if (mode_ != AgentMode::RegularInference || awaiting_verdict_) return;
    if (prefetch_inflight_ || !outstanding_.empty()) return;

    TaxonomyTree scratch = snapshot_;
    if (!scratch.contains(active_domain_)) scratch.insert_domain(active_domain_);
    const auto candidates = scratch.model_present_nodes();
    if (candidates.empty()) return;
    const auto ranked = scratch.rank_candidates(active_domain_, candidates);
    for (const auto& c : ranked) {
        if (c.path == active_domain_) continue;
        // the running model's slot cannot take replacement weights, so an
        // upgrade for its home would have nowhere to land
        if (c.path == deployed_key_.home) continue;
        if (cache_find(ModelKey{c.path, c.model_version}) < cache_.size()) continue;
        WireMessage req;
        req.device_id = cfg_.device_id;
        req.payload = ModelRequest{c.path};
        send_(now, req);
        outstanding_.push_back(PendingRequest{c.path, true});
        prefetch_inflight_ = c.path;
        prefetch_cancelled_ = false;
        auto& r = log_->append(now, EventKind::PrefetchIssued);
        r.device = static_cast<int64_t>(cfg_.device_id);
        r.domain = c.path;
        r.version = c.model_version;
        prefetch_armed_ = false;
        return;
    }
    prefetch_armed_ = false; // everything useful is already resident
}

} // namespace mocsim
