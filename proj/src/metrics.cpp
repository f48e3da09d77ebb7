#include "mocsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>

namespace mocsim {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return kNan;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

struct DeviceTimeline {
    std::vector<double> shifts;   // TraceShift times
    std::vector<double> confirms; // ShiftConfirmed times
    struct Action {
        double t;
        EventKind kind;
        std::string detail;
    };
    std::vector<Action> actions; // adaptation actions in time order
    std::vector<std::pair<int64_t, double>> windows; // (window, accuracy)
};

} // namespace

RecoveryAnchors extract_recovery_anchors(const EventLog& log) {
    std::map<int64_t, std::vector<double>> shifts;
    std::map<int64_t, std::vector<double>> deploys;
    for (const auto& r : log.records()) {
        if (r.kind == EventKind::TraceShift) shifts[r.device].push_back(r.t);
        if (r.kind == EventKind::ModelDeployed && r.detail != "init")
            deploys[r.device].push_back(r.t);
    }
    RecoveryAnchors anchors;
    for (const auto& [dev, times] : shifts) {
        const auto& dep = deploys[dev];
        for (size_t k = 0; k < times.size(); ++k) {
            const double t0 = times[k];
            const double t1 = k + 1 < times.size() ? times[k + 1]
                                                   : std::numeric_limits<double>::infinity();
            auto it = std::lower_bound(dep.begin(), dep.end(), t0);
            if (it != dep.end() && *it < t1) anchors[{dev, k}] = *it - t0;
        }
    }
    return anchors;
}

MetricsReport compute_metrics(const EventLog& log, const ScenarioConfig& cfg,
                              const RecoveryAnchors* anchors) {
    MetricsReport m;
    m.variant = variant_name(cfg.variant);
    m.devices = cfg.devices;
    m.seed = cfg.seed;
    m.duration_windows = cfg.duration_windows;

    std::map<int64_t, DeviceTimeline> dev;
    std::map<int64_t, double> task_enqueued_at;
    struct Completion {
        int64_t task;
        SemanticPath domain;
        uint32_t version;
        double t;
    };
    std::vector<Completion> completions;
    std::vector<const LogRecord*> retrain_deploys;

    for (const auto& r : log.records()) {
        switch (r.kind) {
            case EventKind::TraceShift:
                ++m.trace_shifts;
                dev[r.device].shifts.push_back(r.t);
                break;
            case EventKind::AlarmRaised:
                ++m.alarms;
                break;
            case EventKind::ShiftConfirmed:
                ++m.confirmed_shifts;
                dev[r.device].confirms.push_back(r.t);
                break;
            case EventKind::FalseAlarm:
                ++m.false_alarms;
                break;
            case EventKind::CacheLookup:
                ++m.cache_lookups;
                if (r.detail == "hit") ++m.cache_hits;
                break;
            case EventKind::ReuseApplied:
            case EventKind::FineTuneStarted:
                dev[r.device].actions.push_back({r.t, r.kind, r.detail});
                break;
            case EventKind::ModelDeployed:
                if (r.detail != "init")
                    dev[r.device].actions.push_back({r.t, r.kind, r.detail});
                if (r.detail == "retrain") retrain_deploys.push_back(&r);
                break;
            case EventKind::WindowAccuracy:
                if (r.has_value()) dev[r.device].windows.push_back({r.window, r.value});
                break;
            case EventKind::TaskEnqueued:
                task_enqueued_at[r.task] = r.t;
                break;
            case EventKind::TaskCompleted:
                ++m.retrains_completed;
                completions.push_back({r.task, r.domain, r.version, r.t});
                break;
            case EventKind::TaskAborted:
                ++m.retrains_aborted;
                break;
            default:
                break;
        }
    }

    // shift-response episodes: confirm -> first adaptation action, cut at the
    // device's next confirm or next true shift (after those the action no
    // longer answers this episode)
    size_t n_reuse = 0, n_ft = 0, n_retrain = 0;
    for (auto& [d, tl] : dev) {
        for (size_t i = 0; i < tl.confirms.size(); ++i) {
            const double tc = tl.confirms[i];
            double end = i + 1 < tl.confirms.size() ? tl.confirms[i + 1]
                                                    : std::numeric_limits<double>::infinity();
            auto ns = std::upper_bound(tl.shifts.begin(), tl.shifts.end(), tc);
            if (ns != tl.shifts.end()) end = std::min(end, *ns);

            bool saw_retrain = false, saw_ft = false, saw_reuse = false;
            double first_t = std::numeric_limits<double>::infinity();
            for (const auto& a : tl.actions) {
                if (a.t <= tc || a.t >= end) continue;
                first_t = std::min(first_t, a.t);
                if (a.kind == EventKind::ModelDeployed && a.detail == "retrain")
                    saw_retrain = true;
                else if (a.kind == EventKind::FineTuneStarted)
                    saw_ft = true;
                else
                    saw_reuse = true;
            }
            if (saw_retrain || saw_ft || saw_reuse) {
                ++m.resolved;
                m.response_delays.push_back(first_t - tc);
                if (saw_retrain)
                    ++n_retrain;
                else if (saw_ft)
                    ++n_ft;
                else
                    ++n_reuse;
            } else {
                ++m.unresolved;
            }
        }
        // cache-hit latency: hit-reuse activation time since the confirm
        for (const auto& a : tl.actions) {
            if (a.kind != EventKind::ReuseApplied || a.detail != "hit") continue;
            auto it = std::upper_bound(tl.confirms.begin(), tl.confirms.end(), a.t);
            if (it != tl.confirms.begin()) m.cache_hit_delays.push_back(a.t - *std::prev(it));
        }
    }
    m.mean_response_delay_s = mean_of(m.response_delays);
    m.mean_cache_hit_delay_s = mean_of(m.cache_hit_delays);
    m.cache_hit_rate = m.cache_lookups
                           ? static_cast<double>(m.cache_hits) / static_cast<double>(m.cache_lookups)
                           : kNan;
    if (m.resolved) {
        m.ratio_reuse = static_cast<double>(n_reuse) / static_cast<double>(m.resolved);
        m.ratio_fine_tune = static_cast<double>(n_ft) / static_cast<double>(m.resolved);
        m.ratio_retrain = static_cast<double>(n_retrain) / static_cast<double>(m.resolved);
    } else {
        m.ratio_reuse = m.ratio_fine_tune = m.ratio_retrain = kNan;
    }

    // retrain turnaround: enqueue -> first deployment of the produced model,
    // falling back to training completion when nobody deployed it
    {
        std::vector<double> times;
        for (const auto& c : completions) {
            auto enq = task_enqueued_at.find(c.task);
            if (enq == task_enqueued_at.end()) continue;
            double end = c.t;
            for (const auto* r : retrain_deploys) {
                if (r->t >= c.t && r->model == c.domain && r->version == c.version) {
                    end = r->t;
                    break;
                }
            }
            times.push_back(end - enq->second);
        }
        m.mean_retrain_time_s = mean_of(times);
    }

    // post-shift recovery: overlap-weighted window accuracy inside a horizon
    // anchored at each true shift
    {
        const double W = cfg.window_s;
        const double fallback = static_cast<double>(cfg.recovery_horizon_windows) * W;
        const double run_end = static_cast<double>(cfg.duration_windows) * W;
        std::vector<double> per_shift;
        for (const auto& [d, tl] : dev) {
            for (size_t k = 0; k < tl.shifts.size(); ++k) {
                const double t0 = tl.shifts[k];
                double horizon = fallback;
                if (anchors) {
                    auto it = anchors->find({d, k});
                    if (it != anchors->end()) horizon = it->second;
                }
                double t1 = std::min(t0 + horizon, run_end);
                if (k + 1 < tl.shifts.size()) t1 = std::min(t1, tl.shifts[k + 1]);
                if (t1 <= t0) continue;
                double wsum = 0.0, asum = 0.0;
                for (const auto& [w, acc] : tl.windows) {
                    const double a = static_cast<double>(w) * W;
                    const double b = a + W;
                    const double overlap = std::min(b, t1) - std::max(a, t0);
                    if (overlap <= 0.0) continue;
                    wsum += overlap;
                    asum += overlap * acc;
                }
                if (wsum > 0.0) per_shift.push_back(asum / wsum);
            }
        }
        m.mean_recovery_accuracy = mean_of(per_shift);
    }

    {
        std::vector<double> all;
        for (const auto& [d, tl] : dev)
            for (const auto& [w, acc] : tl.windows) all.push_back(acc);
        m.mean_window_accuracy = mean_of(all);
    }

    return m;
}

namespace {

std::string fmt(double v) {
    if (v != v) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

std::string metrics_csv_header() {
    return "variant,devices,seed,duration_windows,trace_shifts,alarms,confirmed_shifts,"
           "false_alarms,resolved,unresolved,mean_response_delay_s,mean_cache_hit_delay_s,"
           "cache_hits,cache_lookups,cache_hit_rate,retrains_completed,retrains_aborted,"
           "mean_retrain_time_s,mean_recovery_accuracy,mean_window_accuracy,ratio_reuse,"
           "ratio_fine_tune,ratio_retrain";
}

std::string metrics_csv_row(const MetricsReport& m) {
    std::ostringstream out;
    out << m.variant << ',' << m.devices << ',' << m.seed << ',' << m.duration_windows << ','
        << m.trace_shifts << ',' << m.alarms << ',' << m.confirmed_shifts << ','
        << m.false_alarms << ',' << m.resolved << ',' << m.unresolved << ','
        << fmt(m.mean_response_delay_s) << ',' << fmt(m.mean_cache_hit_delay_s) << ','
        << m.cache_hits << ',' << m.cache_lookups << ',' << fmt(m.cache_hit_rate) << ','
        << m.retrains_completed << ',' << m.retrains_aborted << ','
        << fmt(m.mean_retrain_time_s) << ',' << fmt(m.mean_recovery_accuracy) << ','
        << fmt(m.mean_window_accuracy) << ',' << fmt(m.ratio_reuse) << ','
        << fmt(m.ratio_fine_tune) << ',' << fmt(m.ratio_retrain);
    return out.str();
}

size_t scheduler_replay_check(const EventLog& log, bool mlq) {
    struct Task {
        int64_t id;
        int level; // 0 high, 1 mid, 2 low
        double key;
        int64_t order;
    };
    const auto level_of = [](const std::string& s) { return s == "high" ? 0 : s == "mid" ? 1 : 2; };
    std::vector<Task> pending; // insertion order, mirroring the live queue
    bool busy = false;
    int64_t running_id = 0;
    int64_t order_counter = 0;
    size_t violations = 0;

    const auto find_pending = [&](int64_t id) {
        for (size_t i = 0; i < pending.size(); ++i)
            if (pending[i].id == id) return i;
        return pending.size();
    };
    const auto policy_pick = [&]() {
        size_t pick = pending.size();
        if (mlq) {
            const auto better = [](const Task& a, const Task& b) {
                if (a.level != b.level) return a.level < b.level;
                if (a.level == 1 && a.key == a.key && b.key == b.key && a.key != b.key)
                    return a.key < b.key;
                return a.order < b.order;
            };
            for (size_t i = 0; i < pending.size(); ++i)
                if (pick == pending.size() || better(pending[i], pending[pick])) pick = i;
        } else {
            for (size_t i = 0; i < pending.size(); ++i)
                if (pick == pending.size() || pending[i].order < pending[pick].order) pick = i;
        }
        return pick;
    };

    for (const auto& r : log.records()) {
        switch (r.kind) {
            case EventKind::TaskEnqueued:
                pending.push_back({r.task, level_of(r.detail), r.value, order_counter++});
                break;
            case EventKind::TaskReclassified: {
                const size_t i = find_pending(r.task);
                if (i == pending.size()) {
                    ++violations; // reclassified a task that was not pending
                    break;
                }
                pending[i].level = level_of(r.detail);
                pending[i].key = r.value;
                break;
            }
            case EventKind::TaskStarted:
            case EventKind::TaskAborted: {
                if (r.kind == EventKind::TaskAborted && busy && running_id == r.task) {
                    busy = false; // failed at completion time, after running
                    break;
                }
                if (busy) ++violations; // the single processor was busy
                const size_t i = find_pending(r.task);
                if (i == pending.size()) {
                    ++violations;
                    break;
                }
                const size_t pick = policy_pick();
                if (pick != i) ++violations; // policy would have chosen differently
                if (r.kind == EventKind::TaskStarted) {
                    busy = true;
                    running_id = r.task;
                }
                pending.erase(pending.begin() + static_cast<long>(i));
                break;
            }
            case EventKind::TaskCompleted:
                if (!busy || running_id != r.task)
                    ++violations;
                else
                    busy = false;
                break;
            default:
                break;
        }
    }
    return violations;
}

} // namespace mocsim
