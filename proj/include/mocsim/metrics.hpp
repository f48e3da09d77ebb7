#ifndef MOCSIM_METRICS_H
#define MOCSIM_METRICS_H

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mocsim/event_log.hpp"
#include "mocsim/scenario.hpp"

namespace mocsim {

/*
 * Post-hoc analysis of a run log.  Everything here is a pure function of
 * the log plus the scenario, so saved logs can be re-analyzed later and
 * must reproduce the original numbers exactly.
 */

struct MetricsReport {
    std::string variant;
    size_t devices = 0;
    uint64_t seed = 0;
    size_t duration_windows = 0;

    size_t trace_shifts = 0;
    size_t alarms = 0;
    size_t confirmed_shifts = 0;
    size_t false_alarms = 0;
    size_t resolved = 0;
    size_t unresolved = 0;

    double mean_response_delay_s = 0.0; // confirm -> first adaptation action
    double mean_cache_hit_delay_s = 0.0; // confirm -> cache-hit model live
    std::vector<double> response_delays;
    std::vector<double> cache_hit_delays;

    size_t cache_hits = 0;
    size_t cache_lookups = 0;
    double cache_hit_rate = 0.0;

    size_t retrains_completed = 0;
    size_t retrains_aborted = 0;
    double mean_retrain_time_s = 0.0; // enqueue -> model live (or task done)

    double mean_recovery_accuracy = 0.0; // accuracy inside post-shift horizons
    double mean_window_accuracy = 0.0;

    // how resolved shifts were handled; the three ratios sum to 1
    double ratio_reuse = 0.0;
    double ratio_fine_tune = 0.0;
    double ratio_retrain = 0.0;
};

// per-(device, shift ordinal) recovery horizon in seconds
using RecoveryAnchors = std::map<std::pair<int64_t, size_t>, double>;

// horizon = time from each trace shift to the first model deployment inside
// the same dwell; shifts without one get no entry (callers fall back to the
// configured fixed horizon)
RecoveryAnchors extract_recovery_anchors(const EventLog& log);

MetricsReport compute_metrics(const EventLog& log, const ScenarioConfig& cfg,
                              const RecoveryAnchors* anchors = nullptr);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& m);

// re-derive the retrain scheduler's decisions from the log and count
// deviations from the declared policy (0 = the trace is consistent)
size_t scheduler_replay_check(const EventLog& log, bool mlq);

} // namespace mocsim

#endif // MOCSIM_METRICS_H
