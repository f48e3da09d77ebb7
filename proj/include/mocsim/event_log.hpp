#ifndef MOCSIM_EVENT_LOG_H
#define MOCSIM_EVENT_LOG_H

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "mocsim/taxonomy.hpp"

namespace mocsim {

/*
 * Append-only run journal.  Every behavioural step of a simulation lands
 * here; metrics are computed from this log alone so that recorded runs can
 * be re-analyzed ("replay") without re-simulating.
 *
 * Serialized as one JSON object per line, in execution order (timestamps
 * never decrease).  Unset optional fields are omitted, which keeps the
 * output byte-stable for identical runs.
 */

enum class EventKind {
    TraceShift,      // device's true domain changed (world ground truth)
    WindowAccuracy,  // finalized mean accuracy of one inference window
    AlarmRaised,     // onboard detector flagged a window
    ShiftConfirmed,  // cloud verdict: domain really changed
    FalseAlarm,      // cloud verdict: no domain change
    CacheLookup,     // reuse selection probed the cache (detail: hit|miss)
    ReuseApplied,    // cached model went live (detail: hit|local)
    FineTuneStarted,
    FineTuneApplied,
    RetrainRequested, // device asked the cloud to train a domain
    ModelDeployed,    // dispatched model went live (detail: dispatch|retrain|init)
    CacheReplaced,    // cache contents changed (detail: insert|evict|prefetch)
    PrefetchIssued,
    TaskEnqueued,     // cloud retrain task queued (detail: high|mid|low)
    TaskReclassified, // pending task moved between queue levels
    TaskStarted,
    TaskCompleted,
    TaskAborted,
    TaxonomySynced,   // device applied a taxonomy table (version = revision)
    DeviceOffline,
    ProtocolError,
};

const char* event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string& name);

struct LogRecord {
    double t = 0.0;
    uint64_t seq = 0;
    EventKind kind = EventKind::TraceShift;
    int64_t device = -1; // -1 = cloud / harness
    SemanticPath domain; // empty = unset
    SemanticPath model;  // model home path, empty = unset
    uint32_t version = 0;
    double value = std::numeric_limits<double>::quiet_NaN();
    std::string detail;
    int64_t window = -1;
    int64_t task = -1;

    bool has_value() const { return value == value; }
};

class EventLog {
public:
    LogRecord& append(double t, EventKind kind) {
        LogRecord r;
        r.t = t;
        r.seq = next_seq_++;
        r.kind = kind;
        records_.push_back(std::move(r));
        return records_.back();
    }

    const std::vector<LogRecord>& records() const { return records_; }
    size_t size() const { return records_.size(); }

    void to_jsonl(std::ostream& out) const;
    static EventLog from_jsonl(std::istream& in);

private:
    std::vector<LogRecord> records_;
    uint64_t next_seq_ = 0;
};

} // namespace mocsim

#endif // MOCSIM_EVENT_LOG_H
