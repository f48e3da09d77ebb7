#include "mocsim/event_log.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mocsim {

namespace {

constexpr const char* kKindNames[] = {
    "TraceShift",      "WindowAccuracy", "AlarmRaised",     "ShiftConfirmed",
    "FalseAlarm",      "CacheLookup",    "ReuseApplied",    "FineTuneStarted",
    "FineTuneApplied", "RetrainRequested", "ModelDeployed", "CacheReplaced",
    "PrefetchIssued",  "TaskEnqueued",   "TaskReclassified", "TaskStarted",
    "TaskCompleted",   "TaskAborted",    "TaxonomySynced",  "DeviceOffline",
    "ProtocolError",
};
constexpr size_t kKindCount = sizeof(kKindNames) / sizeof(kKindNames[0]);

} // namespace

const char* event_kind_name(EventKind k) {
    const auto i = static_cast<size_t>(k);
    if (i >= kKindCount) throw std::out_of_range("unknown event kind");
    return kKindNames[i];
}

EventKind event_kind_from_name(const std::string& name) {
    for (size_t i = 0; i < kKindCount; ++i)
        if (name == kKindNames[i]) return static_cast<EventKind>(i);
    throw std::invalid_argument("unknown event kind: " + name);
}

void EventLog::to_jsonl(std::ostream& out) const {
    for (const auto& r : records_) {
        nlohmann::ordered_json j;
        j["t"] = r.t;
        j["seq"] = r.seq;
        j["kind"] = event_kind_name(r.kind);
        j["dev"] = r.device;
        if (!r.domain.values.empty()) j["domain"] = r.domain.to_string();
        if (!r.model.values.empty()) j["model"] = r.model.to_string();
        if (r.version != 0) j["version"] = r.version;
        if (r.has_value()) j["value"] = r.value;
        if (!r.detail.empty()) j["detail"] = r.detail;
        if (r.window >= 0) j["window"] = r.window;
        if (r.task >= 0) j["task"] = r.task;
        out << j.dump() << '\n';
    }
}

EventLog EventLog::from_jsonl(std::istream& in) {
    EventLog log;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("event log line " + std::to_string(lineno) +
                                     ": " + e.what());
        }
        LogRecord r;
        r.t = j.at("t").get<double>();
        r.seq = j.at("seq").get<uint64_t>();
        r.kind = event_kind_from_name(j.at("kind").get<std::string>());
        r.device = j.at("dev").get<int64_t>();
        if (j.contains("domain"))
            r.domain = SemanticPath::from_string(j["domain"].get<std::string>());
        if (j.contains("model"))
            r.model = SemanticPath::from_string(j["model"].get<std::string>());
        if (j.contains("version")) r.version = j["version"].get<uint32_t>();
        if (j.contains("value")) r.value = j["value"].get<double>();
        if (j.contains("detail")) r.detail = j["detail"].get<std::string>();
        if (j.contains("window")) r.window = j["window"].get<int64_t>();
        if (j.contains("task")) r.task = j["task"].get<int64_t>();
        log.next_seq_ = std::max(log.next_seq_, r.seq + 1);
        log.records_.push_back(std::move(r));
    }
    return log;
}

} // namespace mocsim
