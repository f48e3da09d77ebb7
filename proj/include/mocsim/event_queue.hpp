#ifndef MOCSIM_EVENT_QUEUE_H
#define MOCSIM_EVENT_QUEUE_H

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace mocsim {

/*
 * Discrete-event scheduler over a virtual clock.
 *
 * Events fire in (time, insertion order) order, so simultaneous events run
 * exactly in the order they were scheduled — the tie-break that makes whole
 * simulation runs reproducible byte for byte.
 */
class EventQueue {
public:
    using Action = std::function<void()>;

    double now() const { return now_; }

    void schedule_at(double t, Action fn) {
        if (t < now_) t = now_; // never schedule into the past
        heap_.push(Entry{t, seq_++, std::move(fn)});
    }

    void schedule_in(double dt, Action fn) { schedule_at(now_ + dt, std::move(fn)); }

    bool empty() const { return heap_.empty(); }
    size_t pending() const { return heap_.size(); }

    // run events with time <= t_end; clock ends at t_end
    void run_until(double t_end) {
        while (!heap_.empty() && heap_.top().time <= t_end) {
            Entry e = heap_.top();
            heap_.pop();
            now_ = e.time;
            e.fn();
        }
        if (now_ < t_end) now_ = t_end;
    }

    // single step, for tests; returns false when drained
    bool step() {
        if (heap_.empty()) return false;
        Entry e = heap_.top();
        heap_.pop();
        now_ = e.time;
        e.fn();
        return true;
    }

private:
    struct Entry {
        double time;
        uint64_t seq;
        Action fn;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    uint64_t seq_ = 0;
    double now_ = 0.0;
};

} // namespace mocsim

#endif // MOCSIM_EVENT_QUEUE_H
