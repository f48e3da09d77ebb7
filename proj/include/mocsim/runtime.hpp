#ifndef MOCSIM_RUNTIME_H
#define MOCSIM_RUNTIME_H

#include <cstdint>
#include <functional>

#include "mocsim/event_queue.hpp"

namespace mocsim {

/*
 * Small seams that keep the device and cloud state machines independent of
 * how time advances: the discrete-event harness drives them through an
 * EventQueue, the socket harness through wall-clock-paced timer heaps.
 */

class Scheduler {
public:
    virtual ~Scheduler() = default;
    virtual void call_at(double t, std::function<void()> fn) = 0;
};

class EventQueueScheduler : public Scheduler {
public:
    explicit EventQueueScheduler(EventQueue* q) : q_(q) {}
    void call_at(double t, std::function<void()> fn) override {
        q_->schedule_at(t, std::move(fn));
    }

private:
    EventQueue* q_;
};

// Purpose tags for simulation-level random streams, mixed with
// (seed, device, window) so every draw is addressable and reproducible.
inline constexpr uint64_t kStreamDetector = 0xD37EC700u;
inline constexpr uint64_t kStreamUpload = 0x0B10ADEDu;
inline constexpr uint64_t kStreamAnnotate = 0xA55E55EDu;
inline constexpr uint64_t kStreamDiscriminate = 0xD15C0FF0u;
inline constexpr uint64_t kStreamTrace = 0x77ACE000u;

} // namespace mocsim

#endif // MOCSIM_RUNTIME_H
