#ifndef MOCSIM_LINK_H
#define MOCSIM_LINK_H

#include <algorithm>
#include <cstdint>

namespace mocsim {

/*
 * Shaped point-to-point link, one instance per direction.
 *
 * A message of n bytes sent at time t is serialized behind whatever is
 * still queued, then propagates with fixed latency:
 *
 *   delivery = max(t, queue drain time) + n*8/bandwidth + latency
 *
 * Serialization is FIFO per direction, so deliveries never reorder.
 */

struct LinkModel {
    double bandwidth_bps = 1e7; // 10 Mbit/s
    double latency_s = 0.020;
};

// transfer duration for a payload sent with `queued_bytes` still ahead of it
inline double transfer_time(uint64_t size_bytes, const LinkModel& link,
                            uint64_t queued_bytes = 0) {
    return link.latency_s +
           (static_cast<double>(size_bytes) + static_cast<double>(queued_bytes)) * 8.0 /
               link.bandwidth_bps;
}

class LinkDirection {
public:
    LinkDirection() = default;
    explicit LinkDirection(LinkModel model) : model_(model) {}

    // enqueue at `now`, return the delivery time
    double enqueue(double now, uint64_t size_bytes) {
        const double start = std::max(now, busy_until_);
        const double serialized =
            start + static_cast<double>(size_bytes) * 8.0 / model_.bandwidth_bps;
        busy_until_ = serialized;
        return serialized + model_.latency_s;
    }

    // bytes-equivalent of the backlog ahead of a message sent at `now`
    uint64_t queued_bytes(double now) const {
        const double backlog_s = std::max(0.0, busy_until_ - now);
        return static_cast<uint64_t>(backlog_s * model_.bandwidth_bps / 8.0);
    }

    double busy_until() const { return busy_until_; }
    const LinkModel& model() const { return model_; }

private:
    LinkModel model_;
    double busy_until_ = 0.0;
};

} // namespace mocsim

#endif // MOCSIM_LINK_H
