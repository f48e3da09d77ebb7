#ifndef MOCSIM_SOCKET_TRANSPORT_H
#define MOCSIM_SOCKET_TRANSPORT_H

#include <cstdint>

#include "mocsim/event_log.hpp"
#include "mocsim/scenario.hpp"
#include "mocsim/simulation.hpp"

namespace mocsim {

/*
 * Loopback TCP binding of the same scenario: one listening cloud endpoint,
 * one connection per device, identical frame layout on the wire.  Virtual
 * time is paced against the wall clock (socket.time_scale wall seconds per
 * simulated second), so timestamps are measured rather than computed —
 * message sequences match the simulated transport, metrics are approximate.
 *
 * Devices obtain their identity through the hello handshake: a type-0 frame
 * with device id 0 asks the cloud to assign one.
 */
EventLog run_scenario_socket(const ScenarioConfig& cfg, const MessageTap* tap = nullptr);

} // namespace mocsim

#endif // MOCSIM_SOCKET_TRANSPORT_H
