#ifndef MOCSIM_SIMULATION_H
#define MOCSIM_SIMULATION_H

#include <functional>
#include <map>
#include <vector>

#include "mocsim/event_log.hpp"
#include "mocsim/scenario.hpp"
#include "mocsim/wire.hpp"
#include "mocsim/world.hpp"

namespace mocsim {

/*
 * Discrete-event harness: builds the world, the initial taxonomy and model
 * database, one agent per device, the cloud, and per-device shaped links,
 * then drives everything through window boundaries until the configured
 * horizon.  The returned log is a complete, replayable record of the run.
 */

// initial taxonomy + per-domain experts for the pretrained subset
struct Provisioning {
    TaxonomyTree tree;
    std::map<SemanticPath, ExpertModel> db;
};

Provisioning provision(const World& world, const TaxonomySchema& schema);

// the device's starting model: the best provisioned expert for its first domain
ExpertModel initial_model_for(const Provisioning& prov, const SemanticPath& first_domain);

// per-device movement traces, extended to cover the whole run
std::vector<std::vector<TraceEntry>> build_traces(const World& world,
                                                  const ScenarioConfig& cfg);

// observes every frame as it enters a channel, in send order; used to compare
// transports (message sequences must match, timing aside)
struct MessageTap {
    std::function<void(bool uplink, size_t device, const WireMessage&)> on_send;
};

EventLog run_scenario(const ScenarioConfig& cfg, const MessageTap* tap = nullptr);

} // namespace mocsim

#endif // MOCSIM_SIMULATION_H
