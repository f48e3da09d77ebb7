#include "mocsim/simulation.hpp"

#include <memory>
#include <stdexcept>
#include <string>

#include "mocsim/cloud_server.hpp"
#include "mocsim/event_queue.hpp"
#include "mocsim/link.hpp"
#include "mocsim/mobile_agent.hpp"
#include "mocsim/prng.hpp"
#include "mocsim/runtime.hpp"
#include "mocsim/wire.hpp"

namespace mocsim {

Provisioning provision(const World& world, const TaxonomySchema& schema) {
    Provisioning prov;
    prov.tree = TaxonomyTree(schema);
    for (const auto& spec : world.domains()) {
        if (!spec.pretrained) continue;
        ExpertModel model = world.retrain_result(spec.path, 0, {spec.path});
        prov.tree.insert_domain(spec.path);
        prov.tree.set_model(spec.path, model.version);
        prov.db.emplace(spec.path, std::move(model));
    }
    if (prov.db.empty())
        throw std::invalid_argument("no pretrained domain to provision devices from");
    return prov;
}

ExpertModel initial_model_for(const Provisioning& prov, const SemanticPath& first_domain) {
    TaxonomyTree scratch = prov.tree;
    if (!scratch.contains(first_domain)) scratch.insert_domain(first_domain);
    const auto ranked = scratch.rank_candidates(first_domain, scratch.model_present_nodes());
    return prov.db.at(ranked.front().path);
}

std::vector<std::vector<TraceEntry>> build_traces(const World& world,
                                                  const ScenarioConfig& cfg) {
    TraceConfig tc = cfg.trace;
    // enough entries to cover the run even at minimum dwell everywhere; a
    // one-domain world cannot shift at all (the device just stays put)
    const size_t covering = cfg.duration_windows / std::max<uint32_t>(1, tc.dwell_min) + 2;
    tc.shifts = world.domains().size() < 2 ? 0 : std::max(tc.shifts, covering);
    std::vector<std::vector<TraceEntry>> traces;
    traces.reserve(cfg.devices);
    for (size_t d = 0; d < cfg.devices; ++d)
        traces.push_back(world.generate_trace(tc, mix_keys({cfg.seed, kStreamTrace, d})));
    return traces;
}

namespace {

struct Sim {
    ScenarioConfig cfg;
    World world;
    EventLog log;
    EventQueue queue;
    EventQueueScheduler sched;
    std::vector<LinkDirection> uplink;
    std::vector<LinkDirection> downlink;
    std::unique_ptr<CloudServer> cloud;
    std::vector<std::unique_ptr<MobileAgent>> agents;

    explicit Sim(ScenarioConfig c)
        : cfg(std::move(c)), world(cfg.world, cfg.domains), sched(&queue) {}
};

} // namespace

EventLog run_scenario(const ScenarioConfig& cfg_in, const MessageTap* tap) {
    {
        const auto problems = cfg_in.validate();
        if (!problems.empty()) {
            std::string what = "invalid scenario:";
            for (const auto& p : problems) what += "\n  " + p;
            throw std::invalid_argument(what);
        }
    }
    ScenarioConfig cfg = cfg_in;
    cfg.world.seed = cfg.seed;

    Sim sim(std::move(cfg));
    const ScenarioConfig& c = sim.cfg;
    const VariantTraits traits = variant_traits(c.variant);

    sim.uplink.assign(c.devices, LinkDirection(c.link));
    sim.downlink.assign(c.devices, LinkDirection(c.link));

    const Provisioning prov = provision(sim.world, c.schema);
    const auto traces = build_traces(sim.world, c);

    CloudConfig ccfg;
    ccfg.traits = traits;
    ccfg.seed = c.seed;
    ccfg.devices = c.devices;
    ccfg.window_s = c.window_s;
    ccfg.retrain_s = c.retrain_s;
    ccfg.pool_cap = c.pool_cap;
    ccfg.retrain_min = c.retrain_min;
    ccfg.active_horizon_windows = c.active_horizon_windows;
    ccfg.fm_s_per_frame = c.fm_s_per_frame;
    ccfg.fm_frames_per_batch = c.fm_frames_per_batch;
    ccfg.annotate_s_per_frame = c.annotate_s_per_frame;
    ccfg.mlq = c.mlq_enabled();

    Sim* s = &sim;
    sim.cloud = std::make_unique<CloudServer>(
        ccfg, &sim.world, prov.tree, prov.db, &sim.sched, &sim.log,
        [s, tap](double now, size_t device, const WireMessage& msg) {
            WireMessage framed = msg;
            framed.device_id = device + 1;
            if (tap && tap->on_send) tap->on_send(false, device, framed);
            const double at = s->downlink[device].enqueue(now, wire_size(framed));
            s->queue.schedule_at(at, [s, device, framed, at]() {
                s->agents[device]->on_message(at, framed);
            });
        });

    for (size_t d = 0; d < c.devices; ++d) {
        AgentConfig acfg;
        acfg.device_id = d;
        acfg.traits = traits;
        acfg.seed = c.seed;
        acfg.window_s = c.window_s;
        acfg.detector_k = c.detector_k;
        acfg.accuracy_threshold = c.accuracy_threshold;
        acfg.cache_slots = traits.use_cache ? c.cache_slots : 1;
        acfg.upload_frames_per_window = c.upload_frames_per_window;
        acfg.detector_samples = c.detector_samples;
        acfg.eval_samples = c.eval_samples;
        acfg.ft_min_samples = c.ft_min_samples;
        acfg.ft_iterations = c.ft_iterations;
        acfg.onboard_load_s = c.onboard_load_s;
        acfg.finetune_s = c.finetune_s;
        acfg.prefetch = c.prefetch;
        acfg.bytes_per_frame = c.bytes_per_frame;
        auto off = c.offline_windows.find(static_cast<int64_t>(d));
        if (off != c.offline_windows.end()) acfg.offline = off->second;

        sim.agents.push_back(std::make_unique<MobileAgent>(
            acfg, &sim.world, traces[d], prov.tree,
            initial_model_for(prov, traces[d].front().domain), &sim.sched, &sim.log,
            [s, d, tap](double now, const WireMessage& msg) {
                WireMessage framed = msg;
                framed.device_id = d + 1;
                if (tap && tap->on_send) tap->on_send(true, d, framed);
                const double at = s->uplink[d].enqueue(now, wire_size(framed));
                s->queue.schedule_at(at, [s, d, framed, at]() {
                    s->cloud->on_message(at, d, framed);
                });
            }));
    }

    for (auto& agent : sim.agents) agent->start(0.0);

    for (size_t w = 0; w < c.duration_windows; ++w) {
        const double t = static_cast<double>(w + 1) * c.window_s;
        const int64_t closing = static_cast<int64_t>(w);
        sim.queue.schedule_at(t, [s, t, closing]() {
            for (auto& agent : s->agents) agent->on_window_boundary(t, closing);
            s->cloud->on_window_boundary(t, closing);
        });
    }

    sim.queue.run_until(static_cast<double>(c.duration_windows) * c.window_s);
    return std::move(sim.log);
}

} // namespace mocsim
