#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>
#include <optional>
#include <vector>

#include "mocsim/cloud_server.hpp"
#include "mocsim/event_log.hpp"
#include "mocsim/event_queue.hpp"
#include "mocsim/runtime.hpp"
#include "mocsim/scenario.hpp"
#include "mocsim/simulation.hpp"
#include "mocsim/taxonomy.hpp"
#include "mocsim/wire.hpp"
#include "mocsim/world.hpp"

using namespace mocsim;

namespace {

struct SentFrame {
    double t = 0.0;
    size_t device = 0;
    WireMessage msg;
};

// drives the cloud directly, standing in for harness and devices
struct CloudRig {
    ScenarioConfig scen = default_scenario();
    World world;
    Provisioning prov;
    EventQueue queue;
    EventQueueScheduler sched{&queue};
    EventLog log;
    std::vector<SentFrame> sent;
    std::unique_ptr<CloudServer> cloud;

    explicit CloudRig(CloudConfig ccfg = {}) : world(make_world()), prov(provision(world, scen.schema)) {
        ccfg.traits = variant_traits(Variant::Mocha);
        ccfg.devices = 3;
        cloud = std::make_unique<CloudServer>(
            ccfg, &world, prov.tree, prov.db, &sched, &log,
            [this](double t, size_t device, const WireMessage& m) {
                sent.push_back({t, device, m});
            });
    }

    World make_world() {
        scen.world.teacher_flip = 0.0; // exact labels and verdict paths
        scen.world.fm_error = 0.0;
        scen.world.seed = scen.seed;
        return World(scen.world, scen.domains);
    }

    uint64_t handle_of(const SemanticPath& dom) const {
        for (size_t i = 0; i < world.domains().size(); i++)
            if (world.domains()[i].path == dom) return i;
        throw std::runtime_error("domain not in world");
    }

    // one upload batch of `frames` samples ostensibly captured in `dom`
    void upload(double t, size_t device, const SemanticPath& dom, uint16_t frames = 30,
                uint32_t window = 0) {
        queue.run_until(t);
        FrameBatchUpload up;
        up.window_id = window;
        up.frame_count = frames;
        up.truth_handle = handle_of(dom);
        up.payload_bytes = uint64_t(frames) * 65536;
        cloud->on_message(t, device, WireMessage{device + 1, up});
    }

    void fill_pool(double t, size_t device, const SemanticPath& dom, size_t samples) {
        size_t sent_n = 0;
        while (sent_n < samples) {
            const uint16_t chunk = uint16_t(std::min<size_t>(30, samples - sent_n));
            upload(t, device, dom, chunk);
            t += 2.0;
            sent_n += chunk;
        }
        queue.run_until(t + 2.0); // let verdicts flush
    }

    void report(double t, size_t device, const SemanticPath& dom, double acc, int64_t w) {
        queue.run_until(t);
        cloud->on_message(t, device, WireMessage{device + 1, WindowReport{uint32_t(w), dom, acc}});
    }

    void boundary(int64_t w) {
        const double t = 30.0 * double(w + 1);
        queue.run_until(t - 1e-9);
        cloud->on_window_boundary(t, w);
    }

    std::vector<const LogRecord*> all(EventKind k) const {
        std::vector<const LogRecord*> out;
        for (const auto& r : log.records())
            if (r.kind == k) out.push_back(&r);
        return out;
    }

    std::vector<const SentFrame*> sent_of(MsgType t) const {
        std::vector<const SentFrame*> out;
        for (const auto& f : sent)
            if (message_type(f.msg) == t) out.push_back(&f);
        return out;
    }
};

const SemanticPath kUnseen{"street", "rainy", "night"};    // no initial expert
const SemanticPath kUnseen2{"highway", "rainy", "night"};  // no initial expert
const SemanticPath kSeenA{"street", "clear", "day"};       // provisioned
const SemanticPath kSeenB{"street", "clear", "night"};     // provisioned
const SemanticPath kSeenC{"street", "rainy", "day"};       // provisioned

} // namespace

TEST_CASE("verdicts hinge on the device's last confirmed domain") {
    CloudRig rig;
    rig.upload(10.0, 0, kUnseen);
    rig.queue.run_until(20.0);

    auto verdicts = rig.sent_of(MsgType::DomainVerdict);
    REQUIRE(verdicts.size() == 1);
    const auto& v1 = std::get<DomainVerdict>(verdicts[0]->msg.payload);
    CHECK(v1.shift_confirmed);     // first confirmation for this device
    CHECK(v1.domain == kUnseen);   // exact path with a perfect discriminator
    CHECK(v1.labels.size() == 30);
    // verdict timing: annotation of 30 frames dominates the one FM pass
    CHECK(verdicts[0]->t == doctest::Approx(10.0 + 1.5).epsilon(1e-12));
    CHECK(rig.cloud->last_confirmed(0).has_value());
    CHECK(*rig.cloud->last_confirmed(0) == kUnseen);

    // same domain again: false alarm resolved
    rig.upload(40.0, 0, kUnseen);
    rig.queue.run_until(50.0);
    verdicts = rig.sent_of(MsgType::DomainVerdict);
    REQUIRE(verdicts.size() == 2);
    CHECK_FALSE(std::get<DomainVerdict>(verdicts[1]->msg.payload).shift_confirmed);
    CHECK(*rig.cloud->last_confirmed(0) == kUnseen);

    // a different domain: confirmed again
    rig.upload(70.0, 0, kSeenB);
    rig.queue.run_until(80.0);
    verdicts = rig.sent_of(MsgType::DomainVerdict);
    REQUIRE(verdicts.size() == 3);
    CHECK(std::get<DomainVerdict>(verdicts[2]->msg.payload).shift_confirmed);
    CHECK(*rig.cloud->last_confirmed(0) == kSeenB);

    // another device's history is independent
    rig.upload(100.0, 1, kSeenB);
    rig.queue.run_until(110.0);
    verdicts = rig.sent_of(MsgType::DomainVerdict);
    REQUIRE(verdicts.size() == 4);
    CHECK(std::get<DomainVerdict>(verdicts[3]->msg.payload).shift_confirmed);
}

TEST_CASE("a garbage truth handle is rejected as a protocol error") {
    CloudRig rig;
    FrameBatchUpload up;
    up.frame_count = 30;
    up.truth_handle = 9999;
    rig.cloud->on_message(5.0, 0, WireMessage{1, up});
    auto errs = rig.all(EventKind::ProtocolError);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0]->detail == "malformed-frame-batch");
    CHECK(rig.sent_of(MsgType::DomainVerdict).empty());
}

TEST_CASE("pools cap out by dropping the oldest samples") {
    CloudRig rig;
    rig.fill_pool(10.0, 0, kUnseen, 1050);
    CHECK(rig.cloud->pool_count(kUnseen) == 1000);
    const auto ids = rig.cloud->pool_ids(kUnseen);
    REQUIRE(ids.size() == 1000);
    CHECK(ids.front() == 50); // the first 50 samples fell off
    CHECK(ids.back() == 1049);
    for (size_t i = 1; i < ids.size(); i++) CHECK(ids[i] == ids[i - 1] + 1);
}

TEST_CASE("task classification follows the active/model-present rules") {
    CloudConfig ccfg;
    ccfg.retrain_min = 100000; // keep triggers quiet; classification only
    CloudRig rig(ccfg);

    // non-leaf: always low, active or not
    rig.report(10.0, 0, kSeenA, 0.5, 0);
    CHECK(rig.cloud->classify(SemanticPath{"street", "clear"}, 0) == QueueLevel::Low);

    // active leaf without a model: high
    rig.report(12.0, 0, kUnseen, 0.22, 0);
    CHECK(rig.cloud->classify(kUnseen, 0) == QueueLevel::High);

    // active leaf with a model: mid
    CHECK(rig.cloud->classify(kSeenA, 0) == QueueLevel::Mid);

    // reports age out of the horizon (2 windows): low
    CHECK(rig.cloud->classify(kUnseen, 1) == QueueLevel::High); // still within
    CHECK(rig.cloud->classify(kUnseen, 4) == QueueLevel::Low);
    CHECK(rig.cloud->classify(kSeenA, 4) == QueueLevel::Low);
}

TEST_CASE("the retrain trigger is a strict 600-sample threshold") {
    CloudRig rig;
    rig.fill_pool(10.0, 0, kUnseen, 599);
    CHECK(rig.cloud->pool_count(kUnseen) == 599);
    rig.boundary(3);
    CHECK(rig.all(EventKind::TaskEnqueued).empty());
    CHECK_FALSE(rig.cloud->retraining());

    rig.upload(130.0, 0, kUnseen, 1);
    rig.queue.run_until(140.0);
    CHECK(rig.cloud->pool_count(kUnseen) == 600);
    rig.boundary(4);
    const auto enq = rig.all(EventKind::TaskEnqueued);
    REQUIRE(enq.size() == 1);
    CHECK(enq[0]->domain == kUnseen);
    CHECK(rig.cloud->retraining());
    CHECK(*rig.cloud->running_domain() == kUnseen);
}

TEST_CASE("a completed retrain updates the taxonomy, syncs, and serves waiters") {
    CloudRig rig;
    const uint32_t rev0 = rig.prov.tree.revision();
    CHECK_FALSE(rig.prov.tree.model_present(kUnseen));

    // device 2 wants this domain trained (it has no version at all)
    rig.queue.run_until(5.0);
    rig.cloud->on_message(5.0, 2, WireMessage{3, RetrainNotice{kUnseen, 0}});
    CHECK(rig.sent_of(MsgType::ModelDispatch).empty()); // nothing to send yet

    rig.fill_pool(10.0, 0, kUnseen, 600);
    rig.boundary(3); // enqueues and starts the task
    const auto started = rig.all(EventKind::TaskStarted);
    REQUIRE(started.size() == 1);
    const double t_start = started[0]->t;

    rig.queue.run_until(t_start + 160.0 + 1.0);
    const auto completed = rig.all(EventKind::TaskCompleted);
    REQUIRE(completed.size() == 1);
    CHECK(completed[0]->t == doctest::Approx(t_start + 160.0).epsilon(1e-12));
    CHECK(completed[0]->domain == kUnseen);

    // taxonomy of record: new leaf, model present, revision bumped
    CHECK(rig.cloud->tree().contains(kUnseen));
    CHECK(rig.cloud->tree().model_present(kUnseen));
    CHECK(rig.cloud->tree().revision() > rev0);
    CHECK(rig.cloud->model_db().count(kUnseen) == 1);
    CHECK(rig.cloud->pool_count(kUnseen) == 0); // consumed by the retrain

    // every device got a taxonomy sync; the requester also got the model
    const auto syncs = rig.sent_of(MsgType::TaxonomySync);
    REQUIRE(syncs.size() == 3);
    for (const auto* f : syncs) {
        const auto& table = std::get<TaxonomySync>(f->msg.payload).table;
        CHECK(TaxonomyTree::decode_table(table, rig.scen.schema).revision() ==
              rig.cloud->tree().revision());
    }
    const auto dispatches = rig.sent_of(MsgType::ModelDispatch);
    REQUIRE(dispatches.size() == 1);
    CHECK(dispatches[0]->device == 2);
    const auto& dm = std::get<ModelDispatch>(dispatches[0]->msg.payload);
    CHECK(dm.model.home == kUnseen);
    CHECK(dm.model.version == 1);

    // a notice for a version we already beat is answered immediately
    rig.queue.run_until(600.0);
    rig.cloud->on_message(600.0, 1, WireMessage{2, RetrainNotice{kUnseen, 0}});
    const auto after = rig.sent_of(MsgType::ModelDispatch);
    REQUIRE(after.size() == 2);
    CHECK(after[1]->device == 1);
    CHECK(std::get<ModelDispatch>(after[1]->msg.payload).model.home == kUnseen);
}

TEST_CASE("the mid queue drains in ascending-accuracy order, non-preemptively") {
    CloudRig rig;
    // occupy the processor with a high task (active unseen domain)
    rig.fill_pool(10.0, 0, kUnseen, 600);
    rig.report(95.0, 0, kUnseen, 0.2, 2);
    rig.boundary(2);
    REQUIRE(rig.cloud->retraining());
    REQUIRE(*rig.cloud->running_domain() == kUnseen);
    const double t_high = rig.all(EventKind::TaskStarted)[0]->t;

    // three model-present domains gather data and degraded reports
    rig.fill_pool(95.0, 1, kSeenA, 600);
    rig.fill_pool(96.0, 2, kSeenB, 600);
    rig.fill_pool(97.0, 0, kSeenC, 600);
    rig.report(149.0, 1, kSeenA, 0.40, 4);
    rig.report(149.0, 2, kSeenB, 0.25, 4);
    rig.report(149.0, 0, kSeenC, 0.31, 4);
    rig.boundary(4);

    // the three leaves wait as mid entries; ancestors with data from two
    // subdomains (street/clear, street/rainy, street) also queue, as low
    const auto& pending = rig.cloud->pending_tasks();
    REQUIRE(pending.size() == 6);
    size_t mids = 0, lows = 0;
    for (const auto& t : pending) {
        if (t.level == QueueLevel::Mid) mids++;
        if (t.level == QueueLevel::Low) lows++;
    }
    CHECK(mids == 3);
    CHECK(lows == 3);

    rig.queue.run_until(t_high + 3 * 160.0 + 170.0);
    const auto started = rig.all(EventKind::TaskStarted);
    REQUIRE(started.size() == 4);
    CHECK(started[0]->domain == kUnseen);
    CHECK(started[1]->domain == kSeenB); // 0.25
    CHECK(started[2]->domain == kSeenC); // 0.31
    CHECK(started[3]->domain == kSeenA); // 0.40

    // the leaf retrains drained every pool, so the queued interior tasks
    // fail their sufficiency recheck instead of running on stale data
    CHECK(rig.all(EventKind::TaskAborted).size() == 3);

    // non-preemptive: each start coincides with the predecessor's completion
    const auto completed = rig.all(EventKind::TaskCompleted);
    REQUIRE(completed.size() == 4);
    for (size_t i = 1; i < 4; i++)
        CHECK(started[i]->t == doctest::Approx(completed[i - 1]->t).epsilon(1e-12));

    // versions advanced for the retrained seen domains
    CHECK(rig.cloud->model_db().at(kSeenB).version == 2);
    CHECK(rig.cloud->tree().model_version(kSeenB) == 2);

    // taxonomy sync revisions strictly increase per device
    uint32_t last_rev = 0;
    for (const auto* f : rig.sent_of(MsgType::TaxonomySync)) {
        if (f->device != 0) continue;
        const auto rev = TaxonomyTree::decode_table(
                             std::get<TaxonomySync>(f->msg.payload).table, rig.scen.schema)
                             .revision();
        CHECK(rev > last_rev);
        last_rev = rev;
    }
}

TEST_CASE("equal mid keys fall back to enqueue order") {
    CloudRig rig;
    // processor busy with a long task first
    rig.fill_pool(10.0, 0, kUnseen, 600);
    rig.boundary(2);
    REQUIRE(rig.cloud->retraining());

    // kSeenB enqueues a window before kSeenA, same accuracy key
    rig.fill_pool(95.0, 1, kSeenB, 600);
    rig.report(118.0, 1, kSeenB, 0.25, 3);
    rig.boundary(3);
    rig.fill_pool(125.0, 2, kSeenA, 600);
    rig.report(148.0, 2, kSeenA, 0.25, 4);
    rig.report(148.0, 1, kSeenB, 0.25, 4); // keep B active too
    rig.boundary(4);
    size_t mids = 0;
    for (const auto& t : rig.cloud->pending_tasks())
        if (t.level == QueueLevel::Mid) mids++;
    REQUIRE(mids == 2); // interior low tasks may queue behind them

    rig.queue.run_until(700.0);
    const auto started = rig.all(EventKind::TaskStarted);
    REQUIRE(started.size() >= 3);
    CHECK(started[1]->domain == kSeenB);
    CHECK(started[2]->domain == kSeenA);
}

TEST_CASE("interior nodes retrain on balanced draws from two subdomains") {
    CloudRig rig;
    // 500/300 under street/clear: neither leaf reaches 600, the parent does
    rig.fill_pool(10.0, 0, kSeenA, 500);
    rig.fill_pool(60.0, 1, kSeenB, 300);
    rig.boundary(3);

    const auto enq = rig.all(EventKind::TaskEnqueued);
    REQUIRE(enq.size() == 1);
    CHECK(enq[0]->domain == SemanticPath{"street", "clear"});
    CHECK(enq[0]->detail == "low"); // non-leaf: always the low queue

    rig.queue.run_until(30.0 * 4 + 170.0);
    const auto completed = rig.all(EventKind::TaskCompleted);
    REQUIRE(completed.size() == 1);
    CHECK(completed[0]->domain == SemanticPath{"street", "clear"});

    // balanced consumption: 300 oldest from each side
    CHECK(rig.cloud->pool_count(kSeenA) == 200);
    CHECK(rig.cloud->pool_count(kSeenB) == 0);
    const auto left = rig.cloud->pool_ids(kSeenA);
    CHECK(left.front() == 300); // oldest 300 ids (0..299) consumed

    // the interior model sits one hop from both children: symmetric accuracy
    const auto& m = rig.cloud->model_db().at(SemanticPath{"street", "clear"});
    CHECK(rig.world.oracle_accuracy(m, kSeenA) ==
          doctest::Approx(rig.world.oracle_accuracy(m, kSeenB)).epsilon(1e-12));
    CHECK(rig.cloud->tree().model_present(SemanticPath{"street", "clear"}));
}

TEST_CASE("one subdomain alone never triggers an interior retrain") {
    CloudRig rig;
    rig.fill_pool(10.0, 0, kSeenA, 599);
    rig.boundary(3);
    rig.boundary(4);
    CHECK(rig.all(EventKind::TaskEnqueued).empty());
    CHECK_FALSE(rig.cloud->retraining());
}

TEST_CASE("model requests answer from the database or nack") {
    CloudRig rig;
    rig.queue.run_until(5.0);
    rig.cloud->on_message(5.0, 0, WireMessage{1, ModelRequest{kSeenA}});
    rig.cloud->on_message(6.0, 1, WireMessage{2, ModelRequest{kUnseen2}});

    const auto dispatches = rig.sent_of(MsgType::ModelDispatch);
    REQUIRE(dispatches.size() == 2);
    const auto& hit = std::get<ModelDispatch>(dispatches[0]->msg.payload);
    CHECK(dispatches[0]->device == 0);
    CHECK_FALSE(hit.is_nack());
    CHECK(hit.model.home == kSeenA);
    CHECK(hit.model.weight_bytes > 0);

    const auto& nack = std::get<ModelDispatch>(dispatches[1]->msg.payload);
    CHECK(dispatches[1]->device == 1);
    CHECK(nack.is_nack());
    CHECK(nack.model.home == kUnseen2);
    CHECK(nack.model.weight_bytes == 0);
}

TEST_CASE("pending tasks are reclassified when their domain goes quiet") {
    CloudRig rig;
    // busy processor, then a mid task whose reports age out
    rig.fill_pool(10.0, 0, kUnseen, 600);
    rig.boundary(2);
    REQUIRE(rig.cloud->retraining());

    rig.fill_pool(95.0, 1, kSeenA, 600);
    rig.report(118.0, 1, kSeenA, 0.3, 3);
    rig.boundary(3);
    auto level_of = [&](const SemanticPath& dom) -> std::optional<QueueLevel> {
        for (const auto& t : rig.cloud->pending_tasks())
            if (t.domain == dom) return t.level;
        return std::nullopt;
    };
    REQUIRE(level_of(kSeenA).has_value());
    CHECK(*level_of(kSeenA) == QueueLevel::Mid);

    // no further reports: after the horizon passes, the task drops to low
    rig.boundary(4);
    rig.boundary(5);
    rig.boundary(6);
    REQUIRE(level_of(kSeenA).has_value());
    CHECK(*level_of(kSeenA) == QueueLevel::Low);
    bool reclassified = false;
    for (const auto& r : rig.log.records())
        if (r.kind == EventKind::TaskReclassified && r.domain == kSeenA && r.detail == "low")
            reclassified = true;
    CHECK(reclassified);
}
