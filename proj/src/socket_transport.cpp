#include "mocsim/socket_transport.hpp"

#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mocsim/cloud_server.hpp"
#include "mocsim/mobile_agent.hpp"
#include "mocsim/runtime.hpp"
#include "mocsim/wire.hpp"

namespace mocsim {

namespace {

using SteadyClock = std::chrono::steady_clock;

struct WallClock {
    SteadyClock::time_point t0;
    double scale = 0.01;

    double now() const {
        return std::chrono::duration<double>(SteadyClock::now() - t0).count() / scale;
    }
    SteadyClock::time_point wall_at(double virtual_t) const {
        return t0 + std::chrono::duration_cast<SteadyClock::duration>(
                        std::chrono::duration<double>(virtual_t * scale));
    }
};

/*
 * Timer heap paced against the wall clock.  Callbacks run on the worker
 * thread while holding the owning entity's mutex, mirroring the
 * single-threaded discipline the state machines were written for.
 */
class WallScheduler : public Scheduler {
public:
    WallScheduler(const WallClock* clock, std::mutex* entity_mutex)
        : clock_(clock), entity_(entity_mutex) {}

    ~WallScheduler() override { stop(); }

    void call_at(double t, std::function<void()> fn) override {
        {
            std::lock_guard<std::mutex> lk(m_);
            heap_.push(Entry{t, seq_++, std::move(fn)});
        }
        cv_.notify_all();
    }

    void start() {
        worker_ = std::thread([this] { run(); });
    }

    void stop() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        if (worker_.joinable()) worker_.join();
    }

private:
    struct Entry {
        double t;
        uint64_t seq;
        std::function<void()> fn;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            if (a.t != b.t) return a.t > b.t;
            return a.seq > b.seq;
        }
    };

    void run() {
        std::unique_lock<std::mutex> lk(m_);
        while (!stop_) {
            if (heap_.empty()) {
                cv_.wait(lk);
                continue;
            }
            const auto deadline = clock_->wall_at(heap_.top().t);
            if (SteadyClock::now() < deadline) {
                cv_.wait_until(lk, deadline);
                continue;
            }
            Entry e = heap_.top();
            heap_.pop();
            lk.unlock();
            {
                std::lock_guard<std::mutex> entity_lk(*entity_);
                e.fn();
            }
            lk.lock();
        }
    }

    const WallClock* clock_;
    std::mutex* entity_;
    std::mutex m_;
    std::condition_variable cv_;
    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    uint64_t seq_ = 0;
    bool stop_ = false;
    std::thread worker_;
};

// Outbound byte queue with its own writer thread, so sends never block the
// entity mutex on TCP backpressure (which could deadlock two full-duplex
// peers mid-transfer).
class FrameWriter {
public:
    explicit FrameWriter(int fd) : fd_(fd) {
        worker_ = std::thread([this] { run(); });
    }
    ~FrameWriter() { stop(); }

    void send(std::vector<uint8_t> bytes) {
        {
            std::lock_guard<std::mutex> lk(m_);
            if (stop_) return;
            q_.push_back(std::move(bytes));
        }
        cv_.notify_all();
    }

    void stop() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        if (worker_.joinable()) worker_.join();
    }

private:
    void run() {
        for (;;) {
            std::vector<uint8_t> buf;
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_.wait(lk, [this] { return stop_ || !q_.empty(); });
                if (q_.empty()) return; // stop requested and drained
                buf = std::move(q_.front());
                q_.pop_front();
            }
            size_t off = 0;
            while (off < buf.size()) {
                const ssize_t n = ::send(fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
                if (n <= 0) return;
                off += static_cast<size_t>(n);
            }
        }
    }

    int fd_;
    std::mutex m_;
    std::condition_variable cv_;
    std::deque<std::vector<uint8_t>> q_;
    bool stop_ = false;
    std::thread worker_;
};

int make_listener(uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket() failed");
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw std::runtime_error("bind() failed (port in use?)");
    }
    if (::listen(fd, 64) != 0) {
        ::close(fd);
        throw std::runtime_error("listen() failed");
    }
    return fd;
}

int connect_loopback(uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw std::runtime_error("connect() failed");
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

// pull frames off a socket until it closes; returns false on transport error
template <typename Fn>
bool read_frames(int fd, const std::atomic<bool>& stopping, Fn&& on_frame) {
    FrameParser parser;
    std::vector<uint8_t> buf(1 << 16);
    for (;;) {
        const ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
        if (n <= 0) return stopping.load();
        parser.feed(buf.data(), static_cast<size_t>(n));
        WireMessage msg;
        while (parser.next(msg)) {
            if (!on_frame(msg)) return true; // orderly stop requested by handler
        }
    }
}

} // namespace

EventLog run_scenario_socket(const ScenarioConfig& cfg_in, const MessageTap* tap) {
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
    const VariantTraits traits = variant_traits(cfg.variant);
    const size_t n = cfg.devices;

    World world(cfg.world, cfg.domains);
    const Provisioning prov = provision(world, cfg.schema);
    const auto traces = build_traces(world, cfg);

    WallClock clock;
    clock.scale = cfg.socket_time_scale;
    clock.t0 = SteadyClock::now() + std::chrono::milliseconds(50 + 10 * static_cast<int>(n));

    std::atomic<bool> stopping{false};
    std::mutex tap_mutex;
    const auto tap_send = [&](bool uplink, size_t device, const WireMessage& msg) {
        if (!tap || !tap->on_send) return;
        std::lock_guard<std::mutex> lk(tap_mutex);
        tap->on_send(uplink, device, msg);
    };

    // ---- cloud side ----
    const int listener = make_listener(cfg.socket_port);
    std::mutex cloud_mutex;
    EventLog cloud_log;
    WallScheduler cloud_sched(&clock, &cloud_mutex);

    std::vector<std::unique_ptr<FrameWriter>> down_writers(n);
    std::vector<int> cloud_fds(n, -1);
    std::mutex ready_mutex;
    std::condition_variable ready_cv;
    size_t cloud_ready = 0;

    CloudConfig ccfg;
    ccfg.traits = traits;
    ccfg.seed = cfg.seed;
    ccfg.devices = n;
    ccfg.window_s = cfg.window_s;
    ccfg.retrain_s = cfg.retrain_s;
    ccfg.pool_cap = cfg.pool_cap;
    ccfg.retrain_min = cfg.retrain_min;
    ccfg.active_horizon_windows = cfg.active_horizon_windows;
    ccfg.fm_s_per_frame = cfg.fm_s_per_frame;
    ccfg.fm_frames_per_batch = cfg.fm_frames_per_batch;
    ccfg.annotate_s_per_frame = cfg.annotate_s_per_frame;
    ccfg.mlq = cfg.mlq_enabled();

    CloudServer cloud(ccfg, &world, prov.tree, prov.db, &cloud_sched, &cloud_log,
                      [&](double, size_t device, const WireMessage& msg) {
                          WireMessage framed = msg;
                          framed.device_id = device + 1;
                          tap_send(false, device, framed);
                          if (down_writers[device]) down_writers[device]->send(encode_frame(framed));
                      });

    // accept + handshake + per-connection cloud read loops
    std::vector<std::thread> cloud_threads;
    std::thread acceptor([&] {
        for (size_t i = 0; i < n; ++i) {
            const int fd = ::accept(listener, nullptr, nullptr);
            if (fd < 0) return;
            const int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            cloud_threads.emplace_back([&, fd] {
                size_t index = SIZE_MAX;
                const bool clean = read_frames(fd, stopping, [&](const WireMessage& msg) {
                    if (index == SIZE_MAX) {
                        // handshake: first frame must be a hello with id 0
                        if (message_type(msg) != MsgType::Hello || msg.device_id != 0) return false;
                        size_t assigned;
                        {
                            std::lock_guard<std::mutex> lk(cloud_mutex);
                            assigned = cloud.assign_device_id();
                        }
                        index = assigned - 1;
                        WireMessage ack;
                        ack.device_id = assigned;
                        ack.payload = Hello{};
                        {
                            std::lock_guard<std::mutex> lk(ready_mutex);
                            cloud_fds[index] = fd;
                            down_writers[index] = std::make_unique<FrameWriter>(fd);
                            ++cloud_ready;
                        }
                        down_writers[index]->send(encode_frame(ack));
                        ready_cv.notify_all();
                        return true;
                    }
                    std::lock_guard<std::mutex> lk(cloud_mutex);
                    cloud.on_message(clock.now(), index, msg);
                    return true;
                });
                if (!clean && index != SIZE_MAX) {
                    std::lock_guard<std::mutex> lk(cloud_mutex);
                    auto& r = cloud_log.append(clock.now(), EventKind::DeviceOffline);
                    r.device = static_cast<int64_t>(index);
                    r.detail = "channel-error";
                }
            });
        }
    });

    // ---- device side ----
    struct DeviceRun {
        std::mutex mutex;
        EventLog log;
        std::unique_ptr<WallScheduler> sched;
        std::unique_ptr<FrameWriter> writer;
        std::unique_ptr<MobileAgent> agent;
        int fd = -1;
    };
    std::vector<DeviceRun> devs(n);
    std::vector<std::thread> device_threads;

    for (size_t slot = 0; slot < n; ++slot) {
        device_threads.emplace_back([&, slot] {
            (void)slot; // identity comes from the handshake, not spawn order
            int fd;
            try {
                fd = connect_loopback(cfg.socket_port);
            } catch (const std::exception&) {
                return;
            }
            WireMessage hello;
            hello.device_id = 0;
            hello.payload = Hello{};
            const auto bytes = encode_frame(hello);
            size_t off = 0;
            while (off < bytes.size()) {
                const ssize_t k = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
                if (k <= 0) {
                    ::close(fd);
                    return;
                }
                off += static_cast<size_t>(k);
            }

            size_t d = SIZE_MAX; // our index once the hello ack arrives
            const bool clean = read_frames(fd, stopping, [&](const WireMessage& msg) {
                if (d == SIZE_MAX) {
                    if (message_type(msg) != MsgType::Hello || msg.device_id == 0) return false;
                    d = static_cast<size_t>(msg.device_id) - 1;
                    if (d >= n) return false;
                    DeviceRun& run = devs[d];
                    run.fd = fd;
                    run.sched = std::make_unique<WallScheduler>(&clock, &run.mutex);
                    run.writer = std::make_unique<FrameWriter>(fd);

                    AgentConfig acfg;
                    acfg.device_id = d;
                    acfg.traits = traits;
                    acfg.seed = cfg.seed;
                    acfg.window_s = cfg.window_s;
                    acfg.detector_k = cfg.detector_k;
                    acfg.accuracy_threshold = cfg.accuracy_threshold;
                    acfg.cache_slots = traits.use_cache ? cfg.cache_slots : 1;
                    acfg.upload_frames_per_window = cfg.upload_frames_per_window;
                    acfg.detector_samples = cfg.detector_samples;
                    acfg.eval_samples = cfg.eval_samples;
                    acfg.ft_min_samples = cfg.ft_min_samples;
                    acfg.ft_iterations = cfg.ft_iterations;
                    acfg.onboard_load_s = cfg.onboard_load_s;
                    acfg.finetune_s = cfg.finetune_s;
                    acfg.prefetch = cfg.prefetch;
                    acfg.bytes_per_frame = cfg.bytes_per_frame;
                    auto off_it = cfg.offline_windows.find(static_cast<int64_t>(d));
                    if (off_it != cfg.offline_windows.end()) acfg.offline = off_it->second;

                    run.agent = std::make_unique<MobileAgent>(
                        acfg, &world, traces[d], prov.tree,
                        initial_model_for(prov, traces[d].front().domain), run.sched.get(),
                        &run.log, [&, d](double, const WireMessage& out) {
                            WireMessage framed = out;
                            framed.device_id = d + 1;
                            tap_send(true, d, framed);
                            devs[d].writer->send(encode_frame(framed));
                        });

                    {
                        std::lock_guard<std::mutex> lk(run.mutex);
                        run.agent->start(0.0);
                        for (size_t w = 0; w < cfg.duration_windows; ++w) {
                            const double t = static_cast<double>(w + 1) * cfg.window_s;
                            const int64_t closing = static_cast<int64_t>(w);
                            MobileAgent* agent = run.agent.get();
                            run.sched->call_at(
                                t, [agent, t, closing] { agent->on_window_boundary(t, closing); });
                        }
                    }
                    run.sched->start();
                    return true;
                }
                DeviceRun& run = devs[d];
                std::lock_guard<std::mutex> lk(run.mutex);
                run.agent->on_message(clock.now(), msg);
                return true;
            });
            if (!clean && d != SIZE_MAX && devs[d].agent) {
                std::lock_guard<std::mutex> lk(devs[d].mutex);
                auto& r = devs[d].log.append(clock.now(), EventKind::DeviceOffline);
                r.device = static_cast<int64_t>(d);
                r.detail = "channel-error";
            }
        });
    }

    // cloud boundaries, once every connection is up
    {
        std::unique_lock<std::mutex> lk(ready_mutex);
        ready_cv.wait(lk, [&] { return cloud_ready == n; });
    }
    for (size_t w = 0; w < cfg.duration_windows; ++w) {
        const double t = static_cast<double>(w + 1) * cfg.window_s;
        const int64_t closing = static_cast<int64_t>(w);
        cloud_sched.call_at(t, [&cloud, t, closing] { cloud.on_window_boundary(t, closing); });
    }
    cloud_sched.start();

    // let the run play out, plus a drain margin for in-flight transfers
    const double end_t = static_cast<double>(cfg.duration_windows) * cfg.window_s;
    std::this_thread::sleep_until(clock.wall_at(end_t));
    std::this_thread::sleep_for(std::chrono::milliseconds(200));

    stopping.store(true);
    cloud_sched.stop();
    for (auto& run : devs)
        if (run.sched) run.sched->stop();
    for (auto& run : devs) {
        if (run.writer) run.writer->stop();
        if (run.fd >= 0) ::shutdown(run.fd, SHUT_RDWR);
    }
    for (auto& w : down_writers)
        if (w) w->stop();
    for (int fd : cloud_fds)
        if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    ::shutdown(listener, SHUT_RDWR);
    ::close(listener);

    for (auto& t : device_threads) t.join();
    acceptor.join();
    for (auto& t : cloud_threads) t.join();
    for (auto& run : devs)
        if (run.fd >= 0) ::close(run.fd);
    for (int fd : cloud_fds)
        if (fd >= 0) ::close(fd);

    // merge the per-entity journals into one timestamp-ordered log
    std::vector<const LogRecord*> all;
    for (const auto& run : devs)
        for (const auto& r : run.log.records()) all.push_back(&r);
    for (const auto& r : cloud_log.records()) all.push_back(&r);
    std::stable_sort(all.begin(), all.end(),
                     [](const LogRecord* a, const LogRecord* b) { return a->t < b->t; });
    EventLog merged;
    for (const LogRecord* r : all) {
        LogRecord& m = merged.append(r->t, r->kind);
        const uint64_t seq = m.seq;
        m = *r;
        m.seq = seq;
    }
    return merged;
}

} // namespace mocsim
