#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mocsim/metrics.hpp"
#include "mocsim/simulation.hpp"
#include "mocsim/socket_transport.hpp"

namespace fs = std::filesystem;
using namespace mocsim;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> variants;
    std::vector<size_t> devices;
    std::vector<uint64_t> seeds;
    std::string out_dir = "out";
    std::string transport = "sim";
    uint16_t port = 0;
};

ScenarioConfig base_config(const CommonOpts& o) {
    ScenarioConfig cfg =
        o.config_path.empty() ? default_scenario() : ScenarioConfig::load_file(o.config_path);
    if (o.port) cfg.socket_port = o.port;
    return cfg;
}

ScenarioConfig apply_overrides(ScenarioConfig cfg, const std::optional<std::string>& variant,
                               std::optional<size_t> devices, std::optional<uint64_t> seed) {
    if (variant) cfg.variant = variant_from_name(*variant);
    if (devices) cfg.devices = *devices;
    if (seed) cfg.seed = *seed;
    cfg.world.seed = cfg.seed;
    return cfg;
}

// recovery horizons come from the slowest variant's deploy times on the same
// traces; that shadow run is always simulated, so metrics stay deterministic
RecoveryAnchors anchors_for(const ScenarioConfig& cfg,
                            std::map<std::pair<size_t, uint64_t>, RecoveryAnchors>* cache) {
    if (!cfg.anchored_horizons) return {};
    if (cache) {
        auto it = cache->find({cfg.devices, cfg.seed});
        if (it != cache->end()) return it->second;
    }
    ScenarioConfig shadow = cfg;
    shadow.variant = Variant::CloudRetrainOnly;
    RecoveryAnchors anchors = extract_recovery_anchors(run_scenario(shadow));
    if (cache) (*cache)[{cfg.devices, cfg.seed}] = anchors;
    return anchors;
}

MetricsReport analyze(const EventLog& log, const ScenarioConfig& cfg,
                      std::map<std::pair<size_t, uint64_t>, RecoveryAnchors>* cache) {
    if (!cfg.anchored_horizons) return compute_metrics(log, cfg, nullptr);
    const RecoveryAnchors anchors = anchors_for(cfg, cache);
    return compute_metrics(log, cfg, &anchors);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_log(const fs::path& path, const EventLog& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    log.to_jsonl(out);
}

void print_summary(const MetricsReport& m) {
    std::printf("%-16s devices=%zu seed=%llu windows=%zu\n", m.variant.c_str(), m.devices,
                static_cast<unsigned long long>(m.seed), m.duration_windows);
    std::printf("  shifts %zu | alarms %zu | confirmed %zu | false alarms %zu\n", m.trace_shifts,
                m.alarms, m.confirmed_shifts, m.false_alarms);
    std::printf("  resolved %zu (reuse %.2f / fine-tune %.2f / retrain %.2f), unresolved %zu\n",
                m.resolved, m.ratio_reuse, m.ratio_fine_tune, m.ratio_retrain, m.unresolved);
    std::printf("  response delay %.3f s | cache-hit delay %.3f s | hit rate %.2f (%zu/%zu)\n",
                m.mean_response_delay_s, m.mean_cache_hit_delay_s, m.cache_hit_rate, m.cache_hits,
                m.cache_lookups);
    std::printf("  retrains %zu (+%zu aborted), turnaround %.1f s\n", m.retrains_completed,
                m.retrains_aborted, m.mean_retrain_time_s);
    std::printf("  recovery accuracy %.4f | window accuracy %.4f\n", m.mean_recovery_accuracy,
                m.mean_window_accuracy);
}

int cmd_run(const CommonOpts& o) {
    ScenarioConfig cfg = apply_overrides(
        base_config(o), o.variants.empty() ? std::nullopt : std::optional(o.variants.front()),
        o.devices.empty() ? std::nullopt : std::optional(o.devices.front()),
        o.seeds.empty() ? std::nullopt : std::optional(o.seeds.front()));
    {
        const auto problems = cfg.validate();
        if (!problems.empty()) {
            for (const auto& p : problems) std::cerr << "config error: " << p << "\n";
            return 1;
        }
    }
    fs::create_directories(o.out_dir);

    EventLog log = o.transport == "socket" ? run_scenario_socket(cfg) : run_scenario(cfg);
    const MetricsReport m = analyze(log, cfg, nullptr);

    write_log(fs::path(o.out_dir) / "events.jsonl", log);
    write_file(fs::path(o.out_dir) / "metrics.csv",
               metrics_csv_header() + "\n" + metrics_csv_row(m) + "\n");
    write_file(fs::path(o.out_dir) / "config.json", cfg.to_json());
    print_summary(m);
    if (o.transport == "socket")
        std::printf("  (socket transport: timing measured, metrics approximate)\n");
    std::printf("wrote %s/{events.jsonl,metrics.csv,config.json}\n", o.out_dir.c_str());
    return 0;
}

int cmd_matrix(const CommonOpts& o) {
    const ScenarioConfig base = base_config(o);
    std::vector<std::string> variants = o.variants;
    if (variants.empty())
        variants = {"Mocha", "NoAdapt", "CloudReuseOnly", "CloudRetrainOnly",
                    "EmbeddingReuse", "MochaNoFT", "MochaNoCache"};
    std::vector<size_t> devices = o.devices.empty() ? std::vector<size_t>{base.devices} : o.devices;
    std::vector<uint64_t> seeds = o.seeds.empty() ? std::vector<uint64_t>{base.seed} : o.seeds;

    fs::create_directories(o.out_dir);
    std::ostringstream csv;
    csv << metrics_csv_header() << "\n";
    std::map<std::pair<size_t, uint64_t>, RecoveryAnchors> anchor_cache;
    size_t failures = 0;

    std::printf("%-16s %7s %6s %9s %9s %8s %9s %9s\n", "variant", "devices", "seed", "resp_s",
                "hit_s", "hit_rate", "recovery", "accuracy");
    for (const auto& v : variants) {
        for (size_t d : devices) {
            for (uint64_t s : seeds) {
                try {
                    const ScenarioConfig cfg = apply_overrides(base, v, d, s);
                    const auto problems = cfg.validate();
                    if (!problems.empty()) throw std::runtime_error(problems.front());
                    EventLog log =
                        o.transport == "socket" ? run_scenario_socket(cfg) : run_scenario(cfg);
                    const MetricsReport m = analyze(log, cfg, &anchor_cache);
                    csv << metrics_csv_row(m) << "\n";
                    std::printf("%-16s %7zu %6llu %9.3f %9.3f %8.2f %9.4f %9.4f\n", v.c_str(), d,
                                static_cast<unsigned long long>(s), m.mean_response_delay_s,
                                m.mean_cache_hit_delay_s, m.cache_hit_rate,
                                m.mean_recovery_accuracy, m.mean_window_accuracy);
                } catch (const std::exception& e) {
                    ++failures;
                    std::fprintf(stderr, "FAILED %s devices=%zu seed=%llu: %s\n", v.c_str(), d,
                                 static_cast<unsigned long long>(s), e.what());
                }
            }
        }
    }
    write_file(fs::path(o.out_dir) / "metrics.csv", csv.str());
    std::printf("wrote %s/metrics.csv\n", o.out_dir.c_str());
    if (failures) std::fprintf(stderr, "%zu run(s) failed; results are partial\n", failures);
    return failures ? 1 : 0;
}

int cmd_replay(const CommonOpts& o, const std::string& log_path) {
    std::string config_path = o.config_path;
    if (config_path.empty()) {
        // a run directory carries its resolved config next to the log
        const fs::path sibling = fs::path(log_path).parent_path() / "config.json";
        if (fs::exists(sibling)) config_path = sibling.string();
    }
    if (config_path.empty()) {
        std::cerr << "replay needs --config (or a config.json next to the log)\n";
        return 1;
    }
    ScenarioConfig cfg = ScenarioConfig::load_file(config_path);
    std::ifstream in(log_path, std::ios::binary);
    if (!in) {
        std::cerr << "cannot read " << log_path << "\n";
        return 1;
    }
    EventLog log = EventLog::from_jsonl(in);
    const MetricsReport m = analyze(log, cfg, nullptr);
    std::cout << metrics_csv_header() << "\n" << metrics_csv_row(m) << "\n";
    if (!o.out_dir.empty() && o.out_dir != "-") {
        fs::create_directories(o.out_dir);
        write_file(fs::path(o.out_dir) / "metrics.csv",
                   metrics_csv_header() + "\n" + metrics_csv_row(m) + "\n");
    }
    return 0;
}

int cmd_validate(const CommonOpts& o) {
    ScenarioConfig cfg;
    try {
        cfg = base_config(o);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    const auto problems = cfg.validate();
    if (problems.empty()) {
        std::printf("ok: %zu domains, %zu devices, %zu windows, variant %s\n", cfg.domains.size(),
                    cfg.devices, cfg.duration_windows, variant_name(cfg.variant));
        return 0;
    }
    for (const auto& p : problems) std::printf("problem: %s\n", p.c_str());
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mocsim: hierarchical mobile-cloud model adaptation simulator"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string replay_log;

    const auto add_common = [&](CLI::App* cmd, bool lists) {
        cmd->add_option("--config", o.config_path, "scenario config file (JSON)");
        cmd->add_option("--out", o.out_dir, "output directory")->capture_default_str();
        cmd->add_option("--transport", o.transport, "channel binding")
            ->check(CLI::IsMember({"sim", "socket"}))
            ->capture_default_str();
        cmd->add_option("--port", o.port, "socket transport port override");
        auto* var = cmd->add_option("--variant", o.variants,
                                    lists ? "framework variant(s)" : "framework variant");
        auto* dev = cmd->add_option("--devices", o.devices,
                                    lists ? "device count(s)" : "device count");
        auto* seed = cmd->add_option("--seed", o.seeds, lists ? "seed(s)" : "seed");
        var->delimiter(',');
        dev->delimiter(',');
        seed->delimiter(',');
        if (!lists) {
            var->expected(0, 1);
            dev->expected(0, 1);
            seed->expected(0, 1);
        }
    };

    auto* run = app.add_subcommand("run", "run one scenario, write log + metrics");
    add_common(run, false);
    auto* matrix = app.add_subcommand("matrix", "run a variant/devices/seed grid");
    add_common(matrix, true);
    auto* replay = app.add_subcommand("replay", "recompute metrics from a saved event log");
    replay->add_option("log", replay_log, "events.jsonl from a previous run")->required();
    add_common(replay, false);
    auto* validate = app.add_subcommand("validate", "check a scenario config");
    add_common(validate, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(o);
        if (matrix->parsed()) return cmd_matrix(o);
        if (replay->parsed()) return cmd_replay(o, replay_log);
        if (validate->parsed()) return cmd_validate(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
