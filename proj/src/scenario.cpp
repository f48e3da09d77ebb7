#include "mocsim/scenario.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mocsim {

namespace {

constexpr const char* kVariantNames[] = {
    "Mocha", "NoAdapt", "CloudReuseOnly", "CloudRetrainOnly",
    "EmbeddingReuse", "MochaNoFT", "MochaNoCache",
};
constexpr size_t kVariantCount = sizeof(kVariantNames) / sizeof(kVariantNames[0]);

using nlohmann::json;
using nlohmann::ordered_json;

} // namespace

const char* variant_name(Variant v) {
    const auto i = static_cast<size_t>(v);
    if (i >= kVariantCount) throw std::out_of_range("unknown variant");
    return kVariantNames[i];
}

Variant variant_from_name(const std::string& name) {
    for (size_t i = 0; i < kVariantCount; ++i)
        if (name == kVariantNames[i]) return static_cast<Variant>(i);
    throw std::invalid_argument("unknown variant: " + name);
}

VariantTraits variant_traits(Variant v) {
    VariantTraits t;
    switch (v) {
        case Variant::Mocha:
            break;
        case Variant::MochaNoFT:
            t.fine_tune = false;
            break;
        case Variant::MochaNoCache:
            t.use_cache = false;
            break;
        case Variant::NoAdapt:
            t.adapt = false;
            t.onboard_detect = false;
            t.reuse = false;
            t.use_cache = false;
            t.fine_tune = false;
            break;
        case Variant::CloudReuseOnly:
            t.onboard_detect = false;
            t.continuous_upload = true;
            t.use_cache = false;
            t.fine_tune = false;
            t.cloud_auto_dispatch = true;
            t.mlq_default = false;
            break;
        case Variant::CloudRetrainOnly:
            t.reuse = false;
            t.use_cache = false;
            t.fine_tune = false;
            t.retrain_on_every_shift = true;
            t.mlq_default = false;
            break;
        case Variant::EmbeddingReuse:
            t.onboard_detect = false;
            t.continuous_upload = true;
            t.use_cache = false;
            t.fine_tune = false;
            t.cloud_auto_dispatch = true;
            t.centroid_selection = true;
            t.mlq_default = false;
            break;
    }
    return t;
}

std::string ScenarioConfig::to_json() const {
    ordered_json j;
    ordered_json jschema = ordered_json::array();
    for (const auto& dim : schema.dimensions)
        jschema.push_back({{"name", dim.name}, {"values", dim.values}});
    j["schema"] = jschema;

    ordered_json jdomains = ordered_json::array();
    for (const auto& d : domains)
        jdomains.push_back({{"path", d.path.to_string()},
                            {"difficulty", d.difficulty},
                            {"pretrained", d.pretrained}});
    j["domains"] = jdomains;

    j["world"] = {{"feature_dim", world.feature_dim},
                  {"classes_per_domain", world.classes_per_domain},
                  {"class_offset", world.class_offset},
                  {"level_scales", world.level_scales},
                  {"noise_scale", world.noise_scale},
                  {"window_spread", world.window_spread},
                  {"teacher_flip", world.teacher_flip},
                  {"fm_error", world.fm_error},
                  {"model_weight_bytes", world.model_weight_bytes},
                  {"fit_samples", world.fit_samples}};
    j["accuracy"] = {{"a_max", world.accuracy.a_max},
                     {"a_floor", world.accuracy.a_floor},
                     {"beta", world.accuracy.beta},
                     {"delta_ft", world.accuracy.delta_ft},
                     {"lambda0", world.accuracy.lambda0},
                     {"difficulty_weight", world.accuracy.difficulty_weight}};
    j["trace"] = {{"shifts", trace.shifts},
                  {"dwell_min", trace.dwell_min},
                  {"dwell_max", trace.dwell_max},
                  {"p_local", trace.p_local},
                  {"local_radius", trace.local_radius}};
    j["link"] = {{"bandwidth_bps", link.bandwidth_bps},
                 {"latency_s", link.latency_s},
                 {"bytes_per_frame", bytes_per_frame}};
    j["agent"] = {{"window_s", window_s},
                  {"detector_k", detector_k},
                  {"accuracy_threshold", accuracy_threshold},
                  {"cache_slots", cache_slots},
                  {"upload_frames_per_window", upload_frames_per_window},
                  {"detector_samples", detector_samples},
                  {"eval_samples", eval_samples},
                  {"ft_min_samples", ft_min_samples},
                  {"ft_iterations", ft_iterations},
                  {"onboard_load_s", onboard_load_s},
                  {"finetune_s", finetune_s},
                  {"prefetch", prefetch}};
    j["cloud"] = {{"retrain_s", retrain_s},
                  {"pool_cap", pool_cap},
                  {"retrain_min", retrain_min},
                  {"active_horizon_windows", active_horizon_windows},
                  {"fm_s_per_frame", fm_s_per_frame},
                  {"fm_frames_per_batch", fm_frames_per_batch},
                  {"annotate_s_per_frame", annotate_s_per_frame}};
    if (mlq_override) j["cloud"]["scheduler"] = *mlq_override ? "mlq" : "fifo";
    j["run"] = {{"devices", devices},
                {"duration_windows", duration_windows},
                {"seed", seed},
                {"variant", variant_name(variant)}};
    j["metrics"] = {{"recovery_horizon_windows", recovery_horizon_windows},
                    {"anchored_horizons", anchored_horizons}};
    if (!offline_windows.empty()) {
        ordered_json off = ordered_json::array();
        for (const auto& [dev, span] : offline_windows)
            off.push_back({{"device", dev}, {"from", span.first}, {"to", span.second}});
        j["offline"] = off;
    }
    j["socket"] = {{"time_scale", socket_time_scale}, {"port", socket_port}};
    return j.dump(2) + "\n";
}

ScenarioConfig ScenarioConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    ScenarioConfig c = default_scenario();

    try {
        if (j.contains("schema")) {
            c.schema.dimensions.clear();
            for (const auto& d : j["schema"]) {
                SchemaDimension dim;
                dim.name = d.at("name").get<std::string>();
                if (d.contains("values")) dim.values = d["values"].get<std::vector<std::string>>();
                c.schema.dimensions.push_back(std::move(dim));
            }
        }
        if (j.contains("domains")) {
            c.domains.clear();
            for (const auto& d : j["domains"]) {
                DomainSpec ds;
                ds.path = SemanticPath::from_string(d.at("path").get<std::string>());
                ds.difficulty = d.value("difficulty", 0.0);
                ds.pretrained = d.value("pretrained", false);
                c.domains.push_back(std::move(ds));
            }
        }
        if (j.contains("world")) {
            const auto& w = j["world"];
            c.world.feature_dim = w.value("feature_dim", c.world.feature_dim);
            c.world.classes_per_domain = w.value("classes_per_domain", c.world.classes_per_domain);
            c.world.class_offset = w.value("class_offset", c.world.class_offset);
            if (w.contains("level_scales"))
                c.world.level_scales = w["level_scales"].get<std::vector<double>>();
            c.world.noise_scale = w.value("noise_scale", c.world.noise_scale);
            c.world.window_spread = w.value("window_spread", c.world.window_spread);
            c.world.teacher_flip = w.value("teacher_flip", c.world.teacher_flip);
            c.world.fm_error = w.value("fm_error", c.world.fm_error);
            c.world.model_weight_bytes = w.value("model_weight_bytes", c.world.model_weight_bytes);
            c.world.fit_samples = w.value("fit_samples", c.world.fit_samples);
        }
        if (j.contains("accuracy")) {
            const auto& a = j["accuracy"];
            c.world.accuracy.a_max = a.value("a_max", c.world.accuracy.a_max);
            c.world.accuracy.a_floor = a.value("a_floor", c.world.accuracy.a_floor);
            c.world.accuracy.beta = a.value("beta", c.world.accuracy.beta);
            c.world.accuracy.delta_ft = a.value("delta_ft", c.world.accuracy.delta_ft);
            c.world.accuracy.lambda0 = a.value("lambda0", c.world.accuracy.lambda0);
            c.world.accuracy.difficulty_weight =
                a.value("difficulty_weight", c.world.accuracy.difficulty_weight);
        }
        if (j.contains("trace")) {
            const auto& t = j["trace"];
            c.trace.shifts = t.value("shifts", c.trace.shifts);
            c.trace.dwell_min = t.value("dwell_min", c.trace.dwell_min);
            c.trace.dwell_max = t.value("dwell_max", c.trace.dwell_max);
            c.trace.p_local = t.value("p_local", c.trace.p_local);
            c.trace.local_radius = t.value("local_radius", c.trace.local_radius);
        }
        if (j.contains("link")) {
            const auto& l = j["link"];
            c.link.bandwidth_bps = l.value("bandwidth_bps", c.link.bandwidth_bps);
            c.link.latency_s = l.value("latency_s", c.link.latency_s);
            c.bytes_per_frame = l.value("bytes_per_frame", c.bytes_per_frame);
        }
        if (j.contains("agent")) {
            const auto& a = j["agent"];
            c.window_s = a.value("window_s", c.window_s);
            c.detector_k = a.value("detector_k", c.detector_k);
            c.accuracy_threshold = a.value("accuracy_threshold", c.accuracy_threshold);
            c.cache_slots = a.value("cache_slots", c.cache_slots);
            c.upload_frames_per_window =
                a.value("upload_frames_per_window", c.upload_frames_per_window);
            c.detector_samples = a.value("detector_samples", c.detector_samples);
            c.eval_samples = a.value("eval_samples", c.eval_samples);
            c.ft_min_samples = a.value("ft_min_samples", c.ft_min_samples);
            c.ft_iterations = a.value("ft_iterations", c.ft_iterations);
            c.onboard_load_s = a.value("onboard_load_s", c.onboard_load_s);
            c.finetune_s = a.value("finetune_s", c.finetune_s);
            c.prefetch = a.value("prefetch", c.prefetch);
        }
        if (j.contains("cloud")) {
            const auto& cl = j["cloud"];
            c.retrain_s = cl.value("retrain_s", c.retrain_s);
            c.pool_cap = cl.value("pool_cap", c.pool_cap);
            c.retrain_min = cl.value("retrain_min", c.retrain_min);
            c.active_horizon_windows =
                cl.value("active_horizon_windows", c.active_horizon_windows);
            c.fm_s_per_frame = cl.value("fm_s_per_frame", c.fm_s_per_frame);
            c.fm_frames_per_batch = cl.value("fm_frames_per_batch", c.fm_frames_per_batch);
            c.annotate_s_per_frame = cl.value("annotate_s_per_frame", c.annotate_s_per_frame);
            if (cl.contains("scheduler")) {
                const auto s = cl["scheduler"].get<std::string>();
                if (s == "mlq") c.mlq_override = true;
                else if (s == "fifo") c.mlq_override = false;
                else if (s == "default") c.mlq_override.reset();
                else throw std::runtime_error("unknown scheduler policy: " + s);
            }
        }
        if (j.contains("run")) {
            const auto& r = j["run"];
            c.devices = r.value("devices", c.devices);
            c.duration_windows = r.value("duration_windows", c.duration_windows);
            c.seed = r.value("seed", c.seed);
            if (r.contains("variant"))
                c.variant = variant_from_name(r["variant"].get<std::string>());
            c.world.seed = c.seed;
        }
        if (j.contains("metrics")) {
            const auto& m = j["metrics"];
            c.recovery_horizon_windows =
                m.value("recovery_horizon_windows", c.recovery_horizon_windows);
            c.anchored_horizons = m.value("anchored_horizons", c.anchored_horizons);
        }
        if (j.contains("offline")) {
            c.offline_windows.clear();
            for (const auto& o : j["offline"])
                c.offline_windows[o.at("device").get<int64_t>()] = {
                    o.at("from").get<int64_t>(), o.at("to").get<int64_t>()};
        }
        if (j.contains("socket")) {
            c.socket_time_scale = j["socket"].value("time_scale", c.socket_time_scale);
            c.socket_port = j["socket"].value("port", c.socket_port);
        }
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config field error: ") + e.what());
    }
    return c;
}

ScenarioConfig ScenarioConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::vector<std::string> ScenarioConfig::validate() const {
    std::vector<std::string> problems;
    auto bad = [&](const std::string& msg) { problems.push_back(msg); };

    if (schema.dimensions.empty()) bad("schema: needs at least one dimension");
    if (domains.empty()) bad("domains: empty");
    size_t pretrained = 0;
    for (const auto& d : domains) {
        if (d.path.layer() != schema.depth())
            bad("domain " + d.path.to_string() + ": depth != schema dimensions");
        if (d.difficulty < 0.0 || d.difficulty > 1.0)
            bad("domain " + d.path.to_string() + ": difficulty outside [0,1]");
        if (d.pretrained) ++pretrained;
    }
    if (pretrained == 0) bad("domains: at least one domain must be pretrained");
    if (world.feature_dim < 1) bad("world.feature_dim: must be >= 1");
    if (world.classes_per_domain < 2) bad("world.classes_per_domain: must be >= 2");
    if (world.fit_samples < 2 * world.classes_per_domain)
        bad("world.fit_samples: too few for per-class fitting");
    if (world.window_spread <= 0.0 || world.window_spread > 1.0)
        bad("world.window_spread: must be in (0,1]");
    if (world.teacher_flip < 0.0 || world.teacher_flip > 1.0)
        bad("world.teacher_flip: must be in [0,1]");
    if (world.fm_error < 0.0 || world.fm_error > 1.0) bad("world.fm_error: must be in [0,1]");
    const auto& a = world.accuracy;
    if (!(a.a_floor >= 0.0 && a.a_floor < a.a_max && a.a_max <= 1.0))
        bad("accuracy: need 0 <= a_floor < a_max <= 1");
    if (a.beta <= 0.0) bad("accuracy.beta: must be > 0");
    if (a.delta_ft < 0.0) bad("accuracy.delta_ft: must be >= 0");
    if (trace.dwell_min == 0 || trace.dwell_max < trace.dwell_min)
        bad("trace: need 1 <= dwell_min <= dwell_max");
    if (trace.p_local < 0.0 || trace.p_local > 1.0) bad("trace.p_local: must be in [0,1]");
    if (link.bandwidth_bps <= 0.0) bad("link.bandwidth_bps: must be > 0");
    if (link.latency_s < 0.0) bad("link.latency_s: must be >= 0");
    if (window_s <= 0.0) bad("agent.window_s: must be > 0");
    if (detector_k < 0.0) bad("agent.detector_k: must be >= 0");
    if (accuracy_threshold < 0.0 || accuracy_threshold > 1.0)
        bad("agent.accuracy_threshold: must be in [0,1]");
    if (cache_slots < 1) bad("agent.cache_slots: must be >= 1");
    if (detector_samples < 1) bad("agent.detector_samples: must be >= 1");
    if (upload_frames_per_window < 1) bad("agent.upload_frames_per_window: must be >= 1");
    if (eval_samples < 1) bad("agent.eval_samples: must be >= 1");
    if (onboard_load_s < 0.0) bad("agent.onboard_load_s: must be >= 0");
    if (finetune_s < 0.0) bad("agent.finetune_s: must be >= 0");
    if (retrain_s < 0.0) bad("cloud.retrain_s: must be >= 0");
    if (pool_cap < 1) bad("cloud.pool_cap: must be >= 1");
    if (retrain_min < 1) bad("cloud.retrain_min: must be >= 1");
    if (retrain_min > pool_cap) bad("cloud.retrain_min: exceeds pool_cap");
    if (devices < 1) bad("run.devices: must be >= 1");
    if (duration_windows < 1) bad("run.duration_windows: must be >= 1");
    if (socket_time_scale <= 0.0) bad("socket.time_scale: must be > 0");
    for (const auto& [dev, span] : offline_windows) {
        if (dev < 0 || static_cast<size_t>(dev) >= devices)
            bad("offline: device index out of range");
        if (span.first < 0 || span.second < span.first) bad("offline: bad window span");
    }
    return problems;
}

ScenarioConfig default_scenario() {
    ScenarioConfig c;
    c.schema.dimensions = {{"location", {"street", "highway", "residential"}},
                           {"weather", {"clear", "rainy"}},
                           {"time", {"day", "night"}}};
    const char* locs[] = {"street", "highway", "residential"};
    const char* weathers[] = {"clear", "rainy"};
    const char* times[] = {"day", "night"};
    // 12 leaves; all rainy nights plus the rainy highway start without models
    for (const char* l : locs)
        for (const char* w : weathers)
            for (const char* t : times) {
                DomainSpec d;
                d.path = SemanticPath{l, w, t};
                const bool rainy = std::string(w) == "rainy";
                d.pretrained = !(rainy && (std::string(t) == "night" ||
                                           std::string(l) == "highway"));
                c.domains.push_back(std::move(d));
            }
    c.world.seed = c.seed;
    return c;
}

ScenarioConfig high_shift_scenario() {
    ScenarioConfig c = default_scenario();
    // every leaf pretrained, quick dwells, strong locality: a cache stress test
    for (auto& d : c.domains) d.pretrained = true;
    c.trace.dwell_min = 2;
    c.trace.dwell_max = 3;
    c.trace.p_local = 0.9;
    c.trace.shifts = 120;
    c.duration_windows = 150;
    return c;
}

} // namespace mocsim
