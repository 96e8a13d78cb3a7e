#include "avua/run_config.hpp"

#include <set>

#include "avua/error.hpp"

namespace avua {

namespace {

std::string gateway_kind_name(GatewayKind k) {
    switch (k) {
        case GatewayKind::scripted: return "scripted";
        case GatewayKind::remote: return "remote";
        case GatewayKind::replay: return "replay";
        case GatewayKind::record: return "record";
    }
    return "scripted";
}

GatewayKind gateway_kind_from(const std::string& s) {
    if (s == "scripted") return GatewayKind::scripted;
    if (s == "remote") return GatewayKind::remote;
    if (s == "replay") return GatewayKind::replay;
    if (s == "record") return GatewayKind::record;
    throw ConfigError("unknown gateway kind '" + s + "'");
}

std::string toolbox_kind_name(ToolboxKind k) { return k == ToolboxKind::remote ? "remote" : "synthetic"; }

ToolboxKind toolbox_kind_from(const std::string& s) {
    if (s == "synthetic") return ToolboxKind::synthetic;
    if (s == "remote") return ToolboxKind::remote;
    throw ConfigError("unknown toolbox kind '" + s + "'");
}

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

std::filesystem::path resolve(const Json& j, const std::filesystem::path& base) {
    std::filesystem::path p = j.get<std::string>();
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

std::string path_str(const std::filesystem::path& p) { return p.string(); }

AblationConfig ablation_from_json(const Json& j) {
    if (j.is_string()) return AblationConfig::from_name(j.get<std::string>());
    if (!j.is_object()) throw ConfigError("ablation must be a row name or an object");
    reject_unknown(j, {"use_memory", "use_evaluator", "use_sampler", "use_refiner", "react_only"}, "ablation");
    AblationConfig a;
    a.use_memory = j.value("use_memory", true);
    a.use_evaluator = j.value("use_evaluator", true);
    a.use_sampler = j.value("use_sampler", true);
    a.use_refiner = j.value("use_refiner", true);
    a.react_only = j.value("react_only", false);
    return a.normalized();
}

}  // namespace

void RunConfig::validate() const {
    if (budgets.max_steps < 1) throw ConfigError("budgets.max_steps must be at least 1");
    if (budgets.max_trials < 1) throw ConfigError("budgets.max_trials must be at least 1");
    if (budgets.sampler_cap < 1) throw ConfigError("budgets.sampler_cap must be at least 1");
    if (memory_k < 1) throw ConfigError("memory.k must be at least 1");
    if (min_similarity < -1.0 || min_similarity > 1.0) throw ConfigError("memory.min_similarity must lie in [-1, 1]");
    if (eval_confidence_gate && (*eval_confidence_gate < 0 || *eval_confidence_gate > 100))
        throw ConfigError("eval_confidence_gate must lie in [0, 100]");
    if (toolbox.window_stride < 1) throw ConfigError("toolbox.window_stride must be at least 1");
    switch (gateway.kind) {
        case GatewayKind::scripted: break;
        case GatewayKind::remote:
            if (gateway.url.empty()) throw ConfigError("remote gateway needs gateway.url");
            break;
        case GatewayKind::replay:
            if (gateway.session.empty()) throw ConfigError("replay gateway needs gateway.session");
            break;
        case GatewayKind::record:
            if (gateway.url.empty() || gateway.session.empty())
                throw ConfigError("record gateway needs gateway.url and gateway.session");
            break;
    }
    if (toolbox.kind == ToolboxKind::remote && toolbox.url.empty())
        throw ConfigError("remote toolbox needs toolbox.url");
}

PlannerOptions RunConfig::planner_options() const {
    PlannerOptions p;
    p.max_steps = budgets.max_steps;
    p.max_trials = budgets.max_trials;
    p.sampler_cap = static_cast<std::size_t>(budgets.sampler_cap);
    p.inherit_frame_cache = inherit_frame_cache;
    p.memory_on_first_trial = memory_on_first_trial;
    p.memory_k = memory_k;
    p.retrieve.min_similarity = min_similarity;
    p.retrieve.only_successful = only_successful;
    p.eval_confidence_gate = eval_confidence_gate;
    return p;
}

Json to_json(const RunConfig& cfg) {
    Json j{{"prompts_dir", path_str(cfg.prompts_dir)},
           {"gateway",
            {{"kind", gateway_kind_name(cfg.gateway.kind)},
             {"script", path_str(cfg.gateway.script)},
             {"strict", cfg.gateway.strict},
             {"url", cfg.gateway.url},
             {"session", path_str(cfg.gateway.session)}}},
           {"toolbox",
            {{"kind", toolbox_kind_name(cfg.toolbox.kind)},
             {"video_spec", path_str(cfg.toolbox.video_spec)},
             {"url", cfg.toolbox.url},
             {"window_stride", cfg.toolbox.window_stride},
             {"detection_threshold", cfg.toolbox.detection_threshold}}},
           {"ablation", to_json(cfg.ablation)},
           {"budgets",
            {{"max_steps", cfg.budgets.max_steps},
             {"max_trials", cfg.budgets.max_trials},
             {"sampler_cap", cfg.budgets.sampler_cap}}},
           {"memory",
            {{"path", path_str(cfg.memory_path)},
             {"k", cfg.memory_k},
             {"min_similarity", cfg.min_similarity},
             {"only_successful", cfg.only_successful},
             {"on_first_trial", cfg.memory_on_first_trial}}},
           {"deterministic", cfg.deterministic},
           {"inherit_frame_cache", cfg.inherit_frame_cache}};
    j["eval_confidence_gate"] = cfg.eval_confidence_gate ? Json(*cfg.eval_confidence_gate) : Json(nullptr);
    return j;
}

RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig cfg;
    try {
        reject_unknown(j,
                       {"prompts_dir", "gateway", "toolbox", "ablation", "budgets", "memory", "deterministic",
                        "inherit_frame_cache", "eval_confidence_gate"},
                       "config");
        if (j.contains("prompts_dir")) cfg.prompts_dir = resolve(j["prompts_dir"], base_dir);
        if (j.contains("gateway")) {
            const Json& g = j["gateway"];
            reject_unknown(g, {"kind", "script", "strict", "url", "session"}, "gateway");
            if (g.contains("kind")) cfg.gateway.kind = gateway_kind_from(g["kind"].get<std::string>());
            if (g.contains("script")) cfg.gateway.script = resolve(g["script"], base_dir);
            cfg.gateway.strict = g.value("strict", cfg.gateway.strict);
            cfg.gateway.url = g.value("url", cfg.gateway.url);
            if (g.contains("session")) cfg.gateway.session = resolve(g["session"], base_dir);
        }
        if (j.contains("toolbox")) {
            const Json& t = j["toolbox"];
            reject_unknown(t, {"kind", "video_spec", "url", "window_stride", "detection_threshold"}, "toolbox");
            if (t.contains("kind")) cfg.toolbox.kind = toolbox_kind_from(t["kind"].get<std::string>());
            if (t.contains("video_spec")) cfg.toolbox.video_spec = resolve(t["video_spec"], base_dir);
            cfg.toolbox.url = t.value("url", cfg.toolbox.url);
            cfg.toolbox.window_stride = t.value("window_stride", cfg.toolbox.window_stride);
            cfg.toolbox.detection_threshold = t.value("detection_threshold", cfg.toolbox.detection_threshold);
        }
        if (j.contains("ablation")) cfg.ablation = ablation_from_json(j["ablation"]);
        if (j.contains("budgets")) {
            const Json& b = j["budgets"];
            reject_unknown(b, {"max_steps", "max_trials", "sampler_cap"}, "budgets");
            cfg.budgets.max_steps = b.value("max_steps", cfg.budgets.max_steps);
            cfg.budgets.max_trials = b.value("max_trials", cfg.budgets.max_trials);
            cfg.budgets.sampler_cap = b.value("sampler_cap", cfg.budgets.sampler_cap);
        }
        if (j.contains("memory")) {
            const Json& m = j["memory"];
            reject_unknown(m, {"path", "k", "min_similarity", "only_successful", "on_first_trial"}, "memory");
            if (m.contains("path")) cfg.memory_path = resolve(m["path"], base_dir);
            cfg.memory_k = m.value("k", cfg.memory_k);
            cfg.min_similarity = m.value("min_similarity", cfg.min_similarity);
            cfg.only_successful = m.value("only_successful", cfg.only_successful);
            cfg.memory_on_first_trial = m.value("on_first_trial", cfg.memory_on_first_trial);
        }
        cfg.deterministic = j.value("deterministic", cfg.deterministic);
        cfg.inherit_frame_cache = j.value("inherit_frame_cache", cfg.inherit_frame_cache);
        if (j.contains("eval_confidence_gate") && !j["eval_confidence_gate"].is_null())
            cfg.eval_confidence_gate = j["eval_confidence_gate"].get<int>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    } catch (const IoFailure& e) {
        throw ConfigError(e.what());
    }
    return run_config_from_json(j, path.parent_path());
}

std::string config_digest(const RunConfig& cfg, const PromptCatalog& catalog) {
    Json j = to_json(cfg);
    j.erase("prompts_dir");
    j["gateway"].erase("script");
    j["gateway"].erase("session");
    j["gateway"].erase("url");
    j["toolbox"].erase("video_spec");
    j["toolbox"].erase("url");
    j["memory"].erase("path");
    Json prompts = Json::object();
    for (const auto& name : catalog.names()) prompts[name] = catalog.get(name);
    j["prompts"] = prompts;
    return sha256_hex(j.dump());
}

PromptCatalog make_catalog(const RunConfig& cfg) {
    if (cfg.prompts_dir.empty()) return PromptCatalog{};
    return PromptCatalog::from_directory(cfg.prompts_dir);
}

std::shared_ptr<LlmBackend> make_backend(const GatewaySettings& settings,
                                         const std::filesystem::path& script_override) {
    switch (settings.kind) {
        case GatewayKind::scripted: {
            const auto& path = script_override.empty() ? settings.script : script_override;
            if (path.empty()) throw ConfigError("scripted gateway needs a script");
            std::vector<ScriptEntry> entries;
            try {
                entries = load_script(path);
            } catch (const IoFailure& e) {
                throw ConfigError(e.what());
            }
            return std::make_shared<ScriptedBackend>(std::move(entries), settings.strict);
        }
        case GatewayKind::remote:
            if (settings.url.empty()) throw ConfigError("remote gateway needs a url");
            return std::make_shared<RemoteBackend>(settings.url);
        case GatewayKind::replay:
            if (settings.session.empty()) throw ConfigError("replay gateway needs a session file");
            try {
                return record_and_replay(settings.session, SessionMode::replay);
            } catch (const IoFailure& e) {
                throw ConfigError(e.what());
            }
        case GatewayKind::record:
            if (settings.url.empty() || settings.session.empty())
                throw ConfigError("record gateway needs a url and a session file");
            return record_and_replay(settings.session, SessionMode::record,
                                     std::make_shared<RemoteBackend>(settings.url));
    }
    throw ConfigError("unsupported gateway");
}

std::unique_ptr<ToolRegistry> make_registry(const ToolboxSettings& settings, const VideoMeta& meta,
                                            const std::filesystem::path& video_override) {
    auto registry = std::make_unique<ToolRegistry>(meta, ToolboxOptions{settings.window_stride});
    if (settings.kind == ToolboxKind::remote) {
        register_standard_tools(*registry, std::make_shared<RemoteToolAdapter>(settings.url));
        return registry;
    }
    const auto& path = video_override.empty() ? settings.video_spec : video_override;
    if (path.empty()) throw ConfigError("synthetic toolbox needs a video spec");
    std::shared_ptr<SyntheticVideoSpec> spec;
    try {
        spec = std::make_shared<SyntheticVideoSpec>(load_synthetic_video(path));
    } catch (const IoFailure& e) {
        throw ConfigError(e.what());
    }
    if (spec->meta.total_frames != meta.total_frames)
        throw ConfigError("video spec " + path.string() + " disagrees with the item's total_frames");
    register_standard_tools(*registry, std::make_shared<SyntheticToolAdapter>(spec, settings.detection_threshold));
    return registry;
}

}  // namespace avua
