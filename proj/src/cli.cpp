#include "avua/cli.hpp"

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "avua/error.hpp"
#include "avua/eval_harness.hpp"
#include "avua/planner.hpp"
#include "avua/run_config.hpp"
#include "avua/trace.hpp"

namespace avua::cli {

namespace {

// Flags shared by the commands that build a RunConfig. Every field is
// optional so that only what the user typed overrides the config file.
struct Overrides {
    std::string config;
    std::optional<std::string> gateway;
    std::optional<std::string> script;
    std::optional<std::string> url;
    std::optional<std::string> session;
    bool lenient = false;
    std::optional<std::string> prompts_dir;
    std::optional<std::string> video;
    std::optional<std::string> toolbox_url;
    std::optional<std::string> ablation;
    std::optional<int> max_steps;
    std::optional<int> max_trials;
    std::optional<int> sampler_cap;
    std::optional<int> eval_confidence_gate;
    std::optional<std::string> memory;
    bool only_successful = false;
    bool fresh_cache = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--gateway", gateway, "scripted, remote, replay or record")
            ->check(CLI::IsMember({"scripted", "remote", "replay", "record"}));
        cmd->add_option("--script", script, "scripted backend responses (JSON)");
        cmd->add_flag("--lenient", lenient, "unmatched prompts get the fallback reply instead of failing");
        cmd->add_option("--url", url, "remote LLM endpoint");
        cmd->add_option("--session", session, "record/replay session file");
        cmd->add_option("--prompts-dir", prompts_dir, "directory of <name>.txt prompt overrides");
        cmd->add_option("--video", video, "synthetic video spec (JSON)");
        cmd->add_option("--toolbox-url", toolbox_url, "remote tool server; switches the toolbox to remote");
        cmd->add_option("--ablation", ablation, "ours, w/o-memory, w/o-evaluator, w/o-sampler, w/o-refiner, react-only");
        cmd->add_option("--max-steps", max_steps);
        cmd->add_option("--max-trials", max_trials);
        cmd->add_option("--sampler-cap", sampler_cap);
        cmd->add_option("--eval-confidence-gate", eval_confidence_gate, "retry unless verdict True and confidence >= N");
        cmd->add_option("--memory", memory, "long-term memory file (JSON lines)");
        cmd->add_flag("--only-successful", only_successful, "retrieve only records whose verdict was True");
        cmd->add_flag("--fresh-cache", fresh_cache, "drop the frame cache between trials");
    }

    RunConfig build() const {
        RunConfig cfg;
        std::string path = config;
        if (path.empty()) {
            if (const char* env = std::getenv("AVUA_CONFIG"); env && *env) path = env;
        }
        if (!path.empty()) cfg = load_run_config(path);

        if (gateway) {
            cfg.gateway.kind = *gateway == "remote"   ? GatewayKind::remote
                               : *gateway == "replay" ? GatewayKind::replay
                               : *gateway == "record" ? GatewayKind::record
                                                      : GatewayKind::scripted;
        }
        if (script) cfg.gateway.script = *script;
        if (lenient) cfg.gateway.strict = false;
        if (url) cfg.gateway.url = *url;
        if (session) cfg.gateway.session = *session;
        if (prompts_dir) cfg.prompts_dir = *prompts_dir;
        if (video) cfg.toolbox.video_spec = *video;
        if (toolbox_url) {
            cfg.toolbox.kind = ToolboxKind::remote;
            cfg.toolbox.url = *toolbox_url;
        }
        if (ablation) cfg.ablation = AblationConfig::from_name(*ablation);
        if (max_steps) cfg.budgets.max_steps = *max_steps;
        if (max_trials) cfg.budgets.max_trials = *max_trials;
        if (sampler_cap) cfg.budgets.sampler_cap = *sampler_cap;
        if (eval_confidence_gate) cfg.eval_confidence_gate = *eval_confidence_gate;
        if (memory) cfg.memory_path = *memory;
        if (only_successful) cfg.only_successful = true;
        if (fresh_cache) cfg.inherit_frame_cache = false;
        cfg.validate();
        return cfg;
    }
};

struct AskArgs {
    std::string question;
    std::vector<std::string> options;
    std::string kind = "mcq";
    std::optional<double> duration;
    std::optional<double> fps;
    std::optional<int> frames;
    std::string trace_out = "avua_trace.jsonl";
    std::optional<std::string> transcript_out;
};

int cmd_ask(const Overrides& ov, const AskArgs& a, std::ostream& out) {
    const RunConfig cfg = ov.build();
    Question q;
    q.text = a.question;
    q.options = a.options;
    q.kind = dataset_kind_from_string(a.kind);
    q.validate();

    VideoMeta meta;
    if (cfg.toolbox.kind == ToolboxKind::synthetic) {
        if (cfg.toolbox.video_spec.empty()) throw ConfigError("synthetic toolbox needs --video");
        meta = load_synthetic_video(cfg.toolbox.video_spec).meta;
    } else {
        if (!a.fps || !(a.duration || a.frames)) throw ConfigError("remote videos need --fps and --duration or --frames");
        meta.frame_rate = *a.fps;
        meta.duration_sec = a.duration ? *a.duration : *a.frames / *a.fps;
        meta.total_frames = a.frames ? *a.frames : static_cast<int>(std::lround(*a.duration * *a.fps));
    }
    meta.validate();

    const PromptCatalog catalog = make_catalog(cfg);
    auto backend = make_backend(cfg.gateway);
    auto registry = make_registry(cfg.toolbox, meta);
    HashingEmbedder embedder;
    std::unique_ptr<LongTermMemory> memory;
    if (cfg.ablation.normalized().use_memory)
        memory = std::make_unique<LongTermMemory>(embedder, cfg.memory_path, cfg.deterministic);

    Transcript transcript;
    TraceWriter trace;
    LlmClient llm(*backend, transcript);
    EpisodeContext ctx{llm, *registry, memory.get(), &trace, config_digest(cfg, catalog)};
    const Agent agent(catalog, cfg.planner_options());

    std::optional<EpisodeResult> result;
    std::string failure;
    try {
        result = agent.run_episode(ctx, q, meta, cfg.ablation);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        failure = e.what();
    }
    trace.write(a.trace_out);
    if (a.transcript_out) write_file(*a.transcript_out, transcript.serialize());
    if (!result) throw EpisodeAbort(failure);

    out << "Answer: " << result->answer << "\n";
    out << fmt::format("Frames accessed: {} of {} (ratio {})\n", result->distinct_frames_accessed, meta.total_frames,
                       format_real(result->ratio, 5));
    out << fmt::format("Frame charges: {}\n", result->frames_accessed);
    out << fmt::format("Trials: {}\n", result->trials.size());
    out << "Trace: " << a.trace_out << "\n";
    return kExitOk;
}

int cmd_replay(const std::string& path, const std::optional<std::string>& config, std::ostream& out) {
    const TraceSummary s = verify_trace_file(path);
    out << "Answer: " << s.answer << "\n";
    out << fmt::format("Frames accessed: {} of {} (ratio {})\n", s.distinct_frames_accessed, s.total_frames,
                       format_real(s.ratio, 5));
    out << fmt::format("Frame charges: {}\n", s.frames_accessed);
    out << fmt::format("Trials: {}\n", s.trials);
    std::map<std::string, int> kinds;
    for (const auto& k : s.kinds) ++kinds[k];
    std::string list;
    for (const auto& [k, n] : kinds) list += fmt::format("{}{}={}", list.empty() ? "" : " ", k, n);
    out << "Records: " << list << "\n";
    out << "Ledger: consistent\n";
    if (config) {
        const RunConfig cfg = load_run_config(*config);
        const std::string digest = config_digest(cfg, make_catalog(cfg));
        if (digest != s.config_digest) {
            out << "Config: drifted (trace " << s.config_digest.substr(0, 12) << ", config " << digest.substr(0, 12)
                << ")\n";
            return kExitRuntime;
        }
        out << "Config: matches\n";
    }
    return kExitOk;
}

struct BenchArgs {
    std::string manifest;
    std::string out = "bench_out";
    bool matrix = false;
    int jobs = 1;
};

int cmd_bench(const Overrides& ov, const BenchArgs& b, std::ostream& out) {
    const RunConfig cfg = ov.build();
    const auto items = load_manifest(b.manifest);
    if (b.jobs < 1) throw ConfigError("--jobs must be at least 1");
    if (b.matrix) {
        const auto reports = run_ablation_matrix(items, cfg, b.out, BenchOptions{b.jobs});
        out << render_matrix_table(reports);
        out << "Reports: " << (std::filesystem::path(b.out) / "matrix.json").string() << "\n";
    } else {
        const auto report = run_benchmark(items, cfg, b.out, BenchOptions{b.jobs});
        out << report.render_table();
        out << "Report: " << (std::filesystem::path(b.out) / "report.json").string() << "\n";
    }
    return kExitOk;
}

struct ImportArgs {
    std::string format;
    std::string input;
    std::string answers;
    std::string out;
    double fps = 30.0;
    double duration = 180.0;
};

int cmd_import(const ImportArgs& a, std::ostream& out) {
    const LoaderOptions opts{a.fps, a.duration};
    std::vector<BenchmarkItem> items;
    if (a.format == "egoschema") {
        if (a.answers.empty()) throw ConfigError("egoschema import needs --answers");
        items = load_egoschema(a.input, a.answers, opts);
    } else if (a.format == "nextqa") {
        items = load_nextqa_csv(a.input, opts);
    } else {
        items = load_ego4d_nlq(a.input, opts);
    }
    const auto base = std::filesystem::path(a.out).parent_path();
    Json list = Json::array();
    for (const auto& item : items) list.push_back(to_json(item, base));
    write_file(a.out, list.dump(2) + "\n");
    out << fmt::format("Imported {} items to {}\n", items.size(), a.out);
    return kExitOk;
}

struct MemoryArgs {
    std::optional<std::string> path;
    std::string text;
    std::string type;
    int k = 3;
    double min_similarity = 0.5;
    bool only_successful = false;
};

std::filesystem::path memory_file(const MemoryArgs& m, const std::string& config) {
    if (m.path) return *m.path;
    Overrides ov;
    ov.config = config;
    const RunConfig cfg = ov.build();
    if (cfg.memory_path.empty()) throw ConfigError("no memory file: pass --memory or set memory.path in the config");
    return cfg.memory_path;
}

int cmd_memory_inspect(const MemoryArgs& m, const std::string& config, std::ostream& out) {
    const auto path = memory_file(m, config);
    if (!std::filesystem::exists(path)) throw ConfigError("memory file not found: " + path.string());
    HashingEmbedder embedder;
    LongTermMemory store(embedder, path);
    for (const auto& r : store.records()) out << to_json(r).dump() << "\n";
    return kExitOk;
}

int cmd_memory_query(const MemoryArgs& m, const std::string& config, std::ostream& out) {
    const auto path = memory_file(m, config);
    if (!std::filesystem::exists(path)) throw ConfigError("memory file not found: " + path.string());
    HashingEmbedder embedder;
    LongTermMemory store(embedder, path);
    RetrieveOptions opts;
    opts.min_similarity = m.min_similarity;
    opts.only_successful = m.only_successful;
    const auto hits = store.retrieve(m.type, m.text, m.k, opts);
    if (hits.empty()) out << "no records above similarity " << format_real(m.min_similarity) << "\n";
    for (const auto& h : hits) {
        out << fmt::format("{}  {}  {}  {}\n", h.record.id, format_real(h.similarity, 4), h.record.question_type,
                           h.record.question_text);
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adaptive video question answering agent"};
    app.require_subcommand(1);
    Overrides ov;
    app.add_option("--config", ov.config, "run configuration (JSON); defaults to $AVUA_CONFIG");

    AskArgs ask;
    auto* ask_cmd = app.add_subcommand("ask", "answer one question about one video");
    ask_cmd->add_option("--question,-q", ask.question)->required();
    ask_cmd->add_option("--option,-o", ask.options, "answer option (repeatable, in order)");
    ask_cmd->add_option("--kind", ask.kind)->check(CLI::IsMember({"mcq", "temporal_localization", "open_ended"}));
    ask_cmd->add_option("--duration", ask.duration, "seconds, for remote videos");
    ask_cmd->add_option("--fps", ask.fps, "for remote videos");
    ask_cmd->add_option("--frames", ask.frames, "total frames, for remote videos");
    ask_cmd->add_option("--trace-out", ask.trace_out);
    ask_cmd->add_option("--transcript-out", ask.transcript_out);
    ov.attach(ask_cmd);

    BenchArgs bench;
    ImportArgs import;
    auto* bench_cmd = app.add_subcommand("bench", "benchmark runs");
    bench_cmd->require_subcommand(1);
    auto* bench_run = bench_cmd->add_subcommand("run", "run a manifest");
    bench_run->add_option("--manifest,-m", bench.manifest)->required();
    bench_run->add_option("--out", bench.out);
    bench_run->add_flag("--matrix", bench.matrix, "run every ablation row");
    bench_run->add_option("--jobs,-j", bench.jobs);
    ov.attach(bench_run);
    auto* bench_import = bench_cmd->add_subcommand("import", "convert a public dataset file into a manifest");
    bench_import->add_option("--format", import.format)
        ->required()
        ->check(CLI::IsMember({"egoschema", "nextqa", "ego4d-nlq"}));
    bench_import->add_option("--input", import.input)->required();
    bench_import->add_option("--answers", import.answers);
    bench_import->add_option("--out", import.out)->required();
    bench_import->add_option("--fps", import.fps);
    bench_import->add_option("--duration", import.duration, "seconds, when the format has none");

    std::string trace_path;
    std::optional<std::string> replay_config;
    auto* replay_cmd = app.add_subcommand("replay", "verify a trace and print its summary");
    replay_cmd->add_option("trace", trace_path)->required();
    replay_cmd->add_option("--check-config", replay_config, "compare the trace's config digest with this config");

    MemoryArgs mem;
    auto* memory_cmd = app.add_subcommand("memory", "long-term memory");
    memory_cmd->require_subcommand(1);
    auto* mem_inspect = memory_cmd->add_subcommand("inspect", "print every record");
    mem_inspect->add_option("--memory", mem.path);
    auto* mem_query = memory_cmd->add_subcommand("query", "retrieve records for a question");
    mem_query->add_option("text", mem.text)->required();
    mem_query->add_option("--memory", mem.path);
    mem_query->add_option("--type", mem.type);
    mem_query->add_option("--k", mem.k);
    mem_query->add_option("--min-similarity", mem.min_similarity);
    mem_query->add_flag("--only-successful", mem.only_successful);

    std::string prompt_name;
    std::optional<std::string> prompts_dir;
    auto* prompts_cmd = app.add_subcommand("prompts", "prompt templates");
    prompts_cmd->require_subcommand(1);
    prompts_cmd->add_option("--prompts-dir", prompts_dir);
    auto* prompts_list = prompts_cmd->add_subcommand("list");
    auto* prompts_show = prompts_cmd->add_subcommand("show");
    prompts_show->add_option("name", prompt_name)->required();

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*ask_cmd) return cmd_ask(ov, ask, out);
        if (*bench_run) return cmd_bench(ov, bench, out);
        if (*bench_import) return cmd_import(import, out);
        if (*replay_cmd) return cmd_replay(trace_path, replay_config, out);
        if (*mem_inspect) return cmd_memory_inspect(mem, ov.config, out);
        if (*mem_query) return cmd_memory_query(mem, ov.config, out);
        if (*prompts_cmd) {
            const PromptCatalog catalog =
                prompts_dir ? PromptCatalog::from_directory(*prompts_dir) : PromptCatalog{};
            if (*prompts_list) {
                for (const auto& n : catalog.names()) out << n << "\n";
            } else {
                out << catalog.get(prompt_name);
            }
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}

}  // namespace avua::cli
