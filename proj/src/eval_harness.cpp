#include "avua/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <regex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "avua/error.hpp"
#include "avua/reflection.hpp"

namespace avua {

double interval_iou(FrameWindow pred, FrameWindow gold) {
    if (pred.first > pred.second) std::swap(pred.first, pred.second);
    if (gold.first > gold.second) std::swap(gold.first, gold.second);
    const long long inter =
        std::max(0LL, static_cast<long long>(std::min(pred.second, gold.second)) - std::max(pred.first, gold.first) + 1);
    const long long uni = static_cast<long long>(pred.second) - pred.first + 1 + gold.second - gold.first + 1 - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double recall_at_1(const std::vector<std::pair<FrameWindow, FrameWindow>>& pairs, double threshold, bool* warned) {
    if (pairs.empty()) {
        if (warned) *warned = true;
        return 0.0;
    }
    if (warned) *warned = false;
    const auto hits = std::count_if(pairs.begin(), pairs.end(),
                                    [&](const auto& p) { return interval_iou(p.first, p.second) >= threshold; });
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

bool score_mcq(std::string_view final_answer, int gold_index) {
    const auto k = normalize_mcq_answer(final_answer);
    return k && *k == gold_index;
}

PromptBundle render_judge_prompt(const PromptCatalog& catalog, std::string_view pred, std::string_view gold,
                                 const Question& q) {
    PromptBundle b;
    b.system_text = catalog.get(prompt_names::judge);
    b.user_text = fmt::format("Question: {}\nGround truth answer: {}\nPredicted answer: {}\n\n"
                              "Reply with: Evaluation: True or False, Confidence: 0-100",
                              q.text, gold, pred);
    return b;
}

JudgeResult judge_open_ended(LlmClient& llm, const PromptCatalog& catalog, std::string_view pred,
                             std::string_view gold, const Question& q) {
    JudgeResult r;
    const std::string reply = llm.complete(render_judge_prompt(catalog, pred, gold, q), prompt_names::judge);
    if (auto ev = parse_evaluation(reply)) {
        r.parsed = true;
        r.verdict = ev->verdict;
        r.confidence = ev->confidence;
        r.correct = r.verdict && r.confidence >= kJudgeConfidenceThreshold;
    }
    return r;
}

// ---------------------------------------------------------------------------

std::string tag_cue(std::string_view question, const CueLexicon& lexicon) {
    std::vector<std::string> order;
    for (const char* tag : {"start", "middle", "end"}) {
        if (lexicon.keywords.count(tag)) order.emplace_back(tag);
    }
    for (const auto& [tag, _] : lexicon.keywords) {
        if (std::find(order.begin(), order.end(), tag) == order.end()) order.push_back(tag);
    }
    const std::string lowered = to_lower(question);
    for (const auto& tag : order) {
        for (const auto& word : lexicon.keywords.at(tag)) {
            const std::regex re("\\b" + to_lower(word) + "\\b");
            if (std::regex_search(lowered, re)) return tag;
        }
    }
    return "none";
}

CueReport cue_bucket_report(const std::vector<CueSample>& samples) {
    CueReport r;
    double frames_cue = 0.0, frames_no_cue = 0.0;
    for (const auto& s : samples) {
        auto& h = r.per_cue[s.cue_tag];
        ++h.items;
        h.mean_frames += static_cast<double>(s.frames.size());
        for (int f : s.frames) {
            const double pos = s.total_frames > 1 ? static_cast<double>(f) / (s.total_frames - 1) : 0.0;
            const int bin = std::clamp(static_cast<int>(std::floor(pos * 10.0)), 0, 9);
            ++h.counts[bin];
        }
        if (s.cue_tag == "none") {
            ++r.n_no_cue;
            frames_no_cue += static_cast<double>(s.frames.size());
        } else {
            ++r.n_cue;
            frames_cue += static_cast<double>(s.frames.size());
        }
    }
    for (auto& [_, h] : r.per_cue) {
        if (h.items) h.mean_frames /= h.items;
        int total = 0;
        for (int c : h.counts) total += c;
        for (int i = 0; i < 10; ++i) h.mass[i] = total ? static_cast<double>(h.counts[i]) / total : 0.0;
    }
    if (r.n_cue) r.mean_frames_cue = frames_cue / r.n_cue;
    if (r.n_no_cue) r.mean_frames_no_cue = frames_no_cue / r.n_no_cue;
    return r;
}

Json to_json(const CueReport& r) {
    Json per = Json::object();
    for (const auto& [tag, h] : r.per_cue) {
        per[tag] = Json{{"items", h.items}, {"counts", h.counts}, {"mass", h.mass}, {"mean_frames", h.mean_frames}};
    }
    return Json{{"per_cue", per},
                {"mean_frames_cue", r.mean_frames_cue},
                {"mean_frames_no_cue", r.mean_frames_no_cue},
                {"n_cue", r.n_cue},
                {"n_no_cue", r.n_no_cue}};
}

// ---------------------------------------------------------------------------

void BenchmarkItem::validate() const {
    if (id.empty()) throw ConfigError("benchmark item without id");
    question.validate();
    meta.validate();
    const bool ok = (question.kind == DatasetKind::mcq && std::holds_alternative<int>(gold.value)) ||
                    (question.kind == DatasetKind::temporal_localization &&
                     std::holds_alternative<FrameWindow>(gold.value)) ||
                    (question.kind == DatasetKind::open_ended && std::holds_alternative<std::string>(gold.value));
    if (!ok) throw ConfigError("item " + id + ": gold answer does not fit a " + to_string(question.kind) + " question");
    if (const auto* w = std::get_if<FrameWindow>(&gold.value)) {
        if (w->first < 0 || w->second < w->first || w->second > meta.last_frame())
            throw ConfigError("item " + id + ": gold window outside the video");
    }
    if (const auto* k = std::get_if<int>(&gold.value)) {
        if (*k < 0 || *k >= static_cast<int>(question.options.size()))
            throw ConfigError("item " + id + ": gold option out of range");
    }
    static const std::set<std::string> cues{"start", "middle", "end", "none"};
    if (!cues.count(cue_tag)) throw ConfigError("item " + id + ": unknown cue tag '" + cue_tag + "'");
}

namespace {

std::filesystem::path resolve_path(const std::string& raw, const std::filesystem::path& base) {
    std::filesystem::path p = raw;
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
    if (p.empty() || base.empty()) return p.string();
    return p.lexically_relative(base).string();
}

std::string safe_name(const std::string& id) {
    std::string out;
    for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out;
}

std::string row_dir_name(const std::string& row) {
    std::string out;
    for (char c : row) {
        if (c != '/') out += c;
    }
    return safe_name(out);
}

}  // namespace

BenchmarkItem benchmark_item_from_json(const Json& j, const std::filesystem::path& base_dir) {
    BenchmarkItem item;
    try {
        item.id = j.at("id").get<std::string>();
        item.question = question_from_json(j.at("question"));
        if (j.contains("video_ref")) item.video_ref = resolve_path(j["video_ref"].get<std::string>(), base_dir);
        if (j.contains("script")) item.script = resolve_path(j["script"].get<std::string>(), base_dir);
        if (j.contains("meta")) {
            item.meta = video_meta_from_json(j["meta"]);
        } else if (!item.video_ref.empty() && std::filesystem::exists(item.video_ref)) {
            item.meta = load_synthetic_video(item.video_ref).meta;
        } else {
            throw ConfigError("item " + item.id + " has neither meta nor a readable video_ref");
        }
        const Json& g = j.at("gold");
        if (g.is_number_integer()) item.gold.value = g.get<int>();
        else if (g.is_array() && g.size() == 2) item.gold.value = FrameWindow{g[0].get<int>(), g[1].get<int>()};
        else if (g.is_string()) item.gold.value = g.get<std::string>();
        else throw ConfigError("item " + item.id + ": unsupported gold value");
        item.cue_tag = j.contains("cue_tag") ? j["cue_tag"].get<std::string>() : tag_cue(item.question.text);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("malformed benchmark item: ") + e.what());
    }
    item.validate();
    return item;
}

Json to_json(const BenchmarkItem& item, const std::filesystem::path& base_dir) {
    Json j{{"id", item.id}, {"question", to_json(item.question)}, {"meta", to_json(item.meta)}, {"cue_tag", item.cue_tag}};
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, FrameWindow>) j["gold"] = Json::array({v.first, v.second});
            else j["gold"] = v;
        },
        item.gold.value);
    if (!item.video_ref.empty()) j["video_ref"] = relative_to(item.video_ref, base_dir);
    if (!item.script.empty()) j["script"] = relative_to(item.script, base_dir);
    return j;
}

std::vector<BenchmarkItem> load_manifest(const std::filesystem::path& path) {
    Json doc;
    try {
        doc = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError("manifest " + path.string() + " is not valid JSON: " + e.what());
    } catch (const IoFailure& e) {
        throw ConfigError(e.what());
    }
    const Json& list = doc.is_object() && doc.contains("items") ? doc["items"] : doc;
    if (!list.is_array()) throw ConfigError("manifest must be an array or {\"items\": [...]}");
    std::vector<BenchmarkItem> items;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < list.size(); ++i) {
        try {
            items.push_back(benchmark_item_from_json(list[i], path.parent_path()));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("manifest {} item {}: {}", path.string(), i, e.what()));
        }
        if (!ids.insert(items.back().id).second) throw ConfigError("duplicate item id " + items.back().id);
    }
    if (items.empty()) throw ConfigError("manifest " + path.string() + " has no items");
    return items;
}

Json to_json(const ItemResult& r) {
    Json j{{"id", r.id},
           {"kind", to_string(r.kind)},
           {"question_type", r.question_type},
           {"cue_tag", r.cue_tag},
           {"answer", r.answer},
           {"correct", r.correct},
           {"frames", r.frames},
           {"charges", r.charges},
           {"ratio", r.ratio},
           {"total_frames", r.total_frames},
           {"trials", r.trials},
           {"distinct_frames", r.distinct_frames}};
    j["iou"] = r.iou ? Json(*r.iou) : Json(nullptr);
    j["judge"] = r.judge ? Json{{"verdict", r.judge->verdict},
                                {"confidence", r.judge->confidence},
                                {"parsed", r.judge->parsed},
                                {"correct", r.judge->correct}}
                         : Json(nullptr);
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

// ---------------------------------------------------------------------------

Json BenchmarkReport::to_json() const {
    Json recall = Json::object();
    for (const auto& [thr, v] : iou_recall) recall[fmt::format("r@1_iou{}", format_real(thr, 1))] = v;
    Json per_type = Json::object();
    for (const auto& [k, v] : per_question_type) per_type[k] = v;
    Json list = Json::array();
    for (const auto& item : items) list.push_back(avua::to_json(item));
    return Json{{"ablation", ablation},
                {"accuracy", accuracy},
                {"n_accuracy_items", n_accuracy_items},
                {"iou_recall", recall},
                {"iou_convention", "inclusive integer frames: [s,e] covers e-s+1 frames"},
                {"n_localization_items", n_localization_items},
                {"avg_frames", avg_frames},
                {"avg_ratio", avg_ratio},
                {"per_question_type", per_type},
                {"per_cue", avua::to_json(per_cue)},
                {"n_items", n_items},
                {"n_errors", n_errors},
                {"items", list}};
}

std::string BenchmarkReport::render_table() const {
    std::string out = fmt::format("ablation: {}\nitems: {} (errors: {})\n", ablation, n_items, n_errors);
    out += fmt::format("accuracy: {} over {} items\n", format_real(accuracy * 100.0), n_accuracy_items);
    for (const auto& [thr, v] : iou_recall)
        out += fmt::format("r@1 IoU={}: {} over {} items\n", format_real(thr, 1), format_real(v * 100.0),
                           n_localization_items);
    if (!iou_recall.empty()) out += "(IoU counts frames inclusively: [s,e] covers e-s+1 frames)\n";
    out += fmt::format("avg frames: {} (ratio {})\n", format_real(avg_frames), format_real(avg_ratio, 4));
    if (!per_question_type.empty()) {
        out += "\nper question type:\n";
        for (const auto& [type, j] : per_question_type)
            out += fmt::format("  {:<28} n={:<3} correct={:<3} frames={}\n", type, j["n"].get<int>(),
                               j["correct"].get<int>(), format_real(j["avg_frames"].get<double>()));
    }
    out += "\n";
    out += fmt::format("{:<32} {:<22} {:<8} {:<7} {:<7}\n", "id", "kind", "correct", "frames", "trials");
    for (const auto& r : items) {
        out += fmt::format("{:<32} {:<22} {:<8} {:<7} {:<7}{}\n", r.id, to_string(r.kind),
                           r.correct ? "yes" : "no", r.frames, r.trials, r.error.empty() ? "" : "  error: " + r.error);
    }
    return out;
}

BenchmarkReport aggregate(std::vector<ItemResult> items, const std::string& ablation) {
    std::sort(items.begin(), items.end(), [](const ItemResult& a, const ItemResult& b) { return a.id < b.id; });
    BenchmarkReport r;
    r.ablation = ablation;
    r.n_items = static_cast<int>(items.size());

    int correct = 0;
    int loc_hits3 = 0, loc_hits5 = 0;
    double frames = 0.0, ratio = 0.0;
    std::vector<CueSample> cues;
    std::map<std::string, std::vector<const ItemResult*>> by_type;

    for (const auto& item : items) {
        if (!item.error.empty()) ++r.n_errors;
        if (item.kind == DatasetKind::temporal_localization) {
            ++r.n_localization_items;
            const double iou = item.iou.value_or(0.0);
            loc_hits3 += iou >= 0.3;
            loc_hits5 += iou >= 0.5;
        } else {
            ++r.n_accuracy_items;
            correct += item.correct;
        }
        frames += item.frames;
        ratio += item.ratio;
        cues.push_back(CueSample{item.cue_tag, item.total_frames, item.distinct_frames});
        by_type[item.question_type.empty() ? "n/a" : item.question_type].push_back(&item);
    }
    if (r.n_accuracy_items) r.accuracy = static_cast<double>(correct) / r.n_accuracy_items;
    if (r.n_localization_items) {
        r.iou_recall[0.3] = static_cast<double>(loc_hits3) / r.n_localization_items;
        r.iou_recall[0.5] = static_cast<double>(loc_hits5) / r.n_localization_items;
    }
    if (r.n_items) {
        r.avg_frames = frames / r.n_items;
        r.avg_ratio = ratio / r.n_items;
    }
    for (const auto& [type, list] : by_type) {
        int c = 0;
        double f = 0.0;
        for (const auto* it : list) {
            c += it->correct;
            f += it->frames;
        }
        r.per_question_type[type] =
            Json{{"n", list.size()}, {"correct", c}, {"avg_frames", f / static_cast<double>(list.size())}};
    }
    r.per_cue = cue_bucket_report(cues);
    r.items = std::move(items);
    return r;
}

namespace {

ItemResult score_item(const BenchmarkItem& item, const EpisodeResult& ep, LlmClient& llm, const PromptCatalog& catalog) {
    ItemResult r;
    r.answer = ep.answer;
    if (const auto* k = std::get_if<int>(&item.gold.value)) {
        r.correct = score_mcq(ep.answer, *k);
    } else if (const auto* w = std::get_if<FrameWindow>(&item.gold.value)) {
        const auto pred = parse_frame_window(ep.answer);
        r.iou = pred ? interval_iou(*pred, *w) : 0.0;
        r.correct = *r.iou >= 0.5;
    } else {
        const auto& gold = std::get<std::string>(item.gold.value);
        if (!trim(ep.answer).empty()) {
            r.judge = judge_open_ended(llm, catalog, ep.answer, gold, item.question);
            r.correct = r.judge->correct;
        } else {
            r.judge = JudgeResult{};
        }
    }
    return r;
}

ItemResult run_item(const BenchmarkItem& item, const RunConfig& cfg, const PromptCatalog& catalog, const Agent& agent,
                    const std::string& digest, LongTermMemory* memory, const std::shared_ptr<LlmBackend>& shared,
                    const std::filesystem::path& out_dir) {
    ItemResult r;
    Transcript transcript;
    TraceWriter trace;
    try {
        auto backend = shared ? shared : make_backend(cfg.gateway, item.script);
        auto registry = make_registry(cfg.toolbox, item.meta, item.video_ref);
        LlmClient llm(*backend, transcript);
        EpisodeContext ctx{llm, *registry, memory, &trace, digest};
        const EpisodeResult ep = agent.run_episode(ctx, item.question, item.meta, cfg.ablation);
        r = score_item(item, ep, llm, catalog);
        const auto& last = ep.trials.back();
        r.question_type = last.policy ? last.policy->question_type : "n/a";
        r.frames = ep.distinct_frames_accessed;
        r.charges = ep.frames_accessed;
        r.ratio = ep.ratio;
        r.trials = static_cast<int>(ep.trials.size());
        r.distinct_frames = ep.distinct_frames;
    } catch (const std::exception& e) {
        r.error = e.what();
        r.question_type = "n/a";
    }
    r.id = item.id;
    r.kind = item.question.kind;
    r.cue_tag = item.cue_tag;
    r.total_frames = item.meta.total_frames;

    const std::string name = safe_name(item.id) + ".jsonl";
    trace.write(out_dir / "traces" / name);
    write_file(out_dir / "transcripts" / name, transcript.serialize());
    return r;
}

}  // namespace

BenchmarkReport run_benchmark(const std::vector<BenchmarkItem>& items, const RunConfig& cfg,
                              const std::filesystem::path& out_dir, const BenchOptions& opts) {
    cfg.validate();
    std::filesystem::create_directories(out_dir / "traces");
    std::filesystem::create_directories(out_dir / "transcripts");

    const PromptCatalog catalog = make_catalog(cfg);
    const Agent agent(catalog, cfg.planner_options());
    const std::string digest = config_digest(cfg, catalog);
    const AblationConfig ablation = cfg.ablation.normalized();

    HashingEmbedder embedder;
    std::unique_ptr<LongTermMemory> memory;
    if (ablation.use_memory) {
        std::filesystem::path path = cfg.memory_path;
        if (path.empty()) {
            // A run-local store starts empty so reruns reproduce.
            path = out_dir / "memory.jsonl";
            write_file(path, "");
        }
        memory = std::make_unique<LongTermMemory>(embedder, path, cfg.deterministic);
    }

    // Scripted runs get a fresh backend per item so scripts never leak use
    // counts across items; other gateways are shared.
    std::shared_ptr<LlmBackend> shared;
    if (cfg.gateway.kind != GatewayKind::scripted) shared = make_backend(cfg.gateway);

    std::vector<ItemResult> results(items.size());
    // Memory makes every episode depend on the ones before it, so items run
    // in manifest order whenever it is on.
    const int jobs = memory ? 1 : std::max(1, opts.jobs);
    if (jobs == 1 || items.size() < 2) {
        for (std::size_t i = 0; i < items.size(); ++i)
            results[i] = run_item(items[i], cfg, catalog, agent, digest, memory.get(), shared, out_dir);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < std::min<int>(jobs, static_cast<int>(items.size())); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < items.size(); i = next++)
                    results[i] = run_item(items[i], cfg, catalog, agent, digest, nullptr, shared, out_dir);
            });
        }
        for (auto& t : pool) t.join();
    }

    BenchmarkReport report = aggregate(std::move(results), ablation.name());
    write_file(out_dir / "report.json", report.to_json().dump(2) + "\n");
    write_file(out_dir / "report.txt", report.render_table());
    return report;
}

std::vector<BenchmarkReport> run_ablation_matrix(const std::vector<BenchmarkItem>& items, const RunConfig& cfg,
                                                 const std::filesystem::path& out_dir, const BenchOptions& opts) {
    const auto rows = AblationConfig::matrix_rows();
    std::vector<BenchmarkReport> reports(rows.size());
    std::vector<std::exception_ptr> errors(rows.size());

    auto run_row = [&](std::size_t i, int item_jobs) {
        try {
            RunConfig row_cfg = cfg;
            row_cfg.ablation = AblationConfig::from_name(rows[i]);
            const auto dir = out_dir / row_dir_name(rows[i]);
            row_cfg.memory_path = dir / "memory.jsonl";
            std::filesystem::create_directories(dir);
            write_file(row_cfg.memory_path, "");
            reports[i] = run_benchmark(items, row_cfg, dir, BenchOptions{item_jobs});
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < rows.size(); ++i) run_row(i, 1);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < std::min<int>(jobs, static_cast<int>(rows.size())); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < rows.size(); i = next++) run_row(i, 1);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    Json matrix = Json::array();
    for (const auto& r : reports) {
        Json row{{"ablation", r.ablation},
                 {"accuracy", r.accuracy},
                 {"avg_frames", r.avg_frames},
                 {"avg_ratio", r.avg_ratio},
                 {"n_items", r.n_items},
                 {"n_errors", r.n_errors}};
        for (const auto& [thr, v] : r.iou_recall) row[fmt::format("r@1_iou{}", format_real(thr, 1))] = v;
        matrix.push_back(std::move(row));
    }
    write_file(out_dir / "matrix.json", matrix.dump(2) + "\n");
    write_file(out_dir / "matrix.txt", render_matrix_table(reports));
    return reports;
}

std::string render_matrix_table(const std::vector<BenchmarkReport>& reports) {
    std::string out = fmt::format("{:<16} {:>9} {:>9} {:>9} {:>9} {:>8}\n", "ablation", "accuracy", "r@1(0.3)",
                                  "r@1(0.5)", "frames", "errors");
    auto recall = [](const BenchmarkReport& r, double thr) {
        auto it = r.iou_recall.find(thr);
        return it == r.iou_recall.end() ? std::string("-") : format_real(it->second * 100.0);
    };
    for (const auto& r : reports) {
        out += fmt::format("{:<16} {:>9} {:>9} {:>9} {:>9} {:>8}\n", r.ablation, format_real(r.accuracy * 100.0),
                           recall(r, 0.3), recall(r, 0.5), format_real(r.avg_frames), r.n_errors);
    }
    return out;
}

}  // namespace avua
