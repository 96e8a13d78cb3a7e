#include "avua/planner.hpp"

#include <algorithm>
#include <regex>

#include <fmt/format.h>

#include "avua/error.hpp"

namespace avua {

AblationConfig AblationConfig::normalized() const {
    if (!react_only) return *this;
    return AblationConfig{false, false, false, false, true};
}

std::string AblationConfig::name() const {
    const AblationConfig n = normalized();
    if (n.react_only) return "react-only";
    const int off = !n.use_memory + !n.use_evaluator + !n.use_sampler + !n.use_refiner;
    if (off == 0) return "ours";
    if (off == 1) {
        if (!n.use_memory) return "w/o-memory";
        if (!n.use_evaluator) return "w/o-evaluator";
        if (!n.use_sampler) return "w/o-sampler";
        return "w/o-refiner";
    }
    return fmt::format("custom(memory={},evaluator={},sampler={},refiner={})", n.use_memory, n.use_evaluator,
                       n.use_sampler, n.use_refiner);
}

AblationConfig AblationConfig::from_name(std::string_view raw) {
    std::string name = to_lower(trim(raw));
    for (auto& c : name) {
        if (c == '_' || c == ' ') c = '-';
    }
    if (name.rfind("wo-", 0) == 0) name = "w/o-" + name.substr(3);
    if (name.rfind("w/o", 0) == 0 && name.size() > 3 && name[3] != '-') name.insert(3, "-");

    AblationConfig cfg;
    if (name == "ours" || name == "full" || name == "none") return cfg;
    if (name == "react" || name == "react-only") return AblationConfig{false, false, false, false, true};
    if (name == "w/o-memory") cfg.use_memory = false;
    else if (name == "w/o-evaluator") cfg.use_evaluator = false;
    else if (name == "w/o-sampler") cfg.use_sampler = false;
    else if (name == "w/o-refiner") cfg.use_refiner = false;
    else throw ConfigError("unknown ablation '" + std::string(raw) + "'");
    return cfg;
}

std::vector<std::string> AblationConfig::matrix_rows() {
    return {"ours", "w/o-memory", "w/o-evaluator", "w/o-sampler", "w/o-refiner", "react-only"};
}

Json to_json(const AblationConfig& cfg) {
    const AblationConfig n = cfg.normalized();
    return Json{{"use_memory", n.use_memory},
                {"use_evaluator", n.use_evaluator},
                {"use_sampler", n.use_sampler},
                {"use_refiner", n.use_refiner},
                {"react_only", n.react_only}};
}

// ---------------------------------------------------------------------------

namespace {

enum class Label { none, thought, action, action_input, final_answer, observation };

Label classify(const std::string& lowered) {
    if (lowered == "thought") return Label::thought;
    if (lowered == "action") return Label::action;
    if (lowered == "action input" || lowered == "action_input" || lowered == "actioninput") return Label::action_input;
    if (lowered == "final answer" || lowered == "final_answer" || lowered == "finalanswer") return Label::final_answer;
    if (lowered == "observation") return Label::observation;
    return Label::none;
}

std::string normalize_tool_name(std::string name) {
    name = trim(name);
    auto strip = [](char c) { return c == '`' || c == '"' || c == '\'' || c == '[' || c == ']' || c == '*'; };
    while (!name.empty() && strip(name.front())) name.erase(name.begin());
    while (!name.empty() && strip(name.back())) name.pop_back();
    name = to_lower(trim(name));
    for (auto& c : name) {
        if (c == ' ' || c == '-') c = '_';
    }
    return name;
}

}  // namespace

ParsedStep parse_step(std::string_view text) {
    static const std::regex label_re(
        R"(^\s*(?:[-#>*]+\s*)?(thought|action[ _]?input|action|final[ _]?answer|observation)\s*\**\s*:\s*(.*)$)",
        std::regex::icase);

    const auto lines = split_lines(text);
    struct Block {
        bool present = false;
        std::string content;
        std::size_t line = 0;
    };
    Block thought, action, input;
    std::optional<std::size_t> final_line;
    std::string final_first;
    std::string preamble;
    Label current = Label::none;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::smatch m;
        if (std::regex_match(lines[i], m, label_re)) {
            Label label = classify(to_lower(m[1].str()));
            if (label == Label::observation) {
                if (action.present) break;
                current = Label::none;
                continue;
            }
            if (label == Label::final_answer) {
                final_line = i;
                final_first = m[2].str();
                break;
            }
            Block* b = label == Label::thought ? &thought : label == Label::action ? &action : &input;
            if (b->present) {
                current = Label::none;
                continue;
            }
            *b = Block{true, m[2].str(), i};
            current = label;
            continue;
        }
        switch (current) {
            case Label::thought: thought.content += "\n" + lines[i]; break;
            case Label::action_input: input.content += "\n" + lines[i]; break;
            case Label::none:
                if (!thought.present && !action.present) preamble += (preamble.empty() ? "" : "\n") + lines[i];
                break;
            default: break;
        }
    }

    const bool has_step = action.present && input.present && !normalize_tool_name(action.content).empty();
    if (final_line && !has_step) {
        std::string answer = final_first;
        for (std::size_t k = *final_line + 1; k < lines.size(); ++k) answer += "\n" + lines[k];
        answer = trim(answer);
        if (!answer.empty()) return FinalAnswer{answer};
        throw StepParseFailure("empty Final Answer");
    }
    if (has_step) {
        StepHeader h;
        h.thought = trim(thought.present ? thought.content : preamble);
        h.action = normalize_tool_name(action.content);
        h.action_input = trim(input.content);
        return h;
    }
    throw StepParseFailure("reply has neither Thought/Action/Action Input nor Final Answer");
}

std::optional<int> normalize_mcq_answer(std::string_view text) {
    static const std::regex option_re(R"(option\s*[#:]?\s*\(?\s*(\d+))", std::regex::icase);
    static const std::regex bare_re(R"(^\W*\(?\s*(\d+)\s*\)?\W*$)");
    const std::string s(text);
    std::smatch m;
    if (std::regex_search(s, m, option_re) || std::regex_match(s, m, bare_re)) {
        try {
            return std::stoi(m[1].str());
        } catch (const std::out_of_range&) {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

std::string canonical_option(int index) { return fmt::format("Option {}", index); }

std::optional<std::pair<int, int>> parse_frame_window(std::string_view text) {
    static const std::regex window_re(R"(\[\s*(\d+)\s*,\s*(\d+)\s*\])");
    const std::string s(text);
    std::smatch m;
    if (!std::regex_search(s, m, window_re)) return std::nullopt;
    try {
        int a = std::stoi(m[1].str());
        int b = std::stoi(m[2].str());
        if (a > b) std::swap(a, b);
        return std::pair{a, b};
    } catch (const std::out_of_range&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------

Json to_json(const EpisodeResult& r) {
    Json trials = Json::array();
    for (const auto& t : r.trials) {
        Json j{{"trajectory", to_json(t.trajectory)}};
        j["policy"] = t.policy ? to_json(*t.policy) : Json(nullptr);
        j["evaluation"] = t.evaluation ? to_json(*t.evaluation) : Json(nullptr);
        j["refinement"] = t.refinement ? to_json(*t.refinement) : Json(nullptr);
        trials.push_back(std::move(j));
    }
    return Json{{"trials", trials},
                {"answer", r.answer},
                {"frames_accessed", r.frames_accessed},
                {"distinct_frames_accessed", r.distinct_frames_accessed},
                {"ratio", r.ratio},
                {"distinct_frames", r.distinct_frames},
                {"transcript_ref", r.transcript_ref}};
}

Agent::Agent(const PromptCatalog& catalog, PlannerOptions opts)
    : catalog_(&catalog),
      opts_(std::move(opts)),
      policy_engine_(catalog, PolicyOptions{3, opts_.decoding}),
      sampler_(catalog, SamplerOptions{opts_.sampler_cap, 3, opts_.decoding}),
      evaluator_(catalog, ReflectionOptions{opts_.max_review_chars, opts_.decoding}),
      refiner_(catalog, ReflectionOptions{opts_.max_review_chars, opts_.decoding}) {
    if (opts_.max_steps < 1) throw ConfigError("step budget must be at least 1");
    if (opts_.max_trials < 1) throw ConfigError("max_trials must be at least 1");
}

PromptBundle Agent::render_agent_prompt(const Question& q, const VideoMeta& meta, const ToolRegistry& tools,
                                        const Policy* pi, const Trajectory& tau, bool with_reminder) const {
    PromptBundle bundle;
    bundle.decoding = opts_.decoding;
    bundle.decoding.stop_sequences.push_back("\nObservation:");
    bundle.system_text = substitute(catalog_->get(prompt_names::agent),
                                    {{"duration_min", format_real(meta.duration_sec / 60.0)},
                                     {"duration_sec", format_real(meta.duration_sec)},
                                     {"frame_rate", format_real(meta.frame_rate)},
                                     {"total_frames", std::to_string(meta.total_frames)},
                                     {"scene_list", render_scene_list(meta)},
                                     {"tools", tools.render_tool_list()},
                                     {"tool_names", tools.render_tool_names()}});

    std::string user = render_question(q);
    switch (q.kind) {
        case DatasetKind::mcq: user += "\nAnswer format: Final Answer: Option <number>"; break;
        case DatasetKind::temporal_localization:
            user += "\nAnswer format: Final Answer: [start_frame,end_frame] for the frame window that answers the question";
            break;
        case DatasetKind::open_ended: user += "\nAnswer format: Final Answer: a short free-text answer"; break;
    }
    if (pi) user += "\n\nPolicy:\n" + pi->render();
    const std::string scratchpad = tau.render();
    if (!scratchpad.empty()) user += "\n\n" + scratchpad;
    if (with_reminder) user += "\n\n" + std::string(kFormatReminder);
    bundle.user_text = std::move(user);
    return bundle;
}

Trajectory Agent::run_trial(EpisodeContext& ctx, const Question& q, const VideoMeta& meta, const Policy* pi,
                            const AblationConfig& raw_cfg, int budget, FrameLedger& ledger, ShortTermCache& cache,
                            int trial) const {
    if (budget < 1) throw ConfigError("step budget must be at least 1");
    const AblationConfig cfg = raw_cfg.normalized();
    Trajectory tau;

    for (int step_no = 1; step_no <= budget; ++step_no) {
        std::optional<ParsedStep> parsed;
        std::string reply = ctx.llm.complete(render_agent_prompt(q, meta, ctx.tools, pi, tau, false), prompt_names::agent);
        try {
            parsed = parse_step(reply);
        } catch (const StepParseFailure&) {
            reply = ctx.llm.complete(render_agent_prompt(q, meta, ctx.tools, pi, tau, true), prompt_names::agent);
            try {
                parsed = parse_step(reply);
            } catch (const StepParseFailure&) {
                tau.terminated_by = TerminatedBy::parse_abort;
                return tau;
            }
        }

        if (auto* fin = std::get_if<FinalAnswer>(&*parsed)) {
            tau.final_answer = fin->text;
            tau.terminated_by = TerminatedBy::final_answer;
            return tau;
        }

        const auto& header = std::get<StepHeader>(*parsed);
        Step step;
        step.index = step_no;
        step.thought = header.thought;
        step.action = header.action;
        step.action_input = parse_action_input(header.action_input, meta);

        if (!ctx.tools.contains(step.action)) {
            step.observation = fmt::format("Error: unknown tool '{}'. Use one of [{}].", step.action,
                                           ctx.tools.render_tool_names());
        } else {
            std::string note;
            const auto& d = ctx.tools.descriptor(step.action);
            if (cfg.use_sampler && d.frames_per_call > 0 && !step.action_input.frame_indices.empty()) {
                FrameSuggestion s = sampler_.suggest(ctx.llm, pi, tau, meta, step.action, step.action_input);
                if (ctx.trace) {
                    ctx.trace->add(trace_kinds::sampler, trial,
                                   Json{{"step", step_no},
                                        {"action", step.action},
                                        {"proposed", step.action_input.frame_indices},
                                        {"suggestion", to_json(s)}});
                }
                std::vector<int> proposed = step.action_input.frame_indices;
                std::sort(proposed.begin(), proposed.end());
                if (s.indices != proposed) {
                    note = fmt::format("Sampler adjusted frames to [{}].", fmt::join(s.indices, ", "));
                    step.action_input.frame_indices = s.indices;
                }
            }
            try {
                Observation obs = ctx.tools.invoke(step.action, step.action_input, ledger, &cache);
                step.observation = note.empty() ? obs.text : note + "\n" + obs.text;
                step.frames_charged = std::move(obs.frames_charged);
                step.charges = std::move(obs.charges);
                step.cache_hit = obs.cache_hit;
            } catch (const Error& e) {
                step.observation = std::string("Error: ") + e.what();
                tau.steps.push_back(step);
                if (ctx.trace) ctx.trace->add(trace_kinds::step, trial, to_json(step), step.frames_charged);
                tau.terminated_by = TerminatedBy::tool_fatal;
                return tau;
            }
        }
        tau.steps.push_back(step);
        if (ctx.trace) ctx.trace->add(trace_kinds::step, trial, to_json(step), step.frames_charged);
    }
    tau.terminated_by = TerminatedBy::step_budget;
    return tau;
}

EpisodeResult Agent::run_episode(EpisodeContext& ctx, const Question& q, const VideoMeta& meta,
                                 const AblationConfig& raw_cfg) const {
    const AblationConfig cfg = raw_cfg.normalized();
    FrameLedger ledger;
    ShortTermCache cache;
    EpisodeResult result;
    std::optional<Refinement> prior;
    std::string last_type;

    for (int trial = 1; trial <= opts_.max_trials; ++trial) {
        if (trial > 1 && !opts_.inherit_frame_cache) cache.clear();
        TrialRecord rec;
        if (!cfg.react_only) {
            std::vector<ScoredRecord> experiences;
            if (cfg.use_memory && ctx.memory && (trial > 1 || opts_.memory_on_first_trial)) {
                experiences = ctx.memory->retrieve(last_type, q.text, opts_.memory_k, opts_.retrieve);
            }
            rec.policy = policy_engine_.generate(ctx.llm, q, meta, experiences, prior ? &*prior : nullptr);
            last_type = rec.policy->question_type;
            if (ctx.trace) {
                Json used = Json::array();
                for (const auto& e : experiences) used.push_back({{"id", e.record.id}, {"similarity", e.similarity}});
                ctx.trace->add(trace_kinds::policy, trial, Json{{"policy", to_json(*rec.policy)}, {"experiences", used}});
            }
        }

        const Policy* pi = rec.policy ? &*rec.policy : nullptr;
        rec.trajectory = run_trial(ctx, q, meta, pi, cfg, opts_.max_steps, ledger, cache, trial);

        if (cfg.use_evaluator) {
            rec.evaluation = evaluator_.evaluate(ctx.llm, q, pi, rec.trajectory);
            if (ctx.trace) ctx.trace->add(trace_kinds::evaluation, trial, to_json(*rec.evaluation));
        }
        const bool passed = rec.evaluation && rec.evaluation->verdict &&
                            (!opts_.eval_confidence_gate || rec.evaluation->confidence >= *opts_.eval_confidence_gate);
        const bool retry = cfg.use_evaluator && !passed && trial < opts_.max_trials && cfg.use_refiner;
        if (retry) {
            rec.refinement = refiner_.refine(ctx.llm, q, pi, rec.trajectory, &*rec.evaluation);
            if (ctx.trace) ctx.trace->add(trace_kinds::refinement, trial, to_json(*rec.refinement));
            prior = rec.refinement;
        }
        result.trials.push_back(std::move(rec));
        if (!retry) break;
    }

    auto& last = result.trials.back();
    const int last_trial = static_cast<int>(result.trials.size());
    if (cfg.use_refiner && !last.refinement) {
        const Policy* pi = last.policy ? &*last.policy : nullptr;
        last.refinement = refiner_.refine(ctx.llm, q, pi, last.trajectory, last.evaluation ? &*last.evaluation : nullptr);
        if (ctx.trace) ctx.trace->add(trace_kinds::refinement, last_trial, to_json(*last.refinement));
    }

    std::optional<std::string> memory_id;
    if (cfg.use_memory && ctx.memory) {
        MemoryRecord record;
        record.question_type = last.policy ? last.policy->question_type : "unknown";
        record.question_text = q.text;
        record.policy_raw = last.policy ? last.policy->raw_text : "";
        record.trajectory_digest = digest_trajectory(last.trajectory);
        record.refinement = last.refinement.value_or(Refinement{});
        record.verdict = last.evaluation && last.evaluation->verdict;
        record.confidence = last.evaluation ? last.evaluation->confidence : 0;
        memory_id = ctx.memory->put(std::move(record));
    }

    for (auto it = result.trials.rbegin(); it != result.trials.rend(); ++it) {
        if (it->trajectory.final_answer) {
            result.answer = *it->trajectory.final_answer;
            break;
        }
    }
    const auto report = ledger_report(ledger, meta);
    result.frames_accessed = ledger.total_charges();
    result.distinct_frames_accessed = report.frames;
    result.ratio = report.ratio;
    result.distinct_frames.assign(ledger.distinct_frames().begin(), ledger.distinct_frames().end());

    const bool all_aborted = std::all_of(result.trials.begin(), result.trials.end(), [](const TrialRecord& t) {
        return t.trajectory.terminated_by == TerminatedBy::parse_abort && !t.trajectory.final_answer;
    });

    if (ctx.trace) {
        Json payload{{"answer", result.answer},
                     {"trials", result.trials.size()},
                     {"terminated_by", to_string(last.trajectory.terminated_by)},
                     {"frames_accessed", result.frames_accessed},
                     {"distinct_frames_accessed", result.distinct_frames_accessed},
                     {"ratio", result.ratio},
                     {"total_frames", meta.total_frames},
                     {"per_tool", ledger.per_tool()},
                     {"ablation", cfg.name()},
                     {"config_digest", ctx.config_digest},
                     {"aborted", all_aborted}};
        payload["memory_id"] = memory_id ? Json(*memory_id) : Json(nullptr);
        ctx.trace->add(trace_kinds::final_, last_trial, payload);
    }
    if (all_aborted) throw EpisodeAbort("every trial ended without a parseable agent reply");
    return result;
}

}  // namespace avua
