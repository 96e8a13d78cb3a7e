#include "avua/policy.hpp"

#include <regex>

#include <fmt/format.h>

#include "avua/error.hpp"

namespace avua {

std::string to_string(PolicyProvenance p) {
    switch (p) {
        case PolicyProvenance::generated: return "generated";
        case PolicyProvenance::refined: return "refined";
        case PolicyProvenance::retrieved: return "retrieved";
    }
    return "generated";
}

PolicyProvenance policy_provenance_from_string(const std::string& s) {
    if (s == "generated") return PolicyProvenance::generated;
    if (s == "refined") return PolicyProvenance::refined;
    if (s == "retrieved") return PolicyProvenance::retrieved;
    throw Error("unknown policy provenance '" + s + "'");
}

std::string Policy::render() const {
    std::string out = "Question type: " + question_type;
    if (!analysis.empty()) out += "\nAnalysis: " + analysis;
    if (!sampling_strategy.empty()) out += "\nSampling strategy: " + sampling_strategy;
    return out;
}

Json to_json(const Policy& p) {
    return Json{{"question_type", p.question_type},
                {"analysis", p.analysis},
                {"sampling_strategy", p.sampling_strategy},
                {"raw_text", p.raw_text},
                {"provenance", to_string(p.provenance)}};
}

Policy policy_from_json(const Json& j) {
    Policy p;
    p.question_type = j.at("question_type").get<std::string>();
    p.analysis = j.value("analysis", "");
    p.sampling_strategy = j.value("sampling_strategy", "");
    p.raw_text = j.value("raw_text", "");
    p.provenance = policy_provenance_from_string(j.value("provenance", std::string("generated")));
    return p;
}

namespace {

std::string join_trimmed(const std::vector<std::string>& lines) {
    std::size_t b = 0;
    std::size_t e = lines.size();
    while (b < e && trim(lines[b]).empty()) ++b;
    while (e > b && trim(lines[e - 1]).empty()) --e;
    std::string out;
    for (std::size_t i = b; i < e; ++i) {
        if (i > b) out += "\n";
        out += lines[i];
    }
    return trim(out);
}

}  // namespace

Policy parse_policy(std::string_view text) {
    static const std::regex heading(R"(^\s*(?:[-#>]+\s*)?(?:\d+[.)]\s*)?([A-Za-z][A-Za-z0-9 /_()-]{0,40}?)\s*:\s*(.*)$)");
    enum class Section { analysis, type, sampling };

    Policy p;
    p.raw_text = std::string(text);
    std::vector<std::string> analysis;
    std::vector<std::string> sampling;
    bool type_found = false;
    Section current = Section::analysis;

    for (std::string line : split_lines(text)) {
        for (auto pos = line.find("**"); pos != std::string::npos; pos = line.find("**")) line.erase(pos, 2);
        std::smatch m;
        if (std::regex_match(line, m, heading)) {
            const std::string label = to_lower(m[1].str());
            const std::string content = trim(m[2].str());
            if (label.find("sampl") != std::string::npos) {
                current = Section::sampling;
                sampling.push_back(content);
                continue;
            }
            if (label.find("type") != std::string::npos && !type_found) {
                type_found = true;
                current = Section::type;
                p.question_type = content;
                continue;
            }
            current = Section::analysis;
            analysis.push_back(label.find("analy") != std::string::npos ? content : trim(line));
            continue;
        }
        switch (current) {
            case Section::type:
                if (p.question_type.empty() && !trim(line).empty()) {
                    p.question_type = trim(line);
                } else {
                    current = Section::analysis;
                    analysis.push_back(line);
                }
                break;
            case Section::sampling: sampling.push_back(line); break;
            case Section::analysis: analysis.push_back(line); break;
        }
    }
    if (!type_found || p.question_type.empty()) throw PolicyParseFailure("policy reply has no question-type heading");
    p.analysis = join_trimmed(analysis);
    p.sampling_strategy = join_trimmed(sampling);
    return p;
}

PromptBundle PolicyEngine::render(const Question& q, const VideoMeta& meta,
                                  const std::vector<ScoredRecord>& experiences,
                                  const Refinement* prior_refinement) const {
    std::string text = substitute(catalog_->get(prompt_names::policy),
                                  {{"Question", render_question(q)}, {"Video details", render_video_details(meta)}});
    while (!text.empty() && text.back() == '\n') text.pop_back();

    if (!experiences.empty()) {
        text += fmt::format("\n\n{} (most similar first):", kExperiencesHeader);
        const std::size_t n = std::min(experiences.size(), opts_.max_experiences);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& [rec, sim] = experiences[i];
            text += fmt::format("\nExperience {} (similarity {:.2f}, evaluation {}):", i + 1, sim,
                                rec.verdict ? "True" : "False");
            text += "\n- Question type: " + rec.question_type;
            std::vector<std::string> steps;
            for (const auto& d : rec.trajectory_digest) {
                steps.push_back(fmt::format("{}({}) -> {}", d.action, d.input, d.observation_head));
            }
            text += "\n- Trajectory: " + (steps.empty() ? std::string("none") : fmt::format("{}", fmt::join(steps, "; ")));
            if (!rec.refinement.refined_plan.empty()) text += "\n- Refinement: " + rec.refinement.refined_plan;
        }
    }
    if (prior_refinement && !prior_refinement->empty()) {
        text += fmt::format("\n\n{}:\nDiagnosis: {}\nRefined plan: {}\nUse the refined plan to write an updated, more "
                            "detailed policy.",
                            kRefinementHeader, prior_refinement->diagnosis, prior_refinement->refined_plan);
    }
    text += "\n\nAnswer with the headings 'Question type:', 'Analysis:' and 'Sampling strategy:'.";

    PromptBundle bundle;
    bundle.user_text = std::move(text);
    bundle.decoding = opts_.decoding;
    return bundle;
}

Policy PolicyEngine::generate(LlmClient& llm, const Question& q, const VideoMeta& meta,
                              const std::vector<ScoredRecord>& experiences,
                              const Refinement* prior_refinement) const {
    PromptBundle bundle = render(q, meta, experiences, prior_refinement);
    const auto provenance = prior_refinement ? PolicyProvenance::refined : PolicyProvenance::generated;
    std::string reply = llm.complete(bundle, prompt_names::policy);
    try {
        Policy p = parse_policy(reply);
        p.provenance = provenance;
        return p;
    } catch (const PolicyParseFailure&) {
    }
    bundle.user_text += "\n\nYour previous reply could not be parsed. Start with a line 'Question type: <type>'.";
    reply = llm.complete(bundle, prompt_names::policy);
    Policy p = parse_policy(reply);
    p.provenance = provenance;
    return p;
}

}  // namespace avua
