#include "avua/reflection.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include <fmt/format.h>

#include "avua/policy.hpp"
#include "avua/trajectory.hpp"

namespace avua {

Json to_json(const Evaluation& e) {
    return Json{{"verdict", e.verdict}, {"confidence", e.confidence}, {"raw_text", e.raw_text}, {"model_called", e.model_called}};
}

Json to_json(const Refinement& r) {
    return Json{{"diagnosis", r.diagnosis}, {"refined_plan", r.refined_plan}, {"raw_text", r.raw_text}};
}

Evaluation evaluation_from_json(const Json& j) {
    return Evaluation{j.at("verdict").get<bool>(), j.at("confidence").get<int>(), j.value("raw_text", ""),
                      j.value("model_called", true)};
}

Refinement refinement_from_json(const Json& j) {
    return Refinement{j.value("diagnosis", ""), j.value("refined_plan", ""), j.value("raw_text", "")};
}

std::optional<Evaluation> parse_evaluation(std::string_view text) {
    static const std::regex verdict_re(R"(evaluation\s*\**\s*[:=]?\s*\**\s*(true|false)\b)", std::regex::icase);
    static const std::regex confidence_re(R"(confidence\s*\**\s*[:=]?\s*\**\s*(-?\d+(?:\.\d+)?))", std::regex::icase);
    const std::string s(text);
    std::smatch m;
    if (!std::regex_search(s, m, verdict_re)) return std::nullopt;
    Evaluation e;
    e.raw_text = s;
    e.verdict = to_lower(m[1].str()) == "true";
    if (std::regex_search(s, m, confidence_re)) {
        double c = 0.0;
        try {
            c = std::stod(m[1].str());
        } catch (const std::out_of_range&) {
            c = m[1].str().front() == '-' ? 0.0 : 100.0;
        }
        e.confidence = static_cast<int>(std::lround(std::clamp(c, 0.0, 100.0)));
    }
    return e;
}

Refinement parse_refinement(std::string_view text) {
    static const std::regex heading(R"(^\s*(?:[-#>*]+\s*)?([A-Za-z][A-Za-z0-9 /_()-]{0,40}?)\s*\**\s*:\s*(.*)$)");
    Refinement r;
    r.raw_text = std::string(text);
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::smatch m;
        if (!std::regex_match(lines[i], m, heading)) continue;
        if (to_lower(m[1].str()).find("plan") == std::string::npos) continue;

        std::string plan = trim(m[2].str());
        for (std::size_t k = i + 1; k < lines.size(); ++k) plan += "\n" + lines[k];
        std::string diagnosis;
        for (std::size_t k = 0; k < i; ++k) {
            std::string line = lines[k];
            std::smatch dm;
            if (std::regex_match(line, dm, heading) && to_lower(dm[1].str()).find("diagnos") != std::string::npos) {
                line = dm[2].str();
            }
            diagnosis += (diagnosis.empty() ? "" : "\n") + line;
        }
        r.refined_plan = trim(plan);
        r.diagnosis = trim(diagnosis);
        if (!r.refined_plan.empty()) return r;
        break;
    }
    r.diagnosis = trim(text);
    r.refined_plan = trim(text);
    return r;
}

std::string render_trajectory_for_review(const Trajectory& tau, std::size_t max_chars) {
    Trajectory steps_only;
    steps_only.steps = tau.steps;
    std::string text = steps_only.render();
    if (text.empty()) text = "(no steps)\n";
    return tail_truncate(text, max_chars);
}

namespace {

std::string review_body(const Question& q, const Policy* pi, const Trajectory& tau, std::size_t max_chars) {
    std::string user = render_question(q);
    if (pi) user += "\n\nPolicy:\n" + pi->render();
    user += "\n\nReasoning trajectory:\n" + render_trajectory_for_review(tau, max_chars);
    if (tau.final_answer) {
        user += "\nFinal Answer: " + *tau.final_answer;
    } else {
        user += "\nFinal Answer: none (trial ended by " + to_string(tau.terminated_by) + ")";
    }
    return user;
}

}  // namespace

Evaluation Evaluator::evaluate(LlmClient& llm, const Question& q, const Policy* pi, const Trajectory& tau) const {
    if (!tau.final_answer) return Evaluation{false, 100, "", false};
    PromptBundle bundle;
    bundle.system_text = catalog_->get(prompt_names::evaluator);
    bundle.user_text = review_body(q, pi, tau, opts_.max_trajectory_chars) +
                       "\n\nReply in the form: Evaluation: True or False, Confidence: 0-100";
    bundle.decoding = opts_.decoding;
    std::string reply = llm.complete(bundle, prompt_names::evaluator);
    if (auto e = parse_evaluation(reply)) return *e;
    bundle.user_text += "\nYour previous reply could not be parsed. Reply exactly as: Evaluation: True, Confidence: 90";
    reply = llm.complete(bundle, prompt_names::evaluator);
    if (auto e = parse_evaluation(reply)) return *e;
    return Evaluation{false, 0, reply, true};
}

Refinement Refiner::refine(LlmClient& llm, const Question& q, const Policy* pi, const Trajectory& tau,
                           const Evaluation* ev) const {
    PromptBundle bundle;
    bundle.system_text = catalog_->get(prompt_names::refiner);
    std::string user = "Previous trial:\n" + review_body(q, pi, tau, opts_.max_trajectory_chars);
    if (ev) {
        user += fmt::format("\n\nEvaluation: {}, Confidence: {}", ev->verdict ? "True" : "False", ev->confidence);
    } else {
        user += "\n\nEvaluation: not available";
    }
    user += "\n\nAnswer with the headings 'Diagnosis:' and 'Refined plan:'.";
    bundle.user_text = std::move(user);
    bundle.decoding = opts_.decoding;
    return parse_refinement(llm.complete(bundle, prompt_names::refiner));
}

}  // namespace avua
