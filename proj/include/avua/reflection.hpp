#pragma once

#include <optional>
#include <string>

#include "avua/llm_gateway.hpp"
#include "avua/prompt_catalog.hpp"
#include "avua/text_util.hpp"
#include "avua/video.hpp"

namespace avua {

struct Policy;
struct Trajectory;

struct Evaluation {
    bool verdict = false;
    int confidence = 0;
    std::string raw_text;
    bool model_called = true;

    friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

struct Refinement {
    std::string diagnosis;
    std::string refined_plan;
    std::string raw_text;

    bool empty() const { return refined_plan.empty() && diagnosis.empty(); }
    friend bool operator==(const Refinement&, const Refinement&) = default;
};

Json to_json(const Evaluation& e);
Json to_json(const Refinement& r);
Evaluation evaluation_from_json(const Json& j);
Refinement refinement_from_json(const Json& j);

// Reads "Evaluation: True|False" and "Confidence: N" anywhere in the text,
// case-insensitively. Confidence is clamped to [0, 100] and defaults to 0
// when absent. Returns nullopt when no verdict is present.
std::optional<Evaluation> parse_evaluation(std::string_view text);

// Splits at the first heading whose label mentions "plan". Without one,
// diagnosis and plan both hold the full text.
Refinement parse_refinement(std::string_view text);

// The trajectory as the evaluator and refiner see it: the most recent
// `max_chars` characters, with a marker when older steps were cut.
std::string render_trajectory_for_review(const Trajectory& tau, std::size_t max_chars);

struct ReflectionOptions {
    std::size_t max_trajectory_chars = 8000;
    DecodingParams decoding;
};

class Evaluator {
public:
    Evaluator(const PromptCatalog& catalog, ReflectionOptions opts = {})
        : catalog_(&catalog), opts_(opts) {}

    // Answerless trajectories are failed without a model call.
    Evaluation evaluate(LlmClient& llm, const Question& q, const Policy* pi,
                        const Trajectory& tau) const;

private:
    const PromptCatalog* catalog_;
    ReflectionOptions opts_;
};

class Refiner {
public:
    Refiner(const PromptCatalog& catalog, ReflectionOptions opts = {})
        : catalog_(&catalog), opts_(opts) {}

    // `ev` is null when the evaluator is ablated.
    Refinement refine(LlmClient& llm, const Question& q, const Policy* pi,
                      const Trajectory& tau, const Evaluation* ev) const;

private:
    const PromptCatalog* catalog_;
    ReflectionOptions opts_;
};

}  // namespace avua
