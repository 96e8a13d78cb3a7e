#pragma once

#include <optional>
#include <string>
#include <vector>

#include "avua/llm_gateway.hpp"
#include "avua/memory_store.hpp"
#include "avua/prompt_catalog.hpp"
#include "avua/reflection.hpp"
#include "avua/video.hpp"

namespace avua {

enum class PolicyProvenance { generated, refined, retrieved };

std::string to_string(PolicyProvenance p);
PolicyProvenance policy_provenance_from_string(const std::string& s);

struct Policy {
    std::string question_type;
    std::string analysis;
    std::string sampling_strategy;
    std::string raw_text;
    PolicyProvenance provenance = PolicyProvenance::generated;

    // The block the agent prompt shows under "Policy".
    std::string render() const;
};

Json to_json(const Policy& p);
Policy policy_from_json(const Json& j);

// Heading-keyed extraction. A heading is a "Label:" at the start of a line.
// Labels mentioning "sampl" feed sampling_strategy, the first label
// mentioning "type" gives question_type, everything else is analysis.
// Unlabelled lines continue the current section. Throws PolicyParseFailure
// when no question-type heading exists.
Policy parse_policy(std::string_view text);

inline constexpr const char* kExperiencesHeader = "Past experiences";
inline constexpr const char* kRefinementHeader = "Refinement from the previous trial";

struct PolicyOptions {
    std::size_t max_experiences = 3;
    DecodingParams decoding;
};

class PolicyEngine {
public:
    PolicyEngine(const PromptCatalog& catalog, PolicyOptions opts = {})
        : catalog_(&catalog), opts_(opts) {}

    PromptBundle render(const Question& q, const VideoMeta& meta,
                        const std::vector<ScoredRecord>& experiences,
                        const Refinement* prior_refinement) const;

    // Reprompts once with a format reminder before giving up.
    Policy generate(LlmClient& llm, const Question& q, const VideoMeta& meta,
                    const std::vector<ScoredRecord>& experiences,
                    const Refinement* prior_refinement) const;

private:
    const PromptCatalog* catalog_;
    PolicyOptions opts_;
};

}  // namespace avua
