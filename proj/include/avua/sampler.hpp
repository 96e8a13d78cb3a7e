#pragma once

#include <string>
#include <vector>

#include "avua/llm_gateway.hpp"
#include "avua/prompt_catalog.hpp"
#include "avua/trajectory.hpp"
#include "avua/video.hpp"

namespace avua {

struct Policy;

enum class SamplingMode { sparse, dense, switch_rate };

std::string to_string(SamplingMode m);

struct FrameSuggestion {
    std::vector<int> indices;
    std::string rationale;
    SamplingMode mode = SamplingMode::sparse;
    bool fallback = false;
};

Json to_json(const FrameSuggestion& s);

// start, start+step, ... up to min(end, total - 1). Throws InvalidRange.
std::vector<int> expand_range(int start, int end, int step, int total);

// Sorts, deduplicates, clamps into [0, total), and truncates to `cap`.
// Returns a warning line per clamped index. Valid input passes unchanged.
std::vector<std::string> validate_indices(std::vector<int>& indices, int total, std::size_t cap);

// Parses frame expressions such as "frame 12", "frames 10-20 step 5",
// "frame index 0", "[0, 30, 60]" or a bare comma list. Leading frame
// expressions become indices; the remainder is the query.
ActionInput parse_action_input(std::string_view raw, const VideoMeta& meta);

struct SamplerOptions {
    std::size_t max_indices = 16;
    std::size_t recent_observations = 3;
    DecodingParams decoding;
};

class FrameSampler {
public:
    FrameSampler(const PromptCatalog& catalog, SamplerOptions opts = {})
        : catalog_(&catalog), opts_(opts) {}

    PromptBundle render(const Policy* pi, const Trajectory& tau, const VideoMeta& meta,
                        const std::string& action, const ActionInput& proposed) const;

    // Never throws for model problems: falls back to the proposal.
    FrameSuggestion suggest(LlmClient& llm, const Policy* pi, const Trajectory& tau,
                            const VideoMeta& meta, const std::string& action,
                            const ActionInput& proposed) const;

    FrameSuggestion parse(std::string_view completion, const VideoMeta& meta,
                          const ActionInput& proposed) const;

private:
    const PromptCatalog* catalog_;
    SamplerOptions opts_;
};

}  // namespace avua
