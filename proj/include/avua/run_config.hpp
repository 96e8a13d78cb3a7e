#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "avua/llm_gateway.hpp"
#include "avua/planner.hpp"
#include "avua/prompt_catalog.hpp"
#include "avua/text_util.hpp"
#include "avua/toolbox.hpp"

namespace avua {

enum class GatewayKind { scripted, remote, replay, record };
enum class ToolboxKind { synthetic, remote };

struct GatewaySettings {
    GatewayKind kind = GatewayKind::scripted;
    std::filesystem::path script;
    bool strict = true;
    std::string url;
    std::filesystem::path session;
};

struct ToolboxSettings {
    ToolboxKind kind = ToolboxKind::synthetic;
    std::filesystem::path video_spec;
    std::string url;
    int window_stride = 1;
    double detection_threshold = kDetectionThreshold;
};

struct Budgets {
    int max_steps = 15;
    int max_trials = 2;
    int sampler_cap = 16;
};

struct RunConfig {
    std::filesystem::path prompts_dir;
    GatewaySettings gateway;
    ToolboxSettings toolbox;
    AblationConfig ablation;
    Budgets budgets;
    std::filesystem::path memory_path;
    // Logical clock for memory timestamps so reruns are byte-identical.
    bool deterministic = true;
    bool inherit_frame_cache = true;
    bool memory_on_first_trial = true;
    bool only_successful = false;
    int memory_k = 3;
    double min_similarity = 0.5;
    std::optional<int> eval_confidence_gate;

    // Throws ConfigError on missing required settings.
    void validate() const;
    PlannerOptions planner_options() const;
};

Json to_json(const RunConfig& cfg);
// Relative paths are resolved against `base_dir`.
RunConfig run_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Digest of the behaviour-relevant settings plus the prompt catalog text.
// Paths are excluded so relocating fixtures keeps the digest.
std::string config_digest(const RunConfig& cfg, const PromptCatalog& catalog);

PromptCatalog make_catalog(const RunConfig& cfg);

// `script_override` (e.g. a manifest item's own script) wins over the
// configured script. Throws ConfigError for unreadable inputs.
std::shared_ptr<LlmBackend> make_backend(const GatewaySettings& settings,
                                         const std::filesystem::path& script_override = {});

std::unique_ptr<ToolRegistry> make_registry(const ToolboxSettings& settings, const VideoMeta& meta,
                                            const std::filesystem::path& video_override = {});

}  // namespace avua
