#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "avua/llm_gateway.hpp"
#include "avua/toolbox.hpp"
#include "avua/video.hpp"

namespace avua::testing {

inline std::filesystem::path fixtures() { return AVUA_FIXTURES_DIR; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("avua_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline ScriptEntry entry(std::string matcher, std::string response, std::optional<int> max_uses = {},
                         MatcherKind kind = MatcherKind::substring) {
    return ScriptEntry{std::move(matcher), kind, std::move(response), max_uses};
}

inline VideoMeta meta_of(int total_frames, double fps = 30.0) {
    VideoMeta m;
    m.frame_rate = fps;
    m.total_frames = total_frames;
    m.duration_sec = total_frames / fps;
    return m;
}

inline std::shared_ptr<SyntheticVideoSpec> load_video(const std::string& name) {
    return std::make_shared<SyntheticVideoSpec>(load_synthetic_video(fixtures() / "videos" / (name + ".json")));
}

inline std::unique_ptr<ToolRegistry> synthetic_registry(std::shared_ptr<SyntheticVideoSpec> spec, int stride = 1) {
    auto reg = std::make_unique<ToolRegistry>(spec->meta, ToolboxOptions{stride});
    register_standard_tools(*reg, std::make_shared<SyntheticToolAdapter>(spec));
    return reg;
}

// Distinctive phrases of each prompt template, for script matchers.
inline constexpr const char* kPolicyMarker = "coming up with a set of tactics";
inline constexpr const char* kAgentMarker = "specialized in video question-answering";
inline constexpr const char* kSamplerMarker = "frame sampling advisor";
inline constexpr const char* kEvaluatorMarker = "reasoning trajectories, and the final answer";
inline constexpr const char* kRefinerMarker = "improve based on self refection";
inline constexpr const char* kJudgeMarker = "ground truth answer";

}  // namespace avua::testing
