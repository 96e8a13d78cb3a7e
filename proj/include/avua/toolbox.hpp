#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "avua/text_util.hpp"
#include "avua/trajectory.hpp"
#include "avua/video.hpp"

namespace avua {

class ShortTermCache;

enum class Modality { video, image, audio, meta };

std::string to_string(Modality m);

struct ToolDescriptor {
    std::string name;
    Modality modality = Modality::image;
    // Frames charged per requested index: 4 for the clip models, 1 for
    // single-frame tools, 0 for tools that read no frames.
    int frames_per_call = 1;
    bool accepts_query = false;
    std::string description;
};

namespace tool_names {
inline constexpr const char* video_caption = "video_caption";
inline constexpr const char* video_qa = "video_qa";
inline constexpr const char* image_qa = "image_qa";
inline constexpr const char* object_tracking = "object_tracking";
inline constexpr const char* text_caption = "text_caption";
inline constexpr const char* audio_transcription = "audio_transcription";
inline constexpr const char* get_frame_info = "get_frame_info";
}  // namespace tool_names

// Descriptors for the six model-backed tools plus get_frame_info.
std::vector<ToolDescriptor> standard_tool_descriptors();

struct Observation {
    std::string text;
    std::vector<int> frames_charged;
    std::string tool;
    bool cache_hit = false;
    std::optional<std::string> query;
    std::vector<FrameCharge> charges;

    friend bool operator==(const Observation&, const Observation&) = default;
};

class FrameLedger {
public:
    void charge(const std::string& tool, const std::vector<int>& frames);

    int total_charges() const { return total_charges_; }
    const std::set<int>& distinct_frames() const { return distinct_; }
    const std::map<std::string, int>& per_tool() const { return per_tool_; }

private:
    int total_charges_ = 0;
    std::set<int> distinct_;
    std::map<std::string, int> per_tool_;
};

struct LedgerReport {
    int frames = 0;
    double ratio = 0.0;
};

LedgerReport ledger_report(const FrameLedger& ledger, const VideoMeta& meta);

// One adapter call covers one requested index.
struct ToolRequest {
    std::string tool;
    int anchor = 0;
    std::vector<int> frames;
    std::optional<std::string> query;
};

struct AdapterReply {
    std::string text;
    // When set, replaces the registry's own window computation for charging.
    std::optional<std::vector<int>> frames_consumed;
};

class ToolAdapter {
public:
    virtual ~ToolAdapter() = default;
    // Throws AdapterFailure (or anything else) on failure; the registry turns
    // failures into textual observations.
    virtual AdapterReply call(const ToolRequest& request) = 0;
};

struct ToolboxOptions {
    int window_stride = 1;
};

class ToolRegistry {
public:
    explicit ToolRegistry(VideoMeta meta, ToolboxOptions opts = {});

    void register_tool(ToolDescriptor descriptor, std::shared_ptr<ToolAdapter> adapter);

    bool contains(const std::string& name) const { return tools_.count(name) > 0; }
    const ToolDescriptor& descriptor(const std::string& name) const;
    std::vector<ToolDescriptor> descriptors() const;
    std::size_t size() const { return order_.size(); }

    // "- name: description" lines and the comma list for the agent prompt.
    std::string render_tool_list() const;
    std::string render_tool_names() const;

    // Frames a call anchored at `anchor` reads, clamped to the video.
    std::vector<int> window(const ToolDescriptor& d, int anchor) const;

    // Throws UnknownTool for unregistered names. Adapter failures come back
    // as observation text with no frames charged.
    Observation invoke(const std::string& tool, const ActionInput& input, FrameLedger& ledger,
                       ShortTermCache* cache = nullptr);

    const VideoMeta& meta() const { return meta_; }

private:
    struct Entry {
        ToolDescriptor descriptor;
        std::shared_ptr<ToolAdapter> adapter;
    };
    VideoMeta meta_;
    ToolboxOptions opts_;
    std::map<std::string, Entry> tools_;
    std::vector<std::string> order_;
};

// ---------------------------------------------------------------------------
// Synthetic annotated videos

struct DetectedObject {
    std::string label;
    double confidence = 0.0;
};

struct FrameAnnotation {
    std::string caption;
    std::vector<DetectedObject> objects;
    std::string ocr_text;
    std::optional<std::pair<int, int>> answer_window;
};

struct AudioSegment {
    double start_sec = 0.0;
    double end_sec = 0.0;
    std::string transcript;
};

// Annotations are keyframes: a frame shows the annotation of the closest
// annotated index at or before it.
struct SyntheticVideoSpec {
    std::string id;
    VideoMeta meta;
    std::map<int, FrameAnnotation> frames;
    std::vector<AudioSegment> audio_segments;

    void validate() const;
    const FrameAnnotation* annotation_at(int frame) const;
    std::optional<std::pair<int, int>> answer_window() const;
};

SyntheticVideoSpec synthetic_video_from_json(const Json& j);
SyntheticVideoSpec load_synthetic_video(const std::filesystem::path& path);
Json to_json(const SyntheticVideoSpec& spec);

inline constexpr double kDetectionThreshold = 0.6;
inline constexpr const char* kNoTextMarker = "[no text detected]";

class SyntheticToolAdapter final : public ToolAdapter {
public:
    explicit SyntheticToolAdapter(std::shared_ptr<const SyntheticVideoSpec> spec,
                                  double detection_threshold = kDetectionThreshold);

    AdapterReply call(const ToolRequest& request) override;

private:
    std::string caption_of(int frame) const;
    std::shared_ptr<const SyntheticVideoSpec> spec_;
    double threshold_;
};

// POST {tool, frame_indices, query} to <url>/invoke; reads
// {observation, frames_consumed, metadata}.
class RemoteToolAdapter final : public ToolAdapter {
public:
    explicit RemoteToolAdapter(std::string base_url, int timeout_sec = 60);
    AdapterReply call(const ToolRequest& request) override;

private:
    std::string base_url_;
    int timeout_sec_;
};

// Registers all standard tools against one adapter.
void register_standard_tools(ToolRegistry& registry, std::shared_ptr<ToolAdapter> adapter);

}  // namespace avua
