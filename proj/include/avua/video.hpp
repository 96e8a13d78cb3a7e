#pragma once

#include <optional>
#include <string>
#include <vector>

#include "avua/text_util.hpp"

namespace avua {

// Metadata-only view of a video; the agent never sees pixels.
struct VideoMeta {
    double duration_sec = 0.0;
    double frame_rate = 30.0;
    int total_frames = 1;
    std::optional<std::vector<int>> scene_change_frames;

    // Throws ConfigError when the fields are inconsistent.
    void validate() const;
    int last_frame() const { return total_frames - 1; }
    int clamp(int frame) const;
};

Json to_json(const VideoMeta& meta);
VideoMeta video_meta_from_json(const Json& j);

enum class DatasetKind { mcq, temporal_localization, open_ended };

std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& s);

struct Question {
    std::string text;
    std::vector<std::string> options;
    DatasetKind kind = DatasetKind::mcq;

    void validate() const;
};

Json to_json(const Question& q);
Question question_from_json(const Json& j);

// "Question: ...\nOption 0: ...", shared by every prompt that shows the question.
std::string render_question(const Question& q);
// The "Video details" block used by the policy prompt.
std::string render_video_details(const VideoMeta& meta);
std::string render_scene_list(const VideoMeta& meta);

}  // namespace avua
