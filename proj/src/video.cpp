#include "avua/video.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "avua/error.hpp"

namespace avua {

void VideoMeta::validate() const {
    if (!(frame_rate > 0)) throw ConfigError("frame_rate must be positive");
    if (total_frames < 1) throw ConfigError("total_frames must be positive");
    if (duration_sec < 0) throw ConfigError("duration_sec must be non-negative");
    if (std::abs(duration_sec * frame_rate - total_frames) > 1.0 + 1e-9) {
        throw ConfigError(fmt::format("total_frames {} inconsistent with {} s at {} fps",
                                      total_frames, duration_sec, frame_rate));
    }
    if (scene_change_frames) {
        const auto& s = *scene_change_frames;
        if (!std::is_sorted(s.begin(), s.end())) throw ConfigError("scene changes must be sorted");
        for (int f : s) {
            if (f < 0 || f >= total_frames) throw ConfigError("scene change frame out of range");
        }
    }
}

int VideoMeta::clamp(int frame) const { return std::clamp(frame, 0, total_frames - 1); }

Json to_json(const VideoMeta& meta) {
    Json j{{"duration_sec", meta.duration_sec},
           {"frame_rate", meta.frame_rate},
           {"total_frames", meta.total_frames}};
    if (meta.scene_change_frames) j["scene_change_frames"] = *meta.scene_change_frames;
    return j;
}

VideoMeta video_meta_from_json(const Json& j) {
    VideoMeta m;
    m.frame_rate = j.value("frame_rate", 30.0);
    if (j.contains("total_frames")) {
        m.total_frames = j.at("total_frames").get<int>();
        m.duration_sec = j.value("duration_sec", m.total_frames / m.frame_rate);
    } else {
        m.duration_sec = j.at("duration_sec").get<double>();
        m.total_frames = static_cast<int>(std::lround(m.duration_sec * m.frame_rate));
    }
    if (j.contains("scene_change_frames") && !j["scene_change_frames"].is_null()) {
        m.scene_change_frames = j["scene_change_frames"].get<std::vector<int>>();
    }
    m.validate();
    return m;
}

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::mcq: return "mcq";
        case DatasetKind::temporal_localization: return "temporal_localization";
        case DatasetKind::open_ended: return "open_ended";
    }
    return "mcq";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "mcq") return DatasetKind::mcq;
    if (s == "temporal_localization" || s == "localization") return DatasetKind::temporal_localization;
    if (s == "open_ended" || s == "open") return DatasetKind::open_ended;
    throw ConfigError("unknown dataset kind '" + s + "'");
}

void Question::validate() const {
    if (trim(text).empty()) throw ConfigError("question text is empty");
    if (kind == DatasetKind::mcq) {
        if (options.size() < 2 || options.size() > 5) {
            throw ConfigError("multiple-choice questions need 2 to 5 options");
        }
    } else if (!options.empty()) {
        throw ConfigError("options are only allowed for multiple-choice questions");
    }
}

Json to_json(const Question& q) {
    Json j{{"text", q.text}, {"dataset_kind", to_string(q.kind)}};
    if (!q.options.empty()) j["options"] = q.options;
    return j;
}

Question question_from_json(const Json& j) {
    Question q;
    q.text = j.at("text").get<std::string>();
    q.kind = dataset_kind_from_string(j.value("dataset_kind", std::string("mcq")));
    if (j.contains("options")) q.options = j["options"].get<std::vector<std::string>>();
    q.validate();
    return q;
}

std::string render_question(const Question& q) {
    std::string out = "Question: " + q.text;
    for (std::size_t i = 0; i < q.options.size(); ++i) {
        out += fmt::format("\nOption {}: {}", i, q.options[i]);
    }
    return out;
}

std::string render_scene_list(const VideoMeta& meta) {
    if (!meta.scene_change_frames || meta.scene_change_frames->empty()) return "not available";
    return fmt::format("{}", fmt::join(*meta.scene_change_frames, ", "));
}

std::string render_video_details(const VideoMeta& meta) {
    return fmt::format(
        "Video details:\n- Duration: {} minutes ({} seconds)\n- Frame Rate: {} frame per second\n"
        "- Total Frames: {} frames.\n- Frames with scene change: {}",
        format_real(meta.duration_sec / 60.0), format_real(meta.duration_sec),
        format_real(meta.frame_rate), meta.total_frames, render_scene_list(meta));
}

}  // namespace avua
