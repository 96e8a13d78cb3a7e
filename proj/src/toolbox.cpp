#include "avua/toolbox.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "avua/error.hpp"
#include "avua/memory_store.hpp"

namespace avua {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::video: return "video";
        case Modality::image: return "image";
        case Modality::audio: return "audio";
        case Modality::meta: return "meta";
    }
    return "meta";
}

std::vector<ToolDescriptor> standard_tool_descriptors() {
    using namespace tool_names;
    return {
        {video_caption, Modality::video, 4, false,
         "Describes the actions and objects in a short clip starting at the given frame (reads 4 frames)."},
        {video_qa, Modality::video, 4, true,
         "Answers a question about a short clip starting at the given frame (reads 4 frames)."},
        {image_qa, Modality::image, 1, true, "Answers a question about a single frame."},
        {object_tracking, Modality::image, 1, false,
         "Lists objects detected in a frame with confidence above 0.6."},
        {text_caption, Modality::image, 1, false, "Reads text visible in a frame, if any."},
        {audio_transcription, Modality::audio, 0, false,
         "Transcribes speech around the given frames, or the whole video without frames."},
        {get_frame_info, Modality::meta, 1, false, "Gives general information about a frame."},
    };
}

// ---------------------------------------------------------------------------

void FrameLedger::charge(const std::string& tool, const std::vector<int>& frames) {
    total_charges_ += static_cast<int>(frames.size());
    per_tool_[tool] += static_cast<int>(frames.size());
    distinct_.insert(frames.begin(), frames.end());
}

LedgerReport ledger_report(const FrameLedger& ledger, const VideoMeta& meta) {
    LedgerReport r;
    r.frames = static_cast<int>(ledger.distinct_frames().size());
    r.ratio = meta.total_frames > 0 ? static_cast<double>(r.frames) / meta.total_frames : 0.0;
    return r;
}

// ---------------------------------------------------------------------------

ToolRegistry::ToolRegistry(VideoMeta meta, ToolboxOptions opts) : meta_(std::move(meta)), opts_(opts) {
    if (opts_.window_stride < 1) throw ConfigError("window stride must be at least 1");
}

void ToolRegistry::register_tool(ToolDescriptor descriptor, std::shared_ptr<ToolAdapter> adapter) {
    if (tools_.count(descriptor.name)) throw DuplicateTool("tool already registered: " + descriptor.name);
    if (!adapter) throw ConfigError("tool " + descriptor.name + " has no adapter");
    order_.push_back(descriptor.name);
    auto name = descriptor.name;
    tools_.emplace(std::move(name), Entry{std::move(descriptor), std::move(adapter)});
}

const ToolDescriptor& ToolRegistry::descriptor(const std::string& name) const {
    auto it = tools_.find(name);
    if (it == tools_.end()) throw UnknownTool("unknown tool: " + name);
    return it->second.descriptor;
}

std::vector<ToolDescriptor> ToolRegistry::descriptors() const {
    std::vector<ToolDescriptor> out;
    for (const auto& name : order_) out.push_back(tools_.at(name).descriptor);
    return out;
}

std::string ToolRegistry::render_tool_list() const {
    std::string out;
    for (const auto& name : order_) {
        if (!out.empty()) out += "\n";
        out += "- " + name + ": " + tools_.at(name).descriptor.description;
    }
    return out;
}

std::string ToolRegistry::render_tool_names() const { return fmt::format("{}", fmt::join(order_, ", ")); }

std::vector<int> ToolRegistry::window(const ToolDescriptor& d, int anchor) const {
    std::vector<int> frames;
    anchor = meta_.clamp(anchor);
    for (int k = 0; k < d.frames_per_call; ++k) {
        const int f = anchor + k * opts_.window_stride;
        if (f > meta_.last_frame()) break;
        frames.push_back(f);
    }
    return frames;
}

namespace {

std::string frame_label(const std::vector<int>& window, int anchor) {
    if (window.size() > 1) return fmt::format("Frames {}-{}", window.front(), window.back());
    return fmt::format("Frame {}", anchor);
}

}  // namespace

Observation ToolRegistry::invoke(const std::string& tool, const ActionInput& input, FrameLedger& ledger,
                                 ShortTermCache* cache) {
    auto it = tools_.find(tool);
    if (it == tools_.end()) throw UnknownTool("unknown tool: " + tool);
    const ToolDescriptor& d = it->second.descriptor;
    ToolAdapter& adapter = *it->second.adapter;

    Observation obs;
    obs.tool = tool;
    obs.query = d.accepts_query ? input.query : std::nullopt;
    std::vector<std::string> parts;
    for (const auto& w : input.warnings) parts.push_back("Warning: " + w);

    if (d.frames_per_call == 0) {
        ToolRequest req{tool, input.frame_indices.empty() ? -1 : input.frame_indices.front(),
                        input.frame_indices, obs.query};
        try {
            parts.push_back(adapter.call(req).text);
        } catch (const std::exception& e) {
            parts.push_back(fmt::format("Error: {} failed: {}", tool, e.what()));
        }
        obs.text = fmt::format("{}", fmt::join(parts, "\n"));
        return obs;
    }

    if (input.frame_indices.empty()) {
        parts.push_back(fmt::format("Error: {} needs at least one frame index in the action input.", tool));
        obs.text = fmt::format("{}", fmt::join(parts, "\n"));
        return obs;
    }

    bool all_hit = true;
    for (int requested : input.frame_indices) {
        const int anchor = meta_.clamp(requested);
        if (cache) {
            if (auto cached = cache->get(anchor, tool); cached && cached->query == obs.query) {
                obs.charges.push_back(FrameCharge{anchor, {}, true});
                parts.push_back(cached->text);
                continue;
            }
        }
        all_hit = false;
        const auto frames = window(d, anchor);
        AdapterReply reply;
        try {
            reply = adapter.call(ToolRequest{tool, anchor, frames, obs.query});
        } catch (const std::exception& e) {
            obs.charges.push_back(FrameCharge{anchor, {}, false});
            parts.push_back(fmt::format("Error: {} failed on frame {}: {}", tool, anchor, e.what()));
            continue;
        }
        std::vector<int> charged = frames;
        if (reply.frames_consumed) {
            charged.clear();
            for (int f : *reply.frames_consumed) {
                if (f >= 0 && f < meta_.total_frames) charged.push_back(f);
            }
        }
        ledger.charge(tool, charged);
        obs.charges.push_back(FrameCharge{anchor, charged, false});
        obs.frames_charged.insert(obs.frames_charged.end(), charged.begin(), charged.end());

        Observation per_anchor;
        per_anchor.tool = tool;
        per_anchor.query = obs.query;
        per_anchor.text = frame_label(frames, anchor) + ": " + reply.text;
        per_anchor.frames_charged = charged;
        parts.push_back(per_anchor.text);
        if (cache) {
            for (int f : charged) cache->put(f, tool, per_anchor);
        }
    }
    obs.cache_hit = all_hit;
    obs.text = fmt::format("{}", fmt::join(parts, "\n"));
    return obs;
}

void register_standard_tools(ToolRegistry& registry, std::shared_ptr<ToolAdapter> adapter) {
    for (auto& d : standard_tool_descriptors()) registry.register_tool(std::move(d), adapter);
}

// ---------------------------------------------------------------------------

void SyntheticVideoSpec::validate() const {
    meta.validate();
    for (const auto& [index, ann] : frames) {
        if (index < 0 || index >= meta.total_frames) {
            throw ConfigError(fmt::format("annotated frame {} outside video of {} frames", index, meta.total_frames));
        }
        for (const auto& o : ann.objects) {
            if (o.confidence < 0.0 || o.confidence > 1.0) throw ConfigError("object confidence outside [0,1]");
        }
        if (ann.answer_window) {
            auto [s, e] = *ann.answer_window;
            if (s < 0 || e < s || e >= meta.total_frames) throw ConfigError("answer window out of bounds");
        }
    }
}

const FrameAnnotation* SyntheticVideoSpec::annotation_at(int frame) const {
    auto it = frames.upper_bound(frame);
    if (it == frames.begin()) return nullptr;
    return &std::prev(it)->second;
}

std::optional<std::pair<int, int>> SyntheticVideoSpec::answer_window() const {
    for (const auto& [_, ann] : frames) {
        if (ann.answer_window) return ann.answer_window;
    }
    return std::nullopt;
}

SyntheticVideoSpec synthetic_video_from_json(const Json& j) {
    SyntheticVideoSpec spec;
    spec.id = j.value("id", "");
    spec.meta = video_meta_from_json(j.at("meta"));
    auto read_annotation = [](const Json& a) {
        FrameAnnotation ann;
        ann.caption = a.value("caption", "");
        for (const auto& o : a.value("objects", Json::array())) {
            ann.objects.push_back(DetectedObject{o.at("label").get<std::string>(), o.at("confidence").get<double>()});
        }
        ann.ocr_text = a.value("ocr_text", "");
        if (a.contains("answer_window") && !a["answer_window"].is_null()) {
            auto w = a["answer_window"].get<std::vector<int>>();
            if (w.size() != 2) throw ConfigError("answer_window needs two bounds");
            ann.answer_window = std::pair{w[0], w[1]};
        }
        return ann;
    };
    const Json& frames = j.value("frames", Json::object());
    if (frames.is_object()) {
        for (const auto& [key, value] : frames.items()) spec.frames[std::stoi(key)] = read_annotation(value);
    } else {
        for (const auto& value : frames) spec.frames[value.at("index").get<int>()] = read_annotation(value);
    }
    for (const auto& s : j.value("audio_segments", Json::array())) {
        spec.audio_segments.push_back(AudioSegment{s.at("start_sec").get<double>(), s.at("end_sec").get<double>(),
                                                   s.at("transcript").get<std::string>()});
    }
    spec.validate();
    return spec;
}

SyntheticVideoSpec load_synthetic_video(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("video spec not found: " + path.string());
    try {
        return synthetic_video_from_json(Json::parse(read_file(path.string())));
    } catch (const Json::exception& e) {
        throw ConfigError("malformed video spec " + path.string() + ": " + e.what());
    }
}

Json to_json(const SyntheticVideoSpec& spec) {
    Json frames = Json::object();
    for (const auto& [index, ann] : spec.frames) {
        Json objects = Json::array();
        for (const auto& o : ann.objects) objects.push_back({{"label", o.label}, {"confidence", o.confidence}});
        Json a{{"caption", ann.caption}, {"objects", objects}, {"ocr_text", ann.ocr_text}};
        if (ann.answer_window) a["answer_window"] = {ann.answer_window->first, ann.answer_window->second};
        frames[std::to_string(index)] = a;
    }
    Json audio = Json::array();
    for (const auto& s : spec.audio_segments) {
        audio.push_back({{"start_sec", s.start_sec}, {"end_sec", s.end_sec}, {"transcript", s.transcript}});
    }
    return Json{{"id", spec.id}, {"meta", to_json(spec.meta)}, {"frames", frames}, {"audio_segments", audio}};
}

SyntheticToolAdapter::SyntheticToolAdapter(std::shared_ptr<const SyntheticVideoSpec> spec, double detection_threshold)
    : spec_(std::move(spec)), threshold_(detection_threshold) {
    if (!spec_) throw ConfigError("synthetic adapter needs a video spec");
}

std::string SyntheticToolAdapter::caption_of(int frame) const {
    const auto* ann = spec_->annotation_at(frame);
    if (!ann || ann->caption.empty()) return "no notable content";
    return ann->caption;
}

AdapterReply SyntheticToolAdapter::call(const ToolRequest& request) {
    using namespace tool_names;
    const auto& t = request.tool;
    auto detected = [this](int frame) {
        std::vector<std::string> labels;
        if (const auto* ann = spec_->annotation_at(frame)) {
            for (const auto& o : ann->objects) {
                if (o.confidence > threshold_) labels.push_back(fmt::format("{} ({:.2f})", o.label, o.confidence));
            }
        }
        return labels;
    };
    auto window_captions = [&] {
        std::vector<std::string> captions;
        for (int f : request.frames) {
            auto c = caption_of(f);
            if (std::find(captions.begin(), captions.end(), c) == captions.end()) captions.push_back(std::move(c));
        }
        return fmt::format("{}", fmt::join(captions, "; "));
    };

    if (t == get_frame_info) return {caption_of(request.anchor), std::nullopt};
    if (t == video_caption) return {window_captions(), std::nullopt};
    if (t == video_qa) {
        return {fmt::format("Regarding \"{}\": {}", request.query.value_or("what is happening"), window_captions()),
                std::nullopt};
    }
    if (t == image_qa) {
        auto labels = detected(request.anchor);
        std::string text = caption_of(request.anchor);
        if (!labels.empty()) text += fmt::format(". Visible: {}", fmt::join(labels, ", "));
        return {text, std::nullopt};
    }
    if (t == object_tracking) {
        auto labels = detected(request.anchor);
        if (labels.empty()) return {fmt::format("no objects above confidence {}", format_real(threshold_)), std::nullopt};
        return {fmt::format("objects: {}", fmt::join(labels, ", ")), std::nullopt};
    }
    if (t == text_caption) {
        const auto* ann = spec_->annotation_at(request.anchor);
        if (!ann || trim(ann->ocr_text).empty()) return {kNoTextMarker, std::nullopt};
        return {"text: " + ann->ocr_text, std::nullopt};
    }
    if (t == audio_transcription) {
        std::vector<std::string> lines;
        for (const auto& s : spec_->audio_segments) {
            bool include = request.frames.empty();
            for (int f : request.frames) {
                const double sec = f / spec_->meta.frame_rate;
                include = include || (sec >= s.start_sec && sec <= s.end_sec);
            }
            if (include) {
                lines.push_back(fmt::format("[{}s-{}s] {}", format_real(s.start_sec), format_real(s.end_sec), s.transcript));
            }
        }
        if (lines.empty()) return {"[no speech]", std::nullopt};
        return {fmt::format("{}", fmt::join(lines, "\n")), std::nullopt};
    }
    throw AdapterFailure("synthetic video has no tool named " + t);
}

}  // namespace avua
