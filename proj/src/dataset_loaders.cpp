#include <cmath>

#include <fmt/format.h>

#include "avua/error.hpp"
#include "avua/eval_harness.hpp"

namespace avua {

namespace {

Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + " is not valid JSON: " + e.what());
    } catch (const IoFailure& e) {
        throw ConfigError(e.what());
    }
}

VideoMeta default_meta(double duration_sec, double fps) {
    VideoMeta m;
    m.frame_rate = fps;
    m.duration_sec = duration_sec;
    m.total_frames = std::max(1, static_cast<int>(std::lround(duration_sec * fps)));
    return m;
}

// RFC 4180-ish: quoted fields, doubled quotes, commas and newlines inside quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') quoted = true;
        else if (c == ',') row.push_back(std::exchange(field, {}));
        else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::exchange(field, {}));
            if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
            row.clear();
        } else field += c;
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(field);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<BenchmarkItem> load_egoschema(const std::filesystem::path& questions,
                                          const std::filesystem::path& answers, const LoaderOptions& opts) {
    const Json qs = read_json(questions);
    const Json ans = read_json(answers);
    if (!qs.is_array() || !ans.is_object()) throw ConfigError("egoschema: expected a question array and an answer object");
    std::vector<BenchmarkItem> items;
    for (const auto& q : qs) {
        try {
            const std::string uid = q.at("q_uid").get<std::string>();
            if (!ans.contains(uid)) continue;
            BenchmarkItem item;
            item.id = uid;
            item.question.text = q.at("question").get<std::string>();
            item.question.kind = DatasetKind::mcq;
            for (int k = 0; k < 5; ++k) {
                const std::string key = fmt::format("option {}", k);
                if (!q.contains(key)) break;
                item.question.options.push_back(q[key].get<std::string>());
            }
            item.meta = default_meta(opts.default_duration_sec, opts.default_fps);
            item.gold.value = ans[uid].get<int>();
            item.video_ref = q.value("google_drive_id", uid);
            item.cue_tag = tag_cue(item.question.text);
            item.validate();
            items.push_back(std::move(item));
        } catch (const Json::exception& e) {
            throw ConfigError(std::string("egoschema: malformed entry: ") + e.what());
        }
    }
    return items;
}

std::vector<BenchmarkItem> load_nextqa_csv(const std::filesystem::path& csv, const LoaderOptions& opts) {
    std::string text;
    try {
        text = read_file(csv);
    } catch (const IoFailure& e) {
        throw ConfigError(e.what());
    }
    const auto rows = parse_csv(text);
    if (rows.empty()) throw ConfigError("nextqa: empty csv");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < rows[0].size(); ++i) col[trim(rows[0][i])] = i;
    for (const char* need : {"video", "frame_count", "question", "answer", "qid"}) {
        if (!col.count(need)) throw ConfigError(std::string("nextqa: missing column ") + need);
    }
    auto cell = [&](const std::vector<std::string>& row, const std::string& name) -> std::string {
        auto it = col.find(name);
        return it == col.end() || it->second >= row.size() ? std::string() : trim(row[it->second]);
    };

    std::vector<BenchmarkItem> items;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        try {
            BenchmarkItem item;
            item.id = cell(row, "video") + "_" + cell(row, "qid");
            item.question.text = cell(row, "question");
            if (!item.question.text.empty() && item.question.text.back() != '?') item.question.text += "?";
            item.question.kind = DatasetKind::mcq;
            for (int k = 0; k < 5; ++k) {
                const std::string opt = cell(row, fmt::format("a{}", k));
                if (opt.empty()) break;
                item.question.options.push_back(opt);
            }
            const int frames = std::stoi(cell(row, "frame_count"));
            item.meta.frame_rate = opts.default_fps;
            item.meta.total_frames = std::max(1, frames);
            item.meta.duration_sec = item.meta.total_frames / opts.default_fps;
            item.gold.value = std::stoi(cell(row, "answer"));
            item.video_ref = cell(row, "video");
            item.cue_tag = tag_cue(item.question.text);
            item.validate();
            items.push_back(std::move(item));
        } catch (const std::invalid_argument&) {
            throw ConfigError(fmt::format("nextqa: row {} has a non-numeric field", r + 1));
        } catch (const std::out_of_range&) {
            throw ConfigError(fmt::format("nextqa: row {} has an out-of-range number", r + 1));
        }
    }
    return items;
}

std::vector<BenchmarkItem> load_ego4d_nlq(const std::filesystem::path& annotations, const LoaderOptions& opts) {
    const Json doc = read_json(annotations);
    std::vector<BenchmarkItem> items;
    try {
        for (const auto& video : doc.at("videos")) {
            for (const auto& clip : video.at("clips")) {
                const double start = clip.at("clip_start_sec").get<double>();
                const double end = clip.at("clip_end_sec").get<double>();
                const VideoMeta meta = default_meta(end - start, opts.default_fps);
                for (const auto& ann : clip.value("annotations", Json::array())) {
                    const std::string uid = ann.value("annotation_uid", clip.value("clip_uid", "clip"));
                    int n = 0;
                    for (const auto& lq : ann.value("language_queries", Json::array())) {
                        const int index = n++;
                        if (!lq.contains("query") || !lq["query"].is_string()) continue;
                        BenchmarkItem item;
                        item.id = fmt::format("{}_{}", uid, index);
                        item.question.text = lq["query"].get<std::string>();
                        item.question.kind = DatasetKind::temporal_localization;
                        item.meta = meta;
                        const double qs = lq.at("clip_start_sec").get<double>();
                        const double qe = lq.at("clip_end_sec").get<double>();
                        const int s = meta.clamp(static_cast<int>(std::floor(qs * opts.default_fps)));
                        const int e = meta.clamp(static_cast<int>(std::ceil(qe * opts.default_fps)));
                        item.gold.value = FrameWindow{std::min(s, e), std::max(s, e)};
                        item.video_ref = clip.value("clip_uid", video.value("video_uid", ""));
                        item.cue_tag = tag_cue(item.question.text);
                        item.validate();
                        items.push_back(std::move(item));
                    }
                }
            }
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("ego4d nlq: malformed annotations: ") + e.what());
    }
    return items;
}

}  // namespace avua
