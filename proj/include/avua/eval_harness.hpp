#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "avua/llm_gateway.hpp"
#include "avua/memory_store.hpp"
#include "avua/planner.hpp"
#include "avua/prompt_catalog.hpp"
#include "avua/run_config.hpp"
#include "avua/video.hpp"

namespace avua {

using FrameWindow = std::pair<int, int>;

// ---------------------------------------------------------------------------
// Metrics

// Inclusive integer frame counting: [0,10] holds 11 frames.
double interval_iou(FrameWindow pred, FrameWindow gold);

// Fraction of pairs with IoU >= threshold. An empty list yields 0 and sets
// `*warned` when given.
double recall_at_1(const std::vector<std::pair<FrameWindow, FrameWindow>>& pairs, double threshold,
                   bool* warned = nullptr);

bool score_mcq(std::string_view final_answer, int gold_index);

inline constexpr int kJudgeConfidenceThreshold = 80;

struct JudgeResult {
    bool verdict = false;
    int confidence = 0;
    bool parsed = false;
    bool correct = false;
};

PromptBundle render_judge_prompt(const PromptCatalog& catalog, std::string_view pred,
                                 std::string_view gold, const Question& q);
// Correct iff verdict is True and confidence >= 80. Unparseable judge
// replies count as incorrect.
JudgeResult judge_open_ended(LlmClient& llm, const PromptCatalog& catalog, std::string_view pred,
                             std::string_view gold, const Question& q);

// ---------------------------------------------------------------------------
// Textual cues

struct CueLexicon {
    std::map<std::string, std::vector<std::string>> keywords{
        {"start", {"beginning", "start", "first"}},
        {"middle", {"middle"}},
        {"end", {"end", "last"}},
    };
};

// First cue (in start, middle, end order) whose keyword occurs as a whole
// word; "none" otherwise.
std::string tag_cue(std::string_view question, const CueLexicon& lexicon = {});

struct CueSample {
    std::string cue_tag;
    int total_frames = 1;
    std::vector<int> frames;
};

struct CueHistogram {
    std::vector<int> counts = std::vector<int>(10, 0);
    std::vector<double> mass = std::vector<double>(10, 0.0);
    int items = 0;
    double mean_frames = 0.0;
};

struct CueReport {
    std::map<std::string, CueHistogram> per_cue;
    double mean_frames_cue = 0.0;
    double mean_frames_no_cue = 0.0;
    int n_cue = 0;
    int n_no_cue = 0;
};

CueReport cue_bucket_report(const std::vector<CueSample>& samples);
Json to_json(const CueReport& r);

// ---------------------------------------------------------------------------
// Benchmarks

struct Gold {
    std::variant<int, FrameWindow, std::string> value;
};

struct BenchmarkItem {
    std::string id;
    Question question;
    VideoMeta meta;
    Gold gold;
    std::filesystem::path video_ref;
    std::filesystem::path script;
    std::string cue_tag = "none";

    void validate() const;
};

BenchmarkItem benchmark_item_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json to_json(const BenchmarkItem& item, const std::filesystem::path& base_dir = {});
std::vector<BenchmarkItem> load_manifest(const std::filesystem::path& path);

struct ItemResult {
    std::string id;
    DatasetKind kind = DatasetKind::mcq;
    std::string question_type;
    std::string cue_tag = "none";
    std::string answer;
    bool correct = false;
    std::optional<double> iou;
    std::optional<JudgeResult> judge;
    int frames = 0;
    int charges = 0;
    double ratio = 0.0;
    int total_frames = 1;
    int trials = 0;
    std::vector<int> distinct_frames;
    std::string error;
};

Json to_json(const ItemResult& r);

struct BenchmarkReport {
    std::string ablation;
    double accuracy = 0.0;
    int n_accuracy_items = 0;
    std::map<double, double> iou_recall;
    int n_localization_items = 0;
    double avg_frames = 0.0;
    double avg_ratio = 0.0;
    std::map<std::string, Json> per_question_type;
    CueReport per_cue;
    int n_items = 0;
    int n_errors = 0;
    std::vector<ItemResult> items;

    Json to_json() const;
    std::string render_table() const;
};

// Deterministic fold over item results (sorted by id first).
BenchmarkReport aggregate(std::vector<ItemResult> items, const std::string& ablation);

struct BenchOptions {
    int jobs = 1;
};

// Runs one episode per item and writes traces/, transcripts/, memory.jsonl,
// report.json and report.txt under `out_dir`. Per-item failures are
// recorded and the run continues.
BenchmarkReport run_benchmark(const std::vector<BenchmarkItem>& items, const RunConfig& cfg,
                              const std::filesystem::path& out_dir, const BenchOptions& opts = {});

// One report per ablation row in out_dir/<row>/ plus matrix.json/matrix.txt.
std::vector<BenchmarkReport> run_ablation_matrix(const std::vector<BenchmarkItem>& items,
                                                 const RunConfig& cfg,
                                                 const std::filesystem::path& out_dir,
                                                 const BenchOptions& opts = {});

std::string render_matrix_table(const std::vector<BenchmarkReport>& reports);

// ---------------------------------------------------------------------------
// Public dataset formats (miniature fixtures only in CI)

struct LoaderOptions {
    double default_fps = 30.0;
    double default_duration_sec = 180.0;
};

// EgoSchema-style: questions JSON array of {q_uid, question, option 0..4}
// plus an answers object {q_uid: index}.
std::vector<BenchmarkItem> load_egoschema(const std::filesystem::path& questions,
                                          const std::filesystem::path& answers,
                                          const LoaderOptions& opts = {});
// NextQA-style CSV: video,frame_count,width,height,question,answer,qid,type,a0..a4
std::vector<BenchmarkItem> load_nextqa_csv(const std::filesystem::path& csv,
                                           const LoaderOptions& opts = {});
// Ego4D NLQ annotation JSON (videos -> clips -> annotations -> language_queries).
std::vector<BenchmarkItem> load_ego4d_nlq(const std::filesystem::path& annotations,
                                          const LoaderOptions& opts = {});

}  // namespace avua
