#include <gtest/gtest.h>

#include "avua/error.hpp"
#include "avua/prompt_catalog.hpp"
#include "avua/text_util.hpp"
#include "avua/video.hpp"
#include "support.hpp"

using namespace avua;
using namespace avua::testing;

TEST(TextUtil, TrimLowerSplit) {
    EXPECT_EQ(trim("  a b \n"), "a b");
    EXPECT_EQ(to_lower("AbC"), "abc");
    EXPECT_EQ(split_lines("a\r\nb\n\nc"), (std::vector<std::string>{"a", "b", "", "c"}));
    EXPECT_TRUE(icontains("Final ANSWER", "answer"));
}

TEST(TextUtil, SubstituteLeavesUnknownPlaceholders) {
    EXPECT_EQ(substitute("{a} and {b} and {a}", {{"a", "x"}}), "x and {b} and x");
    EXPECT_EQ(substitute("{Video details}", {{"Video details", "v"}}), "v");
}

TEST(TextUtil, FormatReal) {
    EXPECT_EQ(format_real(3.0), "3");
    EXPECT_EQ(format_real(2.5), "2.5");
    EXPECT_EQ(format_real(0.0025925925, 5), "0.00259");
    EXPECT_EQ(format_real(29.97), "29.97");
}

TEST(TextUtil, Truncation) {
    EXPECT_EQ(tail_truncate("abcdef", 10), "abcdef");
    const std::string cut = tail_truncate("abcdefghij", 4);
    EXPECT_NE(cut.find("truncated"), std::string::npos);
    EXPECT_EQ(cut.substr(cut.size() - 4), "ghij");
    EXPECT_EQ(head_truncate("abcdef", 3).substr(0, 3), "abc");
}

TEST(TextUtil, Sha256KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(PromptCatalog, BuiltinTemplatesCarryThePlaceholders) {
    PromptCatalog catalog;
    EXPECT_EQ(catalog.names(), (std::vector<std::string>{"agent", "evaluator", "judge", "policy", "refiner", "sampler"}));
    const auto& policy = catalog.get("policy");
    EXPECT_NE(policy.find("{Question}"), std::string::npos);
    EXPECT_NE(policy.find("{Video details}"), std::string::npos);
    EXPECT_NE(policy.find("Uniform sampling with timestep 30. If relevant frame is detected, more uniform sample "
                          "with timestep 2."),
              std::string::npos);
    const auto& agent = catalog.get("agent");
    for (const char* p : {"{duration_min}", "{duration_sec}", "{frame_rate}", "{total_frames}", "{scene_list}",
                          "{tools}", "{tool_names}"}) {
        EXPECT_NE(agent.find(p), std::string::npos) << p;
    }
    EXPECT_NE(agent.find("Option 0, Option 1, Option 2, Option 3, Option 4"), std::string::npos);
    EXPECT_NE(catalog.get("evaluator").find("For example, Evaluation: True, Confidence: 90"), std::string::npos);
    EXPECT_NE(catalog.get("refiner").find("Diagnose a possible reason for failure"), std::string::npos);
    EXPECT_THROW(catalog.get("nope"), ConfigError);
}

TEST(PromptCatalog, DirectoryOverridesByName) {
    TempDir dir;
    write_file(dir / "sampler.txt", "custom sampler {total_frames}");
    write_file(dir / "extra.txt", "extra");
    write_file(dir / "notes.md", "ignored");
    const auto catalog = PromptCatalog::from_directory(dir.path());
    EXPECT_EQ(catalog.get("sampler"), "custom sampler {total_frames}");
    EXPECT_EQ(catalog.get("extra"), "extra");
    EXPECT_FALSE(catalog.contains("notes"));
    EXPECT_NE(catalog.get("policy").find("{Question}"), std::string::npos);
    EXPECT_THROW(PromptCatalog::from_directory(dir / "missing"), ConfigError);
}

TEST(VideoMeta, ValidatesConsistency) {
    VideoMeta m = meta_of(5400);
    EXPECT_NO_THROW(m.validate());
    EXPECT_EQ(m.last_frame(), 5399);
    EXPECT_EQ(m.clamp(5400), 5399);
    EXPECT_EQ(m.clamp(-3), 0);
    m.total_frames = 5402;
    EXPECT_THROW(m.validate(), ConfigError);
    m = meta_of(100);
    m.scene_change_frames = std::vector<int>{10, 100};
    EXPECT_THROW(m.validate(), ConfigError);
    m.scene_change_frames = std::vector<int>{30, 10};
    EXPECT_THROW(m.validate(), ConfigError);
    m.scene_change_frames = std::vector<int>{10, 30};
    EXPECT_NO_THROW(m.validate());
}

TEST(VideoMeta, JsonRoundTripAndDerivedDuration) {
    const VideoMeta m = video_meta_from_json(Json{{"frame_rate", 30}, {"total_frames", 5400}});
    EXPECT_DOUBLE_EQ(m.duration_sec, 180.0);
    const VideoMeta back = video_meta_from_json(to_json(m));
    EXPECT_EQ(back.total_frames, 5400);
}

TEST(Question, OptionsIffMultipleChoice) {
    Question q{"Which?", {"a", "b"}, DatasetKind::mcq};
    EXPECT_NO_THROW(q.validate());
    q.options = {"a"};
    EXPECT_THROW(q.validate(), ConfigError);
    q.options = {"a", "b", "c", "d", "e", "f"};
    EXPECT_THROW(q.validate(), ConfigError);
    Question loc{"When?", {}, DatasetKind::temporal_localization};
    EXPECT_NO_THROW(loc.validate());
    loc.options = {"a", "b"};
    EXPECT_THROW(loc.validate(), ConfigError);
}

TEST(Rendering, QuestionAndVideoDetails) {
    Question q{"What happens?", {"x", "y"}, DatasetKind::mcq};
    EXPECT_EQ(render_question(q), "Question: What happens?\nOption 0: x\nOption 1: y");
    VideoMeta m = meta_of(5400);
    const std::string details = render_video_details(m);
    EXPECT_NE(details.find("180"), std::string::npos);
    EXPECT_NE(details.find("5400"), std::string::npos);
    EXPECT_EQ(render_scene_list(m), "not available");
    m.scene_change_frames = std::vector<int>{120, 900};
    EXPECT_EQ(render_scene_list(m), "120, 900");
}
