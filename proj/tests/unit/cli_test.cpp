#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"
#include "vqforge/cli.hpp"

namespace vqforge {
namespace {

using nlohmann::json;
using testing::fixture_dir;
using testing::read_file;
using testing::read_json;
using testing::TempDir;
using testing::write_file;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "vqforge");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string sample(const std::string& id) { return (fixture_dir() / "replay/samples" / (id + ".py")).string(); }
std::string store() { return (fixture_dir() / "replay/exchanges.jsonl").string(); }

TEST(Config, MergeAndTypes) {
    auto cfg = default_config();
    EXPECT_EQ(cfg["backend"], "live");
    EXPECT_EQ(cfg["runs"], 5);
    merge_config(cfg, json{{"runs", 3}});
    EXPECT_EQ(cfg["seeds"], (json{1, 2, 3}));
    merge_config(cfg, json{{"seeds", {7, 9}}});
    EXPECT_EQ(cfg["runs"], 2);
    EXPECT_THROW(merge_config(cfg, json{{"unknown_key", 1}}), InvalidInput);
    EXPECT_THROW(merge_config(cfg, json{{"runs", "five"}}), InvalidInput);
    EXPECT_EQ(parse_config_value("seeds", "4,5"), (json{4, 5}));
    EXPECT_EQ(parse_config_value("temperature", "0.7"), 0.7);
    EXPECT_EQ(parse_config_value("include_bare_attributes", "true"), true);
    EXPECT_THROW(parse_config_value("max_tokens", "lots"), InvalidInput);
}

TEST(Config, FileResolvesRelativePaths) {
    TempDir dir;
    write_file(dir / "cfg.json", R"({"store":"s.jsonl","backend":"replay"})");
    auto cfg = load_config_file(dir / "cfg.json");
    EXPECT_EQ(cfg["store"], (dir / "s.jsonl").string());
}

TEST(Config, Validation) {
    auto cfg = default_config();
    EXPECT_NO_THROW(validate_config(cfg));
    auto bad = cfg;
    bad["seeds"] = json{1};
    EXPECT_THROW(validate_config(bad), InvalidInput);
    bad = cfg;
    bad["builtins"] = "/nonexistent/builtins.txt";
    EXPECT_THROW(validate_config(bad), InvalidInput);
    bad = cfg;
    bad["backend"] = "replay";
    bad["store"] = "/nonexistent/store.jsonl";
    EXPECT_THROW(make_gateway(bad), InvalidInput);
}

TEST(Localize, MatchPubdate) {
    auto r = cli({"localize", sample("match_pubdate")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    auto j = json::parse(r.out);
    ASSERT_EQ(j["attribute_targets"].size(), 2u);
    EXPECT_EQ(j["attribute_targets"][0]["rendering"], "matched_pubdate.first()");
    EXPECT_EQ(j["attribute_targets"][1]["rendering"], "pubdate.strip()");
    ASSERT_EQ(j["hallucination_targets"].size(), 1u);
    EXPECT_EQ(j["hallucination_targets"][0]["rendering"], "get_element_text()");
}

TEST(Localize, CleanFile) {
    TempDir dir;
    write_file(dir / "clean.py", "def f():\n    return 1\n");
    auto r = cli({"localize", (dir / "clean.py").string()});
    ASSERT_EQ(r.code, kExitOk);
    auto j = json::parse(r.out);
    EXPECT_TRUE(j["attribute_targets"].empty());
    EXPECT_TRUE(j["hallucination_targets"].empty());
}

TEST(Localize, MalformedFile) {
    TempDir dir;
    write_file(dir / "bad.py", "x = 1\ndef f(:\n");
    auto r = cli({"localize", (dir / "bad.py").string()});
    EXPECT_EQ(r.code, kExitInput);
    EXPECT_NE(r.err.find("bad.py:2:"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("SyntaxError"), std::string::npos);
}

TEST(Localize, MissingFile) { EXPECT_EQ(cli({"localize", "/nonexistent/x.py"}).code, kExitInput); }

TEST(Vq, TextAndJson) {
    auto r = cli({"vq", sample("match_pubdate")});
    ASSERT_EQ(r.code, kExitOk);
    EXPECT_EQ(r.out,
              "Can you verify that the following attribute calls will not generate attribute error: "
              "matched_pubdate.first(), pubdate.strip(). If any attribute error may occur, repair the code.\n"
              "Are all these get_element_text() already defined in Python or in this code? If not, provide a "
              "comprehensive implementation for the one that doesn't exist.\n");
    auto j = cli({"vq", sample("match_pubdate"), "--variant", "3", "--json"});
    ASSERT_EQ(j.code, kExitOk);
    EXPECT_EQ(json::parse(j.out).size(), 2u);
    EXPECT_EQ(cli({"vq", sample("match_pubdate"), "--variant", "9"}).code, kExitInput);
}

TEST(Repair, NoVqEchoesInput) {
    TempDir dir;
    auto r = cli({"repair", sample("merge_unique"), "--mode", "no-vq", "--result", (dir / "r.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out, read_file(sample("merge_unique")));
    EXPECT_EQ(read_json(dir / "r.json")["status"], "PassThrough");
}

TEST(Repair, TargetedReplay) {
    TempDir dir;
    auto r = cli({"--backend", "replay", "--store", store(), "repair", sample("match_pubdate"), "--mode", "targeted",
                  "--seed", "1", "--result", (dir / "r.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out.find(".first()"), std::string::npos);
    EXPECT_NE(r.out.find("def get_element_text"), std::string::npos);
    EXPECT_TRUE(parses(r.out));
}

TEST(Repair, GeneralUsesVerbatimQuestion) {
    TempDir dir;
    auto r = cli({"--backend", "replay", "--store", store(), "repair", sample("match_pubdate"), "--mode", "general",
                  "--seed", "1", "--result", (dir / "r.json").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    auto result = read_json(dir / "r.json");
    const std::string user = result["exchange"]["request"]["messages"][1]["content"];
    EXPECT_NE(user.find("<QUESTION>\nCan you improve this code or correct its bugs please ?\n<CORRECTION>\n"),
              std::string::npos);
}

TEST(Repair, ReplayMissIsBackendFailure) {
    TempDir dir;
    auto r = cli({"--backend", "replay", "--store", store(), "repair", sample("match_pubdate"), "--mode", "targeted",
                  "--seed", "99", "--result", (dir / "r.json").string()});
    EXPECT_EQ(r.code, kExitBackend);
}

TEST(Repair, RefusalIsRepairFailure) {
    TempDir dir;
    write_file(dir / "mock.json", R"({"fallback":"refuse"})");
    auto r = cli({"--backend", "mock", "--mock_script", (dir / "mock.json").string(), "repair",
                  sample("match_pubdate"), "--mode", "general", "--result", (dir / "r.json").string()});
    EXPECT_EQ(r.code, kExitRepair);
}

TEST(Repair, BadModeIsInputError) {
    EXPECT_EQ(cli({"repair", sample("match_pubdate"), "--mode", "magic"}).code, kExitInput);
    EXPECT_EQ(cli({"--runs", "x", "localize", sample("match_pubdate")}).code, kExitInput);
}

TEST(Report, EmptyResultsDirectory) {
    TempDir dir;
    auto r = cli({"report", dir.path().string()});
    EXPECT_EQ(r.code, kExitInput);
    EXPECT_NE(r.err.find("no results"), std::string::npos);
}

TEST(Experiment, ReplayPlanAndReportColumns) {
    TempDir dir;
    auto out_dir = (dir / "run").string();
    auto e = cli({"--output_dir", out_dir, "--parallelism", "2", "experiment",
                  (fixture_dir() / "replay/plan.json").string()});
    ASSERT_EQ(e.code, kExitOk) << e.err;
    auto manifest = read_json(dir / "run/manifest.json");
    EXPECT_EQ(manifest["seeds"], (json{1, 2}));
    auto v = cli({"--parallelism", "2", "evaluate", out_dir, (fixture_dir() / "replay/tasks").string()});
    ASSERT_EQ(v.code, kExitOk) << v.err;
    auto r = cli({"report", out_dir, "--format", "csv"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "criteria,No VQ,General VQ,Targeted VQs");
    auto t = cli({"report", out_dir});
    EXPECT_EQ(t.code, kExitOk);
    EXPECT_EQ(t.out, read_file(dir / "run/report.txt"));
}

TEST(Experiment, MissingStoreIsInputError) {
    TempDir dir;
    write_file(dir / "plan.json", R"({"samples":[],"modes":["general"],"runs":1,"config":{"backend":"replay","store":"missing.jsonl"}})");
    EXPECT_EQ(cli({"--output_dir", (dir / "o").string(), "experiment", (dir / "plan.json").string()}).code, kExitInput);
}

}  // namespace
}  // namespace vqforge
