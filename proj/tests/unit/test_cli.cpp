#include "census_cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace census {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
    int code;
    std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "census_eval");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        base_ = fs::temp_directory_path() / "census_cli_test";
        fs::remove_all(base_);
        spec_.n_images = 80;
        spec_.seed = 21;
        campaign_ = generate_campaign(spec_);
        save_campaign(campaign_, base_ / "sim");
    }
    static void TearDownTestSuite() { fs::remove_all(base_); }

    static std::vector<std::string> data() {
        return {"--annotations", (base_ / "sim" / "annotations.csv").string(), "--images",
                (base_ / "sim" / "images.csv").string()};
    }
    static std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
        head.insert(head.end(), tail.begin(), tail.end());
        return head;
    }
    static std::string dets() { return (base_ / "sim" / "detections.csv").string(); }
    static std::string out(const std::string& name) { return (base_ / name).string(); }

    static inline fs::path base_;
    static inline CampaignSpec spec_;
    static inline Campaign campaign_;
};

TEST_F(Cli, EvaluateMatchesLibrary) {
    const auto r = run_cli(with({"evaluate", "--out", out("ev"), "--radius", "40", "--threshold", "0.3",
                                 "--detections", dets()},
                                data()));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = read_json(base_ / "ev" / "metrics.json");
    const auto lib = match_dataset(campaign_.dataset.ground_truth, campaign_.detections, DistanceRange(40), 0.3);
    EXPECT_EQ(m["operating_point"]["tp"], lib.point.tp);
    EXPECT_EQ(m["operating_point"]["fp"], lib.point.fp);
    EXPECT_EQ(m["operating_point"]["fn"], lib.point.fn);
    EXPECT_DOUBLE_EQ(m["operating_point"]["precision"].get<double>(), lib.point.precision);
    EXPECT_DOUBLE_EQ(m["operating_point"]["recall"].get<double>(), lib.point.recall);

    const auto curve = pr_curve(campaign_.dataset.ground_truth, campaign_.detections, DistanceRange(40),
                                distinct_score_thresholds(campaign_.detections));
    ASSERT_EQ(m["curve"].size(), curve.points.size());
    for (std::size_t i = 0; i < curve.points.size(); ++i) EXPECT_EQ(m["curve"][i]["tp"], curve.points[i].tp);
}

TEST_F(Cli, ManifestIsReproducible) {
    const auto a = run_cli(with({"evaluate", "--out", out("m1"), "--detections", dets()}, data()));
    const auto b = run_cli(with({"evaluate", "--out", out("m1"), "--detections", dets(), "--threads", "3"}, data()));
    ASSERT_EQ(a.code, 0);
    ASSERT_EQ(b.code, 0);
    const auto m = read_json(base_ / "m1" / "manifest.json");
    EXPECT_EQ(m["tool"], "census_eval");
    EXPECT_EQ(m["version"], CENSUS_VERSION);
    EXPECT_EQ(m["subcommand"], "evaluate");
    EXPECT_EQ(m["inputs"].size(), 3u);
    for (const auto& in : m["inputs"]) EXPECT_EQ(in["fnv1a64"].get<std::string>().size(), 16u);
    EXPECT_EQ(m["outputs"], json({"metrics.json", "pr_curve.csv", "matches.csv"}));
    EXPECT_EQ(slurp(base_ / "m1" / "metrics.json"), [&] {
        run_cli(with({"evaluate", "--out", out("m2"), "--detections", dets()}, data()));
        return slurp(base_ / "m2" / "metrics.json");
    }());
}

TEST_F(Cli, MatchesCsvAccountsForEveryPoint) {
    ASSERT_EQ(run_cli(with({"evaluate", "--out", out("mc"), "--detections", dets()}, data())).code, 0);
    std::ifstream in(base_ / "mc" / "matches.csv");
    std::string line;
    std::getline(in, line);
    std::size_t tp = 0, fp = 0, fn = 0;
    while (std::getline(in, line)) {
        tp += line.find(",tp,") != std::string::npos;
        fp += line.find(",fp,") != std::string::npos;
        fn += line.find(",fn,") != std::string::npos;
    }
    EXPECT_EQ(tp + fp, campaign_.detections.size());
    EXPECT_EQ(tp + fn, campaign_.dataset.ground_truth.size());
}

TEST_F(Cli, PlanHas400Records) {
    ASSERT_EQ(run_cli({"plan", "--out", out("plan")}).code, 0);
    const auto plan = read_json(base_ / "plan" / "plan.json");
    ASSERT_EQ(plan["epochs"].size(), 400u);
    EXPECT_EQ(plan, to_json(build_training_plan(400)));
    EXPECT_EQ(plan["epochs"][79]["hard_negatives_enabled"], true);
    EXPECT_EQ(plan["epochs"][78]["hard_negatives_enabled"], false);
    EXPECT_EQ(run_cli({"plan", "--out", out("plan2"), "--hard-negative-factor", "0.5"}).code, 0);
    EXPECT_EQ(read_json(base_ / "plan2" / "plan.json")["metadata"]["hard_negative_factor"], 0.5);
}

TEST_F(Cli, SplitSharesTestSetAndMatchesLibrary) {
    ASSERT_EQ(run_cli(with({"split", "--out", out("split"), "--seed", "9", "--n-splits", "3"}, data())).code, 0);
    const auto splits = splits_from_json(read_json(base_ / "split" / "splits.json"));
    EXPECT_EQ(splits, split_dataset(campaign_.dataset, {}, 3, 9));
    ASSERT_EQ(splits.size(), 3u);
    for (const auto& s : splits) EXPECT_EQ(s.images_in(Subset::Test), splits[0].images_in(Subset::Test));
}

TEST_F(Cli, StatsAgreeWithLibrary) {
    ASSERT_EQ(run_cli(with({"stats", "--out", out("stats")}, data())).code, 0);
    const auto j = read_json(base_ / "stats" / "stats.json");
    const auto st = dataset_statistics(campaign_.dataset);
    EXPECT_EQ(j["total"]["animals"], st.animals);
    EXPECT_EQ(j["total"]["images_with_animals"], st.images_with_animals);
    EXPECT_EQ(j["total"]["images_without_animals"], st.images_without_animals);
}

TEST_F(Cli, LabelGridFileRoundTrips) {
    const auto& g = campaign_.dataset.ground_truth.front();
    ASSERT_EQ(run_cli(with({"labelgrid", "--out", out("lg"), "--image-id", g.image_id, "--full"}, data())).code, 0);
    const auto loaded = read_grid_file((base_ / "lg" / "labels.grid").string());
    ASSERT_TRUE(loaded.sidecar.has_value());
    std::vector<GroundTruthPoint> pts;
    for (const auto& p : campaign_.dataset.ground_truth)
        if (p.image_id == g.image_id) pts.push_back(p);
    const auto expected = make_image_label_grid(pts, *campaign_.dataset.find_image(g.image_id), GridGeometry{});
    EXPECT_EQ(labels_from_one_hot(loaded.grid), expected);
}

TEST_F(Cli, ExitCodes) {
    auto code = [](const Result& r) {
        EXPECT_FALSE(r.err.empty());
        const auto j = json::parse(r.err);
        EXPECT_EQ(j["error"]["exit_code"], r.code);
        return r.code;
    };
    EXPECT_EQ(code(run_cli({"evaluate", "--nope"})), cli::kUsage);
    EXPECT_EQ(code(run_cli({})), cli::kUsage);
    EXPECT_EQ(code(run_cli(with({"evaluate", "--out", out("e"), "--detections", out("absent.csv")}, data()))),
              cli::kMissingFile);
    {
        std::ofstream bad(base_ / "bad.csv");
        bad << "image_id,x,y,score\nsim00000,1,1,nan\n";
    }
    EXPECT_EQ(code(run_cli(with({"evaluate", "--out", out("e"), "--detections", out("bad.csv")}, data()))),
              cli::kInvalidInput);
    EXPECT_EQ(code(run_cli({"plan", "--out", out("e"), "--epochs", "0"})), cli::kDomain);
    EXPECT_EQ(code(run_cli(with({"evaluate", "--out", out("e"), "--detections", dets(), "--radius", "-1"}, data()))),
              cli::kDomain);
    EXPECT_EQ(code(run_cli({"oracle-check", "--out", out("e"), "--max-points", "11"})), cli::kDomain);
    EXPECT_EQ(run_cli({"--help"}).code, cli::kOk);
}

TEST_F(Cli, OracleCheckPasses) {
    const auto r = run_cli({"oracle-check", "--out", out("oc"), "--trials", "150", "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json(base_ / "oc" / "oracle_check.json")["mismatches"], 0);
}

TEST_F(Cli, SimulateMatchesLibrary) {
    ASSERT_EQ(run_cli({"simulate", "--out", out("sim2"), "--n-images", "80", "--seed", "21"}).code, 0);
    for (const char* f : {"annotations.csv", "images.csv", "detections.csv", "ledger.json"})
        EXPECT_EQ(slurp(base_ / "sim2" / f), slurp(base_ / "sim" / f)) << f;
}

} // namespace
} // namespace census
