#include <census/simulate.hpp>
#include <census/split.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace census {
namespace {

CampaignSpec small_spec(std::uint64_t seed) {
    CampaignSpec s;
    s.n_images = 100;
    s.fraction_empty = 0.65;
    s.seed = seed;
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TEST(Campaign, ExactEmptyCount) {
    const auto c = generate_campaign(small_spec(1));
    const auto stats = dataset_statistics(c.dataset);
    EXPECT_EQ(stats.images_without_animals, 65u);
    EXPECT_EQ(stats.images_with_animals, 35u);
    EXPECT_EQ(stats.animals, c.dataset.ground_truth.size());
}

TEST(Campaign, StatisticsEqualLedger) {
    const auto c = generate_campaign(small_spec(2));
    const auto stats = dataset_statistics(c.dataset);
    std::size_t animals = 0, with = 0;
    std::map<std::size_t, std::size_t> hist;
    for (const auto& i : c.ledger.images) {
        animals += i.animals;
        with += i.animals > 0;
        ++hist[i.animals];
    }
    EXPECT_EQ(stats.animals, animals);
    EXPECT_EQ(stats.images_with_animals, with);
    EXPECT_EQ(stats.animals_per_image, hist);
    EXPECT_EQ(stats.pixels, 100ull * 4000 * 3000);
}

TEST(Campaign, DeterministicAndThreadIndependent) {
    const auto a = generate_campaign(small_spec(3), 1);
    const auto b = generate_campaign(small_spec(3), 4);
    EXPECT_EQ(a.dataset, b.dataset);
    EXPECT_EQ(a.detections, b.detections);
    EXPECT_EQ(a.ledger, b.ledger);
    const auto c = generate_campaign(small_spec(4));
    EXPECT_NE(a.detections, c.detections);
    EXPECT_NE(a.ledger.campaign_fingerprint, c.ledger.campaign_fingerprint);
}

TEST(Campaign, ByteIdenticalFiles) {
    const auto base = std::filesystem::temp_directory_path() / "census_sim_test";
    std::filesystem::remove_all(base);
    save_campaign(generate_campaign(small_spec(5)), base / "a");
    save_campaign(generate_campaign(small_spec(5), 3), base / "b");
    for (const char* f : {"annotations.csv", "images.csv", "detections.csv", "ledger.json", "campaign.json"})
        EXPECT_EQ(slurp(base / "a" / f), slurp(base / "b" / f)) << f;

    // files load back into the same campaign
    const auto c = generate_campaign(small_spec(5));
    const auto ds = load_annotations((base / "a" / "annotations.csv").string(), (base / "a" / "images.csv").string());
    EXPECT_EQ(ds, c.dataset);
    EXPECT_EQ(load_detections((base / "a" / "detections.csv").string(), ds.images), c.detections);
    EXPECT_EQ(ledger_from_json(nlohmann::json::parse(slurp(base / "a" / "ledger.json"))), c.ledger);
    std::filesystem::remove_all(base);
}

TEST(Campaign, OutputsSatisfyCoreInvariants) {
    auto spec = small_spec(6);
    spec.detector.position_noise_sigma = 40; // push detections against the borders
    const auto c = generate_campaign(spec);
    for (const auto& d : c.detections) validate_detection(d, *c.dataset.find_image(d.image_id));
    for (const auto& g : c.dataset.ground_truth) validate_point(g, *c.dataset.find_image(g.image_id));
    const double sep = spec.effective_separation();
    EXPECT_EQ(sep, 80.0);
    const auto groups = group_by_image(c.dataset.ground_truth, c.detections);
    for (const auto& g : groups)
        for (std::size_t i = 0; i < g.ground_truth.size(); ++i)
            for (std::size_t j = i + 1; j < g.ground_truth.size(); ++j)
                EXPECT_GE(euclidean_distance(g.ground_truth[i].position(), g.ground_truth[j].position()), sep);
    for (std::size_t k = 0; k < c.detections.size(); ++k) {
        const auto& e = c.ledger.entries[k];
        EXPECT_EQ(e.detection, k);
        EXPECT_EQ(e.image_id, c.detections[k].image_id);
        if (e.is_tp) {
            ASSERT_TRUE(e.source_index.has_value());
            EXPECT_EQ(c.dataset.ground_truth[*e.source_index].instance_id, e.source_instance);
        }
    }
}

TEST(Campaign, InvalidAndInfeasibleSpecs) {
    auto s = small_spec(7);
    s.fraction_empty = 1.5;
    EXPECT_THROW(generate_campaign(s), InputError);
    s = small_spec(7);
    s.detector.hit_rate = -0.1;
    EXPECT_THROW(generate_campaign(s), InputError);
    s = small_spec(7);
    s.detector.position_noise_sigma = -1;
    EXPECT_THROW(generate_campaign(s), InputError);
    s = small_spec(7);
    s.width = 100;
    s.height = 100;
    s.animals_per_positive_image = 50;
    s.min_separation = 40;
    s.max_placement_attempts = 200;
    EXPECT_THROW(generate_campaign(s), InfeasibleError);
    s.crowded = true;
    s.min_separation = 0;
    EXPECT_NO_THROW(generate_campaign(s));
}

TEST(Campaign, PerfectDetectorScoresOne) {
    auto s = small_spec(8);
    s.detector.hit_rate = 1.0;
    s.detector.position_noise_sigma = 0.0;
    s.detector.fp_per_image = 0.0;
    const auto c = generate_campaign(s);
    for (double r : {0.5, 10.0, 50.0, 200.0}) {
        const auto m = match_dataset(c.dataset.ground_truth, c.detections, DistanceRange(r));
        EXPECT_EQ(m.point.precision, 1.0);
        EXPECT_EQ(m.point.recall, 1.0);
        const auto replay = replay_ledger(c.ledger, m);
        EXPECT_EQ(replay.label_agreement, 1.0);
        EXPECT_EQ(replay.pair_agreement, 1.0);
    }
}

TEST(Campaign, FalsePositiveOnlyDetector) {
    auto s = small_spec(9);
    s.detector.hit_rate = 0.0;
    s.detector.fp_per_image = 3.0;
    s.detector.fp_exclusion_radius = 50.0;
    const auto c = generate_campaign(s);
    ASSERT_FALSE(c.detections.empty());
    const auto m = match_dataset(c.dataset.ground_truth, c.detections, DistanceRange(50));
    EXPECT_EQ(m.point.tp, 0u);
    EXPECT_EQ(replay_ledger(c.ledger, m).label_agreement, 1.0);
}

TEST(Campaign, RecallTracksHitRate) {
    CampaignSpec s;
    s.n_images = 1200;
    s.seed = 10;
    s.detector.fp_exclusion_radius = 50;
    const auto c = generate_campaign(s);
    ASSERT_GE(c.dataset.ground_truth.size(), 2000u);
    const auto m = match_dataset(c.dataset.ground_truth, c.detections, DistanceRange(50));
    EXPECT_NEAR(m.point.recall, 0.9, 0.03);
    const auto replay = replay_ledger(c.ledger, m);
    EXPECT_GE(replay.label_agreement, 0.99);
    EXPECT_GE(replay.pair_agreement, 0.99);
}

TEST(Campaign, TpScoresStochasticallyHigher) {
    const auto c = generate_campaign(small_spec(11));
    double tp = 0, fp = 0;
    std::size_t ntp = 0, nfp = 0;
    for (std::size_t k = 0; k < c.detections.size(); ++k) {
        (c.ledger.entries[k].is_tp ? tp : fp) += c.detections[k].score;
        (c.ledger.entries[k].is_tp ? ntp : nfp) += 1;
    }
    ASSERT_GT(ntp, 0u);
    ASSERT_GT(nfp, 0u);
    EXPECT_NEAR(tp / ntp, 5.0 / 7.0, 0.05); // Beta(5,2) mean
    EXPECT_NEAR(fp / nfp, 2.0 / 7.0, 0.05); // Beta(2,5) mean
}

TEST(Replay, MismatchedCampaignRejected) {
    const auto a = generate_campaign(small_spec(12));
    const auto b = generate_campaign(small_spec(13));
    const auto m = match_dataset(b.dataset.ground_truth, b.detections, DistanceRange(50));
    EXPECT_THROW(replay_ledger(a.ledger, m), InputError);
}

TEST(Replay, CrowdedCaseIsReported) {
    auto s = small_spec(14);
    s.fraction_empty = 0.0;
    s.n_images = 20;
    s.width = 400;
    s.height = 300;
    s.animals_per_positive_image = 30;
    s.crowded = true;
    s.detector.position_noise_sigma = 20;
    const auto c = generate_campaign(s);
    const auto m = match_dataset(c.dataset.ground_truth, c.detections, DistanceRange(50));
    const auto r = replay_ledger(c.ledger, m);
    EXPECT_GT(r.evaluated, 0u);
    EXPECT_LE(m.point.tp, c.dataset.ground_truth.size());
    EXPECT_GE(r.label_agreement, 0.0);
    EXPECT_LE(r.label_agreement, 1.0);
    RecordProperty("crowded_pair_agreement", std::to_string(r.pair_agreement));
}

TEST(Replay, ThresholdRestrictsEvaluatedDetections) {
    const auto c = generate_campaign(small_spec(15));
    const auto m = match_dataset(c.dataset.ground_truth, c.detections, DistanceRange(50), 0.5);
    std::size_t above = 0;
    for (const auto& d : c.detections) above += d.score >= 0.5;
    EXPECT_EQ(replay_ledger(c.ledger, m).evaluated, above);
}

TEST(Splits, SimulatorDatasetBalance) {
    CampaignSpec s;
    s.n_images = 600;
    s.seed = 16;
    const auto c = generate_campaign(s);
    const auto splits = split_dataset(c.dataset, {}, 3, 16);
    const double total = static_cast<double>(c.dataset.ground_truth.size());
    for (const auto& split : splits) {
        const auto st = dataset_statistics(c.dataset, split);
        EXPECT_NEAR(st.per_set.at(Subset::Train).animals / total, 0.7, 0.03);
        EXPECT_NEAR(st.per_set.at(Subset::Val).animals / total, 0.1, 0.03);
        EXPECT_NEAR(st.per_set.at(Subset::Test).animals / total, 0.2, 0.03);
    }
}

} // namespace
} // namespace census
