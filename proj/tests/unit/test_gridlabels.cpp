#include <census/grid_io.hpp>
#include <census/gridlabels.hpp>
#include <census/matching.hpp>

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

namespace census {
namespace {

using testing::gt_at;

constexpr auto B = ClassLabel::Background;
constexpr auto A = ClassLabel::Animal;
constexpr auto R = ClassLabel::Border;

// Independent per-cell rule: Animal if some point falls in the cell, Border if
// some point falls in an 8-neighbour, Background otherwise.
LabelGrid oracle_label_grid(const std::vector<GroundTruthPoint>& pts, PatchOrigin o, std::int64_t stride, std::size_t n) {
    LabelGrid g(n, n, B);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            bool animal = false, near = false;
            for (const auto& p : pts) {
                const double lx = p.x - o.x, ly = p.y - o.y;
                if (lx < 0 || ly < 0 || lx >= double(n * stride) || ly >= double(n * stride)) continue;
                const auto pc = static_cast<long>(lx / stride), pr = static_cast<long>(ly / stride);
                if (pr == long(r) && pc == long(c)) animal = true;
                else if (std::abs(pr - long(r)) <= 1 && std::abs(pc - long(c)) <= 1) near = true;
            }
            g.at(r, c) = animal ? A : near ? R : B;
        }
    }
    return g;
}

std::vector<GroundTruthPoint> random_points(Rng& rng, int n, double w, double h) {
    std::vector<GroundTruthPoint> pts;
    for (int k = 0; k < n; ++k)
        pts.push_back({"img", uniform_real(rng, 0, w), uniform_real(rng, 0, h), "p" + std::to_string(k)});
    return pts;
}

Probabilities random_simplex(Rng& rng) {
    Probabilities p{};
    double sum = 0;
    for (auto& v : p) sum += v = gamma_draw(rng, 1.0);
    for (auto& v : p) v /= sum;
    return p;
}

TEST(LabelGrid, SingleAnimalAtCentre) {
    const std::vector<GroundTruthPoint> pts{gt_at(256, 256)};
    const auto g = make_label_grid(pts, {0, 0});
    ASSERT_EQ(g.rows, 32u);
    ASSERT_EQ(g.cols, 32u);
    EXPECT_EQ(g.at(16, 16), A);
    const auto h = class_histogram(g);
    EXPECT_EQ(h[class_index(A)], 1u);
    EXPECT_EQ(h[class_index(R)], 8u);
    EXPECT_EQ(h[class_index(B)], 32u * 32u - 9u);
    for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
            if (dr || dc) {
                EXPECT_EQ(g.at(16 + dr, 16 + dc), R);
            }
}

TEST(LabelGrid, NoAnimalsIsAllBackground) {
    const auto g = make_label_grid({}, {0, 0});
    EXPECT_EQ(class_histogram(g)[class_index(B)], 1024u);
}

TEST(LabelGrid, AdjacentAnimalsKeepBothCentres) {
    // cells (6,6) and (6,7); ring spans rows 5..7, cols 5..8
    const std::vector<GroundTruthPoint> pts{gt_at(100, 100, "a"), gt_at(116, 100, "b")};
    const auto g = make_label_grid(pts, {0, 0});
    EXPECT_EQ(g.at(6, 6), A);
    EXPECT_EQ(g.at(6, 7), A);
    const auto h = class_histogram(g);
    EXPECT_EQ(h[class_index(A)], 2u);
    EXPECT_EQ(h[class_index(R)], 10u);
    for (std::size_t r = 5; r <= 7; ++r)
        for (std::size_t c = 5; c <= 8; ++c) EXPECT_NE(g.at(r, c), B);
}

TEST(LabelGrid, PatchOriginAndOutsidePoints) {
    const std::vector<GroundTruthPoint> pts{gt_at(1000 + 5, 2000 + 17), gt_at(999, 2000), gt_at(1000 + 512, 2100)};
    const auto g = make_label_grid(pts, {1000, 2000});
    EXPECT_EQ(g.at(1, 0), A);
    EXPECT_EQ(class_histogram(g)[class_index(A)], 1u);
    // the corner animal only has in-bounds neighbours
    EXPECT_EQ(class_histogram(g)[class_index(R)], 5u);
}

TEST(LabelGrid, MatchesCellwiseOracleAndNeighbourhoodProperty) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const GridGeometry geo{64, 16};
        const PatchOrigin o{uniform_int(rng, 0, 20), uniform_int(rng, 0, 20)};
        auto pts = random_points(rng, static_cast<int>(uniform_int(rng, 0, 12)), 100, 100);
        const auto g = make_label_grid(pts, o, geo);
        EXPECT_EQ(g, oracle_label_grid(pts, o, geo.stride(), 16));
        for (std::size_t r = 0; r < g.rows; ++r)
            for (std::size_t c = 0; c < g.cols; ++c) {
                if (g.at(r, c) != A) continue;
                for (long dr = -1; dr <= 1; ++dr)
                    for (long dc = -1; dc <= 1; ++dc) {
                        const long rr = long(r) + dr, cc = long(c) + dc;
                        if (rr < 0 || cc < 0 || rr >= 16 || cc >= 16) continue;
                        EXPECT_NE(g.at(rr, cc), B);
                    }
            }
        std::reverse(pts.begin(), pts.end());
        EXPECT_EQ(make_label_grid(pts, o, geo), g);
        auto doubled = pts;
        doubled.insert(doubled.end(), pts.begin(), pts.end());
        EXPECT_EQ(make_label_grid(doubled, o, geo), g);
    }
}

TEST(LabelGrid, InvalidGeometry) {
    EXPECT_THROW(make_label_grid({}, {0, 0}, GridGeometry{500, 32}), ShapeError);
    EXPECT_THROW(make_label_grid({}, {0, 0}, GridGeometry{512, 0}), ShapeError);
}

TEST(Layout, CanonicalEightBySix) {
    const auto layout = plan_patch_layout({"img", 4000, 3000, false}, {}, 8, 6);
    ASSERT_EQ(layout.origins.size(), 48u);
    std::vector<std::int64_t> xs, ys;
    for (std::size_t k = 0; k < 8; ++k) xs.push_back(layout.origins[k].x);
    for (std::size_t k = 0; k < 6; ++k) ys.push_back(layout.origins[k * 8].y);
    EXPECT_EQ(xs, (std::vector<std::int64_t>{0, 498, 997, 1495, 1993, 2491, 2990, 3488}));
    EXPECT_EQ(ys, (std::vector<std::int64_t>{0, 498, 995, 1493, 1990, 2488}));
    for (std::size_t k = 1; k < layout.origins.size(); ++k) {
        const auto a = layout.origins[k - 1], b = layout.origins[k];
        EXPECT_TRUE(a.y < b.y || (a.y == b.y && a.x < b.x));
    }
}

TEST(Layout, SinglePatchAndErrors) {
    const auto one = plan_patch_layout({"img", 512, 512, false}, {}, 1, 1);
    ASSERT_EQ(one.origins.size(), 1u);
    EXPECT_EQ(one.origins[0], (PatchOrigin{0, 0}));
    EXPECT_THROW(plan_patch_layout({"img", 4000, 3000, false}, {}, 7, 6), CoverageError);
    EXPECT_THROW(plan_patch_layout({"img", 4000, 3000, false}, {}, 8, 5), CoverageError);
    EXPECT_THROW(plan_patch_layout({"img", 4000, 3000, false}, {}, 0, 6), CoverageError);
    const auto small = plan_patch_layout({"img", 100, 80, false}, {}, 3, 2);
    for (const auto& o : small.origins) EXPECT_EQ(o, (PatchOrigin{0, 0}));
    EXPECT_EQ(plan_patch_layout({"img", 4000, 3000, false}).origins.size(), 48u);
}

TEST(Layout, BruteForceCoverage) {
    Rng rng(22);
    const GridGeometry geo{8, 4};
    for (int trial = 0; trial < 300; ++trial) {
        const ImageMeta img{"img", uniform_int(rng, 1, 60), uniform_int(rng, 1, 60), false};
        const auto nx = (img.width + 7) / 8 + uniform_int(rng, 0, 2);
        const auto ny = (img.height + 7) / 8 + uniform_int(rng, 0, 2);
        const auto layout = plan_patch_layout(img, geo, nx, ny);
        for (std::int64_t y = 0; y < img.height; ++y)
            for (std::int64_t x = 0; x < img.width; ++x) {
                int hits = 0;
                for (const auto& o : layout.origins) hits += x >= o.x && x < o.x + 8 && y >= o.y && y < o.y + 8;
                ASSERT_GE(hits, 1) << img.width << "x" << img.height << " at " << x << "," << y;
            }
        for (const auto& o : layout.origins) {
            EXPECT_GE(o.x, 0);
            EXPECT_GE(o.y, 0);
            if (img.width >= 8) {
                EXPECT_LE(o.x + 8, img.width);
            }
            if (img.height >= 8) {
                EXPECT_LE(o.y + 8, img.height);
            }
        }
    }
}

TEST(Stitch, CanonicalShapeAndSimplex) {
    Rng rng(23);
    const ImageMeta img{"img", 4000, 3000, false};
    const auto layout = plan_patch_layout(img, {}, 8, 6);
    std::vector<ProbabilityGrid> patches;
    for (std::size_t k = 0; k < layout.origins.size(); ++k) {
        ProbabilityGrid g(32, 32);
        for (auto& cell : g.cells) cell = random_simplex(rng);
        patches.push_back(std::move(g));
    }
    const auto full = stitch_probability_grids(patches, layout);
    EXPECT_EQ(full.rows, 188u);
    EXPECT_EQ(full.cols, 250u);
    for (const auto& cell : full.cells) EXPECT_TRUE(is_simplex(cell, 1e-9));
}

TEST(Stitch, SinglePatchIsIdentity) {
    Rng rng(24);
    const auto layout = plan_patch_layout({"img", 512, 512, false}, {}, 1, 1);
    ProbabilityGrid g(32, 32);
    for (auto& cell : g.cells) cell = random_simplex(rng);
    const std::vector<ProbabilityGrid> patches{g};
    EXPECT_EQ(stitch_probability_grids(patches, layout), g);
}

TEST(Stitch, OverlapIsArithmeticMean) {
    const auto layout = plan_patch_layout({"img", 768, 512, false}, {}, 2, 1);
    ASSERT_EQ(layout.origins[1], (PatchOrigin{256, 0}));
    const Probabilities p{0.5, 0.25, 0.25}, q{0.1, 0.7, 0.2};
    const std::vector<ProbabilityGrid> patches{ProbabilityGrid(32, 32, p), ProbabilityGrid(32, 32, q)};
    const auto full = stitch_probability_grids(patches, layout);
    ASSERT_EQ(full.cols, 48u);
    for (std::size_t r = 0; r < full.rows; ++r)
        for (std::size_t c = 0; c < full.cols; ++c) {
            const auto& v = full.at(r, c);
            for (std::size_t k = 0; k < kNumClasses; ++k) {
                const double expect = c < 16 ? p[k] : c >= 32 ? q[k] : (p[k] + q[k]) / 2;
                EXPECT_DOUBLE_EQ(v[k], expect);
            }
        }
}

TEST(Stitch, ShapeErrors) {
    const auto layout = plan_patch_layout({"img", 768, 512, false}, {}, 2, 1);
    const std::vector<ProbabilityGrid> one{ProbabilityGrid(32, 32)};
    EXPECT_THROW(stitch_probability_grids(one, layout), ShapeError);
    const std::vector<ProbabilityGrid> wrong{ProbabilityGrid(32, 32), ProbabilityGrid(16, 32)};
    EXPECT_THROW(stitch_probability_grids(wrong, layout), ShapeError);
}

TEST(GridToDetections, CellCentres) {
    const ImageMeta img{"img", 512, 512, false};
    EXPECT_TRUE(grid_to_detections(ProbabilityGrid(32, 32, one_hot(B)), {}, img).empty());
    ProbabilityGrid g(32, 32, one_hot(B));
    g.at(16, 16) = {0.2, 0.7, 0.1};
    g.at(3, 4) = {0.1, 0.3, 0.6}; // border argmax: discarded
    const auto dets = grid_to_detections(g, {}, img);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].x, 264.0);
    EXPECT_EQ(dets[0].y, 264.0);
    EXPECT_DOUBLE_EQ(dets[0].score, 0.7);
    // ties go to the lower class index, so an animal/background tie is background
    g.at(16, 16) = {0.5, 0.5, 0.0};
    EXPECT_TRUE(grid_to_detections(g, {}, img).empty());
}

TEST(GridToDetections, PlantedCellsAndPartialEdgeCells) {
    Rng rng(25);
    const ImageMeta img{"img", 4000, 3000, false};
    ProbabilityGrid g(188, 250, one_hot(B));
    std::set<std::size_t> planted;
    while (planted.size() < 40) planted.insert(static_cast<std::size_t>(uniform_int(rng, 0, 188 * 250 - 1)));
    for (auto i : planted) g[i] = {0.1, 0.8, 0.1};
    g.at(187, 249) = {0.0, 1.0, 0.0};
    const auto dets = grid_to_detections(g, {}, img);
    EXPECT_EQ(dets.size(), planted.size() + (planted.count(187 * 250 + 249) ? 0 : 1));
    for (const auto& d : dets) validate_detection(d, img);
    // the bottom-right cell covers only x 3984..3999, y 2992..2999
    EXPECT_EQ(dets.back().x, 3992.0);
    EXPECT_EQ(dets.back().y, 2996.0);
}

TEST(RoundTrip, LabelGridToDetectionsRecoversSpacedPoints) {
    Rng rng(26);
    const ImageMeta img{"img", 4000, 3000, true};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<GroundTruthPoint> pts;
        for (int attempt = 0; attempt < 4000 && pts.size() < 150; ++attempt) {
            const Point p{uniform_real(rng, 0, 4000), uniform_real(rng, 0, 3000)};
            bool ok = true;
            for (const auto& q : pts) ok &= euclidean_distance(p, q.position()) > 32.0;
            if (ok) pts.push_back({"img", p.x, p.y, "p" + std::to_string(pts.size())});
        }
        const auto labels = make_image_label_grid(pts, img);
        const auto dets = grid_to_detections(to_one_hot(labels), {}, img);
        EXPECT_EQ(dets.size(), pts.size());
        const auto report = match_census(pts, dets, DistanceRange(50));
        EXPECT_EQ(report.tp(), pts.size());
        for (const auto& pair : report.pairs) EXPECT_LE(pair.distance, 16.0 * std::sqrt(2.0) / 2 + 16.0);
    }
}

TEST(Crop, ForcedContainment) {
    Rng rng(27);
    const ImageMeta img{"img", 4000, 3000, true};
    const std::vector<GroundTruthPoint> pts{gt_at(1234.5, 2100.25)};
    for (int k = 0; k < 100; ++k) {
        const auto o = crop_semirandom_patch(img, pts, {}, rng);
        EXPECT_TRUE(o.x <= 1234.5 && 1234.5 < o.x + 512 && o.y <= 2100.25 && 2100.25 < o.y + 512);
        EXPECT_TRUE(o.x >= 0 && o.y >= 0 && o.x <= 4000 - 512 && o.y <= 3000 - 512);
    }
}

TEST(Crop, CornerAnimalsClampOrigin) {
    Rng rng(28);
    const ImageMeta img{"img", 1000, 800, true};
    for (int k = 0; k < 50; ++k) {
        const std::vector<GroundTruthPoint> lo{gt_at(0, 0)};
        EXPECT_EQ(crop_semirandom_patch(img, lo, {}, rng), (PatchOrigin{0, 0}));
        const std::vector<GroundTruthPoint> hi{gt_at(999.9, 799.9)};
        EXPECT_EQ(crop_semirandom_patch(img, hi, {}, rng), (PatchOrigin{1000 - 512, 800 - 512}));
    }
}

TEST(Crop, MultipleAnimalsEachContainOne) {
    Rng rng(29);
    const ImageMeta img{"img", 4000, 3000, true};
    const auto pts = random_points(rng, 5, 4000, 3000);
    for (int k = 0; k < 200; ++k) {
        const auto o = crop_semirandom_patch(img, pts, {}, rng);
        EXPECT_TRUE(std::any_of(pts.begin(), pts.end(), [&](const auto& p) {
            return p.x >= o.x && p.x < o.x + 512 && p.y >= o.y && p.y < o.y + 512;
        }));
    }
}

// One chi-square test at alpha 0.01 per seed and axis; a calibrated sampler
// rejects about 1% of them.
TEST(Crop, EmptyImageOriginsAreUniform) {
    const ImageMeta img{"img", 1011, 1011, false}; // 500 valid origins per axis
    constexpr double kCritical = 21.666;           // chi-square, 9 dof, alpha 0.01
    constexpr int kDraws = 10000;
    constexpr int kSeeds = 100;
    auto chi2 = [&](const std::array<int, 10>& b) {
        double s = 0;
        for (int v : b) s += (v - kDraws / 10.0) * (v - kDraws / 10.0) / (kDraws / 10.0);
        return s;
    };
    int rejections = 0;
    for (int seed = 0; seed < kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed));
        std::array<int, 10> bx{}, by{};
        for (int k = 0; k < kDraws; ++k) {
            const auto o = crop_semirandom_patch(img, {}, {}, rng);
            ASSERT_TRUE(o.x >= 0 && o.x < 500 && o.y >= 0 && o.y < 500);
            ++bx[static_cast<std::size_t>(o.x / 50)];
            ++by[static_cast<std::size_t>(o.y / 50)];
        }
        rejections += (chi2(bx) >= kCritical) + (chi2(by) >= kCritical);
    }
    // 200 tests at 1%: P(more than 8 rejections) is below 0.001
    EXPECT_LE(rejections, 8);
}

TEST(Crop, ImageSmallerThanPatch) {
    Rng rng(31);
    EXPECT_THROW(crop_semirandom_patch({"img", 400, 3000, false}, {}, {}, rng), SizeError);
    const std::vector<GroundTruthPoint> outside{gt_at(5000, 10)};
    EXPECT_THROW(crop_semirandom_patch({"img", 4000, 3000, false}, outside, {}, rng), InputError);
}

TEST(GridIo, BinaryLayoutIsExact) {
    ProbabilityGrid g(1, 2);
    g.at(0, 0) = {1.0, 0.0, 0.0};
    g.at(0, 1) = {0.25, 0.5, 0.25};
    const auto bytes = encode_grid(g);
    ASSERT_EQ(bytes.size(), 20u + 6u * 4u);
    EXPECT_EQ(bytes.substr(0, 4), "CGRD");
    const unsigned char header[] = {1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0};
    EXPECT_EQ(bytes.substr(4, 16), std::string(reinterpret_cast<const char*>(header), 16));
    // 1.0f = 0x3F800000, 0.25f = 0x3E800000
    const unsigned char first[] = {0x00, 0x00, 0x80, 0x3F};
    const unsigned char fourth[] = {0x00, 0x00, 0x80, 0x3E};
    EXPECT_EQ(bytes.substr(20, 4), std::string(reinterpret_cast<const char*>(first), 4));
    EXPECT_EQ(bytes.substr(32, 4), std::string(reinterpret_cast<const char*>(fourth), 4));
    EXPECT_EQ(decode_grid(bytes), g);
}

TEST(GridIo, RejectsCorruptInput) {
    const auto bytes = encode_grid(ProbabilityGrid(2, 2, one_hot(B)));
    EXPECT_THROW(decode_grid("XGRD" + bytes.substr(4)), ValidationError);
    EXPECT_THROW(decode_grid(bytes.substr(0, bytes.size() - 1)), ValidationError);
    EXPECT_THROW(decode_grid(bytes.substr(0, 10)), ValidationError);
    EXPECT_THROW(decode_grid(bytes + "1234"), ValidationError);
    auto versioned = bytes;
    versioned[4] = 2;
    EXPECT_THROW(decode_grid(versioned), ValidationError);
    auto nan = bytes;
    nan.replace(20, 4, std::string("\x00\x00\xc0\x7f", 4));
    EXPECT_THROW(decode_grid(nan), ValidationError);
    ProbabilityGrid soft(1, 1, {0.5, 0.5, 0.0});
    EXPECT_THROW(labels_from_one_hot(soft), ValidationError);
}

TEST(GridIo, FileRoundTripWithSidecar) {
    const auto dir = std::filesystem::temp_directory_path() / "census_grid_io_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "labels.grid").string();
    const std::vector<GroundTruthPoint> pts{gt_at(1100, 2300)};
    const auto labels = make_label_grid(pts, {1000, 2000});
    write_grid_file(path, labels, {GridKind::Label, {}, {1000, 2000}, "img"});
    const auto loaded = read_grid_file(path);
    EXPECT_EQ(labels_from_one_hot(loaded.grid), labels);
    ASSERT_TRUE(loaded.sidecar.has_value());
    EXPECT_EQ(loaded.sidecar->kind, GridKind::Label);
    EXPECT_EQ(loaded.sidecar->origin, (PatchOrigin{1000, 2000}));
    EXPECT_EQ(loaded.sidecar->geometry.stride(), 16);
    EXPECT_EQ(loaded.sidecar->image_id, "img");
    std::filesystem::remove_all(dir);
    EXPECT_THROW(read_grid_file(path), IoError);
}

} // namespace
} // namespace census
