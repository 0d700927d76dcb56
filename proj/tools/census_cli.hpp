#pragma once

#include <census/dataset.hpp>
#include <census/evaluate.hpp>
#include <census/fingerprint.hpp>
#include <census/grid_io.hpp>
#include <census/gridlabels.hpp>
#include <census/matching.hpp>
#include <census/matching_oracle.hpp>
#include <census/metrics.hpp>
#include <census/schedule.hpp>
#include <census/simulate.hpp>
#include <census/split.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef CENSUS_VERSION
#define CENSUS_VERSION "0.0.0"
#endif

namespace census::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kMissingFile = 3,
    kInvalidInput = 4, // parse, schema or validation failure
    kDomain = 5,       // well-formed input the operation cannot honour
    kCheckFailed = 6,  // oracle-check found mismatches
};

/// Malformed flag value or missing flag combination.
class UsageError : public Error {
public:
    using Error::Error;
};

/// A verification subcommand that ran but did not pass.
class CheckFailed : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(csv::parse_real(item, what, 1, what));
        } catch (const ParseError&) {
            throw UsageError(std::string("--") + what + ": '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw UsageError(std::string("--") + what + " must not be empty");
    return out;
}

inline std::pair<std::int64_t, std::int64_t> parse_pair(const std::string& text, const char* what) {
    const auto x = text.find_first_of("x,");
    if (x == std::string::npos) throw UsageError(std::string("--") + what + " expects WxH");
    try {
        return {csv::parse_integer(text.substr(0, x), what, 1, what), csv::parse_integer(text.substr(x + 1), what, 1, what)};
    } catch (const ParseError&) {
        throw UsageError(std::string("--") + what + ": '" + text + "' is not of the form WxH");
    }
}

inline std::string file_fingerprint(const std::string& path) {
    auto in = csv::open_input(path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Fingerprint().add(bytes).hex();
}

inline json point_json(const OperatingPoint& p) {
    return {{"threshold", p.threshold},
            {"tp", p.tp},
            {"fp", p.fp},
            {"fn", p.fn},
            {"precision", p.precision},
            {"recall", p.recall},
            {"f1", p.f1},
            {"precision_degenerate", p.precision_degenerate},
            {"recall_degenerate", p.recall_degenerate}};
}

inline const std::vector<std::string>& curve_columns() {
    static const std::vector<std::string> c{"radius", "threshold", "tp", "fp", "fn", "precision", "recall", "f1"};
    return c;
}

inline void write_curve_rows(std::ostream& out, const PrCurve& curve) {
    for (const auto& p : curve.points)
        csv::write_record(out, {csv::format_real(curve.radius), csv::format_real(p.threshold), std::to_string(p.tp),
                                std::to_string(p.fp), std::to_string(p.fn), csv::format_real(p.precision),
                                csv::format_real(p.recall), csv::format_real(p.f1)});
}

inline json stats_json(const SetStatistics& s) {
    json hist = json::object();
    for (const auto& [n, c] : s.animals_per_image) hist[std::to_string(n)] = c;
    return {{"pixels", s.pixels},
            {"images", s.images()},
            {"images_with_animals", s.images_with_animals},
            {"images_without_animals", s.images_without_animals},
            {"animals", s.animals},
            {"animals_per_image", hist}};
}

} // namespace detail

/// Collects outputs and writes manifest.json next to them.
class RunContext {
public:
    RunContext(std::string subcommand, std::vector<std::string> argv, std::string out_dir, std::ostream& log)
        : log(log), subcommand_(std::move(subcommand)), argv_(std::move(argv)), out_(std::move(out_dir)) {}

    std::ostream& log;

    void input(const std::string& role, const std::string& path) {
        if (path.empty()) return;
        inputs_.push_back({{"role", role}, {"path", path}, {"fnv1a64", detail::file_fingerprint(path)}});
    }

    json& config() { return config_; }
    void seed(std::uint64_t s) { seed_ = s; }

    fs::path path(const std::string& name) {
        if (out_.empty()) throw UsageError("--out is required");
        fs::create_directories(out_);
        outputs_.push_back(name);
        return fs::path(out_) / name;
    }

    std::ofstream open(const std::string& name) { return csv::open_output(path(name).string()); }

    void write_json(const std::string& name, const json& j) {
        auto f = open(name);
        f << j.dump(2) << '\n';
    }

    void finish() {
        json manifest{{"tool", "census_eval"},
                      {"version", CENSUS_VERSION},
                      {"subcommand", subcommand_},
                      {"argv", argv_},
                      {"inputs", inputs_},
                      {"config", config_},
                      {"seed", seed_ ? json(*seed_) : json(nullptr)},
                      {"outputs", outputs_}};
        write_json("manifest.json", manifest);
    }

private:
    std::string subcommand_;
    std::vector<std::string> argv_;
    std::string out_;
    json inputs_ = json::array();
    json config_ = json::object();
    std::optional<std::uint64_t> seed_;
    std::vector<std::string> outputs_;
};

struct Options {
    std::string out;
    std::string annotations;
    std::string images;
    std::string detections;
    double radius = 50.0;
    double threshold = 0.0;
    std::string thresholds;            // comma list; empty = distinct detection scores
    std::string radii = "10,25,50,100,200";
    std::string tile = "1000x1000";
    std::string fractions = "0.7,0.1,0.2";
    int n_splits = 3;
    std::uint64_t seed = 0;
    std::string splits;
    int split_id = 0;
    std::string image_id;
    std::string origin;
    bool full_image = false;
    std::int64_t patch_size = 512;
    std::int64_t grid_size = 32;
    std::vector<std::string> grids;
    std::string patches = "8x6";
    std::string image_size = "4000x3000";
    int epochs = 400;
    double hard_negative_factor = 0.25;
    unsigned threads = 0;
    CampaignSpec campaign;
    std::size_t trials = 1000;
    std::size_t max_points = 8;
};

namespace detail {

struct Loaded {
    Dataset dataset;
    std::vector<ScoredDetection> detections;
};

inline Loaded load_inputs(const Options& o, RunContext& ctx, bool need_detections) {
    if (o.annotations.empty() && o.images.empty()) throw UsageError("--annotations or --images is required");
    ctx.input("annotations", o.annotations);
    ctx.input("images", o.images);
    Loaded l{load_annotations(o.annotations, o.images), {}};
    if (need_detections) {
        if (o.detections.empty()) throw UsageError("--detections is required");
        ctx.input("detections", o.detections);
        l.detections = load_detections(o.detections, l.dataset.images);
    }
    return l;
}

inline std::vector<double> thresholds_for(const Options& o, std::span<const ScoredDetection> dets) {
    auto t = o.thresholds.empty() ? distinct_score_thresholds(dets) : parse_list(o.thresholds, "thresholds");
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

inline json thresholds_config(const Options& o) {
    return o.thresholds.empty() ? json("distinct_scores") : json(parse_list(o.thresholds, "thresholds"));
}

inline unsigned threads_for(const Options& o) { return o.threads ? o.threads : threads_from_env(); }

} // namespace detail

inline void cmd_evaluate(const Options& o, RunContext& ctx) {
    const auto in = detail::load_inputs(o, ctx, true);
    const DistanceRange range(o.radius);
    const EvalOptions eval{detail::threads_for(o)};
    const auto thresholds = detail::thresholds_for(o, in.detections);
    ctx.config() = {{"radius", o.radius}, {"threshold", o.threshold}, {"thresholds", detail::thresholds_config(o)}};

    const auto match = match_dataset(in.dataset.ground_truth, in.detections, range, o.threshold, in.dataset.images, eval);
    const auto curve = pr_curve(in.dataset.ground_truth, in.detections, range, thresholds, eval);

    json points = json::array();
    for (const auto& p : curve.points) points.push_back(detail::point_json(p));
    ctx.write_json("metrics.json", {{"radius", o.radius},
                                    {"images", in.dataset.images.size()},
                                    {"ground_truth", in.dataset.ground_truth.size()},
                                    {"detections", in.detections.size()},
                                    {"operating_point", detail::point_json(match.point)},
                                    {"total_matched_distance", [&] {
                                         double s = 0;
                                         for (const auto& p : match.pairs) s += p.distance;
                                         return s;
                                     }()},
                                    {"curve", points},
                                    {"curve_degenerate", curve.degenerate}});
    {
        auto f = ctx.open("pr_curve.csv");
        csv::write_record(f, detail::curve_columns());
        detail::write_curve_rows(f, curve);
    }
    auto f = ctx.open("matches.csv");
    csv::write_record(f, {"detection_index", "image_id", "x", "y", "score", "outcome", "instance_id", "distance"});
    std::size_t pi = 0, fi = 0;
    for (std::size_t k = 0; k < in.detections.size(); ++k) {
        const auto& d = in.detections[k];
        std::vector<std::string> row{std::to_string(k), d.image_id, csv::format_real(d.x), csv::format_real(d.y),
                                     csv::format_real(d.score)};
        if (pi < match.pairs.size() && match.pairs[pi].detection == k) {
            const auto& p = match.pairs[pi++];
            row.insert(row.end(), {"tp", in.dataset.ground_truth[p.ground_truth].instance_id, csv::format_real(p.distance)});
        } else if (fi < match.false_positives.size() && match.false_positives[fi] == k) {
            ++fi;
            row.insert(row.end(), {"fp", "", ""});
        } else {
            row.insert(row.end(), {"below_threshold", "", ""});
        }
        csv::write_record(f, row);
    }
    for (auto g : match.false_negatives)
        csv::write_record(f, {"", in.dataset.ground_truth[g].image_id, csv::format_real(in.dataset.ground_truth[g].x),
                              csv::format_real(in.dataset.ground_truth[g].y), "", "fn",
                              in.dataset.ground_truth[g].instance_id, ""});
}

inline void cmd_sweep(const Options& o, RunContext& ctx) {
    const auto in = detail::load_inputs(o, ctx, true);
    const auto radii = detail::parse_list(o.radii, "radii");
    const auto thresholds = detail::thresholds_for(o, in.detections);
    ctx.config() = {{"radii", radii}, {"thresholds", detail::thresholds_config(o)}};
    const auto sweep = sweep_distance_thresholds(in.dataset.ground_truth, in.detections, radii, thresholds,
                                                 {detail::threads_for(o)});
    json curves = json::array();
    auto f = ctx.open("sweep.csv");
    csv::write_record(f, detail::curve_columns());
    for (const auto& [r, curve] : sweep) {
        json points = json::array();
        for (const auto& p : curve.points) points.push_back(detail::point_json(p));
        curves.push_back({{"radius", r}, {"degenerate", curve.degenerate}, {"points", points}});
        detail::write_curve_rows(f, curve);
    }
    ctx.write_json("sweep.json", {{"curves", curves}});
}

inline void cmd_tiles(const Options& o, RunContext& ctx) {
    const auto in = detail::load_inputs(o, ctx, true);
    const auto [tw, th] = detail::parse_pair(o.tile, "tile");
    const TileGridSpec spec(tw, th);
    const auto thresholds = detail::thresholds_for(o, in.detections);
    ctx.config() = {{"tile", {tw, th}}, {"threshold", o.threshold}, {"radius", o.radius}, {"thresholds", detail::thresholds_config(o)}};
    const auto& gt = in.dataset.ground_truth;
    const auto report = tile_report(gt, in.detections, in.dataset.images, spec, o.threshold);
    const auto curve = screening_effort_curve(gt, in.detections, in.dataset.images, spec, thresholds,
                                              DistanceRange(o.radius), {detail::threads_for(o)});
    const auto rates = report.rates();
    json screening = json::array();
    auto f = ctx.open("screening.csv");
    csv::write_record(f, {"threshold", "animal_recall", "tiles_with_detections", "tile_recall"});
    for (const auto& p : curve) {
        screening.push_back({{"threshold", p.threshold},
                             {"animal_recall", p.animal_recall},
                             {"tiles_with_detections", p.tiles_with_detections},
                             {"tile_recall", p.tile_recall}});
        csv::write_record(f, {csv::format_real(p.threshold), csv::format_real(p.animal_recall),
                              std::to_string(p.tiles_with_detections), csv::format_real(p.tile_recall)});
    }
    ctx.write_json("tiles.json", {{"tile_width", tw},
                                  {"tile_height", th},
                                  {"threshold", o.threshold},
                                  {"tiles_total", report.tiles_total},
                                  {"tiles_with_gt", report.tiles_with_gt},
                                  {"tiles_with_detections", report.tiles_with_detections},
                                  {"tile_tp", report.tile_tp},
                                  {"tile_fp", report.tile_fp},
                                  {"tile_fn", report.tile_fn},
                                  {"precision", rates.precision},
                                  {"recall", rates.recall},
                                  {"f1", rates.f1},
                                  {"screening", screening}});
}

inline void cmd_split(const Options& o, RunContext& ctx) {
    const auto in = detail::load_inputs(o, ctx, false);
    const auto f = detail::parse_list(o.fractions, "fractions");
    if (f.size() != 3) throw UsageError("--fractions expects three values train,val,test");
    ctx.config() = {{"fractions", f}, {"n_splits", o.n_splits}};
    ctx.seed(o.seed);
    const auto splits = split_dataset(in.dataset, {f[0], f[1], f[2]}, o.n_splits, o.seed);
    ctx.write_json("splits.json", splits_to_json(splits));
    json stats = json::array();
    auto csvf = ctx.open("split_stats.csv");
    csv::write_record(csvf, {"split_id", "subset", "images", "images_with_animals", "images_without_animals", "animals",
                             "animal_fraction", "pixels"});
    for (const auto& s : splits) {
        const auto st = dataset_statistics(in.dataset, s);
        json sets = json::object();
        for (const auto& [sub, ss] : st.per_set) {
            auto j = detail::stats_json(ss);
            const double frac = st.total.animals ? static_cast<double>(ss.animals) / static_cast<double>(st.total.animals) : 0.0;
            j["animal_fraction"] = frac;
            sets[to_string(sub)] = j;
            csv::write_record(csvf, {std::to_string(s.split_id), to_string(sub), std::to_string(ss.images()),
                                     std::to_string(ss.images_with_animals), std::to_string(ss.images_without_animals),
                                     std::to_string(ss.animals), csv::format_real(frac), std::to_string(ss.pixels)});
        }
        stats.push_back({{"split_id", s.split_id}, {"sets", sets}});
    }
    ctx.write_json("split_stats.json", {{"splits", stats}});
}

inline void cmd_stats(const Options& o, RunContext& ctx) {
    const auto in = detail::load_inputs(o, ctx, !o.detections.empty());
    ctx.config() = {{"split_id", o.splits.empty() ? json(nullptr) : json(o.split_id)}, {"threshold", o.threshold}};
    json out{{"total", detail::stats_json(dataset_statistics(in.dataset))}};
    if (!o.splits.empty()) {
        ctx.input("splits", o.splits);
        auto f = csv::open_input(o.splits);
        json j;
        try {
            j = json::parse(f);
        } catch (const json::exception& e) {
            throw ValidationError(o.splits + ": " + e.what());
        }
        const auto splits = splits_from_json(j);
        auto it = std::find_if(splits.begin(), splits.end(), [&](const auto& s) { return s.split_id == o.split_id; });
        if (it == splits.end()) throw InputError("split " + std::to_string(o.split_id) + " not found in " + o.splits);
        const auto st = dataset_statistics(in.dataset, *it);
        json sets = json::object();
        for (const auto& [sub, ss] : st.per_set) sets[to_string(sub)] = detail::stats_json(ss);
        out["sets"] = sets;
    }
    if (!o.detections.empty()) {
        const auto d = per_image_detection_stats(in.detections, o.threshold, in.dataset.images);
        json hist = json::object();
        for (const auto& [n, c] : d.histogram) hist[std::to_string(n)] = c;
        out["detections"] = {{"threshold", o.threshold},
                             {"min", d.min},
                             {"max", d.max},
                             {"images_without_detections", d.images_without_detections},
                             {"per_image_histogram", hist}};
    }
    ctx.write_json("stats.json", out);
    auto f = ctx.open("animals_per_image.csv");
    csv::write_record(f, {"animals", "images"});
    for (const auto& [n, c] : dataset_statistics(in.dataset).animals_per_image)
        csv::write_record(f, {std::to_string(n), std::to_string(c)});
}

inline void cmd_labelgrid(const Options& o, RunContext& ctx) {
    const auto in = detail::load_inputs(o, ctx, false);
    const GridGeometry geo{o.patch_size, o.grid_size};
    geo.validate();
    const ImageMeta* image = in.dataset.find_image(o.image_id);
    if (!image) throw InputError("image '" + o.image_id + "' is not in the dataset");
    std::vector<GroundTruthPoint> pts;
    for (const auto& g : in.dataset.ground_truth)
        if (g.image_id == o.image_id) pts.push_back(g);
    PatchOrigin origin{};
    LabelGrid grid;
    if (o.full_image) {
        grid = make_image_label_grid(pts, *image, geo);
    } else {
        if (!o.origin.empty()) {
            const auto [x, y] = detail::parse_pair(o.origin, "origin");
            origin = {x, y};
        }
        grid = make_label_grid(pts, origin, geo);
    }
    ctx.config() = {{"image_id", o.image_id},        {"full_image", o.full_image}, {"origin", {origin.x, origin.y}},
                    {"patch_size", geo.patch_size}, {"grid_size", geo.grid_size}};
    const GridSidecar side{GridKind::Label, geo, origin, o.image_id};
    write_grid_file(ctx.path("labels.grid").string(), grid, side);
    ctx.path("labels.grid.json");
    const auto h = class_histogram(grid);
    auto dets = grid_to_detections(to_one_hot(grid), geo, *image, origin);
    const auto sidecar = sidecar_to_json(side, to_one_hot(grid));
    ctx.write_json("labelgrid.json", {{"sidecar", sidecar},
                                      {"counts",
                                       {{"background", h[class_index(ClassLabel::Background)]},
                                        {"animal", h[class_index(ClassLabel::Animal)]},
                                        {"border", h[class_index(ClassLabel::Border)]}}},
                                      {"animals_in_grid", h[class_index(ClassLabel::Animal)]},
                                      {"round_trip_detections", dets.size()}});
}

inline void cmd_stitch(const Options& o, RunContext& ctx) {
    const GridGeometry geo{o.patch_size, o.grid_size};
    geo.validate();
    const auto [w, h] = detail::parse_pair(o.image_size, "image-size");
    const auto [px, py] = detail::parse_pair(o.patches, "patches");
    const ImageMeta image{o.image_id.empty() ? "image" : o.image_id, w, h, false};
    image.validate();
    const auto layout = plan_patch_layout(image, geo, px, py);
    if (o.grids.empty()) throw UsageError("--grids is required");
    std::vector<ProbabilityGrid> patches;
    for (const auto& g : o.grids) {
        ctx.input("grid", g);
        patches.push_back(read_grid_file(g).grid);
    }
    for (std::size_t k = 0; k < patches.size(); ++k)
        for (const auto& cell : patches[k].cells)
            if (!is_simplex(cell, kSimplexTolerance))
                throw ValidationError(o.grids[k] + ": cells must hold probability simplexes");
    ctx.config() = {{"image_size", {w, h}}, {"patches", {px, py}}, {"patch_size", geo.patch_size}, {"grid_size", geo.grid_size}};
    const auto full = stitch_probability_grids(patches, layout, geo);
    GridGeometry full_geo = geo;
    write_grid_file(ctx.path("stitched.grid").string(), full, {GridKind::Probability, full_geo, {0, 0}, image.image_id});
    ctx.path("stitched.grid.json");
    const auto dets = grid_to_detections(full, geo, image);
    save_detections(dets, ctx.path("detections.csv").string());
    json origins = json::array();
    for (const auto& og : layout.origins) origins.push_back({og.x, og.y});
    ctx.write_json("stitch.json", {{"rows", full.rows},
                                   {"cols", full.cols},
                                   {"stride", geo.stride()},
                                   {"patch_origins", origins},
                                   {"detections", dets.size()}});
}

inline void cmd_plan(const Options& o, RunContext& ctx) {
    ScheduleConfig config;
    config.hard_negative_factor = o.hard_negative_factor;
    if (!(o.hard_negative_factor > 0.0)) throw InputError("--hard-negative-factor must be positive");
    ctx.config() = {{"epochs", o.epochs}, {"hard_negative_factor", o.hard_negative_factor}};
    const auto plan = build_training_plan(o.epochs, config);
    ctx.write_json("plan.json", to_json(plan));
    auto f = ctx.open("plan.txt");
    f << plan_table(plan);
}

inline void cmd_simulate(const Options& o, RunContext& ctx) {
    CampaignSpec spec = o.campaign;
    spec.seed = o.seed;
    ctx.seed(o.seed);
    ctx.config() = to_json(spec);
    const auto c = generate_campaign(spec, detail::threads_for(o));
    for (const char* name : {"annotations.csv", "images.csv", "detections.csv", "ledger.json", "campaign.json"})
        ctx.path(name);
    save_campaign(c, o.out);
    const auto st = dataset_statistics(c.dataset);
    ctx.write_json("simulate.json", {{"campaign_fingerprint", c.ledger.campaign_fingerprint},
                                     {"statistics", detail::stats_json(st)},
                                     {"detections", c.detections.size()},
                                     {"planted_tp", std::count_if(c.ledger.entries.begin(), c.ledger.entries.end(),
                                                                  [](const auto& e) { return e.is_tp; })}});
}

inline void cmd_oracle_check(const Options& o, RunContext& ctx) {
    if (o.max_points > kOracleMaxPoints)
        throw InputError("--max-points is limited to " + std::to_string(kOracleMaxPoints));
    ctx.seed(o.seed);
    ctx.config() = {{"trials", o.trials}, {"max_points", o.max_points}};
    Rng rng(o.seed);
    std::size_t mismatches = 0;
    json examples = json::array();
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t t = 0; t < o.trials; ++t) {
        const auto n_gt = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(o.max_points)));
        const auto n_det = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(o.max_points)));
        const bool integer = uniform01(rng) < 0.5;
        auto coord = [&] { return integer ? static_cast<double>(uniform_int(rng, 0, 40)) * 5 : uniform_real(rng, 0, 200); };
        std::vector<GroundTruthPoint> gt;
        std::vector<ScoredDetection> dets;
        for (std::size_t i = 0; i < n_gt; ++i) gt.push_back({"img", coord(), coord(), "g" + std::to_string(i)});
        for (std::size_t j = 0; j < n_det; ++j) dets.push_back({"img", coord(), coord(), uniform01(rng)});
        const DistanceRange range(uniform_real(rng, 5, 120));
        const auto fast = match_census(gt, dets, range);
        const auto slow = match_oracle(gt, dets, range);
        const bool same = fast.tp() == slow.tp() && fast.fp() == slow.fp() && fast.fn() == slow.fn() &&
                          std::abs(fast.total_distance() - slow.total_distance()) <= 1e-6;
        if (!same) {
            ++mismatches;
            if (examples.size() < 5) examples.push_back({{"trial", t}, {"census_tp", fast.tp()}, {"oracle_tp", slow.tp()}});
        }
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    // elapsed time is reported on stdout only so the JSON stays reproducible
    ctx.log << "oracle-check: " << o.trials << " trials, " << mismatches << " mismatches, " << ms << " ms\n";
    ctx.write_json("oracle_check.json",
                   {{"trials", o.trials}, {"max_points", o.max_points}, {"mismatches", mismatches}, {"examples", examples}});
    if (mismatches) {
        ctx.finish();
        throw CheckFailed(std::to_string(mismatches) + " of " + std::to_string(o.trials) + " trials disagree with the oracle");
    }
}

inline std::string error_kind(const std::exception& e, int& code) {
    if (dynamic_cast<const CheckFailed*>(&e)) return code = kCheckFailed, "check_failed";
    if (dynamic_cast<const UsageError*>(&e)) return code = kUsage, "usage";
    if (dynamic_cast<const IoError*>(&e)) return code = kMissingFile, "io_error";
    if (dynamic_cast<const ParseError*>(&e)) return code = kInvalidInput, "parse_error";
    if (dynamic_cast<const ValidationError*>(&e)) return code = kInvalidInput, "validation_error";
    if (dynamic_cast<const InfeasibleError*>(&e)) return code = kDomain, "infeasible";
    if (dynamic_cast<const CoverageError*>(&e)) return code = kDomain, "coverage_error";
    if (dynamic_cast<const ShapeError*>(&e)) return code = kDomain, "shape_error";
    if (dynamic_cast<const SizeError*>(&e)) return code = kDomain, "size_error";
    if (dynamic_cast<const InputError*>(&e)) return code = kDomain, "input_error";
    return code = kInternal, "internal_error";
}

inline void emit_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
    err << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << '\n';
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Point-detection census evaluation and training-plan tools", "census_eval"};
    app.set_version_flag("--version", CENSUS_VERSION);
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out, "Output directory")->required();
        sub->add_option("--threads", o.threads, "Worker threads (default: CENSUS_EVAL_THREADS or all cores)");
    };
    auto data = [&](CLI::App* sub, bool detections) {
        sub->add_option("--annotations", o.annotations, "annotations.csv");
        sub->add_option("--images", o.images, "images.csv (images without animals)");
        if (detections) sub->add_option("--detections", o.detections, "detections.csv")->required();
    };

    auto* evaluate = app.add_subcommand("evaluate", "Census matching and precision/recall");
    common(evaluate);
    data(evaluate, true);
    evaluate->add_option("--radius", o.radius, "Distance range in pixels")->capture_default_str();
    evaluate->add_option("--threshold", o.threshold, "Score threshold of the reported operating point")->capture_default_str();
    evaluate->add_option("--thresholds", o.thresholds, "Comma-separated curve thresholds (default: every distinct score)");

    auto* sweep = app.add_subcommand("sweep", "Precision/recall curves for several distance ranges");
    common(sweep);
    data(sweep, true);
    sweep->add_option("--radii", o.radii, "Comma-separated radii")->capture_default_str();
    sweep->add_option("--thresholds", o.thresholds, "Comma-separated thresholds");

    auto* tiles = app.add_subcommand("tiles", "Tile-based screening effort");
    common(tiles);
    data(tiles, true);
    tiles->add_option("--tile", o.tile, "Tile size WxH")->capture_default_str();
    tiles->add_option("--threshold", o.threshold, "Score threshold of the tile report")->capture_default_str();
    tiles->add_option("--radius", o.radius, "Distance range for animal recall")->capture_default_str();
    tiles->add_option("--thresholds", o.thresholds, "Comma-separated thresholds for the screening curve");

    auto* split = app.add_subcommand("split", "Animal-balanced image-wise train/val/test split");
    common(split);
    data(split, false);
    split->add_option("--fractions", o.fractions, "train,val,test")->capture_default_str();
    split->add_option("--n-splits", o.n_splits, "Cross-validation splits sharing one test set")->capture_default_str();
    split->add_option("--seed", o.seed, "Random seed")->capture_default_str();

    auto* stats = app.add_subcommand("stats", "Dataset statistics");
    common(stats);
    data(stats, false);
    stats->add_option("--detections", o.detections, "detections.csv for per-image detection counts");
    stats->add_option("--threshold", o.threshold, "Score threshold for detection counts")->capture_default_str();
    stats->add_option("--splits", o.splits, "splits.json for per-set statistics");
    stats->add_option("--split-id", o.split_id, "Split to report")->capture_default_str();

    auto* labelgrid = app.add_subcommand("labelgrid", "Background/animal/border label grid for one image");
    common(labelgrid);
    data(labelgrid, false);
    labelgrid->add_option("--image-id", o.image_id, "Image")->required();
    labelgrid->add_option("--origin", o.origin, "Patch origin X,Y (default 0,0)");
    labelgrid->add_flag("--full", o.full_image, "Whole-image grid instead of one patch");
    labelgrid->add_option("--patch", o.patch_size, "Patch size in pixels")->capture_default_str();
    labelgrid->add_option("--grid", o.grid_size, "Cells per patch side")->capture_default_str();

    auto* stitch = app.add_subcommand("stitch", "Average per-patch probability grids into one image grid");
    common(stitch);
    stitch->add_option("--grids", o.grids, "Patch grid files in row-major patch order")->required();
    stitch->add_option("--image-size", o.image_size, "Image WxH")->capture_default_str();
    stitch->add_option("--patches", o.patches, "Patches per axis NXxNY")->capture_default_str();
    stitch->add_option("--image-id", o.image_id, "Image id for emitted detections");
    stitch->add_option("--patch", o.patch_size, "Patch size in pixels")->capture_default_str();
    stitch->add_option("--grid", o.grid_size, "Cells per patch side")->capture_default_str();

    auto* plan = app.add_subcommand("plan", "Per-epoch training plan");
    common(plan);
    plan->add_option("--epochs", o.epochs, "Total epochs")->capture_default_str();
    plan->add_option("--hard-negative-factor", o.hard_negative_factor, "Hard-negative weight as a fraction of the animal weight")
        ->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Synthetic campaign with planted detections");
    common(simulate);
    auto& cs = o.campaign;
    simulate->add_option("--n-images", cs.n_images)->capture_default_str();
    simulate->add_option("--width", cs.width)->capture_default_str();
    simulate->add_option("--height", cs.height)->capture_default_str();
    simulate->add_option("--fraction-empty", cs.fraction_empty)->capture_default_str();
    simulate->add_option("--animals-mean", cs.animals_per_positive_image, "Mean animals per non-empty image")
        ->capture_default_str();
    simulate->add_option("--min-separation", cs.min_separation)->capture_default_str();
    simulate->add_flag("--crowded", cs.crowded, "Drop the 2-sigma separation floor");
    simulate->add_option("--hit-rate", cs.detector.hit_rate)->capture_default_str();
    simulate->add_option("--sigma", cs.detector.position_noise_sigma, "Position noise per axis (px)")->capture_default_str();
    simulate->add_option("--fp-per-image", cs.detector.fp_per_image)->capture_default_str();
    simulate->add_option("--fp-exclusion", cs.detector.fp_exclusion_radius)->capture_default_str();
    simulate->add_option("--tp-beta", cs.detector.tp_score.a, "TP score Beta a")->capture_default_str();
    simulate->add_option("--tp-beta-b", cs.detector.tp_score.b, "TP score Beta b")->capture_default_str();
    simulate->add_option("--fp-beta", cs.detector.fp_score.a, "FP score Beta a")->capture_default_str();
    simulate->add_option("--fp-beta-b", cs.detector.fp_score.b, "FP score Beta b")->capture_default_str();
    simulate->add_option("--seed", o.seed)->capture_default_str();

    auto* oracle = app.add_subcommand("oracle-check", "Compare the matcher with the exhaustive oracle");
    common(oracle);
    oracle->add_option("--trials", o.trials)->capture_default_str();
    oracle->add_option("--max-points", o.max_points)->capture_default_str();
    oracle->add_option("--seed", o.seed)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << CENSUS_VERSION << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        emit_error(err, "usage", e.what(), kUsage);
        return kUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        RunContext ctx(sub->get_name(), args, o.out, out);
        const auto name = sub->get_name();
        if (name == "evaluate") cmd_evaluate(o, ctx);
        else if (name == "sweep") cmd_sweep(o, ctx);
        else if (name == "tiles") cmd_tiles(o, ctx);
        else if (name == "split") cmd_split(o, ctx);
        else if (name == "stats") cmd_stats(o, ctx);
        else if (name == "labelgrid") cmd_labelgrid(o, ctx);
        else if (name == "stitch") cmd_stitch(o, ctx);
        else if (name == "plan") cmd_plan(o, ctx);
        else if (name == "simulate") cmd_simulate(o, ctx);
        else if (name == "oracle-check") cmd_oracle_check(o, ctx);
        ctx.finish();
    } catch (const std::exception& e) {
        int code = kInternal;
        const auto kind = error_kind(e, code);
        emit_error(err, kind, e.what(), code);
        return code;
    }
    return kOk;
}

} // namespace census::cli
