#pragma once

#include <census/grid.hpp>
#include <census/random.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace census {

struct ClassWeights {
    double animal = 1.0;
    double background = 1.0 / 80.0;
    double border = 1.0 / 8.0;

    double operator[](ClassLabel c) const noexcept {
        switch (c) {
        case ClassLabel::Animal: return animal;
        case ClassLabel::Border: return border;
        case ClassLabel::Background: break;
        }
        return background;
    }

    std::array<double, kNumClasses> as_array() const noexcept { return {background, animal, border}; }

    ClassWeights scaled(double lambda) const noexcept { return {animal * lambda, background * lambda, border * lambda}; }

    void validate() const {
        for (double w : as_array())
            if (!(w > 0.0) || !std::isfinite(w)) throw InputError("class weights must be positive and finite");
    }
};

using ClassCounts = std::array<std::uint64_t, kNumClasses>; // indexed by class_index

inline ClassCounts count_labels(const LabelGrid& grid) {
    ClassCounts out{};
    const auto h = class_histogram(grid);
    for (std::size_t c = 0; c < kNumClasses; ++c) out[c] = h[c];
    return out;
}

/// w_c proportional to 1/count_c, scaled so the rarest class weighs 1.
/// With `add_one`, every count is incremented first so absent classes are allowed.
inline ClassWeights inverse_frequency_weights(const ClassCounts& counts, bool add_one = false) {
    std::array<double, kNumClasses> n{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (counts[c] == 0 && !add_one)
            throw InputError(std::string("class '") + std::string(to_string(static_cast<ClassLabel>(c))) +
                             "' has no samples; enable add-one smoothing to allow this");
        n[c] = static_cast<double>(counts[c]) + (add_one ? 1.0 : 0.0);
    }
    const double rarest = *std::min_element(n.begin(), n.end());
    auto w = [&](ClassLabel c) { return rarest / n[class_index(c)]; };
    return {w(ClassLabel::Animal), w(ClassLabel::Background), w(ClassLabel::Border)};
}

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kSimplexTolerance = 1e-6;

/// Mean over cells of -m_cell * sum_c w_c * y_c * log(max(p_c, 1e-12)).
/// `truth` may hold soft targets; `weight_map` defaults to 1 everywhere.
inline double weighted_cross_entropy(const ProbabilityGrid& truth, const ProbabilityGrid& predicted,
                                     const ClassWeights& weights, const WeightMap* weight_map = nullptr) {
    weights.validate();
    if (!truth.same_shape(predicted))
        throw ShapeError("truth is " + std::to_string(truth.rows) + "x" + std::to_string(truth.cols) + ", prediction is " +
                         std::to_string(predicted.rows) + "x" + std::to_string(predicted.cols));
    if (weight_map && !weight_map->same_shape(truth)) throw ShapeError("weight map shape does not match the grids");
    if (truth.size() == 0) return 0.0;
    const auto w = weights.as_array();
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!is_simplex(predicted[i], kSimplexTolerance))
            throw ValidationError("prediction at cell " + std::to_string(i) + " is not a probability simplex");
        const double m = weight_map ? (*weight_map)[i] : 1.0;
        if (!(m >= 0.0) || !std::isfinite(m)) throw ValidationError("weight map entries must be finite and non-negative");
        double cell = 0.0;
        for (std::size_t c = 0; c < kNumClasses; ++c)
            if (truth[i][c] != 0.0) cell += w[c] * truth[i][c] * std::log(std::max(predicted[i][c], kProbabilityFloor));
        total -= m * cell;
    }
    return total / static_cast<double>(truth.size());
}

inline double weighted_cross_entropy(const LabelGrid& truth, const ProbabilityGrid& predicted, const ClassWeights& weights,
                                     const WeightMap* weight_map = nullptr) {
    return weighted_cross_entropy(to_one_hot(truth), predicted, weights, weight_map);
}

// Training plan ------------------------------------------------------------------

enum class Sampling { AnimalOnly, FullDataset };

inline std::string to_string(Sampling s) { return s == Sampling::AnimalOnly ? "animal_only" : "full_dataset"; }

struct EpochPlan {
    int epoch = 1;
    Sampling sampling = Sampling::FullDataset;
    double learning_rate = 0.0;
    double weight_decay = 0.0;
    bool hard_negatives_enabled = false;
    double flip_probability = 0.0;
    double rotation_probability = 0.0;
    std::vector<int> rotation_angles;

    friend bool operator==(const EpochPlan&, const EpochPlan&) = default;
};

struct LearningRateStep {
    int first_epoch;
    double learning_rate;
};

struct ScheduleConfig {
    int curriculum_epochs = 5;
    int hard_negative_start = 80;
    int rotation_start = 301;
    std::vector<LearningRateStep> learning_rates{{1, 1e-4}, {6, 1e-5}, {11, 1e-6}, {111, 1e-7}};
    double weight_decay_curriculum = 1e-3;
    double weight_decay = 1e-4;
    double flip_probability = 0.5;
    double rotation_probability = 0.75;
    std::vector<int> rotation_angles{90, 180, 270};
    std::size_t hard_negatives_per_patch = 4;
    double hard_negative_factor = 0.25;
    ClassWeights class_weights{};
    std::string optimizer = "adam";
    double momentum = 0.9;
};

struct TrainingPlan {
    ScheduleConfig config;
    std::vector<EpochPlan> epochs;
};

inline TrainingPlan build_training_plan(int total_epochs = 400, const ScheduleConfig& config = {}) {
    if (total_epochs < 1) throw InputError("total_epochs must be at least 1");
    if (config.learning_rates.empty() || config.learning_rates.front().first_epoch != 1)
        throw InputError("learning-rate ladder must start at epoch 1");
    TrainingPlan plan{config, {}};
    plan.epochs.reserve(static_cast<std::size_t>(total_epochs));
    for (int e = 1; e <= total_epochs; ++e) {
        EpochPlan p;
        p.epoch = e;
        const bool curriculum = e <= config.curriculum_epochs;
        p.sampling = curriculum ? Sampling::AnimalOnly : Sampling::FullDataset;
        for (const auto& step : config.learning_rates)
            if (e >= step.first_epoch) p.learning_rate = step.learning_rate;
        p.weight_decay = curriculum ? config.weight_decay_curriculum : config.weight_decay;
        p.hard_negatives_enabled = e >= config.hard_negative_start;
        p.flip_probability = config.flip_probability;
        if (e >= config.rotation_start) {
            p.rotation_probability = config.rotation_probability;
            p.rotation_angles = config.rotation_angles;
        }
        plan.epochs.push_back(std::move(p));
    }
    return plan;
}

inline nlohmann::json to_json(const EpochPlan& p) {
    return {{"epoch", p.epoch},
            {"sampling", to_string(p.sampling)},
            {"learning_rate", p.learning_rate},
            {"weight_decay", p.weight_decay},
            {"hard_negatives_enabled", p.hard_negatives_enabled},
            {"flip_probability", p.flip_probability},
            {"rotation_probability", p.rotation_probability},
            {"rotation_angles", p.rotation_angles}};
}

inline nlohmann::json to_json(const TrainingPlan& plan) {
    const auto& c = plan.config;
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& p : plan.epochs) epochs.push_back(to_json(p));
    return {{"metadata",
             {{"optimizer", c.optimizer},
              {"momentum", c.momentum},
              {"class_weights", {{"animal", c.class_weights.animal},
                                 {"background", c.class_weights.background},
                                 {"border", c.class_weights.border}}},
              {"hard_negatives_per_patch", c.hard_negatives_per_patch},
              {"hard_negative_factor", c.hard_negative_factor},
              {"curriculum_epochs", c.curriculum_epochs},
              {"hard_negative_start", c.hard_negative_start},
              {"rotation_start", c.rotation_start}}},
            {"epochs", epochs}};
}

/// Text table with one row per run of epochs sharing the same settings.
inline std::string plan_table(const TrainingPlan& plan) {
    std::ostringstream out;
    out << "epochs     sampling      lr      wd      hard_neg  flip  rot   angles\n";
    std::size_t k = 0;
    while (k < plan.epochs.size()) {
        std::size_t j = k;
        auto same = [](EpochPlan a, EpochPlan b) {
            a.epoch = b.epoch;
            return a == b;
        };
        while (j + 1 < plan.epochs.size() && same(plan.epochs[j + 1], plan.epochs[k])) ++j;
        const auto& p = plan.epochs[k];
        std::string range = std::to_string(p.epoch) + "-" + std::to_string(plan.epochs[j].epoch);
        std::string angles;
        for (int a : p.rotation_angles) angles += (angles.empty() ? "" : ",") + std::to_string(a);
        char line[160];
        std::snprintf(line, sizeof line, "%-10s %-13s %-7.0e %-7.0e %-9s %-5.2f %-5.2f %s\n", range.c_str(),
                      to_string(p.sampling).c_str(), p.learning_rate, p.weight_decay,
                      p.hard_negatives_enabled ? "yes" : "no", p.flip_probability, p.rotation_probability,
                      angles.empty() ? "-" : angles.c_str());
        out << line;
        k = j + 1;
    }
    return out.str();
}

// Hard negatives -----------------------------------------------------------------

/// The k Background cells with the highest animal probability, highest first;
/// equal scores keep row-major order.
inline std::vector<std::size_t> select_hard_negatives(const LabelGrid& labels, const Grid<double>& animal_probability,
                                                      std::size_t k = 4) {
    if (!labels.same_shape(animal_probability)) throw ShapeError("label and score grids differ in shape");
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != ClassLabel::Background) continue;
        if (std::isnan(animal_probability[i])) throw ValidationError("NaN score at cell " + std::to_string(i));
        candidates.push_back(i);
    }
    const auto better = [&](std::size_t a, std::size_t b) {
        if (animal_probability[a] != animal_probability[b]) return animal_probability[a] > animal_probability[b];
        return a < b;
    };
    const auto take = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(), better);
    candidates.resize(take);
    return candidates;
}

inline std::vector<std::size_t> select_hard_negatives(const LabelGrid& labels, const ProbabilityGrid& predicted,
                                                      std::size_t k = 4) {
    Grid<double> animal(predicted.rows, predicted.cols);
    for (std::size_t i = 0; i < predicted.size(); ++i) animal[i] = predicted[i][class_index(ClassLabel::Animal)];
    return select_hard_negatives(labels, animal, k);
}

/// Gives each selected (background) cell an effective weight of
/// factor * w_animal. The map holds the per-cell multiplier m of the loss,
/// so the stored value is factor * w_animal / w_background.
inline WeightMap apply_hard_negative_weights(WeightMap map, const std::vector<std::size_t>& cells,
                                             const ClassWeights& weights, double factor = 0.25) {
    weights.validate();
    if (!(factor > 0.0) || !std::isfinite(factor)) throw InputError("hard-negative factor must be positive");
    for (auto i : cells) {
        if (i >= map.size()) throw InputError("cell index " + std::to_string(i) + " outside the weight map");
        map[i] = factor * weights.animal / weights.background;
    }
    return map;
}

/// Per-cell weight seen by the loss: m_cell * w_label.
inline Grid<double> effective_weights(const LabelGrid& labels, const ClassWeights& weights,
                                      const WeightMap* weight_map = nullptr) {
    if (weight_map && !weight_map->same_shape(labels)) throw ShapeError("weight map shape does not match the grid");
    Grid<double> out(labels.rows, labels.cols);
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = (weight_map ? (*weight_map)[i] : 1.0) * weights[labels[i]];
    return out;
}

// Augmentation ---------------------------------------------------------------------

enum class AugmentOp { FlipH, FlipV, Rot90, Rot180, Rot270 };

inline std::string to_string(AugmentOp op) {
    switch (op) {
    case AugmentOp::FlipH: return "flip_h";
    case AugmentOp::FlipV: return "flip_v";
    case AugmentOp::Rot90: return "rot90";
    case AugmentOp::Rot180: return "rot180";
    case AugmentOp::Rot270: return "rot270";
    }
    return "flip_h";
}

inline bool is_rotation(AugmentOp op) noexcept {
    return op == AugmentOp::Rot90 || op == AugmentOp::Rot180 || op == AugmentOp::Rot270;
}

/// Exact cell permutation. Rotations are clockwise and need a square grid;
/// FlipH mirrors columns, FlipV mirrors rows.
template <typename T>
Grid<T> augment_grid(const Grid<T>& in, AugmentOp op) {
    if (is_rotation(op) && in.rows != in.cols)
        throw ShapeError("rotation needs a square grid, got " + std::to_string(in.rows) + "x" + std::to_string(in.cols));
    const auto R = in.rows, C = in.cols;
    Grid<T> out(R, C);
    for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < C; ++c) {
            std::size_t rr = r, cc = c;
            switch (op) {
            case AugmentOp::FlipH: cc = C - 1 - c; break;
            case AugmentOp::FlipV: rr = R - 1 - r; break;
            case AugmentOp::Rot90: rr = c, cc = R - 1 - r; break;
            case AugmentOp::Rot180: rr = R - 1 - r, cc = C - 1 - c; break;
            case AugmentOp::Rot270: rr = C - 1 - c, cc = r; break;
            }
            out.at(rr, cc) = in.at(r, c);
        }
    }
    return out;
}

namespace detail {

inline double mirror(double v, double extent) {
    return std::min(extent - v, std::nextafter(extent, 0.0));
}

} // namespace detail

/// The same permutation on points of a width x height patch in pixel
/// coordinates; a point stays in the cell that its grid cell moves to.
template <typename PointLike>
std::vector<PointLike> augment_points(std::vector<PointLike> points, AugmentOp op, double width, double height) {
    if (is_rotation(op) && width != height) throw ShapeError("rotation needs a square patch");
    for (auto& p : points) {
        const double x = p.x, y = p.y;
        switch (op) {
        case AugmentOp::FlipH: p.x = detail::mirror(x, width); break;
        case AugmentOp::FlipV: p.y = detail::mirror(y, height); break;
        case AugmentOp::Rot90: p.x = detail::mirror(y, height), p.y = x; break;
        case AugmentOp::Rot180: p.x = detail::mirror(x, width), p.y = detail::mirror(y, height); break;
        case AugmentOp::Rot270: p.x = y, p.y = detail::mirror(x, width); break;
        }
    }
    return points;
}

/// Random operations for one sample under an epoch's settings: independent
/// horizontal and vertical flips, then at most one rotation.
inline std::vector<AugmentOp> draw_augmentations(const EpochPlan& plan, Rng& rng) {
    std::vector<AugmentOp> ops;
    if (uniform01(rng) < plan.flip_probability) ops.push_back(AugmentOp::FlipH);
    if (uniform01(rng) < plan.flip_probability) ops.push_back(AugmentOp::FlipV);
    if (!plan.rotation_angles.empty() && uniform01(rng) < plan.rotation_probability) {
        const auto pick = plan.rotation_angles[static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<std::int64_t>(plan.rotation_angles.size()) - 1))];
        if (pick == 90) ops.push_back(AugmentOp::Rot90);
        else if (pick == 180) ops.push_back(AugmentOp::Rot180);
        else if (pick == 270) ops.push_back(AugmentOp::Rot270);
        else throw InputError("rotation angle " + std::to_string(pick) + " is not a multiple of 90");
    }
    return ops;
}

} // namespace census
