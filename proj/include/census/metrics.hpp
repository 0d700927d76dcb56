#pragma once

#include <census/core.hpp>
#include <census/grouping.hpp>
#include <census/matching.hpp>
#include <census/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace census {

struct Rates {
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 0.0;
    bool precision_degenerate = false; // tp + fp == 0, precision defaulted to 1
    bool recall_degenerate = false;    // tp + fn == 0, recall defaulted to 1
};

/// Precision, recall and F1 from (possibly averaged) counts.
inline Rates compute_rates(double tp, double fp, double fn) noexcept {
    Rates r;
    if (tp + fp > 0.0) r.precision = tp / (tp + fp);
    else r.precision_degenerate = true;
    if (tp + fn > 0.0) r.recall = tp / (tp + fn);
    else r.recall_degenerate = true;
    const double sum = r.precision + r.recall;
    r.f1 = sum > 0.0 ? 2.0 * r.precision * r.recall / sum : 0.0;
    return r;
}

struct OperatingPoint {
    double threshold = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 1.0;
    double recall = 1.0;
    double f1 = 0.0;
    bool precision_degenerate = false;
    bool recall_degenerate = false;

    bool degenerate() const noexcept { return precision_degenerate || recall_degenerate; }
};

inline OperatingPoint make_operating_point(double threshold, std::size_t tp, std::size_t fp, std::size_t fn) {
    const Rates r = compute_rates(static_cast<double>(tp), static_cast<double>(fp), static_cast<double>(fn));
    return {threshold, tp, fp, fn, r.precision, r.recall, r.f1, r.precision_degenerate, r.recall_degenerate};
}

struct PrCurve {
    double radius = 0.0;
    std::vector<OperatingPoint> points; // ascending threshold
    bool degenerate = false;            // no ground truth anywhere: recall undefined
};

struct EvalOptions {
    unsigned threads = 1;
};

/// Every distinct score, ascending. Evaluating at these gives the exact curve.
inline std::vector<double> distinct_score_thresholds(std::span<const ScoredDetection> detections) {
    std::set<double> s;
    for (const auto& d : detections) s.insert(d.score);
    return {s.begin(), s.end()};
}

/// n+1 evenly spaced thresholds 0, 1/n, ..., 1 for plotting.
inline std::vector<double> uniform_thresholds(std::size_t n) {
    if (n == 0) throw InputError("uniform threshold grid needs at least one interval");
    std::vector<double> t(n + 1);
    for (std::size_t k = 0; k <= n; ++k) t[k] = static_cast<double>(k) / static_cast<double>(n);
    return t;
}

inline const std::vector<double>& default_sweep_radii() {
    static const std::vector<double> radii{10.0, 25.0, 50.0, 100.0, 200.0};
    return radii;
}

namespace detail {

inline void check_thresholds(std::span<const double> thresholds) {
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        if (!(thresholds[k] >= 0.0 && thresholds[k] <= 1.0))
            throw InputError("score thresholds must lie in [0,1]");
        if (k > 0 && thresholds[k] < thresholds[k - 1])
            throw InputError("score thresholds must be sorted ascending");
    }
}

/// True-positive count of one image as a function of how many of its
/// top-scoring detections survive. TP only depends on the size of a maximum
/// matching, so detections are added in descending score order and each
/// addition tries a single augmenting path.
class ImageTpProfile {
public:
    ImageTpProfile(const ImageGroup& group, const DistanceRange& range) {
        const auto& dets = group.detections;
        const auto& gt = group.ground_truth;
        std::vector<std::size_t> order(dets.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
        scores_desc_.reserve(order.size());
        for (auto k : order) scores_desc_.push_back(dets[k].score);
        n_gt_ = gt.size();

        std::vector<std::vector<std::size_t>> adjacency(order.size());
        for (std::size_t k = 0; k < order.size(); ++k)
            for (std::size_t i = 0; i < gt.size(); ++i)
                if (range.contains(gt[i].position(), dets[order[k]].position())) adjacency[k].push_back(i);

        constexpr std::size_t none = static_cast<std::size_t>(-1);
        std::vector<std::size_t> owner(gt.size(), none);
        std::vector<std::size_t> visit_stamp(gt.size(), 0);
        std::size_t stamp = 0;
        std::function<bool(std::size_t)> augment = [&](std::size_t det) {
            for (std::size_t i : adjacency[det]) {
                if (visit_stamp[i] == stamp) continue;
                visit_stamp[i] = stamp;
                if (owner[i] == none || augment(owner[i])) {
                    owner[i] = det;
                    return true;
                }
            }
            return false;
        };
        tp_after_.assign(order.size() + 1, 0);
        std::size_t tp = 0;
        for (std::size_t k = 0; k < order.size(); ++k) {
            ++stamp;
            if (tp < n_gt_ && augment(k)) ++tp;
            tp_after_[k + 1] = tp;
        }
    }

    std::size_t surviving(double threshold) const {
        // scores_desc_ is descending; count entries >= threshold
        return static_cast<std::size_t>(
            std::partition_point(scores_desc_.begin(), scores_desc_.end(),
                                 [&](double s) { return s >= threshold; }) -
            scores_desc_.begin());
    }

    std::size_t tp_at(double threshold) const { return tp_after_[surviving(threshold)]; }
    std::size_t n_gt() const noexcept { return n_gt_; }

private:
    std::vector<double> scores_desc_;
    std::vector<std::size_t> tp_after_;
    std::size_t n_gt_ = 0;
};

inline std::vector<ImageTpProfile> build_profiles(const std::vector<ImageGroup>& groups,
                                                  const DistanceRange& range, const EvalOptions& options) {
    std::vector<std::optional<ImageTpProfile>> slots(groups.size());
    parallel_for(groups.size(), options.threads,
                 [&](std::size_t g) { slots[g].emplace(groups[g], range); });
    std::vector<ImageTpProfile> out;
    out.reserve(groups.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

} // namespace detail

/// Dataset precision-recall curve under the census protocol. A detection
/// survives threshold t when score >= t; counts are summed over images.
inline PrCurve pr_curve(std::span<const GroundTruthPoint> ground_truth,
                        std::span<const ScoredDetection> detections, const DistanceRange& range,
                        std::span<const double> thresholds, const EvalOptions& options = {}) {
    detail::check_thresholds(thresholds);
    const auto profiles = detail::build_profiles(group_by_image(ground_truth, detections), range, options);

    PrCurve curve;
    curve.radius = range.radius();
    curve.degenerate = ground_truth.empty();
    for (double t : thresholds) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (const auto& p : profiles) {
            const std::size_t survivors = p.surviving(t);
            const std::size_t hits = p.tp_at(t);
            tp += hits;
            fp += survivors - hits;
            fn += p.n_gt() - hits;
        }
        curve.points.push_back(make_operating_point(t, tp, fp, fn));
    }
    return curve;
}

inline PrCurve pr_curve(std::span<const GroundTruthPoint> ground_truth,
                        std::span<const ScoredDetection> detections, const DistanceRange& range,
                        const EvalOptions& options = {}) {
    const auto thresholds = distinct_score_thresholds(detections);
    return pr_curve(ground_truth, detections, range, thresholds, options);
}

/// One curve per radius, keyed by radius.
inline std::map<double, PrCurve> sweep_distance_thresholds(std::span<const GroundTruthPoint> ground_truth,
                                                           std::span<const ScoredDetection> detections,
                                                           std::span<const double> radii,
                                                           std::span<const double> thresholds,
                                                           const EvalOptions& options = {}) {
    std::map<double, PrCurve> out;
    for (double r : radii) out.emplace(r, pr_curve(ground_truth, detections, DistanceRange(r), thresholds, options));
    return out;
}

/// Highest-threshold operating point whose recall reaches `target`, or null.
inline const OperatingPoint* point_at_recall(const PrCurve& curve, double target) {
    for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it)
        if (!it->recall_degenerate && it->recall >= target) return &*it;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Tile-based screening effort

class TileGridSpec {
public:
    TileGridSpec(std::int64_t tile_width = 1000, std::int64_t tile_height = 1000)
        : width_(tile_width), height_(tile_height) {
        if (tile_width <= 0 || tile_height <= 0) throw InputError("tile dimensions must be positive");
    }

    std::int64_t tile_width() const noexcept { return width_; }
    std::int64_t tile_height() const noexcept { return height_; }

    /// Partial edge tiles count as whole tiles.
    std::int64_t tiles_x(const ImageMeta& img) const noexcept { return (img.width + width_ - 1) / width_; }
    std::int64_t tiles_y(const ImageMeta& img) const noexcept { return (img.height + height_ - 1) / height_; }
    std::int64_t tiles_in(const ImageMeta& img) const noexcept { return tiles_x(img) * tiles_y(img); }

    /// Row-major tile index of a pixel position inside `img`.
    std::int64_t tile_of(const ImageMeta& img, Point p) const noexcept {
        const auto tx = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(p.x / static_cast<double>(width_))), 0, tiles_x(img) - 1);
        const auto ty = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(p.y / static_cast<double>(height_))), 0, tiles_y(img) - 1);
        return ty * tiles_x(img) + tx;
    }

private:
    std::int64_t width_;
    std::int64_t height_;
};

struct TileReport {
    std::size_t tiles_total = 0;
    std::size_t tiles_with_gt = 0;
    std::size_t tiles_with_detections = 0;
    std::size_t tile_tp = 0; // tiles with both ground truth and a surviving detection
    std::size_t tile_fp = 0; // tiles with detections only
    std::size_t tile_fn = 0; // tiles with ground truth only

    Rates rates() const noexcept {
        return compute_rates(static_cast<double>(tile_tp), static_cast<double>(tile_fp), static_cast<double>(tile_fn));
    }
};

struct ScreeningPoint {
    double threshold = 0.0;
    double animal_recall = 1.0;
    std::size_t tiles_with_detections = 0;
    double tile_recall = 1.0;
};

namespace detail {

/// Per tile: does it hold ground truth, and the best detection score in it.
struct TileOccupancy {
    std::vector<char> has_gt;
    std::vector<double> best_score; // -1 when the tile has no detection
    std::size_t tiles_total = 0;
    std::size_t tiles_with_gt = 0;
};

inline TileOccupancy tile_occupancy(std::span<const GroundTruthPoint> ground_truth,
                                    std::span<const ScoredDetection> detections,
                                    std::span<const ImageMeta> images, const TileGridSpec& spec) {
    std::map<std::string, std::pair<const ImageMeta*, std::size_t>> offset;
    TileOccupancy occ;
    for (const auto& img : images) {
        img.validate();
        if (!offset.try_emplace(img.image_id, &img, occ.tiles_total).second)
            throw InputError("duplicate image id '" + img.image_id + "'");
        occ.tiles_total += static_cast<std::size_t>(spec.tiles_in(img));
    }
    occ.has_gt.assign(occ.tiles_total, 0);
    occ.best_score.assign(occ.tiles_total, -1.0);
    auto locate = [&](const std::string& id, Point p) {
        auto it = offset.find(id);
        if (it == offset.end()) throw InputError("point references unknown image '" + id + "'");
        return it->second.second + static_cast<std::size_t>(spec.tile_of(*it->second.first, p));
    };
    for (const auto& g : ground_truth) occ.has_gt[locate(g.image_id, g.position())] = 1;
    for (const auto& d : detections) {
        auto& best = occ.best_score[locate(d.image_id, d.position())];
        best = std::max(best, d.score);
    }
    for (char c : occ.has_gt) occ.tiles_with_gt += c ? 1 : 0;
    return occ;
}

inline TileReport tile_report_at(const TileOccupancy& occ, double threshold) {
    TileReport r;
    r.tiles_total = occ.tiles_total;
    r.tiles_with_gt = occ.tiles_with_gt;
    for (std::size_t t = 0; t < occ.tiles_total; ++t) {
        const bool det = occ.best_score[t] >= 0.0 && occ.best_score[t] >= threshold;
        const bool gt = occ.has_gt[t] != 0;
        r.tiles_with_detections += det;
        r.tile_tp += det && gt;
        r.tile_fp += det && !gt;
        r.tile_fn += !det && gt;
    }
    return r;
}

} // namespace detail

/// Screening effort for an operator inspecting fixed-size tiles: which tiles
/// contain surviving detections (score >= threshold) and ground truth.
inline TileReport tile_report(std::span<const GroundTruthPoint> ground_truth,
                              std::span<const ScoredDetection> detections,
                              std::span<const ImageMeta> images, const TileGridSpec& spec, double threshold) {
    return detail::tile_report_at(detail::tile_occupancy(ground_truth, detections, images, spec), threshold);
}

/// Pairs instance-level recall with the number of tiles to screen, per threshold.
inline std::vector<ScreeningPoint> screening_effort_curve(std::span<const GroundTruthPoint> ground_truth,
                                                          std::span<const ScoredDetection> detections,
                                                          std::span<const ImageMeta> images,
                                                          const TileGridSpec& spec,
                                                          std::span<const double> thresholds,
                                                          const DistanceRange& range = DistanceRange(50.0),
                                                          const EvalOptions& options = {}) {
    const auto curve = pr_curve(ground_truth, detections, range, thresholds, options);
    const auto occ = detail::tile_occupancy(ground_truth, detections, images, spec);
    std::vector<ScreeningPoint> out;
    out.reserve(thresholds.size());
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        const TileReport tiles = detail::tile_report_at(occ, thresholds[k]);
        out.push_back({thresholds[k], curve.points[k].recall, tiles.tiles_with_detections, tiles.rates().recall});
    }
    return out;
}

// ---------------------------------------------------------------------------

struct DetectionCountStats {
    std::map<std::string, std::size_t> per_image; // canonical image order
    std::size_t min = 0;
    std::size_t max = 0;
    std::size_t images_without_detections = 0;
    std::map<std::size_t, std::size_t> histogram; // detections per image -> number of images
};

/// Surviving detections per image. Images listed in `images` without any
/// detection count as zero.
inline DetectionCountStats per_image_detection_stats(std::span<const ScoredDetection> detections,
                                                     double threshold,
                                                     std::span<const ImageMeta> images = {}) {
    DetectionCountStats s;
    for (const auto& img : images) s.per_image.try_emplace(img.image_id, 0);
    for (const auto& d : detections) {
        auto& c = s.per_image[d.image_id];
        if (d.score >= threshold) ++c;
    }
    bool first = true;
    for (const auto& [id, c] : s.per_image) {
        s.min = first ? c : std::min(s.min, c);
        s.max = first ? c : std::max(s.max, c);
        first = false;
        ++s.histogram[c];
        if (c == 0) ++s.images_without_detections;
    }
    return s;
}

} // namespace census
