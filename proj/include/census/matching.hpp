#pragma once

#include <census/assignment.hpp>
#include <census/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace census {

struct MatchedPair {
    std::size_t detection = 0;
    std::size_t ground_truth = 0;
    double distance = 0.0;

    friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

/// Outcome of the census protocol on one image. Indices refer to the
/// ground-truth and detection sequences the report was computed from.
struct MatchReport {
    std::string image_id;
    std::vector<MatchedPair> pairs;                 // ascending detection index
    std::vector<std::size_t> false_positive_indices; // ascending
    std::vector<std::size_t> false_negative_indices; // ascending
    std::vector<std::string> false_negative_ids;    // instance ids, same order

    std::size_t tp() const noexcept { return pairs.size(); }
    std::size_t fp() const noexcept { return false_positive_indices.size(); }
    std::size_t fn() const noexcept { return false_negative_indices.size(); }

    double total_distance() const noexcept {
        double sum = 0.0;
        for (const auto& p : pairs) sum += p.distance;
        return sum;
    }
};

namespace detail {

/// Shared precondition check; returns the common image id ("" if both empty).
inline std::string common_image_id(std::span<const GroundTruthPoint> gt,
                                   std::span<const ScoredDetection> dets) {
    std::string id;
    bool seen = false;
    auto check = [&](const std::string& other) {
        if (!seen) {
            id = other;
            seen = true;
        } else if (other != id) {
            throw InputError("match inputs mix image ids '" + id + "' and '" + other + "'");
        }
    };
    for (const auto& g : gt) check(g.image_id);
    for (const auto& d : dets) check(d.image_id);
    return id;
}

/// Preference among matchings with equal cardinality and total distance:
/// read as a sequence over detections in index order, each entry the matched
/// ground-truth index (unmatched ranks last), compared lexicographically. So
/// the lower detection index is served first, with the lower ground-truth index.
/// Entry value for detection matched to `gt`; unmatched is 0.
inline std::int64_t tie_value(std::size_t gt, std::size_t n_gt) noexcept {
    return static_cast<std::int64_t>(gt) - static_cast<std::int64_t>(n_gt) - 1;
}

// Distances enter the assignment as integer nanopixels so the optimisation is
// exact and permutation-invariant.
inline constexpr double kDistanceScale = 1e9;

/// Lexicographic cost (unmatched count, distance, tie sequence). Forms an
/// ordered abelian group; tie sequences are zero-extended.
struct LexCost {
    std::int64_t unmatched = 0;
    std::int64_t distance = 0;
    std::vector<std::int64_t> tie;

    static LexCost infinity() { return {std::int64_t{1} << 60, 0, {}}; }
    static LexCost forbidden() { return {std::int64_t{1} << 40, 0, {}}; }

    friend LexCost operator+(const LexCost& a, const LexCost& b) { return combine(a, b, 1); }
    friend LexCost operator-(const LexCost& a, const LexCost& b) { return combine(a, b, -1); }

    friend bool operator<(const LexCost& a, const LexCost& b) {
        if (a.unmatched != b.unmatched) return a.unmatched < b.unmatched;
        if (a.distance != b.distance) return a.distance < b.distance;
        const std::size_t n = std::max(a.tie.size(), b.tie.size());
        for (std::size_t k = 0; k < n; ++k) {
            const std::int64_t x = k < a.tie.size() ? a.tie[k] : 0;
            const std::int64_t y = k < b.tie.size() ? b.tie[k] : 0;
            if (x != y) return x < y;
        }
        return false;
    }

private:
    static LexCost combine(const LexCost& a, const LexCost& b, std::int64_t sign) {
        LexCost r{a.unmatched + sign * b.unmatched, a.distance + sign * b.distance, a.tie};
        if (r.tie.size() < b.tie.size()) r.tie.resize(b.tie.size(), 0);
        for (std::size_t k = 0; k < b.tie.size(); ++k) r.tie[k] += sign * b.tie[k];
        while (!r.tie.empty() && r.tie.back() == 0) r.tie.pop_back();
        return r;
    }
};

struct Edge {
    std::size_t gt;
    std::size_t det;
    double distance;
};

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

inline MatchReport finalize_report(std::string image_id, std::span<const GroundTruthPoint> gt,
                                   std::size_t n_dets, std::vector<MatchedPair> pairs) {
    MatchReport report;
    report.image_id = std::move(image_id);
    std::sort(pairs.begin(), pairs.end(),
              [](const MatchedPair& a, const MatchedPair& b) { return a.detection < b.detection; });
    std::vector<char> det_used(n_dets, 0), gt_used(gt.size(), 0);
    for (const auto& p : pairs) {
        det_used[p.detection] = 1;
        gt_used[p.ground_truth] = 1;
    }
    for (std::size_t j = 0; j < n_dets; ++j)
        if (!det_used[j]) report.false_positive_indices.push_back(j);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!gt_used[i]) {
            report.false_negative_indices.push_back(i);
            report.false_negative_ids.push_back(gt[i].instance_id);
        }
    }
    report.pairs = std::move(pairs);
    return report;
}

} // namespace detail

/// Census-oriented matching for one image.
///
/// A detection may match a ground truth only inside the closed disk of
/// `range.radius()`. The pairing is a maximum-cardinality matching of the
/// in-range bipartite graph; among those, total matched distance is minimal,
/// and remaining ties are settled lexicographically over detections: the lower
/// detection index is matched first, to the lower ground-truth index. Unmatched detections are false positives, unmatched
/// ground truths false negatives.
inline MatchReport match_census(std::span<const GroundTruthPoint> ground_truth,
                                std::span<const ScoredDetection> detections,
                                const DistanceRange& range) {
    using detail::LexCost;
    std::string image_id = detail::common_image_id(ground_truth, detections);

    const std::size_t n_gt = ground_truth.size();
    const std::size_t n_det = detections.size();

    std::vector<detail::Edge> edges;
    for (std::size_t i = 0; i < n_gt; ++i) {
        const Point g = ground_truth[i].position();
        for (std::size_t j = 0; j < n_det; ++j) {
            const double d = euclidean_distance(g, detections[j].position());
            if (d <= range.radius()) edges.push_back({i, j, d});
        }
    }

    // Components of the in-range graph are independent subproblems.
    detail::DisjointSets sets(n_gt + n_det);
    for (const auto& e : edges) sets.unite(e.gt, n_gt + e.det);

    std::vector<std::vector<std::size_t>> comp_gts(n_gt + n_det), comp_dets(n_gt + n_det);
    std::vector<std::vector<const detail::Edge*>> comp_edges(n_gt + n_det);
    for (const auto& e : edges) {
        const std::size_t root = sets.find(e.gt);
        comp_edges[root].push_back(&e);
    }
    for (std::size_t i = 0; i < n_gt; ++i) comp_gts[sets.find(i)].push_back(i);
    for (std::size_t j = 0; j < n_det; ++j) comp_dets[sets.find(n_gt + j)].push_back(j);

    std::vector<MatchedPair> pairs;
    for (std::size_t root = 0; root < n_gt + n_det; ++root) {
        if (comp_edges[root].empty()) continue;
        const auto& gts = comp_gts[root];
        const auto& dets = comp_dets[root];
        const std::size_t rows = gts.size();
        const std::size_t cols = dets.size() + rows; // one "unmatched" column per row

        std::vector<LexCost> table(rows * dets.size(), LexCost::forbidden());
        std::vector<double> dist(rows * dets.size(), 0.0);
        std::vector<char> allowed(rows * dets.size(), 0);
        auto local = [](const std::vector<std::size_t>& v, std::size_t x) {
            return static_cast<std::size_t>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
        };
        for (const detail::Edge* e : comp_edges[root]) {
            const std::size_t r = local(gts, e->gt);
            const std::size_t c = local(dets, e->det);
            LexCost cost{0, static_cast<std::int64_t>(std::llround(e->distance * detail::kDistanceScale)),
                         std::vector<std::int64_t>(c + 1, 0)};
            cost.tie[c] = detail::tie_value(e->gt, n_gt);
            table[r * dets.size() + c] = std::move(cost);
            dist[r * dets.size() + c] = e->distance;
            allowed[r * dets.size() + c] = 1;
        }

        const auto assignment = min_cost_assignment<LexCost>(
            rows, cols, [&](std::size_t r, std::size_t c) -> LexCost {
                if (c < dets.size()) return table[r * dets.size() + c];
                return {1, 0, {}};
            });

        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t c = assignment[r];
            if (c >= dets.size()) continue;
            if (!allowed[r * dets.size() + c]) continue;
            pairs.push_back({dets[c], gts[r], dist[r * dets.size() + c]});
        }
    }

    return detail::finalize_report(std::move(image_id), ground_truth, n_det, std::move(pairs));
}

} // namespace census
