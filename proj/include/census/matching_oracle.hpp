#pragma once

#include <census/matching.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace census {

inline constexpr std::size_t kOracleMaxPoints = 10;

/// Exhaustive reference for `match_census` on small instances.
///
/// Every detection either stays unmatched or takes one in-range ground truth
/// not yet taken; all such pairings are explored (memoised on the set of taken
/// ground truths). The winner maximises cardinality, then minimises total
/// distance, then applies the same lexicographic tie order `match_census` uses.
/// Distances stay in double precision here; totals within 1e-9 (relative)
/// count as equal.
inline MatchReport match_oracle(std::span<const GroundTruthPoint> ground_truth,
                                std::span<const ScoredDetection> detections,
                                const DistanceRange& range) {
    if (ground_truth.size() > kOracleMaxPoints || detections.size() > kOracleMaxPoints)
        throw SizeError("match_oracle supports at most " + std::to_string(kOracleMaxPoints) +
                        " ground truths and detections");
    std::string image_id = detail::common_image_id(ground_truth, detections);

    const std::size_t n_gt = ground_truth.size();
    const std::size_t n_det = detections.size();
    const std::size_t n_masks = std::size_t{1} << n_gt;

    struct Outcome {
        std::size_t matched = 0;
        double distance = 0.0;
        std::vector<std::int64_t> tie; // per detection from the current one on
        int choice = -1;               // ground truth taken by this detection, -1 = none

        bool better_than(const Outcome& o) const {
            if (matched != o.matched) return matched > o.matched;
            const double scale = 1.0 + std::max(distance, o.distance);
            if (std::abs(distance - o.distance) > 1e-9 * scale) return distance < o.distance;
            return tie < o.tie;
        }
    };

    std::vector<double> dist(n_det * n_gt);
    std::vector<char> in_range(n_det * n_gt);
    for (std::size_t j = 0; j < n_det; ++j) {
        for (std::size_t i = 0; i < n_gt; ++i) {
            dist[j * n_gt + i] = euclidean_distance(detections[j].position(), ground_truth[i].position());
            in_range[j * n_gt + i] = dist[j * n_gt + i] <= range.radius();
        }
    }

    // best[j][mask]: optimum over detections j.. given ground truths in `mask` are taken.
    std::vector<std::vector<std::optional<Outcome>>> best(n_det + 1,
                                                          std::vector<std::optional<Outcome>>(n_masks));
    auto solve = [&](auto&& self, std::size_t j, std::size_t mask) -> Outcome {
        if (j == n_det) return {};
        if (best[j][mask]) return *best[j][mask];
        Outcome result = self(self, j + 1, mask);
        result.choice = -1;
        result.tie.insert(result.tie.begin(), 0);
        for (std::size_t i = 0; i < n_gt; ++i) {
            if ((mask >> i) & 1U) continue;
            if (!in_range[j * n_gt + i]) continue;
            Outcome rest = self(self, j + 1, mask | (std::size_t{1} << i));
            Outcome cand{rest.matched + 1, rest.distance + dist[j * n_gt + i], std::move(rest.tie),
                         static_cast<int>(i)};
            cand.tie.insert(cand.tie.begin(), detail::tie_value(i, n_gt));
            if (cand.better_than(result)) result = cand;
        }
        best[j][mask] = result;
        return result;
    };
    solve(solve, 0, 0);

    std::vector<MatchedPair> pairs;
    std::size_t mask = 0;
    for (std::size_t j = 0; j < n_det; ++j) {
        const Outcome& o = *best[j][mask];
        if (o.choice >= 0) {
            const auto i = static_cast<std::size_t>(o.choice);
            pairs.push_back({j, i, dist[j * n_gt + i]});
            mask |= std::size_t{1} << i;
        }
    }
    return detail::finalize_report(std::move(image_id), ground_truth, n_det, std::move(pairs));
}

} // namespace census
