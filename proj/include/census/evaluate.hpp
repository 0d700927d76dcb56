#pragma once

#include <census/fingerprint.hpp>
#include <census/grouping.hpp>
#include <census/matching.hpp>
#include <census/metrics.hpp>
#include <census/parallel.hpp>

#include <algorithm>
#include <span>
#include <string>
#include <vector>

namespace census {

/// Census matching of a whole dataset at one score threshold, with indices
/// into the caller's ground-truth and detection lists.
struct DatasetMatch {
    double threshold = 0.0;
    double radius = 0.0;
    std::size_t n_ground_truth = 0;
    std::size_t n_detections = 0;           // all detections, before thresholding
    std::string detections_fingerprint;
    std::vector<MatchedPair> pairs;         // ascending detection index
    std::vector<std::size_t> false_positives; // detection indices, ascending
    std::vector<std::size_t> false_negatives; // ground-truth indices, ascending
    OperatingPoint point;
};

inline DatasetMatch match_dataset(std::span<const GroundTruthPoint> ground_truth,
                                  std::span<const ScoredDetection> detections, const DistanceRange& range,
                                  double threshold = 0.0, std::span<const ImageMeta> images = {},
                                  const EvalOptions& options = {}) {
    const double t[] = {threshold};
    detail::check_thresholds(t);
    const auto groups = group_by_image(ground_truth, detections, images);
    std::vector<MatchReport> reports(groups.size());
    std::vector<std::vector<std::size_t>> kept(groups.size());
    parallel_for(groups.size(), options.threads, [&](std::size_t g) {
        const auto& group = groups[g];
        std::vector<ScoredDetection> surviving;
        for (std::size_t k = 0; k < group.detections.size(); ++k) {
            if (group.detections[k].score < threshold) continue;
            surviving.push_back(group.detections[k]);
            kept[g].push_back(group.detection_index[k]);
        }
        reports[g] = match_census(group.ground_truth, surviving, range);
    });

    DatasetMatch out;
    out.threshold = threshold;
    out.radius = range.radius();
    out.n_ground_truth = ground_truth.size();
    out.n_detections = detections.size();
    out.detections_fingerprint = fingerprint(detections);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (const auto& p : reports[g].pairs)
            out.pairs.push_back({kept[g][p.detection], groups[g].gt_index[p.ground_truth], p.distance});
        for (auto k : reports[g].false_positive_indices) out.false_positives.push_back(kept[g][k]);
        for (auto i : reports[g].false_negative_indices) out.false_negatives.push_back(groups[g].gt_index[i]);
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const MatchedPair& a, const MatchedPair& b) { return a.detection < b.detection; });
    std::sort(out.false_positives.begin(), out.false_positives.end());
    std::sort(out.false_negatives.begin(), out.false_negatives.end());
    out.point = make_operating_point(threshold, out.pairs.size(), out.false_positives.size(), out.false_negatives.size());
    return out;
}

} // namespace census
