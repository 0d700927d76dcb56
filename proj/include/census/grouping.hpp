#pragma once

#include <census/core.hpp>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace census {

/// Points of one image together with their positions in the dataset-wide lists.
struct ImageGroup {
    std::string image_id;
    std::vector<GroundTruthPoint> ground_truth;
    std::vector<ScoredDetection> detections;
    std::vector<std::size_t> gt_index;        // dataset index of ground_truth[k]
    std::vector<std::size_t> detection_index; // dataset index of detections[k]
};

/// Groups by image id in canonical (sorted) order; relative order inside an
/// image is preserved. Images named in `images` appear even when empty.
inline std::vector<ImageGroup> group_by_image(std::span<const GroundTruthPoint> ground_truth,
                                              std::span<const ScoredDetection> detections,
                                              std::span<const ImageMeta> images = {}) {
    std::map<std::string, ImageGroup> by_id;
    auto slot = [&](const std::string& id) -> ImageGroup& {
        auto [it, inserted] = by_id.try_emplace(id);
        if (inserted) it->second.image_id = id;
        return it->second;
    };
    for (const auto& img : images) slot(img.image_id);
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        auto& g = slot(ground_truth[i].image_id);
        g.ground_truth.push_back(ground_truth[i]);
        g.gt_index.push_back(i);
    }
    for (std::size_t j = 0; j < detections.size(); ++j) {
        auto& g = slot(detections[j].image_id);
        g.detections.push_back(detections[j]);
        g.detection_index.push_back(j);
    }
    std::vector<ImageGroup> out;
    out.reserve(by_id.size());
    for (auto& [id, group] : by_id) out.push_back(std::move(group));
    return out;
}

} // namespace census
