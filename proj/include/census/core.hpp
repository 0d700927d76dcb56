#pragma once

#include <census/error.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

namespace census {

// Pixel coordinates: origin at the top-left corner, x = column, y = row.

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline double euclidean_distance(Point a, Point b) noexcept {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct ImageMeta {
    std::string image_id;
    std::int64_t width = 0;
    std::int64_t height = 0;
    bool has_animals = false;

    friend bool operator==(const ImageMeta&, const ImageMeta&) = default;

    bool contains(Point p) const noexcept {
        return p.x >= 0.0 && p.y >= 0.0 && p.x < static_cast<double>(width) &&
               p.y < static_cast<double>(height);
    }

    void validate() const {
        if (image_id.empty()) throw ValidationError("image_id must not be empty");
        if (width <= 0 || height <= 0)
            throw ValidationError("image '" + image_id + "' must have positive width and height");
    }
};

struct GroundTruthPoint {
    std::string image_id;
    double x = 0.0;
    double y = 0.0;
    std::string instance_id;

    Point position() const noexcept { return {x, y}; }

    friend bool operator==(const GroundTruthPoint&, const GroundTruthPoint&) = default;
};

struct ScoredDetection {
    std::string image_id;
    double x = 0.0;
    double y = 0.0;
    double score = 0.0;

    Point position() const noexcept { return {x, y}; }

    friend bool operator==(const ScoredDetection&, const ScoredDetection&) = default;
};

inline bool valid_score(double s) noexcept { return s >= 0.0 && s <= 1.0; }

/// Closed circular matching range around a ground-truth center.
class DistanceRange {
public:
    explicit DistanceRange(double radius) : radius_(radius) {
        if (!(radius > 0.0) || !std::isfinite(radius))
            throw InputError("distance range radius must be a positive finite number");
    }

    double radius() const noexcept { return radius_; }

    /// Inclusive at the boundary.
    bool contains(Point center, Point p) const noexcept {
        return euclidean_distance(center, p) <= radius_;
    }

private:
    double radius_;
};

enum class ClassLabel : std::uint8_t { Background = 0, Animal = 1, Border = 2 };

inline constexpr std::size_t kNumClasses = 3;

inline constexpr std::size_t class_index(ClassLabel c) noexcept {
    return static_cast<std::size_t>(c);
}

inline constexpr std::string_view to_string(ClassLabel c) noexcept {
    switch (c) {
    case ClassLabel::Background: return "background";
    case ClassLabel::Animal: return "animal";
    case ClassLabel::Border: return "border";
    }
    return "background";
}

inline void validate_detection(const ScoredDetection& d, const ImageMeta& image) {
    if (!valid_score(d.score))
        throw ValidationError("detection score " + std::to_string(d.score) + " in image '" +
                              d.image_id + "' is outside [0,1]");
    if (!image.contains(d.position()))
        throw ValidationError("detection (" + std::to_string(d.x) + "," + std::to_string(d.y) +
                              ") lies outside image '" + image.image_id + "'");
}

inline void validate_point(const GroundTruthPoint& g, const ImageMeta& image) {
    if (!image.contains(g.position()))
        throw ValidationError("ground truth '" + g.instance_id + "' (" + std::to_string(g.x) +
                              "," + std::to_string(g.y) + ") lies outside image '" +
                              image.image_id + "'");
}

} // namespace census
