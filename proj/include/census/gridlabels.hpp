#pragma once

#include <census/core.hpp>
#include <census/grid.hpp>
#include <census/random.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace census {

struct GridGeometry {
    std::int64_t patch_size = 512;
    std::int64_t grid_size = 32;

    std::int64_t stride() const noexcept { return patch_size / grid_size; }

    void validate() const {
        if (patch_size <= 0 || grid_size <= 0) throw ShapeError("patch and grid sizes must be positive");
        if (patch_size % grid_size != 0)
            throw ShapeError("patch size " + std::to_string(patch_size) + " is not divisible by grid size " +
                             std::to_string(grid_size));
    }
};

struct PatchOrigin {
    std::int64_t x = 0;
    std::int64_t y = 0;
    friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

struct PatchLayout {
    std::int64_t image_width = 0;
    std::int64_t image_height = 0;
    std::int64_t patches_x = 0;
    std::int64_t patches_y = 0;
    std::vector<PatchOrigin> origins; // row-major: y outer, x inner
};

namespace detail {

inline std::int64_t cell_of(double coord, std::int64_t origin, std::int64_t stride) {
    return static_cast<std::int64_t>(std::floor((coord - static_cast<double>(origin)) / static_cast<double>(stride)));
}

inline void stamp(LabelGrid& grid, std::int64_t r, std::int64_t c) {
    const auto rows = static_cast<std::int64_t>(grid.rows);
    const auto cols = static_cast<std::int64_t>(grid.cols);
    if (r < 0 || c < 0 || r >= rows || c >= cols) return;
    grid.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = ClassLabel::Animal;
    for (std::int64_t dr = -1; dr <= 1; ++dr) {
        for (std::int64_t dc = -1; dc <= 1; ++dc) {
            const auto rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
            auto& cell = grid.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
            if (cell != ClassLabel::Animal) cell = ClassLabel::Border;
        }
    }
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

inline std::vector<std::int64_t> spread_origins(std::int64_t extent, std::int64_t patch, std::int64_t n,
                                                const char* axis) {
    if (n < 1) throw CoverageError(std::string("need at least one patch along ") + axis);
    if (n * patch < extent)
        throw CoverageError(std::to_string(n) + " patches of " + std::to_string(patch) + " px cannot cover " +
                            std::to_string(extent) + " px along " + axis);
    std::vector<std::int64_t> out(static_cast<std::size_t>(n), 0);
    if (n == 1 || extent <= patch) return out;
    for (std::int64_t i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(
            std::llround(static_cast<double>(i) * static_cast<double>(extent - patch) / static_cast<double>(n - 1)));
    return out;
}

} // namespace detail

/// Label grid of `rows` x `cols` cells whose cell (0,0) starts at `origin`.
/// Animal cells win over Border cells; points outside the grid are ignored.
inline LabelGrid make_label_grid(std::span<const GroundTruthPoint> points, PatchOrigin origin, const GridGeometry& geometry,
                                 std::size_t rows, std::size_t cols) {
    geometry.validate();
    LabelGrid grid(rows, cols, ClassLabel::Background);
    const auto s = geometry.stride();
    // Animals first, then rings, so the outcome does not depend on point order.
    std::vector<std::pair<std::int64_t, std::int64_t>> centers;
    for (const auto& p : points) {
        if (p.x < static_cast<double>(origin.x) || p.y < static_cast<double>(origin.y)) continue;
        const auto r = detail::cell_of(p.y, origin.y, s);
        const auto c = detail::cell_of(p.x, origin.x, s);
        if (r >= static_cast<std::int64_t>(rows) || c >= static_cast<std::int64_t>(cols)) continue;
        centers.emplace_back(r, c);
    }
    for (auto [r, c] : centers) detail::stamp(grid, r, c);
    return grid;
}

/// Patch-sized label grid (grid_size x grid_size).
inline LabelGrid make_label_grid(std::span<const GroundTruthPoint> points, PatchOrigin origin,
                                 const GridGeometry& geometry = {}) {
    geometry.validate();
    const auto n = static_cast<std::size_t>(geometry.grid_size);
    return make_label_grid(points, origin, geometry, n, n);
}

/// Rows and columns of a whole-image grid at the geometry's stride.
inline std::pair<std::size_t, std::size_t> image_grid_shape(const ImageMeta& image, const GridGeometry& geometry) {
    geometry.validate();
    return {static_cast<std::size_t>(detail::ceil_div(image.height, geometry.stride())),
            static_cast<std::size_t>(detail::ceil_div(image.width, geometry.stride()))};
}

inline LabelGrid make_image_label_grid(std::span<const GroundTruthPoint> points, const ImageMeta& image,
                                       const GridGeometry& geometry = {}) {
    const auto [rows, cols] = image_grid_shape(image, geometry);
    return make_label_grid(points, {0, 0}, geometry, rows, cols);
}

/// Evenly spread, overlapping patch origins covering the whole image.
inline PatchLayout plan_patch_layout(const ImageMeta& image, const GridGeometry& geometry, std::int64_t patches_x,
                                     std::int64_t patches_y) {
    geometry.validate();
    image.validate();
    const auto xs = detail::spread_origins(image.width, geometry.patch_size, patches_x, "x");
    const auto ys = detail::spread_origins(image.height, geometry.patch_size, patches_y, "y");
    PatchLayout layout{image.width, image.height, patches_x, patches_y, {}};
    for (auto y : ys)
        for (auto x : xs) layout.origins.push_back({x, y});
    return layout;
}

/// Smallest patch count per axis that covers the image.
inline PatchLayout plan_patch_layout(const ImageMeta& image, const GridGeometry& geometry = {}) {
    geometry.validate();
    return plan_patch_layout(image, geometry, std::max<std::int64_t>(1, detail::ceil_div(image.width, geometry.patch_size)),
                             std::max<std::int64_t>(1, detail::ceil_div(image.height, geometry.patch_size)));
}

/// Averages per-patch probability grids into one whole-image grid of
/// ceil(H/stride) x ceil(W/stride) cells. Each output cell is sampled at its
/// centre pixel (clamped into the image) and takes the mean over every patch
/// containing that pixel.
inline ProbabilityGrid stitch_probability_grids(std::span<const ProbabilityGrid> patches, const PatchLayout& layout,
                                                const GridGeometry& geometry = {}) {
    geometry.validate();
    if (patches.size() != layout.origins.size())
        throw ShapeError("expected " + std::to_string(layout.origins.size()) + " patch grids, got " +
                         std::to_string(patches.size()));
    const auto n = static_cast<std::size_t>(geometry.grid_size);
    for (std::size_t k = 0; k < patches.size(); ++k)
        if (patches[k].rows != n || patches[k].cols != n)
            throw ShapeError("patch grid " + std::to_string(k) + " is " + std::to_string(patches[k].rows) + "x" +
                             std::to_string(patches[k].cols) + ", expected " + std::to_string(n) + "x" +
                             std::to_string(n));
    const auto s = geometry.stride();
    const auto P = geometry.patch_size;
    const auto rows = static_cast<std::size_t>(detail::ceil_div(layout.image_height, s));
    const auto cols = static_cast<std::size_t>(detail::ceil_div(layout.image_width, s));
    ProbabilityGrid out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto py = std::min(static_cast<std::int64_t>(r) * s + s / 2, layout.image_height - 1);
        for (std::size_t c = 0; c < cols; ++c) {
            const auto px = std::min(static_cast<std::int64_t>(c) * s + s / 2, layout.image_width - 1);
            Probabilities sum{};
            std::size_t count = 0;
            for (std::size_t k = 0; k < patches.size(); ++k) {
                const auto o = layout.origins[k];
                if (px < o.x || py < o.y || px >= o.x + P || py >= o.y + P) continue;
                const auto& cell = patches[k].at(static_cast<std::size_t>((py - o.y) / s),
                                                 static_cast<std::size_t>((px - o.x) / s));
                for (std::size_t q = 0; q < kNumClasses; ++q) sum[q] += cell[q];
                ++count;
            }
            if (count == 0) throw CoverageError("cell (" + std::to_string(r) + "," + std::to_string(c) + ") is not covered");
            for (auto& v : sum) v /= static_cast<double>(count);
            out.at(r, c) = sum;
        }
    }
    return out;
}

/// One detection per Animal-argmax cell at the centre of the cell's visible
/// part, scored with the animal probability. `origin` places the grid in the image.
inline std::vector<ScoredDetection> grid_to_detections(const ProbabilityGrid& grid, const GridGeometry& geometry,
                                                       const ImageMeta& image, PatchOrigin origin = {}) {
    geometry.validate();
    const auto s = geometry.stride();
    std::vector<ScoredDetection> out;
    for (std::size_t r = 0; r < grid.rows; ++r) {
        for (std::size_t c = 0; c < grid.cols; ++c) {
            const auto& p = grid.at(r, c);
            if (argmax(p) != ClassLabel::Animal) continue;
            const auto x0 = origin.x + static_cast<std::int64_t>(c) * s;
            const auto y0 = origin.y + static_cast<std::int64_t>(r) * s;
            if (x0 >= image.width || y0 >= image.height) continue;
            const auto x1 = std::min(x0 + s, image.width);
            const auto y1 = std::min(y0 + s, image.height);
            const double score = std::clamp(p[class_index(ClassLabel::Animal)], 0.0, 1.0);
            out.push_back({image.image_id, 0.5 * static_cast<double>(x0 + x1), 0.5 * static_cast<double>(y0 + y1), score});
        }
    }
    return out;
}

/// Patch origin for training crops. With animals present, one is chosen
/// uniformly and the origin is drawn uniformly among placements containing it.
inline PatchOrigin crop_semirandom_patch(const ImageMeta& image, std::span<const GroundTruthPoint> points,
                                         const GridGeometry& geometry, Rng& rng) {
    geometry.validate();
    const auto P = geometry.patch_size;
    if (image.width < P || image.height < P)
        throw SizeError("image '" + image.image_id + "' (" + std::to_string(image.width) + "x" +
                        std::to_string(image.height) + ") is smaller than the " + std::to_string(P) + " px patch");
    const auto max_x = image.width - P;
    const auto max_y = image.height - P;
    if (points.empty()) return {uniform_int(rng, 0, max_x), uniform_int(rng, 0, max_y)};
    const auto& anchor = points[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(points.size()) - 1))];
    if (!image.contains(anchor.position()))
        throw InputError("animal '" + anchor.instance_id + "' lies outside image '" + image.image_id + "'");
    const auto fx = static_cast<std::int64_t>(std::floor(anchor.x));
    const auto fy = static_cast<std::int64_t>(std::floor(anchor.y));
    return {uniform_int(rng, std::max<std::int64_t>(0, fx - P + 1), std::min(fx, max_x)),
            uniform_int(rng, std::max<std::int64_t>(0, fy - P + 1), std::min(fy, max_y))};
}

} // namespace census
