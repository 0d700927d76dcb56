#pragma once

#include <census/core.hpp>
#include <census/error.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace census {

/// Dense row-major 2-D array.
template <typename T>
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> cells;

    Grid() = default;
    Grid(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), cells(r * c, fill) {}

    std::size_t size() const noexcept { return cells.size(); }
    std::size_t index(std::size_t r, std::size_t c) const noexcept { return r * cols + c; }
    T& at(std::size_t r, std::size_t c) { return cells[index(r, c)]; }
    const T& at(std::size_t r, std::size_t c) const { return cells[index(r, c)]; }
    T& operator[](std::size_t i) { return cells[i]; }
    const T& operator[](std::size_t i) const { return cells[i]; }

    bool same_shape(const auto& other) const noexcept { return rows == other.rows && cols == other.cols; }

    friend bool operator==(const Grid&, const Grid&) = default;
};

using LabelGrid = Grid<ClassLabel>;
using Probabilities = std::array<double, kNumClasses>;
using ProbabilityGrid = Grid<Probabilities>;
using WeightMap = Grid<double>;

inline Probabilities one_hot(ClassLabel c) {
    Probabilities p{};
    p[class_index(c)] = 1.0;
    return p;
}

inline ProbabilityGrid to_one_hot(const LabelGrid& labels) {
    ProbabilityGrid out(labels.rows, labels.cols);
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = one_hot(labels[i]);
    return out;
}

/// Lowest class index wins ties.
inline ClassLabel argmax(const Probabilities& p) noexcept {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c)
        if (p[c] > p[best]) best = c;
    return static_cast<ClassLabel>(best);
}

inline bool is_simplex(const Probabilities& p, double tolerance) noexcept {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tolerance;
}

inline std::array<std::size_t, kNumClasses> class_histogram(const LabelGrid& g) {
    std::array<std::size_t, kNumClasses> h{};
    for (auto c : g.cells) ++h[class_index(c)];
    return h;
}

} // namespace census
