#pragma once

#include <census/csv.hpp>
#include <census/gridlabels.hpp>

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>

// Binary grid container, little-endian throughout (see docs/grid_format.md):
//   0  char[4]  "CGRD"
//   4  u32      version (1)
//   8  u32      rows
//  12  u32      cols
//  16  u32      classes
//  20  f32[rows*cols*classes]  row-major, class index fastest

namespace census {

inline constexpr char kGridMagic[4] = {'C', 'G', 'R', 'D'};
inline constexpr std::uint32_t kGridVersion = 1;
inline constexpr std::size_t kGridHeaderBytes = 20;

enum class GridKind { Label, Probability };

struct GridSidecar {
    GridKind kind = GridKind::Probability;
    GridGeometry geometry;
    PatchOrigin origin;
    std::string image_id;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFU));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
    return v;
}

} // namespace detail

inline std::string encode_grid(const ProbabilityGrid& grid) {
    std::string out(kGridMagic, 4);
    detail::put_u32(out, kGridVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(grid.rows));
    detail::put_u32(out, static_cast<std::uint32_t>(grid.cols));
    detail::put_u32(out, static_cast<std::uint32_t>(kNumClasses));
    out.reserve(out.size() + grid.size() * kNumClasses * 4);
    for (const auto& cell : grid.cells)
        for (double v : cell) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    return out;
}

inline ProbabilityGrid decode_grid(std::string_view bytes, const std::string& source = "grid") {
    if (bytes.size() < kGridHeaderBytes || std::memcmp(bytes.data(), kGridMagic, 4) != 0)
        throw ValidationError(source + ": not a grid file (bad magic)");
    if (detail::get_u32(bytes, 4) != kGridVersion)
        throw ValidationError(source + ": unsupported grid version " + std::to_string(detail::get_u32(bytes, 4)));
    const std::size_t rows = detail::get_u32(bytes, 8);
    const std::size_t cols = detail::get_u32(bytes, 12);
    const std::size_t classes = detail::get_u32(bytes, 16);
    if (classes != kNumClasses)
        throw ValidationError(source + ": expected " + std::to_string(kNumClasses) + " classes, found " +
                              std::to_string(classes));
    if (bytes.size() != kGridHeaderBytes + rows * cols * classes * 4)
        throw ValidationError(source + ": payload size does not match " + std::to_string(rows) + "x" +
                              std::to_string(cols) + "x" + std::to_string(classes));
    ProbabilityGrid grid(rows, cols);
    std::size_t at = kGridHeaderBytes;
    for (auto& cell : grid.cells)
        for (auto& v : cell) {
            v = static_cast<double>(std::bit_cast<float>(detail::get_u32(bytes, at)));
            if (!std::isfinite(v)) throw ValidationError(source + ": non-finite value at byte " + std::to_string(at));
            at += 4;
        }
    return grid;
}

/// Label grid from a one-hot probability grid; anything else is rejected.
inline LabelGrid labels_from_one_hot(const ProbabilityGrid& grid) {
    LabelGrid out(grid.rows, grid.cols);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto label = argmax(grid[i]);
        if (grid[i] != one_hot(label)) throw ValidationError("cell " + std::to_string(i) + " is not one-hot");
        out[i] = label;
    }
    return out;
}

inline nlohmann::json sidecar_to_json(const GridSidecar& s, const ProbabilityGrid& grid) {
    return {{"format", "census-grid"},
            {"version", kGridVersion},
            {"kind", s.kind == GridKind::Label ? "label" : "probability"},
            {"rows", grid.rows},
            {"cols", grid.cols},
            {"classes", {"background", "animal", "border"}},
            {"patch_size", s.geometry.patch_size},
            {"grid_size", s.geometry.grid_size},
            {"stride", s.geometry.stride()},
            {"origin", {{"x", s.origin.x}, {"y", s.origin.y}}},
            {"image_id", s.image_id}};
}

inline GridSidecar sidecar_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "census-grid") throw ValidationError("sidecar format is not census-grid");
        const auto kind = j.at("kind").get<std::string>();
        if (kind != "label" && kind != "probability") throw ValidationError("sidecar kind '" + kind + "' unknown");
        GridSidecar s;
        s.kind = kind == "label" ? GridKind::Label : GridKind::Probability;
        s.geometry = {j.at("patch_size").get<std::int64_t>(), j.at("grid_size").get<std::int64_t>()};
        s.geometry.validate();
        s.origin = {j.at("origin").at("x").get<std::int64_t>(), j.at("origin").at("y").get<std::int64_t>()};
        s.image_id = j.value("image_id", std::string{});
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("grid sidecar: ") + e.what());
    }
}

inline std::string sidecar_path(const std::string& grid_path) { return grid_path + ".json"; }

inline void write_grid_file(const std::string& path, const ProbabilityGrid& grid, const GridSidecar& sidecar) {
    {
        auto out = csv::open_output(path);
        const auto bytes = encode_grid(grid);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing '" + path + "'");
    }
    auto side = csv::open_output(sidecar_path(path));
    side << sidecar_to_json(sidecar, grid).dump(2) << '\n';
}

inline void write_grid_file(const std::string& path, const LabelGrid& grid, GridSidecar sidecar) {
    sidecar.kind = GridKind::Label;
    write_grid_file(path, to_one_hot(grid), sidecar);
}

struct LoadedGrid {
    ProbabilityGrid grid;
    std::optional<GridSidecar> sidecar;
};

/// Reads a grid and, when present, its sidecar; rows/cols must agree.
inline LoadedGrid read_grid_file(const std::string& path) {
    auto in = csv::open_input(path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    LoadedGrid out{decode_grid(bytes, path), std::nullopt};
    std::ifstream side(sidecar_path(path), std::ios::binary);
    if (side) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(side);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(sidecar_path(path) + ": " + e.what());
        }
        out.sidecar = sidecar_from_json(j);
        if (j.value("rows", out.grid.rows) != out.grid.rows || j.value("cols", out.grid.cols) != out.grid.cols)
            throw ValidationError(sidecar_path(path) + ": shape disagrees with grid file");
    }
    return out;
}

} // namespace census
