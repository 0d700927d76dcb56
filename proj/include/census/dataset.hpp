#pragma once

#include <census/core.hpp>
#include <census/csv.hpp>

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace census {

/// Image metadata plus point annotations. Images are kept sorted by id.
struct Dataset {
    std::vector<ImageMeta> images;
    std::vector<GroundTruthPoint> ground_truth;

    friend bool operator==(const Dataset&, const Dataset&) = default;

    std::size_t animal_count() const noexcept { return ground_truth.size(); }

    const ImageMeta* find_image(const std::string& id) const {
        auto it = std::lower_bound(images.begin(), images.end(), id,
                                   [](const ImageMeta& m, const std::string& k) { return m.image_id < k; });
        return it != images.end() && it->image_id == id ? &*it : nullptr;
    }

    /// Sorts images, recomputes has_animals and checks every invariant.
    void normalize() {
        std::sort(images.begin(), images.end(),
                  [](const ImageMeta& a, const ImageMeta& b) { return a.image_id < b.image_id; });
        for (std::size_t k = 0; k < images.size(); ++k) {
            images[k].validate();
            if (k > 0 && images[k].image_id == images[k - 1].image_id)
                throw ValidationError("duplicate image id '" + images[k].image_id + "'");
            images[k].has_animals = false;
        }
        std::set<std::string> instances;
        for (const auto& g : ground_truth) {
            auto it = std::lower_bound(images.begin(), images.end(), g.image_id,
                                       [](const ImageMeta& m, const std::string& k) { return m.image_id < k; });
            if (it == images.end() || it->image_id != g.image_id)
                throw ValidationError("ground truth '" + g.instance_id + "' references unknown image '" + g.image_id + "'");
            validate_point(g, *it);
            it->has_animals = true;
            if (!instances.insert(g.instance_id).second)
                throw ValidationError("duplicate instance id '" + g.instance_id + "'");
        }
    }
};

namespace detail {

inline void merge_image(std::map<std::string, ImageMeta>& images, ImageMeta meta, const std::string& source,
                        std::size_t line) {
    try {
        meta.validate();
    } catch (const ValidationError& e) {
        throw ValidationError(source + ":" + std::to_string(line) + ": " + e.what());
    }
    auto [it, inserted] = images.try_emplace(meta.image_id, meta);
    if (!inserted && (it->second.width != meta.width || it->second.height != meta.height))
        throw ValidationError(source + ":" + std::to_string(line) + ": image '" + meta.image_id +
                              "' redeclared with different dimensions");
}

template <typename Fn>
void rethrow_with_line(const std::string& source, std::size_t line, Fn&& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        throw ValidationError(source + ":" + std::to_string(line) + ": " + e.what());
    }
}

} // namespace detail

inline const std::vector<std::string>& annotation_columns() {
    static const std::vector<std::string> c{"image_id", "width", "height", "x", "y", "instance_id"};
    return c;
}
inline const std::vector<std::string>& image_columns() {
    static const std::vector<std::string> c{"image_id", "width", "height"};
    return c;
}
inline const std::vector<std::string>& detection_columns() {
    static const std::vector<std::string> c{"image_id", "x", "y", "score"};
    return c;
}

/// Parses annotations (one row per animal) and optional image rows (images
/// without animals, or any image). Either stream may be null.
inline Dataset read_dataset(std::istream* annotations, const std::string& annotations_source, std::istream* images,
                            const std::string& images_source) {
    std::map<std::string, ImageMeta> metas;
    Dataset ds;
    std::vector<std::size_t> gt_lines;
    if (annotations) {
        for (auto& row : csv::read_table(*annotations, annotation_columns(), annotations_source)) {
            const auto& f = row.fields;
            ImageMeta meta{f[0], csv::parse_integer(f[1], annotations_source, row.line, "width"),
                           csv::parse_integer(f[2], annotations_source, row.line, "height"), true};
            detail::merge_image(metas, meta, annotations_source, row.line);
            ds.ground_truth.push_back({f[0], csv::parse_real(f[3], annotations_source, row.line, "x"),
                                       csv::parse_real(f[4], annotations_source, row.line, "y"), f[5]});
            gt_lines.push_back(row.line);
            detail::rethrow_with_line(annotations_source, row.line,
                                      [&] { validate_point(ds.ground_truth.back(), metas.at(f[0])); });
        }
    }
    if (images) {
        for (auto& row : csv::read_table(*images, image_columns(), images_source)) {
            const auto& f = row.fields;
            detail::merge_image(metas,
                                {f[0], csv::parse_integer(f[1], images_source, row.line, "width"),
                                 csv::parse_integer(f[2], images_source, row.line, "height"), false},
                                images_source, row.line);
        }
    }
    std::set<std::string> instances;
    for (std::size_t k = 0; k < ds.ground_truth.size(); ++k)
        if (!instances.insert(ds.ground_truth[k].instance_id).second)
            throw ValidationError(annotations_source + ":" + std::to_string(gt_lines[k]) + ": duplicate instance id '" +
                                  ds.ground_truth[k].instance_id + "'");
    for (auto& [id, m] : metas) ds.images.push_back(m);
    ds.normalize();
    return ds;
}

/// Loads annotations.csv and, when given, images.csv.
inline Dataset load_annotations(const std::string& annotations_path, const std::string& images_path = {}) {
    std::ifstream ann;
    std::ifstream img;
    std::istream* ann_ptr = nullptr;
    std::istream* img_ptr = nullptr;
    if (!annotations_path.empty()) {
        ann = csv::open_input(annotations_path);
        ann_ptr = &ann;
    }
    if (!images_path.empty()) {
        img = csv::open_input(images_path);
        img_ptr = &img;
    }
    return read_dataset(ann_ptr, annotations_path, img_ptr, images_path);
}

/// Parses detections. With `images`, image existence and bounds are checked too.
inline std::vector<ScoredDetection> read_detections(std::istream& in, const std::string& source,
                                                    std::span<const ImageMeta> images = {}) {
    std::map<std::string, const ImageMeta*> lookup;
    for (const auto& m : images) lookup.emplace(m.image_id, &m);
    std::vector<ScoredDetection> out;
    for (auto& row : csv::read_table(in, detection_columns(), source)) {
        const auto& f = row.fields;
        ScoredDetection d{f[0], csv::parse_real(f[1], source, row.line, "x"), csv::parse_real(f[2], source, row.line, "y"),
                          csv::parse_real(f[3], source, row.line, "score")};
        if (d.image_id.empty()) throw ValidationError(source + ":" + std::to_string(row.line) + ": empty image_id");
        if (!valid_score(d.score))
            throw ValidationError(source + ":" + std::to_string(row.line) + ": score " + f[3] + " outside [0,1]");
        if (!images.empty()) {
            auto it = lookup.find(d.image_id);
            if (it == lookup.end())
                throw ValidationError(source + ":" + std::to_string(row.line) + ": unknown image '" + d.image_id + "'");
            detail::rethrow_with_line(source, row.line, [&] { validate_detection(d, *it->second); });
        }
        out.push_back(std::move(d));
    }
    return out;
}

inline std::vector<ScoredDetection> load_detections(const std::string& path, std::span<const ImageMeta> images = {}) {
    auto in = csv::open_input(path);
    return read_detections(in, path, images);
}

inline void write_annotations(std::ostream& out, const Dataset& ds) {
    csv::write_record(out, annotation_columns());
    for (const auto& g : ds.ground_truth) {
        const ImageMeta* m = ds.find_image(g.image_id);
        if (!m) throw ValidationError("ground truth references unknown image '" + g.image_id + "'");
        csv::write_record(out, {g.image_id, std::to_string(m->width), std::to_string(m->height), csv::format_real(g.x),
                                csv::format_real(g.y), g.instance_id});
    }
}

/// Writes the images without animals; animal-bearing images are implied by
/// their annotation rows.
inline void write_empty_images(std::ostream& out, const Dataset& ds) {
    csv::write_record(out, image_columns());
    for (const auto& m : ds.images)
        if (!m.has_animals) csv::write_record(out, {m.image_id, std::to_string(m.width), std::to_string(m.height)});
}

inline void write_detections(std::ostream& out, std::span<const ScoredDetection> dets) {
    csv::write_record(out, detection_columns());
    for (const auto& d : dets)
        csv::write_record(out, {d.image_id, csv::format_real(d.x), csv::format_real(d.y), csv::format_real(d.score)});
}

inline void save_annotations(const Dataset& ds, const std::string& annotations_path, const std::string& images_path) {
    auto ann = csv::open_output(annotations_path);
    write_annotations(ann, ds);
    auto img = csv::open_output(images_path);
    write_empty_images(img, ds);
}

inline void save_detections(std::span<const ScoredDetection> dets, const std::string& path) {
    auto out = csv::open_output(path);
    write_detections(out, dets);
}

// JSON mirror ---------------------------------------------------------------

inline nlohmann::json to_json(const Dataset& ds) {
    nlohmann::json images = nlohmann::json::array();
    for (const auto& m : ds.images)
        images.push_back({{"image_id", m.image_id}, {"width", m.width}, {"height", m.height}, {"has_animals", m.has_animals}});
    nlohmann::json gt = nlohmann::json::array();
    for (const auto& g : ds.ground_truth)
        gt.push_back({{"image_id", g.image_id}, {"x", g.x}, {"y", g.y}, {"instance_id", g.instance_id}});
    return {{"images", images}, {"ground_truth", gt}};
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
    Dataset ds;
    try {
        for (const auto& m : j.at("images"))
            ds.images.push_back({m.at("image_id").get<std::string>(), m.at("width").get<std::int64_t>(),
                                 m.at("height").get<std::int64_t>(), false});
        for (const auto& g : j.at("ground_truth"))
            ds.ground_truth.push_back({g.at("image_id").get<std::string>(), g.at("x").get<double>(), g.at("y").get<double>(),
                                       g.at("instance_id").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("dataset JSON: ") + e.what());
    }
    ds.normalize();
    return ds;
}

} // namespace census
