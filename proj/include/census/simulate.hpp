#pragma once

#include <census/dataset.hpp>
#include <census/evaluate.hpp>
#include <census/fingerprint.hpp>
#include <census/parallel.hpp>
#include <census/random.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace census {

struct BetaParams {
    double a = 1.0;
    double b = 1.0;
};

struct DetectorSpec {
    double hit_rate = 0.9;
    double position_noise_sigma = 5.0;  // px, per axis
    double fp_per_image = 1.0;          // Poisson mean
    BetaParams tp_score{5.0, 2.0};
    BetaParams fp_score{2.0, 5.0};
    double fp_exclusion_radius = 0.0;   // false positives keep at least this far from every animal

    void validate() const {
        if (!(hit_rate >= 0.0 && hit_rate <= 1.0)) throw InputError("hit_rate must lie in [0,1]");
        if (!(position_noise_sigma >= 0.0) || !std::isfinite(position_noise_sigma))
            throw InputError("position noise sigma must be non-negative");
        if (!(fp_per_image >= 0.0) || !std::isfinite(fp_per_image)) throw InputError("fp_per_image must be non-negative");
        for (auto p : {tp_score, fp_score})
            if (!(p.a > 0.0 && p.b > 0.0)) throw InputError("beta score parameters must be positive");
        if (!(fp_exclusion_radius >= 0.0)) throw InputError("fp exclusion radius must be non-negative");
    }
};

struct CampaignSpec {
    std::size_t n_images = 100;
    std::int64_t width = 4000;
    std::int64_t height = 3000;
    double fraction_empty = 415.0 / 654.0;
    double animals_per_positive_image = 1183.0 / 239.0; // mean, at least 1
    double min_separation = 0.0;      // raised to 2 sigma unless crowded
    bool crowded = false;
    std::size_t max_placement_attempts = 10000;
    DetectorSpec detector;
    std::uint64_t seed = 0;

    void validate() const {
        if (width <= 0 || height <= 0) throw InputError("image size must be positive");
        if (!(fraction_empty >= 0.0 && fraction_empty <= 1.0)) throw InputError("fraction_empty must lie in [0,1]");
        if (!(animals_per_positive_image >= 1.0) || !std::isfinite(animals_per_positive_image))
            throw InputError("animals_per_positive_image must be at least 1");
        if (!(min_separation >= 0.0)) throw InputError("min_separation must be non-negative");
        if (max_placement_attempts == 0) throw InputError("max_placement_attempts must be positive");
        detector.validate();
    }

    double effective_separation() const noexcept {
        return crowded ? min_separation : std::max(min_separation, 2.0 * detector.position_noise_sigma);
    }

    std::size_t empty_images() const noexcept {
        return static_cast<std::size_t>(std::llround(static_cast<double>(n_images) * fraction_empty));
    }
};

inline nlohmann::json to_json(const CampaignSpec& s) {
    const auto& d = s.detector;
    return {{"n_images", s.n_images},
            {"width", s.width},
            {"height", s.height},
            {"fraction_empty", s.fraction_empty},
            {"animals_per_positive_image", s.animals_per_positive_image},
            {"min_separation", s.min_separation},
            {"crowded", s.crowded},
            {"max_placement_attempts", s.max_placement_attempts},
            {"seed", s.seed},
            {"detector",
             {{"hit_rate", d.hit_rate},
              {"position_noise_sigma", d.position_noise_sigma},
              {"fp_per_image", d.fp_per_image},
              {"tp_score", {d.tp_score.a, d.tp_score.b}},
              {"fp_score", {d.fp_score.a, d.fp_score.b}},
              {"fp_exclusion_radius", d.fp_exclusion_radius}}}};
}

inline std::string campaign_fingerprint(const CampaignSpec& s) { return Fingerprint().add(to_json(s).dump()).hex(); }

struct LedgerEntry {
    std::size_t detection = 0;
    std::string image_id;
    bool is_tp = false;
    std::string source_instance;            // empty for false positives
    std::optional<std::size_t> source_index; // ground-truth index of the source animal

    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

struct ImageLedger {
    std::string image_id;
    std::size_t animals = 0;
    std::size_t planted_tp = 0;
    std::size_t planted_fp = 0;

    friend bool operator==(const ImageLedger&, const ImageLedger&) = default;
};

struct Ledger {
    std::string campaign_fingerprint;
    std::string detections_fingerprint;
    std::size_t n_ground_truth = 0;
    std::vector<LedgerEntry> entries; // entries[k] describes detection k
    std::vector<ImageLedger> images;

    friend bool operator==(const Ledger&, const Ledger&) = default;
};

struct Campaign {
    CampaignSpec spec;
    Dataset dataset;
    std::vector<ScoredDetection> detections;
    Ledger ledger;
};

namespace detail {

struct SimImage {
    std::vector<GroundTruthPoint> animals;
    std::vector<ScoredDetection> detections;
    std::vector<std::optional<std::size_t>> source; // local animal index per detection
};

inline double clamp_into(double v, std::int64_t extent) {
    return std::clamp(v, 0.0, std::nextafter(static_cast<double>(extent), 0.0));
}

inline std::string image_name(std::size_t i, std::size_t n) {
    const std::size_t digits = std::max<std::size_t>(5, std::to_string(n > 0 ? n - 1 : 0).size());
    const auto number = std::to_string(i);
    return "sim" + std::string(digits - std::min(digits, number.size()), '0') + number;
}

inline SimImage simulate_image(const CampaignSpec& spec, const std::string& id, std::size_t index, bool positive) {
    SimImage out;
    const auto& det = spec.detector;
    const auto W = static_cast<double>(spec.width), H = static_cast<double>(spec.height);
    Rng place(derive_seed(spec.seed, index + 1, 1));
    if (positive) {
        const auto n = 1 + poisson(place, spec.animals_per_positive_image - 1.0);
        const double sep = spec.effective_separation();
        for (std::size_t k = 0; k < n; ++k) {
            bool placed = false;
            for (std::size_t attempt = 0; attempt < spec.max_placement_attempts && !placed; ++attempt) {
                const Point p{uniform_real(place, 0.0, W), uniform_real(place, 0.0, H)};
                placed = true;
                for (const auto& a : out.animals)
                    if (euclidean_distance(p, a.position()) < sep) {
                        placed = false;
                        break;
                    }
                if (placed) out.animals.push_back({id, p.x, p.y, id + "_a" + std::to_string(k)});
            }
            if (!placed)
                throw InfeasibleError("cannot place " + std::to_string(n) + " animals " + std::to_string(sep) +
                                      " px apart in image '" + id + "' within " +
                                      std::to_string(spec.max_placement_attempts) + " attempts");
        }
    }

    Rng detect(derive_seed(spec.seed, index + 1, 2));
    for (std::size_t k = 0; k < out.animals.size(); ++k) {
        if (uniform01(detect) >= det.hit_rate) continue;
        const auto& a = out.animals[k];
        const double dx = det.position_noise_sigma * standard_normal(detect);
        const double dy = det.position_noise_sigma * standard_normal(detect);
        out.detections.push_back({id, clamp_into(a.x + dx, spec.width), clamp_into(a.y + dy, spec.height),
                                  beta_draw(detect, det.tp_score.a, det.tp_score.b)});
        out.source.push_back(k);
    }
    const auto n_fp = poisson(detect, det.fp_per_image);
    for (std::uint64_t f = 0; f < n_fp; ++f) {
        Point p;
        bool ok = false;
        for (std::size_t attempt = 0; attempt < spec.max_placement_attempts && !ok; ++attempt) {
            p = {uniform_real(detect, 0.0, W), uniform_real(detect, 0.0, H)};
            ok = true;
            if (det.fp_exclusion_radius > 0.0)
                for (const auto& a : out.animals) ok &= euclidean_distance(p, a.position()) > det.fp_exclusion_radius;
        }
        if (!ok) throw InfeasibleError("cannot place a false positive outside the exclusion radius in image '" + id + "'");
        out.detections.push_back({id, p.x, p.y, beta_draw(detect, det.fp_score.a, det.fp_score.b)});
        out.source.push_back(std::nullopt);
    }
    return out;
}

} // namespace detail

/// Synthetic images, point annotations and scored detections with a ledger of
/// the planted truth. Output depends only on the spec (thread count included).
inline Campaign generate_campaign(const CampaignSpec& spec, unsigned threads = 1) {
    spec.validate();
    const std::size_t n = spec.n_images;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng pick(derive_seed(spec.seed, 0, 0));
    shuffle(order, pick);
    std::vector<bool> empty(n, false);
    for (std::size_t k = 0; k < spec.empty_images(); ++k) empty[order[k]] = true;

    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = detail::image_name(i, n);
    std::vector<detail::SimImage> images(n);
    parallel_for(n, threads, [&](std::size_t i) { images[i] = detail::simulate_image(spec, ids[i], i, !empty[i]); });

    Campaign c;
    c.spec = spec;
    c.ledger.campaign_fingerprint = campaign_fingerprint(spec);
    for (std::size_t i = 0; i < n; ++i) {
        auto& img = images[i];
        c.dataset.images.push_back({ids[i], spec.width, spec.height, !img.animals.empty()});
        const std::size_t gt_base = c.dataset.ground_truth.size();
        ImageLedger il{ids[i], img.animals.size(), 0, 0};
        for (std::size_t k = 0; k < img.detections.size(); ++k) {
            LedgerEntry e{c.detections.size(), ids[i], img.source[k].has_value(), "", std::nullopt};
            if (e.is_tp) {
                e.source_instance = img.animals[*img.source[k]].instance_id;
                e.source_index = gt_base + *img.source[k];
                ++il.planted_tp;
            } else {
                ++il.planted_fp;
            }
            c.ledger.entries.push_back(std::move(e));
            c.detections.push_back(std::move(img.detections[k]));
        }
        for (auto& a : img.animals) c.dataset.ground_truth.push_back(std::move(a));
        c.ledger.images.push_back(il);
    }
    c.dataset.normalize();
    c.ledger.n_ground_truth = c.dataset.ground_truth.size();
    c.ledger.detections_fingerprint = fingerprint(c.detections);
    return c;
}

// ledger.json ------------------------------------------------------------------

inline nlohmann::json to_json(const Ledger& l) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : l.entries) {
        nlohmann::json j{{"detection", e.detection}, {"image_id", e.image_id}, {"is_tp", e.is_tp}};
        j["source_instance"] = e.is_tp ? nlohmann::json(e.source_instance) : nlohmann::json(nullptr);
        j["source_index"] = e.source_index ? nlohmann::json(*e.source_index) : nlohmann::json(nullptr);
        entries.push_back(std::move(j));
    }
    nlohmann::json images = nlohmann::json::array();
    for (const auto& i : l.images)
        images.push_back({{"image_id", i.image_id}, {"animals", i.animals}, {"planted_tp", i.planted_tp},
                          {"planted_fp", i.planted_fp}});
    return {{"campaign_fingerprint", l.campaign_fingerprint},
            {"detections_fingerprint", l.detections_fingerprint},
            {"n_ground_truth", l.n_ground_truth},
            {"images", images},
            {"entries", entries}};
}

inline Ledger ledger_from_json(const nlohmann::json& j) {
    try {
        Ledger l;
        l.campaign_fingerprint = j.at("campaign_fingerprint").get<std::string>();
        l.detections_fingerprint = j.at("detections_fingerprint").get<std::string>();
        l.n_ground_truth = j.at("n_ground_truth").get<std::size_t>();
        for (const auto& i : j.at("images"))
            l.images.push_back({i.at("image_id").get<std::string>(), i.at("animals").get<std::size_t>(),
                                i.at("planted_tp").get<std::size_t>(), i.at("planted_fp").get<std::size_t>()});
        for (const auto& e : j.at("entries")) {
            LedgerEntry le;
            le.detection = e.at("detection").get<std::size_t>();
            le.image_id = e.at("image_id").get<std::string>();
            le.is_tp = e.at("is_tp").get<bool>();
            if (!e.at("source_instance").is_null()) le.source_instance = e.at("source_instance").get<std::string>();
            if (!e.at("source_index").is_null()) le.source_index = e.at("source_index").get<std::size_t>();
            if (le.detection != l.entries.size()) throw ValidationError("ledger entries must be in detection order");
            l.entries.push_back(std::move(le));
        }
        return l;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("ledger JSON: ") + e.what());
    }
}

/// Writes annotations.csv, images.csv, detections.csv, ledger.json and
/// campaign.json into `dir`.
inline void save_campaign(const Campaign& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_annotations(c.dataset, (dir / "annotations.csv").string(), (dir / "images.csv").string());
    save_detections(c.detections, (dir / "detections.csv").string());
    auto ledger = csv::open_output((dir / "ledger.json").string());
    ledger << to_json(c.ledger).dump(1) << '\n';
    auto spec = csv::open_output((dir / "campaign.json").string());
    spec << to_json(c.spec).dump(2) << '\n';
}

// Replay -----------------------------------------------------------------------

struct ReplayStats {
    std::size_t evaluated = 0;       // detections at or above the match threshold
    std::size_t protocol_tp = 0;
    std::size_t planted_tp = 0;      // among evaluated detections
    std::size_t label_agreements = 0;
    std::size_t pairs_checked = 0;   // protocol TPs that are planted TPs
    std::size_t pair_agreements = 0; // ... matched to their own source animal
    double label_agreement = 1.0;
    double pair_agreement = 1.0;
};

/// Compares protocol TP/FP decisions with the planted truth.
inline ReplayStats replay_ledger(const Ledger& ledger, const DatasetMatch& match) {
    if (ledger.detections_fingerprint != match.detections_fingerprint || ledger.entries.size() != match.n_detections ||
        ledger.n_ground_truth != match.n_ground_truth)
        throw InputError("ledger and match report come from different campaigns");
    ReplayStats s;
    auto check = [&](std::size_t det, bool protocol_tp, std::optional<std::size_t> matched_gt) {
        const auto& e = ledger.entries.at(det);
        ++s.evaluated;
        s.protocol_tp += protocol_tp;
        s.planted_tp += e.is_tp;
        s.label_agreements += protocol_tp == e.is_tp;
        if (protocol_tp && e.is_tp) {
            ++s.pairs_checked;
            s.pair_agreements += matched_gt == e.source_index;
        }
    };
    for (const auto& p : match.pairs) check(p.detection, true, p.ground_truth);
    for (auto k : match.false_positives) check(k, false, std::nullopt);
    if (s.evaluated) s.label_agreement = static_cast<double>(s.label_agreements) / static_cast<double>(s.evaluated);
    if (s.pairs_checked) s.pair_agreement = static_cast<double>(s.pair_agreements) / static_cast<double>(s.pairs_checked);
    return s;
}

} // namespace census
