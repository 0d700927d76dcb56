#pragma once

#include <census/dataset.hpp>
#include <census/random.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace census {

enum class Subset : std::uint8_t { Train = 0, Val = 1, Test = 2 };

inline constexpr std::array<Subset, 3> kSubsets{Subset::Train, Subset::Val, Subset::Test};

inline std::string to_string(Subset s) {
    switch (s) {
    case Subset::Train: return "train";
    case Subset::Val: return "val";
    case Subset::Test: return "test";
    }
    return "train";
}

inline Subset subset_from_string(const std::string& s) {
    if (s == "train") return Subset::Train;
    if (s == "val") return Subset::Val;
    if (s == "test") return Subset::Test;
    throw ValidationError("unknown subset '" + s + "' (expected train, val or test)");
}

struct SplitFractions {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;

    double operator[](Subset s) const noexcept {
        return s == Subset::Train ? train : s == Subset::Val ? val : test;
    }

    void validate() const {
        for (Subset s : kSubsets)
            if (!((*this)[s] >= 0.0)) throw InputError("split fractions must be non-negative");
        if (std::abs(train + val + test - 1.0) > 1e-9) throw InputError("split fractions must sum to 1");
    }
};

struct SplitAssignment {
    int split_id = 0;
    std::map<std::string, Subset> mapping;

    friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;

    std::vector<std::string> images_in(Subset s) const {
        std::vector<std::string> out;
        for (const auto& [id, sub] : mapping)
            if (sub == s) out.push_back(id);
        return out;
    }
};

namespace detail {

struct Candidate {
    std::string image_id;
    std::size_t animals;
};

/// Largest-first greedy: each image goes to the subset currently furthest
/// below its animal target. Ties in animal count are ordered by a seeded shuffle.
inline void allocate_animal_images(std::vector<Candidate> images, const std::vector<Subset>& subsets,
                                   const std::vector<double>& fractions, std::uint64_t seed,
                                   std::map<std::string, Subset>& out) {
    Rng rng(seed);
    shuffle(images, rng);
    std::stable_sort(images.begin(), images.end(),
                     [](const Candidate& a, const Candidate& b) { return a.animals > b.animals; });
    std::size_t total = 0;
    for (const auto& c : images) total += c.animals;
    std::vector<double> current(subsets.size(), 0.0);
    for (const auto& c : images) {
        std::size_t best = subsets.size();
        double best_deficit = 0.0;
        for (std::size_t s = 0; s < subsets.size(); ++s) {
            if (fractions[s] <= 0.0) continue;
            const double deficit = fractions[s] * static_cast<double>(total) - current[s];
            if (best == subsets.size() || deficit > best_deficit) {
                best = s;
                best_deficit = deficit;
            }
        }
        current[best] += static_cast<double>(c.animals);
        out[c.image_id] = subsets[best];
    }
}

/// Splits `n` items by largest remainder; ties favour the earlier subset.
inline std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& fractions) {
    std::vector<std::size_t> counts(fractions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < fractions.size(); ++s) {
        const double exact = fractions[s] * static_cast<double>(n);
        counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        assigned += counts[s];
        remainders.emplace_back(exact - static_cast<double>(counts[s]), s);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
        if (fractions[remainders[k % remainders.size()].second] <= 0.0) {
            --assigned;
            continue;
        }
        ++counts[remainders[k % remainders.size()].second];
    }
    return counts;
}

inline void allocate_empty_images(std::vector<std::string> images, const std::vector<Subset>& subsets,
                                  const std::vector<double>& fractions, std::uint64_t seed,
                                  std::map<std::string, Subset>& out) {
    Rng rng(seed);
    shuffle(images, rng);
    const auto counts = apportion(images.size(), fractions);
    std::size_t k = 0;
    for (std::size_t s = 0; s < subsets.size(); ++s)
        for (std::size_t c = 0; c < counts[s]; ++c) out[images[k++]] = subsets[s];
}

inline void check_feasible(std::size_t n_images, const std::vector<double>& fractions, const char* stage) {
    std::size_t needed = 0;
    for (double f : fractions) needed += f > 0.0;
    if (n_images < needed)
        throw InfeasibleError(std::string(stage) + ": " + std::to_string(n_images) +
                              " images cannot populate " + std::to_string(needed) + " non-empty subsets");
}

} // namespace detail

/// Image-wise train/val/test assignment balanced on animal counts.
///
/// Animal-bearing images are allocated first, largest count first, each to the
/// subset furthest below its share of the animals; empty images are then
/// distributed by the same fractions. Split 0 fixes the test set. Further
/// splits keep it and redistribute the remaining images over train/val with
/// their own tie-break shuffle. Pure function of its arguments.
inline std::vector<SplitAssignment> split_dataset(const Dataset& ds, const SplitFractions& fractions, int n_splits,
                                                  std::uint64_t seed) {
    fractions.validate();
    if (n_splits < 1) throw InputError("n_splits must be at least 1");

    std::map<std::string, std::size_t> animals;
    for (const auto& m : ds.images) animals[m.image_id] = 0;
    for (const auto& g : ds.ground_truth) {
        auto it = animals.find(g.image_id);
        if (it == animals.end()) throw ValidationError("ground truth references unknown image '" + g.image_id + "'");
        ++it->second;
    }

    const std::vector<Subset> all{Subset::Train, Subset::Val, Subset::Test};
    const std::vector<double> all_fractions{fractions.train, fractions.val, fractions.test};
    detail::check_feasible(ds.images.size(), all_fractions, "split");

    std::vector<detail::Candidate> with;
    std::vector<std::string> without;
    for (const auto& [id, n] : animals) {
        if (n > 0) with.push_back({id, n});
        else without.push_back(id);
    }

    SplitAssignment first;
    first.split_id = 0;
    detail::allocate_animal_images(with, all, all_fractions, derive_seed(seed, 0, 0), first.mapping);
    detail::allocate_empty_images(without, all, all_fractions, derive_seed(seed, 0, 1), first.mapping);

    std::vector<SplitAssignment> out{first};
    const double rest = fractions.train + fractions.val;
    const std::vector<Subset> train_val{Subset::Train, Subset::Val};
    const std::vector<double> tv_fractions{rest > 0 ? fractions.train / rest : 0.0, rest > 0 ? fractions.val / rest : 0.0};
    for (int k = 1; k < n_splits; ++k) {
        SplitAssignment next;
        next.split_id = k;
        std::vector<detail::Candidate> pool_with;
        std::vector<std::string> pool_without;
        for (const auto& [id, sub] : first.mapping) {
            if (sub == Subset::Test) {
                next.mapping[id] = Subset::Test;
            } else if (animals[id] > 0) {
                pool_with.push_back({id, animals[id]});
            } else {
                pool_without.push_back(id);
            }
        }
        detail::check_feasible(pool_with.size() + pool_without.size(), tv_fractions, "cross-validation split");
        const auto kk = static_cast<std::uint64_t>(k);
        detail::allocate_animal_images(pool_with, train_val, tv_fractions, derive_seed(seed, kk, 0), next.mapping);
        detail::allocate_empty_images(pool_without, train_val, tv_fractions, derive_seed(seed, kk, 1), next.mapping);
        out.push_back(std::move(next));
    }
    return out;
}

// splits.json: {"<split_id>": {"<image_id>": "train"|"val"|"test"}}

inline nlohmann::json splits_to_json(const std::vector<SplitAssignment>& splits) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& s : splits) {
        nlohmann::json m = nlohmann::json::object();
        for (const auto& [id, sub] : s.mapping) m[id] = to_string(sub);
        j[std::to_string(s.split_id)] = m;
    }
    return j;
}

inline std::vector<SplitAssignment> splits_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("splits JSON must be an object");
    std::vector<SplitAssignment> out;
    for (const auto& [key, value] : j.items()) {
        SplitAssignment s;
        try {
            std::size_t used = 0;
            s.split_id = std::stoi(key, &used);
            if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
            throw ValidationError("split id '" + key + "' is not an integer");
        }
        if (!value.is_object()) throw ValidationError("split '" + key + "' must map image ids to subsets");
        for (const auto& [id, sub] : value.items()) {
            if (!sub.is_string()) throw ValidationError("subset for image '" + id + "' must be a string");
            s.mapping[id] = subset_from_string(sub.get<std::string>());
        }
        out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.split_id < b.split_id; });
    return out;
}

// Statistics -------------------------------------------------------------------

struct SetStatistics {
    std::uint64_t pixels = 0;
    std::size_t images_with_animals = 0;
    std::size_t images_without_animals = 0;
    std::size_t animals = 0;
    std::map<std::size_t, std::size_t> animals_per_image; // animal count -> number of images

    std::size_t images() const noexcept { return images_with_animals + images_without_animals; }
    friend bool operator==(const SetStatistics&, const SetStatistics&) = default;
};

struct DatasetStatistics {
    std::map<Subset, SetStatistics> per_set;
    SetStatistics total;
};

namespace detail {

inline void accumulate(SetStatistics& s, const ImageMeta& m, std::size_t n) {
    s.pixels += static_cast<std::uint64_t>(m.width) * static_cast<std::uint64_t>(m.height);
    if (n > 0) ++s.images_with_animals;
    else ++s.images_without_animals;
    s.animals += n;
    ++s.animals_per_image[n];
}

inline std::map<std::string, std::size_t> animals_by_image(const Dataset& ds) {
    std::map<std::string, std::size_t> counts;
    for (const auto& g : ds.ground_truth) ++counts[g.image_id];
    return counts;
}

} // namespace detail

/// Whole-dataset counts (pixels, images with/without animals, animals,
/// animals-per-image histogram).
inline SetStatistics dataset_statistics(const Dataset& ds) {
    const auto counts = detail::animals_by_image(ds);
    SetStatistics s;
    for (const auto& m : ds.images) {
        auto it = counts.find(m.image_id);
        detail::accumulate(s, m, it == counts.end() ? 0 : it->second);
    }
    return s;
}

/// Per-subset counts under one assignment; images missing from the
/// assignment are an error.
inline DatasetStatistics dataset_statistics(const Dataset& ds, const SplitAssignment& assignment) {
    const auto counts = detail::animals_by_image(ds);
    DatasetStatistics out;
    for (Subset s : kSubsets) out.per_set[s] = {};
    for (const auto& m : ds.images) {
        auto a = assignment.mapping.find(m.image_id);
        if (a == assignment.mapping.end()) throw ValidationError("image '" + m.image_id + "' has no subset assignment");
        auto it = counts.find(m.image_id);
        const std::size_t n = it == counts.end() ? 0 : it->second;
        detail::accumulate(out.per_set[a->second], m, n);
        detail::accumulate(out.total, m, n);
    }
    return out;
}

} // namespace census
