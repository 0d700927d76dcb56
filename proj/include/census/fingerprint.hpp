#pragma once

#include <census/core.hpp>
#include <census/csv.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace census {

/// 64-bit FNV-1a, rendered as 16 hex digits.
class Fingerprint {
public:
    Fingerprint& add(std::string_view bytes) noexcept {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 0x100000001B3ULL;
        }
        state_ ^= 0xFF; // field separator
        state_ *= 0x100000001B3ULL;
        return *this;
    }

    Fingerprint& add(double v) { return add(csv::format_real(v)); }

    std::string hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(16, '0');
        for (int k = 0; k < 16; ++k) out[15 - k] = digits[(state_ >> (4 * k)) & 0xF];
        return out;
    }

private:
    std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::string fingerprint(std::span<const ScoredDetection> detections) {
    Fingerprint f;
    for (const auto& d : detections) f.add(d.image_id).add(d.x).add(d.y).add(d.score);
    return f.hex();
}

} // namespace census
