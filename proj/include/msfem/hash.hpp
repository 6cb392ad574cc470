#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace msfem {

/// FNV-1a, used for cache keys and config fingerprints.
class Fnv1a {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void text(std::string_view s) {
        bytes(s.data(), s.size());
        bytes("\0", 1);
    }
    void value(double v) { bytes(&v, sizeof v); }
    void value(std::uint64_t v) { bytes(&v, sizeof v); }
    void values(std::span<const double> v) { bytes(v.data(), v.size_bytes()); }

    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace msfem
