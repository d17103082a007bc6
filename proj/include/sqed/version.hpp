#pragma once

#include <cstdint>
#include <string_view>

namespace sqed {

inline constexpr const char* kVersion = "0.1.0";

// FNV-1a, used to stamp reports with a hash of their resolved configuration
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace sqed
