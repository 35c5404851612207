#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace infoneed {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// 64-bit FNV-1a; used for feature hashing where speed matters more than
/// collision resistance.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace infoneed
