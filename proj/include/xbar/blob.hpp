#pragma once

// Little-endian IEEE-754 tensor blobs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "xbar/common.hpp"

namespace xbar::blob {

template <class T>
T to_little(T v) {
    static_assert(std::is_arithmetic_v<T>);
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

template <class T>
void write(const std::filesystem::path& path, std::span<const T> values) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw UsageError("cannot write " + path.string());
    for (T v : values) {
        const T le = to_little(v);
        os.write(reinterpret_cast<const char*>(&le), sizeof(T));
    }
    if (!os) throw UsageError("write failed for " + path.string());
}

template <class T>
std::vector<T> read(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary | std::ios::ate);
    if (!is) throw UsageError("cannot read " + path.string());
    const auto bytes = static_cast<std::size_t>(is.tellg());
    if (bytes % sizeof(T) != 0) throw UsageError(path.string() + ": size is not a multiple of the element size");
    std::vector<T> out(bytes / sizeof(T));
    is.seekg(0);
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (!is) throw UsageError("short read on " + path.string());
    for (auto& v : out) v = to_little(v);
    return out;
}

}  // namespace xbar::blob
