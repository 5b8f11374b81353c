#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "candlecast/error.hpp"

// Little-endian primitives shared by the checkpoint and model writers.
namespace candlecast::io {

inline void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline std::uint64_t get_u64(std::istream& in, const std::string& what) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8))
        throw IoError("truncated stream while reading " + what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

inline std::uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw IoError("truncated stream while reading " + what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

inline float get_f32(std::istream& in, const std::string& what) {
    return std::bit_cast<float>(get_u32(in, what));
}

inline std::string get_string(std::istream& in, std::size_t len, const std::string& what) {
    std::string s(len, '\0');
    if (len != 0 && !in.read(s.data(), std::streamsize(len)))
        throw IoError("truncated stream while reading " + what);
    return s;
}

} // namespace candlecast::io
