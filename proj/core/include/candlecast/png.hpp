#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "candlecast/chart.hpp"

namespace candlecast::chart {

/// Minimal standards-conformant PNG writer: 8-bit RGB, no interlace, no
/// ancillary chunks, zlib stream built from stored deflate blocks. The
/// output is a pure function of the pixels, so identical images are
/// byte-identical across runs and platforms.
std::vector<std::uint8_t> encode_png(const ChartImage& img);

void write_png(const std::filesystem::path& path, const ChartImage& img);

} // namespace candlecast::chart
