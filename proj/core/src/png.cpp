#include "candlecast/png.hpp"

#include <array>
#include <fstream>

#include "candlecast/error.hpp"

namespace candlecast::chart {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t n = 0; n < 256; ++n) {
        std::uint32_t c = n;
        for (int k = 0; k < 8; ++k)
            c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        table[n] = c;
    }
    return table;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static const auto table = make_crc_table();
    std::uint32_t c = 0xffffffffu;
    for (std::size_t i = 0; i < len; ++i)
        c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xffffffffu;
}

std::uint32_t adler32(const std::uint8_t* data, std::size_t len) {
    std::uint32_t a = 1, b = 0;
    constexpr std::uint32_t kMod = 65521;
    for (std::size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % kMod;
        b = (b + a) % kMod;
    }
    return (b << 16) | a;
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& data) {
    put_be32(out, std::uint32_t(data.size()));
    const std::size_t type_pos = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    put_be32(out, crc32(out.data() + type_pos, 4 + data.size()));
}

} // namespace

std::vector<std::uint8_t> encode_png(const ChartImage& img) {
    if (img.width < 1 || img.height < 1 ||
        img.pixels.size() != std::size_t(img.width) * std::size_t(img.height))
        throw ContractError("encode_png: inconsistent image dimensions");

    // Raw zlib payload: one filter byte (0 = None) plus RGB bytes per row.
    std::vector<std::uint8_t> raw;
    raw.reserve(std::size_t(img.height) * (1 + std::size_t(img.width) * 3));
    for (int row = 0; row < img.height; ++row) {
        raw.push_back(0);
        for (int col = 0; col < img.width; ++col) {
            const Rgb& px = img.at(row, col);
            raw.push_back(px.r);
            raw.push_back(px.g);
            raw.push_back(px.b);
        }
    }

    // zlib container around stored (uncompressed) deflate blocks. Charts are
    // tiny, and stored blocks keep the byte stream independent of any
    // compressor version.
    std::vector<std::uint8_t> idat;
    idat.push_back(0x78);
    idat.push_back(0x01);
    std::size_t pos = 0;
    constexpr std::size_t kMaxBlock = 65535;
    do {
        const std::size_t n = std::min(kMaxBlock, raw.size() - pos);
        const bool final_block = pos + n == raw.size();
        idat.push_back(final_block ? 1 : 0);
        idat.push_back(std::uint8_t(n & 0xff));
        idat.push_back(std::uint8_t(n >> 8));
        idat.push_back(std::uint8_t(~n & 0xff));
        idat.push_back(std::uint8_t((~n >> 8) & 0xff));
        idat.insert(idat.end(), raw.begin() + long(pos), raw.begin() + long(pos + n));
        pos += n;
    } while (pos < raw.size());
    put_be32(idat, adler32(raw.data(), raw.size()));

    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, std::uint32_t(img.width));
    put_be32(ihdr, std::uint32_t(img.height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // color type: truecolor RGB
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter
    ihdr.push_back(0); // interlace

    std::vector<std::uint8_t> out;
    const std::uint8_t signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), signature, signature + 8);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", idat);
    put_chunk(out, "IEND", {});
    return out;
}

void write_png(const std::filesystem::path& path, const ChartImage& img) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), long(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace candlecast::chart
