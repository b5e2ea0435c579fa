#include "tecswin/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <zlib.h>

namespace tecswin {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<uint8_t>& data) {
    std::vector<uint8_t> hdr;
    put_u32(hdr, static_cast<uint32_t>(data.size()));
    f.write(reinterpret_cast<const char*>(hdr.data()), 4);
    f.write(type, 4);
    if (!data.empty()) f.write(reinterpret_cast<const char*>(data.data()), data.size());
    uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    std::vector<uint8_t> tail;
    put_u32(tail, crc);
    f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(2) != 3)
        throw ShapeError("write_png: expected [H,W,3]");
    int64_t H = image.dim(0), W = image.dim(1);
    const auto& px = image.data();

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(H) * (W * 3 + 1));
    for (int64_t y = 0; y < H; ++y) {
        raw.push_back(0);  // filter: none
        for (int64_t x = 0; x < W * 3; ++x) {
            float v = (px[y * W * 3 + x] + 1.0f) * 127.5f;
            raw.push_back(static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L)));
        }
    }

    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> z(zlen);
    if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: deflate failed");
    z.resize(zlen);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_png: cannot open " + path);
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<uint8_t> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(W));
    put_u32(ihdr, static_cast<uint32_t>(H));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(f, "IHDR", ihdr);
    write_chunk(f, "IDAT", z);
    write_chunk(f, "IEND", {});
    if (!f) throw std::runtime_error("write_png: write failed for " + path);
}

}  // namespace tecswin
