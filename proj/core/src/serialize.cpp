#include "tecswin/serialize.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tecswin {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(f),
                                std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<uint8_t>& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

Tensor parse_tensor(const uint8_t* p, size_t avail, size_t* consumed) {
    if (avail < 8 || std::memcmp(p, "TSW1", 4) != 0)
        throw std::runtime_error("bad tensor magic");
    uint32_t rank = get_u32(p + 4);
    size_t off = 8;
    if (avail < off + 4u * rank) throw std::runtime_error("truncated tensor header");
    Shape shape(rank);
    int64_t n = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        shape[i] = get_u32(p + off);
        off += 4;
        n *= shape[i];
    }
    if (avail < off + 4u * n) throw std::runtime_error("truncated tensor payload");
    std::vector<float> data(n);
    std::memcpy(data.data(), p + off, 4u * n);
    off += 4u * n;
    if (consumed) *consumed = off;
    return Tensor::from_data(std::move(shape), std::move(data));
}

}  // namespace

void write_tensor(std::vector<uint8_t>& out, const Tensor& t) {
    out.push_back('T');
    out.push_back('S');
    out.push_back('W');
    out.push_back('1');
    put_u32(out, static_cast<uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) put_u32(out, static_cast<uint32_t>(t.dim(i)));
    size_t base = out.size();
    out.resize(base + 4u * t.numel());
    std::memcpy(out.data() + base, t.data().data(), 4u * t.numel());
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::vector<uint8_t> buf;
    write_tensor(buf, t);
    write_file(path, buf);
}

Tensor load_tensor(const std::string& path) {
    auto buf = read_file(path);
    return parse_tensor(buf.data(), buf.size(), nullptr);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    // payload first, so the manifest knows offsets
    std::vector<uint8_t> payload;
    std::vector<uint8_t> out;
    out.insert(out.end(), {'T', 'S', 'W', 'C'});
    put_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        put_u32(out, static_cast<uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) put_u32(out, static_cast<uint32_t>(t.dim(i)));
        put_u64(out, payload.size());
        write_tensor(payload, t);
    }
    out.insert(out.end(), payload.begin(), payload.end());
    write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    auto buf = read_file(path);
    if (buf.size() < 8 || std::memcmp(buf.data(), "TSWC", 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
    uint32_t count = get_u32(buf.data() + 4);
    size_t off = 8;
    struct Entry {
        std::string name;
        uint64_t offset;
    };
    std::vector<Entry> entries;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t nl = get_u32(buf.data() + off);
        off += 4;
        std::string name(reinterpret_cast<const char*>(buf.data() + off), nl);
        off += nl;
        uint32_t rank = get_u32(buf.data() + off);
        off += 4 + 4u * rank;  // shape is repeated in the payload; skip here
        uint64_t t_off = get_u64(buf.data() + off);
        off += 8;
        entries.push_back({std::move(name), t_off});
    }
    Checkpoint ckpt;
    for (const auto& e : entries) {
        size_t pos = off + e.offset;
        if (pos >= buf.size()) throw std::runtime_error("checkpoint offset out of range");
        ckpt.tensors[e.name] = parse_tensor(buf.data() + pos, buf.size() - pos, nullptr);
    }
    return ckpt;
}

}  // namespace tecswin
