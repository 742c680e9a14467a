#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdloc/model.hpp"

// Versioned binary checkpoint: a small header (mode, routing, epoch and
// optimizer scalars) followed by named tensors with explicit dimensions,
// little-endian f64 payloads. Optimizer moments ride along as adam.m.<name>
// and adam.v.<name> so a round-trip restores training state exactly.

namespace crowdloc {

namespace detail {

constexpr char kCkptMagic[8] = {'C', 'R', 'W', 'D', 'L', 'O', 'C', '1'};
constexpr uint32_t kCkptVersion = 1;

inline void put_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u8(std::ostream& os, uint8_t v) { put_bytes(os, &v, 1); }

inline void put_u32(std::ostream& os, uint32_t v) {
    uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                    static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
    put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
    put_u32(os, static_cast<uint32_t>(v));
    put_u32(os, static_cast<uint32_t>(v >> 32));
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<uint64_t>(v)); }

inline void get_bytes(std::istream& is, void* p, size_t n) {
    if (!is.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
        throw std::runtime_error("checkpoint: truncated file");
}

inline uint8_t get_u8(std::istream& is) {
    uint8_t v;
    get_bytes(is, &v, 1);
    return v;
}

inline uint32_t get_u32(std::istream& is) {
    uint8_t b[4];
    get_bytes(is, b, 4);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline uint64_t get_u64(std::istream& is) {
    const uint64_t lo = get_u32(is);
    const uint64_t hi = get_u32(is);
    return lo | hi << 32;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

struct NamedTensor {
    std::vector<uint32_t> dims;
    std::vector<double> data;
};

inline void put_tensor(std::ostream& os, const std::string& name,
                       const std::vector<uint32_t>& dims, const double* data, size_t n) {
    if (name.size() > 0xffff) throw std::invalid_argument("checkpoint: tensor name too long");
    const uint16_t len = static_cast<uint16_t>(name.size());
    put_u8(os, static_cast<uint8_t>(len));
    put_u8(os, static_cast<uint8_t>(len >> 8));
    put_bytes(os, name.data(), name.size());
    put_u8(os, static_cast<uint8_t>(dims.size()));
    size_t prod = 1;
    for (uint32_t d : dims) {
        put_u32(os, d);
        prod *= d;
    }
    if (prod != n) throw std::logic_error("checkpoint: dims do not match payload for " + name);
    for (size_t i = 0; i < n; ++i) put_f64(os, data[i]);
}

inline std::pair<std::string, NamedTensor> get_tensor(std::istream& is) {
    const uint16_t len = static_cast<uint16_t>(get_u8(is)) |
                         static_cast<uint16_t>(static_cast<uint16_t>(get_u8(is)) << 8);
    std::string name(len, '\0');
    get_bytes(is, name.data(), len);
    NamedTensor t;
    const uint8_t nd = get_u8(is);
    size_t prod = 1;
    for (uint8_t i = 0; i < nd; ++i) {
        t.dims.push_back(get_u32(is));
        prod *= t.dims.back();
    }
    if (prod > (1u << 28)) throw std::runtime_error("checkpoint: tensor too large: " + name);
    t.data.resize(prod);
    for (auto& v : t.data) v = get_f64(is);
    return {std::move(name), std::move(t)};
}

inline void collect_conv(std::vector<std::pair<std::string, NamedTensor>>& out,
                         const std::string& stem, const ConvParams& p, bool with_slope) {
    NamedTensor w;
    w.dims = {static_cast<uint32_t>(p.out_ch), static_cast<uint32_t>(p.in_ch),
              static_cast<uint32_t>(p.kh), static_cast<uint32_t>(p.kw)};
    w.data = p.weight;
    out.emplace_back(stem + ".weight", std::move(w));
    NamedTensor b;
    b.dims = {static_cast<uint32_t>(p.out_ch)};
    b.data = p.bias;
    out.emplace_back(stem + ".bias", std::move(b));
    if (with_slope) {
        NamedTensor s;
        s.dims = {1};
        s.data = {p.prelu_slope};
        out.emplace_back(stem + ".slope", std::move(s));
    }
}

inline ConvParams conv_from(const std::map<std::string, NamedTensor>& ts, const std::string& stem,
                            bool with_slope) {
    auto need = [&ts](const std::string& key) -> const NamedTensor& {
        auto it = ts.find(key);
        if (it == ts.end()) throw std::runtime_error("checkpoint: missing tensor " + key);
        return it->second;
    };
    const NamedTensor& w = need(stem + ".weight");
    if (w.dims.size() != 4) throw std::runtime_error("checkpoint: bad dims for " + stem + ".weight");
    ConvParams p(static_cast<int>(w.dims[0]), static_cast<int>(w.dims[1]),
                 static_cast<int>(w.dims[2]), static_cast<int>(w.dims[3]));
    p.weight = w.data;
    const NamedTensor& b = need(stem + ".bias");
    if (b.data.size() != p.bias.size())
        throw std::runtime_error("checkpoint: bad dims for " + stem + ".bias");
    p.bias = b.data;
    if (with_slope) {
        const NamedTensor& s = need(stem + ".slope");
        if (s.data.size() != 1)
            throw std::runtime_error("checkpoint: bad dims for " + stem + ".slope");
        p.prelu_slope = s.data[0];
    }
    return p;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ModelState& m) {
    using namespace detail;
    std::vector<std::pair<std::string, NamedTensor>> tensors;
    collect_conv(tensors, "cp.conv1", m.cp.c1, true);
    collect_conv(tensors, "cp.conv2", m.cp.c2, true);
    collect_conv(tensors, "cp.conv3", m.cp.c3, true);
    collect_conv(tensors, "cp.conv4", m.cp.c4, false);
    if (m.te.mode == TeMode::Ibm) {
        collect_conv(tensors, "te.proj", m.te.ibm.proj, false);
    } else if (m.te.mode == TeMode::Pbm) {
        collect_conv(tensors, "te.conv1", m.te.pbm.c1, true);
        collect_conv(tensors, "te.conv2", m.te.pbm.c2, true);
        collect_conv(tensors, "te.conv3", m.te.pbm.c3, true);
        collect_conv(tensors, "te.proj", m.te.pbm.proj, false);
    }
    for (const auto& [name, slot] : m.adam.slots) {
        NamedTensor mm;
        mm.dims = {static_cast<uint32_t>(slot.m.size())};
        mm.data = slot.m;
        tensors.emplace_back("adam.m." + name, std::move(mm));
        NamedTensor vv;
        vv.dims = {static_cast<uint32_t>(slot.v.size())};
        vv.data = slot.v;
        tensors.emplace_back("adam.v." + name, std::move(vv));
    }

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    put_bytes(os, kCkptMagic, 8);
    put_u32(os, kCkptVersion);
    put_u8(os, static_cast<uint8_t>(m.te.mode));
    put_u8(os, static_cast<uint8_t>(m.routing));
    put_f64(os, m.te.fixed_t);
    put_u32(os, static_cast<uint32_t>(m.epoch));
    put_u64(os, static_cast<uint64_t>(m.adam.step));
    put_f64(os, m.adam.lr_scale);
    put_u32(os, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) put_tensor(os, name, t.dims, t.data.data(), t.data.size());
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline ModelState load_checkpoint(const std::string& path) {
    using namespace detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    get_bytes(is, magic, 8);
    if (std::memcmp(magic, kCkptMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const uint32_t version = get_u32(is);
    if (version != kCkptVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    ModelState m;
    const uint8_t mode = get_u8(is);
    if (mode > 2) throw std::runtime_error("checkpoint: bad threshold mode");
    m.te.mode = static_cast<TeMode>(mode);
    const uint8_t routing = get_u8(is);
    if (routing > 1) throw std::runtime_error("checkpoint: bad routing");
    m.routing = static_cast<Routing>(routing);
    m.te.fixed_t = get_f64(is);
    m.epoch = static_cast<int>(get_u32(is));
    m.adam.step = static_cast<long>(get_u64(is));
    m.adam.lr_scale = get_f64(is);
    const uint32_t n_tensors = get_u32(is);
    std::map<std::string, NamedTensor> ts;
    for (uint32_t i = 0; i < n_tensors; ++i) ts.insert(get_tensor(is));

    m.cp.c1 = conv_from(ts, "cp.conv1", true);
    m.cp.c2 = conv_from(ts, "cp.conv2", true);
    m.cp.c3 = conv_from(ts, "cp.conv3", true);
    m.cp.c4 = conv_from(ts, "cp.conv4", false);
    if (m.te.mode == TeMode::Ibm) {
        m.te.ibm.proj = conv_from(ts, "te.proj", false);
    } else if (m.te.mode == TeMode::Pbm) {
        m.te.pbm.c1 = conv_from(ts, "te.conv1", true);
        m.te.pbm.c2 = conv_from(ts, "te.conv2", true);
        m.te.pbm.c3 = conv_from(ts, "te.conv3", true);
        m.te.pbm.proj = conv_from(ts, "te.proj", false);
    }
    for (const auto& [name, t] : ts) {
        if (name.rfind("adam.m.", 0) == 0) {
            const std::string pname = name.substr(7);
            auto vit = ts.find("adam.v." + pname);
            if (vit == ts.end())
                throw std::runtime_error("checkpoint: missing tensor adam.v." + pname);
            if (t.data.size() != vit->second.data.size())
                throw std::runtime_error("checkpoint: moment size mismatch for " + pname);
            m.adam.slots[pname] = {t.data, vit->second.data};
        }
    }
    return m;
}

}  // namespace crowdloc
