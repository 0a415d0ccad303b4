#pragma once

// Versioned flat binary checkpoint: little-endian, IEEE-754 doubles, plus a
// free-form JSON metadata blob (model config, normalizer, skeleton, ...).
//
//   magic "MSDCKPT\0" | u32 version | u64 meta_len | meta bytes (JSON)
//   u64 param_count | { u32 name_len | name | u64 rows | u64 cols | f64[] }*

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msd/errors.hpp"
#include "msd/nn.hpp"

namespace msd {

using Json = nlohmann::ordered_json;

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IOFailure("checkpoint: truncated read");
    return v;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'M', 'S', 'D', 'C', 'K', 'P', 'T', '\0'};
inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const ParameterStore& ps, const Json& meta) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IOFailure("cannot open checkpoint for writing: " + path);
    os.write(kCheckpointMagic, 8);
    detail::write_pod<uint32_t>(os, kCheckpointVersion);
    std::string meta_str = meta.dump();
    detail::write_pod<uint64_t>(os, meta_str.size());
    os.write(meta_str.data(), std::streamsize(meta_str.size()));
    detail::write_pod<uint64_t>(os, ps.size());
    for (size_t i = 0; i < ps.size(); ++i) {
        const Parameter& p = ps[i];
        detail::write_pod<uint32_t>(os, uint32_t(p.name.size()));
        os.write(p.name.data(), std::streamsize(p.name.size()));
        detail::write_pod<uint64_t>(os, p.rows);
        detail::write_pod<uint64_t>(os, p.cols);
        os.write(reinterpret_cast<const char*>(p.value->data()),
                 std::streamsize(p.numel() * sizeof(double)));
    }
    if (!os) throw IOFailure("checkpoint write failed: " + path);
}

struct Checkpoint {
    Json meta;
    ParameterStore params;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingArtifact("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw IOFailure("not a checkpoint file: " + path);
    uint32_t version = detail::read_pod<uint32_t>(is);
    if (version != kCheckpointVersion) throw IOFailure("unsupported checkpoint version");
    uint64_t meta_len = detail::read_pod<uint64_t>(is);
    std::string meta_str(meta_len, '\0');
    is.read(meta_str.data(), std::streamsize(meta_len));
    Checkpoint out;
    out.meta = Json::parse(meta_str);
    uint64_t count = detail::read_pod<uint64_t>(is);
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = detail::read_pod<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        uint64_t rows = detail::read_pod<uint64_t>(is);
        uint64_t cols = detail::read_pod<uint64_t>(is);
        std::vector<double> vals(rows * cols);
        is.read(reinterpret_cast<char*>(vals.data()),
                std::streamsize(vals.size() * sizeof(double)));
        if (!is) throw IOFailure("checkpoint: truncated parameter data");
        out.params.add(name, rows, cols, std::move(vals));
    }
    return out;
}

}  // namespace msd
