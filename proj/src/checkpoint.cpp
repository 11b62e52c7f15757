#include "airkrig/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

namespace airkrig {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw CheckpointMismatchError("truncated checkpoint: " + path);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    write_u32(out, kFormatVersion);
    write_u32(out, static_cast<std::uint32_t>(params.all().size()));
    for (const auto& p : params.all()) {
        write_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_u32(out, static_cast<std::uint32_t>(p.shape.size()));
        for (int d : p.shape) write_u32(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(p.value.data()),
                  static_cast<std::streamsize>(p.value.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void load_checkpoint(const std::string& path, ModelParams& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    const std::uint32_t version = read_u32(in, path);
    if (version != kFormatVersion)
        throw CheckpointMismatchError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = read_u32(in, path);
    if (count != params.all().size())
        throw CheckpointMismatchError("checkpoint has " + std::to_string(count) +
                                      " parameters, model expects " +
                                      std::to_string(params.all().size()));
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::uint32_t name_len = read_u32(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(in, path);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_u32(in, path));
        if (!in) throw CheckpointMismatchError("truncated checkpoint: " + path);

        if (!params.has(name)) throw CheckpointMismatchError("unknown parameter in checkpoint: " + name);
        auto& p = params.at(name);
        if (p.shape != shape) throw CheckpointMismatchError("shape mismatch for parameter " + name);
        in.read(reinterpret_cast<char*>(p.value.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(float)));
        if (!in) throw CheckpointMismatchError("truncated checkpoint: " + path);
    }
}

}  // namespace airkrig
