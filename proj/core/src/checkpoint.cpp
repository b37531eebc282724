#include "ketlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ketlab {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {

constexpr std::uint32_t kMagic = 0x4c54454bU;  // "KETL"
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream &os, T v) {
    os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream &is) {
    T v{};
    is.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(Model &model, const std::string &path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    const ModelConfig &cfg = model.config();
    write_pod(os, kMagic);
    write_pod(os, kVersion);
    write_pod<std::int32_t>(os, static_cast<std::int32_t>(cfg.variant));
    write_pod<std::int32_t>(os, cfg.layers);
    write_pod<std::int32_t>(os, cfg.width);
    write_pod<std::int32_t>(os, cfg.heads);
    write_pod<std::int32_t>(os, cfg.context);
    write_pod<std::int32_t>(os, cfg.vocab);
    write_pod<std::int32_t>(os, cfg.topo_k);
    write_pod<std::int32_t>(os, cfg.topo_dim);
    write_pod<std::int32_t>(os, cfg.block_size);
    write_pod<std::int32_t>(os, cfg.denoise_steps);
    write_pod(os, cfg.carrier_temp);
    write_pod(os, cfg.seed);
    write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(model.parameter_count()));
    for (const auto &p : model.parameters())
        os.write(reinterpret_cast<const char *>(p.data()), static_cast<std::streamsize>(p.numel() * sizeof(double)));
    for (std::uint64_t word : model.rng().state()) write_pod(os, word);
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Model load_checkpoint(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
    if (read_pod<std::uint32_t>(is) != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    ModelConfig cfg;
    cfg.variant = static_cast<VariantId>(read_pod<std::int32_t>(is));
    cfg.layers = read_pod<std::int32_t>(is);
    cfg.width = read_pod<std::int32_t>(is);
    cfg.heads = read_pod<std::int32_t>(is);
    cfg.context = read_pod<std::int32_t>(is);
    cfg.vocab = read_pod<std::int32_t>(is);
    cfg.topo_k = read_pod<std::int32_t>(is);
    cfg.topo_dim = read_pod<std::int32_t>(is);
    cfg.block_size = read_pod<std::int32_t>(is);
    cfg.denoise_steps = read_pod<std::int32_t>(is);
    cfg.carrier_temp = read_pod<double>(is);
    cfg.seed = read_pod<std::uint64_t>(is);
    Model model(cfg);
    const auto count = read_pod<std::uint64_t>(is);
    if (count != static_cast<std::uint64_t>(model.parameter_count()))
        throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
    for (auto &p : model.parameters())
        is.read(reinterpret_cast<char *>(p.data()), static_cast<std::streamsize>(p.numel() * sizeof(double)));
    std::array<std::uint64_t, 4> state{};
    for (auto &word : state) word = read_pod<std::uint64_t>(is);
    model.rng().set_state(state);
    if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
    return model;
}

}  // namespace ketlab
