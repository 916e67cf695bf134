#include <stbn/tile.h>

#include <stbn/error.h>
#include <stbn/rng.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace stbn {

namespace {

template <typename T>
void put_le(std::ostream &out, T v) {
    std::array<char, sizeof(T)> b;
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = char((uint64_t(v) >> (8 * i)) & 0xff);
    out.write(b.data(), b.size());
}

template <typename T>
T get_le(const unsigned char *p) {
    uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= uint64_t(p[i]) << (8 * i);
    return T(v);
}

}  // namespace

SampleTile::SampleTile(Dims3 dims, int spp, int dim, uint64_t seed)
    : dims_(dims), spp_(spp), dim_(dim), seed_(seed) {
    if (!dims.positive() || spp < 1 || dim < 1)
        throw InvalidParameter("tile sizes must be positive (dims " + dims.to_string() +
                               ", spp " + std::to_string(spp) + ", dim " + std::to_string(dim) + ")");
    data_.assign(sample_count() * std::size_t(dim), 0.0);
}

SampleTile init_random(Dims3 dims, int spp, int dim, uint64_t seed) {
    SampleTile tile(dims, spp, dim, seed);
    Rng rng(seed);
    for (double &c : tile.coords()) c = rng.uniform();
    return tile;
}

float to_payload_float(double v) {
    float f = float(v);
    if (f >= 1.0f) f = std::nextafter(1.0f, 0.0f);
    if (f < 0.0f) f = 0.0f;
    return f;
}

void write_tile(const SampleTile &tile, std::ostream &out) {
    out.write(kTileMagic, sizeof(kTileMagic));
    put_le<uint32_t>(out, kTileVersion);
    put_le<uint32_t>(out, uint32_t(tile.dims().x));
    put_le<uint32_t>(out, uint32_t(tile.dims().y));
    put_le<uint32_t>(out, uint32_t(tile.dims().t));
    put_le<uint32_t>(out, uint32_t(tile.spp()));
    put_le<uint32_t>(out, uint32_t(tile.dim()));
    put_le<uint64_t>(out, tile.seed());
    for (double c : tile.coords()) put_le<uint32_t>(out, std::bit_cast<uint32_t>(to_payload_float(c)));
    if (!out) throw IoError("failed writing tile payload");
}

SampleTile read_tile(std::istream &in) {
    std::array<unsigned char, kTileHeaderBytes> h{};
    in.read(reinterpret_cast<char *>(h.data()), h.size());
    if (in.gcount() >= std::streamsize(sizeof(kTileMagic)) && std::memcmp(h.data(), kTileMagic, 8) != 0)
        throw MagicMismatchError("tile magic mismatch (expected STBNTILE)");
    if (in.gcount() != std::streamsize(h.size())) throw TruncatedPayloadError("tile header truncated");

    const auto version = get_le<uint32_t>(h.data() + 8);
    if (version != kTileVersion)
        throw UnsupportedVersionError("unsupported tile version " + std::to_string(version));
    const auto X = get_le<uint32_t>(h.data() + 12), Y = get_le<uint32_t>(h.data() + 16),
               T = get_le<uint32_t>(h.data() + 20), spp = get_le<uint32_t>(h.data() + 24),
               dim = get_le<uint32_t>(h.data() + 28);
    const auto seed = get_le<uint64_t>(h.data() + 32);
    constexpr uint32_t kMax = 1u << 30;
    if (X == 0 || Y == 0 || T == 0 || spp == 0 || dim == 0 || X > kMax || Y > kMax || T > kMax || spp > kMax ||
        dim > kMax)
        throw TileFormatError("tile header has invalid sizes");

    SampleTile tile(Dims3{int(X), int(Y), int(T)}, int(spp), int(dim), seed);
    auto &coords = tile.coords();
    std::vector<unsigned char> payload(coords.size() * 4);
    in.read(reinterpret_cast<char *>(payload.data()), std::streamsize(payload.size()));
    if (std::size_t(in.gcount()) != payload.size())
        throw TruncatedPayloadError("tile payload truncated: expected " + std::to_string(payload.size()) +
                                    " bytes, got " + std::to_string(in.gcount()));
    if (in.peek() != std::char_traits<char>::eof())
        throw TruncatedPayloadError("tile payload length mismatch: trailing bytes after payload");
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const float f = std::bit_cast<float>(get_le<uint32_t>(payload.data() + 4 * i));
        if (!(f >= 0.0f && f < 1.0f)) throw TileFormatError("tile coordinate outside [0,1) at index " + std::to_string(i));
        coords[i] = double(f);
    }
    return tile;
}

void write_tile(const SampleTile &tile, const std::filesystem::path &path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    write_tile(tile, f);
}

SampleTile read_tile(const std::filesystem::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open tile file '" + path.string() + "'");
    return read_tile(f);
}

}  // namespace stbn
