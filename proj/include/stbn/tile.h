#pragma once

#include <stbn/sequence.h>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace stbn {

struct CellIndex {
    int x = 0, y = 0, t = 0;
    bool operator==(const CellIndex &) const = default;
};

// The optimized variable: an (X, Y, T) torus of cells, each owning `spp`
// points in [0,1)^dim. Storage is cell-major: ((t Y + y) X + x) spp + s,
// then `dim` components.
class SampleTile {
  public:
    SampleTile() = default;
    SampleTile(Dims3 dims, int spp, int dim, uint64_t seed);

    const Dims3 &dims() const { return dims_; }
    int spp() const { return spp_; }
    int dim() const { return dim_; }
    uint64_t seed() const { return seed_; }

    std::size_t cell_count() const { return dims_.volume(); }
    std::size_t sample_count() const { return cell_count() * std::size_t(spp_); }

    CellIndex wrap(CellIndex c) const {
        return {stbn::wrap(c.x, dims_.x), stbn::wrap(c.y, dims_.y), stbn::wrap(c.t, dims_.t)};
    }
    // Linear cell id of a wrapped cell.
    std::size_t cell_id(CellIndex c) const {
        const CellIndex w = wrap(c);
        return (std::size_t(w.t) * std::size_t(dims_.y) + std::size_t(w.y)) * std::size_t(dims_.x) +
               std::size_t(w.x);
    }

    // The spp * dim coordinates owned by the (wrapped) cell.
    std::span<double> samples_in_cell(CellIndex c) {
        return {data_.data() + cell_id(c) * stride(), stride()};
    }
    std::span<const double> samples_in_cell(CellIndex c) const {
        return {data_.data() + cell_id(c) * stride(), stride()};
    }
    std::span<double> sample(CellIndex c, int slot) {
        return samples_in_cell(c).subspan(std::size_t(slot) * std::size_t(dim_), std::size_t(dim_));
    }
    std::span<const double> sample(CellIndex c, int slot) const {
        return samples_in_cell(c).subspan(std::size_t(slot) * std::size_t(dim_), std::size_t(dim_));
    }

    std::vector<double> &coords() { return data_; }
    const std::vector<double> &coords() const { return data_; }

    // Floats per cell.
    std::size_t stride() const { return std::size_t(spp_) * std::size_t(dim_); }

    bool operator==(const SampleTile &) const = default;

  private:
    Dims3 dims_;
    int spp_ = 0, dim_ = 0;
    uint64_t seed_ = 0;
    std::vector<double> data_;
};

// Independent uniform coordinates from MT19937-64 seeded with `seed`.
SampleTile init_random(Dims3 dims, int spp, int dim, uint64_t seed);

inline constexpr char kTileMagic[8] = {'S', 'T', 'B', 'N', 'T', 'I', 'L', 'E'};
inline constexpr uint32_t kTileVersion = 1;
inline constexpr std::size_t kTileHeaderBytes = 40;

// Binary layout: magic[8], version u32, X Y T spp dim u32, seed u64, then
// float32 payload; all little-endian.
void write_tile(const SampleTile &tile, std::ostream &out);
SampleTile read_tile(std::istream &in);
void write_tile(const SampleTile &tile, const std::filesystem::path &path);
SampleTile read_tile(const std::filesystem::path &path);

// Nearest float32 that stays inside [0,1).
float to_payload_float(double v);

// Ratio of tile size to kernel extent below which tiling artifacts appear.
inline constexpr int kMinTileToKernelRatio = 10;

}  // namespace stbn
