#pragma once

#include <stbn/kernels.h>
#include <stbn/rng.h>
#include <stbn/tile.h>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace stbn {

// A sample of the tile addressed by linear cell id and slot within the cell.
struct SampleRef {
    uint32_t cell = 0;
    uint32_t slot = 0;
    bool operator==(const SampleRef &) const = default;
};

// Samples of every cell c whose kernel weight |g(center - c)| exceeds the
// threshold, i.e. the cells that the pixel-frame `center` sees through g.
// Members are listed in kernel-scan order (lag, dy, dx), all slots of a
// passing cell consecutively.
struct FilteredSubset {
    CellIndex center;
    double threshold = 0.0;
    std::vector<SampleRef> members;

    std::size_t size() const { return members.size(); }
};

struct SliceDirection {
    std::vector<double> theta;

    // Normalizes `v`; throws InvalidParameter on a zero vector.
    static SliceDirection from(std::vector<double> v);
    // Uniform on S^{d-1}.
    static SliceDirection random(int dim, Rng &rng);
};

// Uniform density on [0,1)^dim; the only target supported.
struct TargetDensity {
    int dim = 2;
};

struct OptimizerConfig {
    int iterations = 10000;
    int batch_size = 4000;
    double learning_rate = 1e-2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    double adam_epsilon = 1e-8;
    uint64_t seed = 7;
    double lipschitz_scale = 1.0;
    int threads = 1;

    // Throws InvalidParameter naming the offending field.
    void validate() const;
};

struct AdamState {
    std::vector<double> first_moment, second_moment;
    long step = 0;

    explicit AdamState(std::size_t n = 0) : first_moment(n, 0.0), second_moment(n, 0.0) {}
    // One bias-corrected Adam update of `params` against `grad`.
    void update(std::span<double> params, std::span<const double> grad, const OptimizerConfig &cfg);
};

// Throws EmptySubsetError when z >= max_weight.
FilteredSubset filter_subset(const SampleTile &tile, const SpatioTemporalKernel &kernel, CellIndex center,
                             double z);

struct Projection {
    std::vector<double> values;   // ascending
    std::vector<uint32_t> order;  // order[k] = member index holding rank k
};

// Ties are broken by member index.
Projection project(const SampleTile &tile, const FilteredSubset &subset, const SliceDirection &theta);

std::vector<double> target_projection(std::size_t count, const SliceDirection &theta, const TargetDensity &density,
                                      Rng &rng);

// Exact 1D W2 between equal-size sorted lists (monotone pairing).
double w1d(std::span<const double> xs, std::span<const double> ys);

// Gradient of the squared distance w.r.t. each member's coordinates;
// row i (dim values) belongs to subset.members[i].
std::vector<double> w1d_gradient(const SampleTile &tile, const FilteredSubset &subset, const SliceDirection &theta,
                                 std::span<const double> targets);

// One Monte Carlo draw of the sliced bound: kernel instance, threshold, slice.
struct BatchDraw {
    CellIndex center;
    double z = 0.0;
    SliceDirection theta;
};

struct GradientEstimate {
    std::vector<double> field;   // shaped like tile.coords()
    double mean_distance = 0.0;  // batch mean of the 1D W2
    double mean_squared = 0.0;   // batch mean of its square (the differentiated quantity)
    long empty_subsets = 0;
};

// Random stream of batch element `element` in iteration `iteration`.
inline Rng element_rng(uint64_t seed, uint64_t iteration, uint64_t element) {
    return Rng(seed, iteration, element);
}

// Draws center, z, theta from `rng`, resampling z on empty subsets (counted
// in *empty).
BatchDraw draw_batch_element(const SampleTile &tile, const SpatioTemporalKernel &kernel, Rng &rng, long *empty);

// Averages `batch_size` sliced-W2 gradients. Element e uses the stream
// element_rng(seed, iteration, e); the reduction order is fixed, so the
// result does not depend on `threads`.
GradientEstimate estimate_gradient(const SampleTile &tile, const SpatioTemporalKernel &kernel, int batch_size,
                                   uint64_t seed, uint64_t iteration = 0, int threads = 1);

// Same estimator with caller-supplied draws; targets for draw e come from
// element_rng(seed, iteration, e) after the draw itself.
GradientEstimate estimate_gradient(const SampleTile &tile, const SpatioTemporalKernel &kernel,
                                   std::span<const BatchDraw> draws, uint64_t seed, uint64_t iteration = 0);

// Folds any real back into [0,1) by mirroring at the faces.
double reflect_unit(double x);

struct ConvergenceEntry {
    long iteration = 0;
    double objective = 0.0;
    long empty_subset_count = 0;
    double wall_ms = 0.0;
};

struct OptimizeResult {
    SampleTile tile;
    std::vector<ConvergenceEntry> log;
    std::vector<std::string> warnings;
};

// Checks kernel extent against the tile; throws if it exceeds any axis and
// returns warnings when an axis is under kMinTileToKernelRatio x the extent.
std::vector<std::string> check_tile_kernel_ratio(const Dims3 &tile, const SpatioTemporalKernel &kernel);

using ProgressCallback = std::function<void(const ConvergenceEntry &)>;

OptimizeResult optimize(SampleTile tile, const SpatioTemporalKernel &kernel, const OptimizerConfig &config,
                        const ProgressCallback &progress = {});

void write_convergence_csv(const std::vector<ConvergenceEntry> &log, std::ostream &out);

}  // namespace stbn
