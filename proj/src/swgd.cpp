#include <stbn/swgd.h>

#include <stbn/error.h>
#include <stbn/parallel.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

namespace stbn {

SliceDirection SliceDirection::from(std::vector<double> v) {
    double n2 = 0.0;
    for (double c : v) n2 += c * c;
    if (!(n2 > 0.0) || !std::isfinite(n2)) throw InvalidParameter("slice direction must be a nonzero vector");
    const double inv = 1.0 / std::sqrt(n2);
    for (double &c : v) c *= inv;
    return {std::move(v)};
}

SliceDirection SliceDirection::random(int dim, Rng &rng) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (double &c : v) {
            c = rng.normal();
            n2 += c * c;
        }
    } while (n2 < 1e-300);
    return from(std::move(v));
}

void OptimizerConfig::validate() const {
    if (iterations < 0) throw InvalidParameter("iters: must be >= 0");
    if (batch_size < 1) throw InvalidParameter("batch: must be >= 1");
    if (!(learning_rate > 0.0)) throw InvalidParameter("lr: must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw InvalidParameter("beta1: must be in [0,1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw InvalidParameter("beta2: must be in [0,1)");
    if (!(adam_epsilon > 0.0)) throw InvalidParameter("eps: must be > 0");
    if (!(lipschitz_scale > 0.0)) throw InvalidParameter("lipschitz: must be > 0");
    if (threads < 1) throw InvalidParameter("threads: must be >= 1");
}

void AdamState::update(std::span<double> params, std::span<const double> grad, const OptimizerConfig &cfg) {
    if (params.size() != grad.size() || params.size() != first_moment.size())
        throw InvalidInput("adam: state, parameter and gradient sizes differ");
    ++step;
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        first_moment[i] = cfg.adam_beta1 * first_moment[i] + (1.0 - cfg.adam_beta1) * g;
        second_moment[i] = cfg.adam_beta2 * second_moment[i] + (1.0 - cfg.adam_beta2) * g * g;
        const double mhat = first_moment[i] / c1, vhat = second_moment[i] / c2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
    }
}

namespace {

void filter_into(const SampleTile &tile, const SpatioTemporalKernel &kernel, CellIndex center, double z,
                 std::vector<SampleRef> &members) {
    members.clear();
    const int r = kernel.radius_x();
    const int spp = tile.spp();
    for (int lag = kernel.min_lag(); lag <= kernel.max_lag(); ++lag)
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                if (!(std::abs(kernel.at(dx, dy, lag)) > z)) continue;
                const auto cell = uint32_t(tile.cell_id({center.x - dx, center.y - dy, center.t - lag}));
                for (int s = 0; s < spp; ++s) members.push_back({cell, uint32_t(s)});
            }
}

std::size_t coord_offset(const SampleTile &tile, SampleRef m) {
    return std::size_t(m.cell) * tile.stride() + std::size_t(m.slot) * std::size_t(tile.dim());
}

void sort_with_index(std::vector<double> &values, std::vector<uint32_t> &order) {
    order.resize(values.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        return values[a] < values[b] || (values[a] == values[b] && a < b);
    });
    std::vector<double> sorted(values.size());
    for (std::size_t k = 0; k < order.size(); ++k) sorted[k] = values[order[k]];
    values.swap(sorted);
}

// Scratch and output of one batch element.
struct ElementWork {
    std::vector<SampleRef> members;
    std::vector<double> xs, ys;
    std::vector<uint32_t> order;
    std::vector<double> theta;
    std::vector<std::pair<std::size_t, double>> contributions;  // (coord offset, coefficient along theta)
    double distance = 0.0, squared = 0.0;
    long empty = 0;
};

// Pairs the subset in `w.members` with fresh targets drawn from `rng` and
// fills the gradient coefficients.
void evaluate_members(const SampleTile &tile, Rng &rng, ElementWork &w) {
    const std::size_t m = w.members.size();
    const int d = tile.dim();
    const auto &coords = tile.coords();

    w.xs.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double *p = coords.data() + coord_offset(tile, w.members[i]);
        double dot = 0.0;
        for (int c = 0; c < d; ++c) dot += p[c] * w.theta[std::size_t(c)];
        w.xs[i] = dot;
    }
    sort_with_index(w.xs, w.order);

    w.ys.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int c = 0; c < d; ++c) dot += rng.uniform() * w.theta[std::size_t(c)];
        w.ys[i] = dot;
    }
    std::sort(w.ys.begin(), w.ys.end());

    double sq = 0.0;
    for (std::size_t k = 0; k < m; ++k) sq += (w.xs[k] - w.ys[k]) * (w.xs[k] - w.ys[k]);
    sq /= double(m);
    w.squared = sq;
    w.distance = std::sqrt(sq);

    // Scatter by member index so the accumulation order is fixed.
    std::vector<double> coef(m);
    for (std::size_t k = 0; k < m; ++k) coef[w.order[k]] = 2.0 / double(m) * (w.xs[k] - w.ys[k]);
    w.contributions.resize(m);
    for (std::size_t i = 0; i < m; ++i) w.contributions[i] = {coord_offset(tile, w.members[i]), coef[i]};
}

void draw_element(const SampleTile &tile, const SpatioTemporalKernel &kernel, Rng &rng, BatchDraw &draw,
                  ElementWork &w) {
    const Dims3 &dims = tile.dims();
    draw.center = {int(rng.uniform_index(uint64_t(dims.x))), int(rng.uniform_index(uint64_t(dims.y))),
                   int(rng.uniform_index(uint64_t(dims.t)))};
    draw.theta = SliceDirection::random(tile.dim(), rng);
    w.empty = 0;
    for (;;) {
        double z;
        do {
            z = rng.uniform() * kernel.max_weight();
        } while (z <= 0.0);
        draw.z = z;
        filter_into(tile, kernel, draw.center, z, w.members);
        if (!w.members.empty()) break;
        ++w.empty;
    }
    w.theta = draw.theta.theta;
}

GradientEstimate reduce(const SampleTile &tile, std::vector<ElementWork> &work) {
    GradientEstimate est;
    est.field.assign(tile.coords().size(), 0.0);
    const int d = tile.dim();
    double dist = 0.0, sq = 0.0;
    for (const ElementWork &w : work) {
        for (auto [off, c] : w.contributions)
            for (int k = 0; k < d; ++k) est.field[off + std::size_t(k)] += c * w.theta[std::size_t(k)];
        dist += w.distance;
        sq += w.squared;
        est.empty_subsets += w.empty;
    }
    const double inv = 1.0 / double(work.size());
    for (double &g : est.field) g *= inv;
    est.mean_distance = dist * inv;
    est.mean_squared = sq * inv;
    return est;
}

}  // namespace

FilteredSubset filter_subset(const SampleTile &tile, const SpatioTemporalKernel &kernel, CellIndex center,
                             double z) {
    if (!(z >= 0.0)) throw InvalidParameter("threshold must be >= 0");
    if (z >= kernel.max_weight())
        throw EmptySubsetError("threshold " + std::to_string(z) + " >= kernel max weight " +
                               std::to_string(kernel.max_weight()));
    FilteredSubset s;
    s.center = center;
    s.threshold = z;
    filter_into(tile, kernel, center, z, s.members);
    return s;
}

Projection project(const SampleTile &tile, const FilteredSubset &subset, const SliceDirection &theta) {
    if (subset.members.empty()) throw InvalidInput("project: empty subset");
    if (theta.theta.size() != std::size_t(tile.dim())) throw InvalidInput("project: slice dimension mismatch");
    Projection p;
    p.values.resize(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const double *x = tile.coords().data() + coord_offset(tile, subset.members[i]);
        double dot = 0.0;
        for (std::size_t c = 0; c < theta.theta.size(); ++c) dot += x[c] * theta.theta[c];
        p.values[i] = dot;
    }
    sort_with_index(p.values, p.order);
    return p;
}

std::vector<double> target_projection(std::size_t count, const SliceDirection &theta, const TargetDensity &density,
                                      Rng &rng) {
    if (count < 1) throw InvalidParameter("target_projection: count must be >= 1");
    if (theta.theta.size() != std::size_t(density.dim)) throw InvalidInput("target_projection: dimension mismatch");
    std::vector<double> ys(count);
    for (double &y : ys) {
        double dot = 0.0;
        for (double c : theta.theta) dot += rng.uniform() * c;
        y = dot;
    }
    std::sort(ys.begin(), ys.end());
    return ys;
}

double w1d(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw InvalidInput("w1d: length mismatch");
    if (xs.empty()) throw InvalidInput("w1d: empty input");
    double sq = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) sq += (xs[k] - ys[k]) * (xs[k] - ys[k]);
    return std::sqrt(sq / double(xs.size()));
}

std::vector<double> w1d_gradient(const SampleTile &tile, const FilteredSubset &subset, const SliceDirection &theta,
                                 std::span<const double> targets) {
    if (targets.size() != subset.size()) throw InvalidInput("w1d_gradient: subset/target length mismatch");
    const Projection p = project(tile, subset, theta);
    const std::size_t m = subset.size(), d = std::size_t(tile.dim());
    std::vector<double> grad(m * d, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
        const double c = 2.0 / double(m) * (p.values[k] - targets[k]);
        for (std::size_t j = 0; j < d; ++j) grad[p.order[k] * d + j] += c * theta.theta[j];
    }
    return grad;
}

BatchDraw draw_batch_element(const SampleTile &tile, const SpatioTemporalKernel &kernel, Rng &rng, long *empty) {
    BatchDraw draw;
    ElementWork w;
    draw_element(tile, kernel, rng, draw, w);
    if (empty) *empty += w.empty;
    return draw;
}

GradientEstimate estimate_gradient(const SampleTile &tile, const SpatioTemporalKernel &kernel, int batch_size,
                                   uint64_t seed, uint64_t iteration, int threads) {
    if (batch_size < 1) throw InvalidParameter("batch size must be >= 1");
    std::vector<ElementWork> work(static_cast<std::size_t>(batch_size));
    parallel_for(batch_size, threads, [&](int begin, int end) {
        BatchDraw draw;
        for (int e = begin; e < end; ++e) {
            Rng rng = element_rng(seed, iteration, uint64_t(e));
            draw_element(tile, kernel, rng, draw, work[std::size_t(e)]);
            evaluate_members(tile, rng, work[std::size_t(e)]);
        }
    });
    return reduce(tile, work);
}

GradientEstimate estimate_gradient(const SampleTile &tile, const SpatioTemporalKernel &kernel,
                                   std::span<const BatchDraw> draws, uint64_t seed, uint64_t iteration) {
    if (draws.empty()) throw InvalidParameter("batch size must be >= 1");
    std::vector<ElementWork> work(draws.size());
    for (std::size_t e = 0; e < draws.size(); ++e) {
        ElementWork &w = work[e];
        filter_into(tile, kernel, draws[e].center, draws[e].z, w.members);
        if (w.members.empty()) throw EmptySubsetError("forced draw selects no samples");
        if (draws[e].theta.theta.size() != std::size_t(tile.dim()))
            throw InvalidInput("forced draw: slice dimension mismatch");
        w.theta = draws[e].theta.theta;
        Rng rng = element_rng(seed, iteration, e);
        evaluate_members(tile, rng, w);
    }
    return reduce(tile, work);
}

double reflect_unit(double x) {
    if (x >= 0.0 && x < 1.0) return x;
    if (!std::isfinite(x)) return 0.5;
    x = std::fmod(x, 2.0);
    if (x < 0.0) x += 2.0;
    if (x >= 1.0) x = 2.0 - x;
    if (x >= 1.0) x = std::nextafter(1.0, 0.0);
    return x;
}

std::vector<std::string> check_tile_kernel_ratio(const Dims3 &tile, const SpatioTemporalKernel &kernel) {
    const Dims3 e = kernel.extent();
    const char *names[] = {"x", "y", "t"};
    const int tdims[] = {tile.x, tile.y, tile.t};
    const int kdims[] = {e.x, e.y, e.t};
    std::vector<std::string> warnings;
    for (int a = 0; a < 3; ++a) {
        if (kdims[a] > tdims[a])
            throw InvalidParameter(std::string("kernel extent exceeds tile along ") + names[a] + " (" +
                                   std::to_string(kdims[a]) + " > " + std::to_string(tdims[a]) + ")");
        if (tdims[a] < kMinTileToKernelRatio * kdims[a])
            warnings.push_back(std::string("tile/kernel ratio along ") + names[a] + " is " +
                               std::to_string(double(tdims[a]) / kdims[a]) + " (< " +
                               std::to_string(kMinTileToKernelRatio) + "x); expect tiling artifacts");
    }
    return warnings;
}

OptimizeResult optimize(SampleTile tile, const SpatioTemporalKernel &kernel, const OptimizerConfig &config,
                        const ProgressCallback &progress) {
    config.validate();
    OptimizeResult result;
    result.warnings = check_tile_kernel_ratio(tile.dims(), kernel);
    if (kernel.policy() != BoundaryPolicy::toroidal)
        result.warnings.push_back("optimizing with a non-toroidal kernel policy; tiles will not wrap seamlessly");

    AdamState adam(tile.coords().size());
    const auto start = std::chrono::steady_clock::now();
    result.log.reserve(std::size_t(config.iterations));
    for (int it = 0; it < config.iterations; ++it) {
        const GradientEstimate g =
            estimate_gradient(tile, kernel, config.batch_size, config.seed, uint64_t(it), config.threads);
        adam.update(tile.coords(), g.field, config);
        for (double &c : tile.coords()) c = reflect_unit(c);

        ConvergenceEntry e;
        e.iteration = it;
        e.objective = config.lipschitz_scale * g.mean_distance;
        e.empty_subset_count = g.empty_subsets;
        e.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(e);
        if (progress) progress(e);
    }
    result.tile = std::move(tile);
    return result;
}

void write_convergence_csv(const std::vector<ConvergenceEntry> &log, std::ostream &out) {
    out << "iteration,objective,empty_subset_count,wall_ms\n";
    out.precision(17);
    for (const auto &e : log)
        out << e.iteration << ',' << e.objective << ',' << e.empty_subset_count << ',' << e.wall_ms << '\n';
}

}  // namespace stbn
