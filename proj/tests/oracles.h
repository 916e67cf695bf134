#pragma once

#include <stbn/kernels.h>
#include <stbn/rng.h>
#include <stbn/sequence.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace stbn::testing {

inline FrameSequence random_sequence(Dims3 d, uint64_t seed) {
    FrameSequence s(d);
    Rng rng(seed);
    for (double &v : s.values()) v = rng.uniform() - 0.5;
    return s;
}

// Direct toroidal sum over the dense kernel grid.
inline FrameSequence brute_toroidal(const FrameSequence &in, const SpatioTemporalKernel &k) {
    const Dims3 d = in.dims();
    FrameSequence out(d);
    const int r = k.radius_x();
    for (int t = 0; t < d.t; ++t)
        for (int y = 0; y < d.y; ++y)
            for (int x = 0; x < d.x; ++x) {
                double acc = 0.0;
                for (int lag = k.min_lag(); lag <= k.max_lag(); ++lag)
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx)
                            acc += k.at(dx, dy, lag) * in.at(wrap(x - dx, d.x), wrap(y - dy, d.y), wrap(t - lag, d.t));
                out.at(x, y, t) = acc;
            }
    return out;
}

// Non-periodic convolution of a 3x3x3 tiled copy, cropped to the center block.
inline FrameSequence tiled_center_block(const FrameSequence &in, const SpatioTemporalKernel &k) {
    const Dims3 d = in.dims();
    const Dims3 big{3 * d.x, 3 * d.y, 3 * d.t};
    FrameSequence tiled(big);
    for (int t = 0; t < big.t; ++t)
        for (int y = 0; y < big.y; ++y)
            for (int x = 0; x < big.x; ++x) tiled.at(x, y, t) = in.at(x % d.x, y % d.y, t % d.t);
    FrameSequence out(d);
    const int r = k.radius_x();
    for (int t = 0; t < d.t; ++t)
        for (int y = 0; y < d.y; ++y)
            for (int x = 0; x < d.x; ++x) {
                double acc = 0.0;
                for (int lag = k.min_lag(); lag <= k.max_lag(); ++lag)
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx) {
                            const int sx = x + d.x - dx, sy = y + d.y - dy, st = t + d.t - lag;
                            if (sx < 0 || sy < 0 || st < 0 || sx >= big.x || sy >= big.y || st >= big.t) continue;
                            acc += k.at(dx, dy, lag) * tiled.at(sx, sy, st);
                        }
                out.at(x, y, t) = acc;
            }
    return out;
}

inline double max_abs_diff(const FrameSequence &a, const FrameSequence &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

// Root of the minimum mean squared transport cost over all m! assignments.
inline double exhaustive_w2(std::vector<double> xs, const std::vector<double> &ys) {
    std::vector<int> perm(xs.size());
    std::iota(perm.begin(), perm.end(), 0);
    double best = INFINITY;
    do {
        double c = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) c += (xs[i] - ys[std::size_t(perm[i])]) * (xs[i] - ys[std::size_t(perm[i])]);
        best = std::min(best, c / double(xs.size()));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::sqrt(best);
}

// Kolmogorov-Smirnov distance of a sample against U[0,1).
inline double ks_uniform(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double n = double(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        d = std::max({d, std::abs(double(i + 1) / n - v[i]), std::abs(v[i] - double(i) / n)});
    return d;
}

}  // namespace stbn::testing
