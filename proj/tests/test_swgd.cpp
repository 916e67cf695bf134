#include <stbn/error.h>
#include <stbn/percept.h>
#include <stbn/swgd.h>

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.h"

using namespace stbn;
using stbn::testing::exhaustive_w2;
using stbn::testing::ks_uniform;

namespace {

// Small kernel with hand-picked weights on a 3x1x1 support.
SpatioTemporalKernel three_cell_kernel() {
    SpatialKernel ks;
    ks.radius = 1;
    ks.sigma = 1.0;
    ks.weights = {0.0, 0.0, 0.0, 0.9, 0.5, 0.1, 0.0, 0.0, 0.0};
    return compose(ks, TemporalTaps::delta());
}

SpatioTemporalKernel small_kernel() {
    return compose(make_spatial_gaussian(0.8, 0.3), TemporalTaps{0, {0.7, 0.3}});
}

}  // namespace

TEST(FilterSubset, ZeroThresholdTakesSupport) {
    SampleTile tile = init_random({16, 16, 8}, 2, 2, 1);
    SpatioTemporalKernel g = compose(make_spatial_gaussian(2.1), TemporalTaps{0, {0.5, 0.5}});
    FilteredSubset s = filter_subset(tile, g, {3, 4, 5}, 0.0);
    EXPECT_EQ(s.size(), std::size_t(7 * 7 * 2 * 2));
}

TEST(FilterSubset, HandPickedWeights) {
    SampleTile tile = init_random({8, 8, 2}, 1, 2, 1);
    SpatioTemporalKernel g = three_cell_kernel();
    FilteredSubset s = filter_subset(tile, g, {4, 4, 0}, 0.4);
    ASSERT_EQ(s.size(), 2u);
    std::set<std::size_t> cells;
    for (auto m : s.members) cells.insert(m.cell);
    // weight at dx contributes cell center - dx.
    EXPECT_TRUE(cells.count(tile.cell_id({5, 4, 0})));  // dx = -1, w 0.9
    EXPECT_TRUE(cells.count(tile.cell_id({4, 4, 0})));  // dx =  0, w 0.5
    EXPECT_THROW(filter_subset(tile, g, {0, 0, 0}, 0.9), EmptySubsetError);
    EXPECT_THROW(filter_subset(tile, g, {0, 0, 0}, 1.5), EmptySubsetError);
}

TEST(FilterSubset, MatchesFullScan) {
    SampleTile tile = init_random({12, 10, 4}, 1, 2, 1);
    SpatioTemporalKernel g = compose(make_spatial_gaussian(2.1), TemporalTaps{0, {0.6, 0.4}});
    const double z = 0.5 * g.max_weight();
    for (CellIndex c : {CellIndex{0, 0, 0}, CellIndex{11, 9, 3}, CellIndex{5, 0, 2}}) {
        FilteredSubset s = filter_subset(tile, g, c, z);
        std::set<std::size_t> got;
        for (auto m : s.members) got.insert(m.cell);
        std::set<std::size_t> expect;
        for (int t = 0; t < 4; ++t)
            for (int y = 0; y < 10; ++y)
                for (int x = 0; x < 12; ++x) {
                    // Smallest toroidal offset per axis.
                    auto off = [](int a, int n) {
                        int d = wrap(a, n);
                        return d > n / 2 ? d - n : d;
                    };
                    const int dx = off(c.x - x, 12), dy = off(c.y - y, 10), lag = wrap(c.t - t, 4);
                    if (std::abs(dx) > 3 || std::abs(dy) > 3 || lag > 1) continue;
                    if (std::abs(g.at(dx, dy, lag)) > z) expect.insert(tile.cell_id({x, y, t}));
                }
        EXPECT_EQ(got, expect);
        EXPECT_EQ(got.size(), s.size());
    }
}

TEST(SliceDirection, UnitNorm) {
    Rng rng(5);
    for (int d : {1, 2, 3, 10})
        for (int i = 0; i < 100; ++i) {
            SliceDirection s = SliceDirection::random(d, rng);
            double n = 0.0;
            for (double c : s.theta) n += c * c;
            EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
        }
    EXPECT_THROW(SliceDirection::from({0.0, 0.0}), InvalidParameter);
}

TEST(Project, AxisAndNegation) {
    SampleTile tile = init_random({8, 8, 2}, 2, 2, 3);
    SpatioTemporalKernel g = compose(make_spatial_gaussian(2.1), TemporalTaps::delta());
    FilteredSubset s = filter_subset(tile, g, {2, 2, 1}, 0.0);
    Projection px = project(tile, s, SliceDirection::from({1.0, 0.0}));
    std::vector<double> firsts;
    for (auto m : s.members) firsts.push_back(tile.coords()[std::size_t(m.cell) * tile.stride() + m.slot * 2u]);
    std::sort(firsts.begin(), firsts.end());
    EXPECT_EQ(px.values, firsts);

    SliceDirection th = SliceDirection::from({0.3, -0.7});
    Projection a = project(tile, s, th);
    Projection b = project(tile, s, SliceDirection::from({-0.3, 0.7}));
    for (std::size_t k = 0; k < a.values.size(); ++k)
        EXPECT_NEAR(a.values[k], -b.values[a.values.size() - 1 - k], 1e-15);
    EXPECT_TRUE(std::is_sorted(a.values.begin(), a.values.end()));
}

TEST(Project, HandComputedDots) {
    SampleTile tile({4, 1, 1}, 1, 2, 0);
    const double pts[4][2] = {{0.1, 0.2}, {0.5, 0.5}, {0.9, 0.0}, {0.0, 0.9}};
    for (int x = 0; x < 4; ++x) {
        tile.sample({x, 0, 0}, 0)[0] = pts[x][0];
        tile.sample({x, 0, 0}, 0)[1] = pts[x][1];
    }
    FilteredSubset s;
    for (uint32_t c = 0; c < 4; ++c) s.members.push_back({c, 0});
    Projection p = project(tile, s, SliceDirection::from({0.6, 0.8}));
    // 0.22, 0.70, 0.54, 0.72
    ASSERT_EQ(p.values.size(), 4u);
    EXPECT_NEAR(p.values[0], 0.22, 1e-15);
    EXPECT_NEAR(p.values[1], 0.54, 1e-15);
    EXPECT_NEAR(p.values[2], 0.70, 1e-15);
    EXPECT_NEAR(p.values[3], 0.72, 1e-15);
    EXPECT_EQ(p.order, (std::vector<uint32_t>{0, 2, 1, 3}));
}

TEST(Project, TiesBrokenByMemberIndex) {
    SampleTile tile({3, 1, 1}, 1, 1, 0);
    for (int x = 0; x < 3; ++x) tile.sample({x, 0, 0}, 0)[0] = 0.5;
    FilteredSubset s;
    s.members = {{2, 0}, {0, 0}, {1, 0}};
    Projection p = project(tile, s, SliceDirection::from({1.0}));
    EXPECT_EQ(p.order, (std::vector<uint32_t>{0, 1, 2}));
}

TEST(TargetProjection, UniformAndDeterministic) {
    Rng a(9), b(9);
    auto ya = target_projection(10000, SliceDirection::from({1.0}), TargetDensity{1}, a);
    auto yb = target_projection(10000, SliceDirection::from({1.0}), TargetDensity{1}, b);
    EXPECT_EQ(ya, yb);
    EXPECT_TRUE(std::is_sorted(ya.begin(), ya.end()));
    EXPECT_GE(ya.front(), 0.0);
    EXPECT_LT(ya.back(), 1.0);
    EXPECT_LT(ks_uniform(ya), 0.02);

    Rng c(10);
    auto y2 = target_projection(10000, SliceDirection::from({0.0, 1.0}), TargetDensity{2}, c);
    EXPECT_LT(ks_uniform(y2), 0.02);
    EXPECT_THROW(target_projection(0, SliceDirection::from({1.0}), TargetDensity{1}, c), InvalidParameter);
}

TEST(W1d, Examples) {
    std::vector<double> xs{0.1, 0.4, 0.8};
    EXPECT_EQ(w1d(xs, xs), 0.0);
    EXPECT_DOUBLE_EQ(w1d(std::vector<double>{0.0, 0.5}, std::vector<double>{0.5, 1.0}), 0.5);
    EXPECT_DOUBLE_EQ(exhaustive_w2({0.0, 0.5}, {0.5, 1.0}), 0.5);
    EXPECT_THROW(w1d(std::vector<double>{0.0}, std::vector<double>{0.0, 1.0}), InvalidInput);
}

TEST(W1d, MatchesExhaustiveAssignment) {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 1 + rng.uniform_index(6);
        std::vector<double> xs(m), ys(m);
        for (auto &v : xs) v = rng.uniform();
        for (auto &v : ys) v = rng.uniform();
        const double brute = exhaustive_w2(xs, ys);
        std::sort(xs.begin(), xs.end());
        std::sort(ys.begin(), ys.end());
        EXPECT_NEAR(w1d(xs, ys), brute, 1e-12);
    }
}

TEST(W1dGradient, ZeroAtTargetsAndSingleMember) {
    SampleTile tile = init_random({4, 4, 1}, 1, 2, 2);
    SpatioTemporalKernel g = compose(make_spatial_gaussian(0.8, 0.3), TemporalTaps::delta());
    FilteredSubset s = filter_subset(tile, g, {1, 1, 0}, 0.0);
    SliceDirection th = SliceDirection::from({0.2, 0.9});
    Projection p = project(tile, s, th);
    for (double v : w1d_gradient(tile, s, th, p.values)) EXPECT_EQ(v, 0.0);

    FilteredSubset one;
    one.members = {{5, 0}};
    SliceDirection ax = SliceDirection::from({1.0, 0.0});
    const double x = tile.coords()[10];
    auto grad = w1d_gradient(tile, one, ax, std::vector<double>{0.25});
    EXPECT_DOUBLE_EQ(grad[0], 2.0 * (x - 0.25));
    EXPECT_EQ(grad[1], 0.0);
}

TEST(W1dGradient, MatchesFiniteDifferences) {
    Rng rng(23);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 1 + int(rng.uniform_index(3));
        SampleTile tile = init_random({5, 1, 1}, 1, d, 100 + uint64_t(trial));
        FilteredSubset s;
        for (uint32_t c = 0; c < 5; ++c) s.members.push_back({c, 0});
        SliceDirection th = SliceDirection::random(d, rng);
        auto targets = target_projection(5, th, TargetDensity{d}, rng);
        auto grad = w1d_gradient(tile, s, th, targets);
        auto f = [&](const SampleTile &t) {
            const double w = w1d(project(t, s, th).values, targets);
            return w * w;
        };
        const double h = 1e-6;
        double num2 = 0.0, err2 = 0.0;
        for (std::size_t i = 0; i < tile.coords().size(); ++i) {
            SampleTile a = tile, b = tile;
            a.coords()[i] += h;
            b.coords()[i] -= h;
            const double fd = (f(a) - f(b)) / (2 * h);
            err2 += (fd - grad[i]) * (fd - grad[i]);
            num2 += grad[i] * grad[i];
        }
        worst = std::max(worst, std::sqrt(err2 / num2));
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(EstimateGradient, ForcedSingleDrawEqualsScatter) {
    SampleTile tile = init_random({6, 6, 2}, 2, 2, 4);
    SpatioTemporalKernel g = small_kernel();
    BatchDraw draw{{2, 3, 1}, 0.3 * g.max_weight(), SliceDirection::from({0.6, -0.8})};
    GradientEstimate est = estimate_gradient(tile, g, std::span<const BatchDraw>(&draw, 1), 77, 5);

    FilteredSubset s = filter_subset(tile, g, draw.center, draw.z);
    Rng rng = element_rng(77, 5, 0);
    auto targets = target_projection(s.size(), draw.theta, TargetDensity{2}, rng);
    auto grad = w1d_gradient(tile, s, draw.theta, targets);
    std::vector<double> field(tile.coords().size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i)
        for (int k = 0; k < 2; ++k)
            field[std::size_t(s.members[i].cell) * tile.stride() + s.members[i].slot * 2u + std::size_t(k)] +=
                grad[i * 2 + std::size_t(k)];
    for (std::size_t i = 0; i < field.size(); ++i) EXPECT_NEAR(est.field[i], field[i], 1e-15);
    const double w = w1d(project(tile, s, draw.theta).values, targets);
    EXPECT_NEAR(est.mean_distance, w, 1e-15);
}

TEST(EstimateGradient, ReproducibleAndThreadIndependent) {
    SampleTile tile = init_random({16, 16, 8}, 1, 2, 4);
    SpatioTemporalKernel g = compose(make_spatial_gaussian(2.1), TemporalTaps{0, {0.5, 0.3, 0.2}});
    GradientEstimate a = estimate_gradient(tile, g, 300, 5, 2, 1);
    GradientEstimate b = estimate_gradient(tile, g, 300, 5, 2, 1);
    GradientEstimate c = estimate_gradient(tile, g, 300, 5, 2, 3);
    EXPECT_EQ(a.field, b.field);
    EXPECT_EQ(a.field, c.field);
    EXPECT_EQ(a.mean_distance, c.mean_distance);
    GradientEstimate d = estimate_gradient(tile, g, 300, 5, 3, 1);
    EXPECT_NE(a.field, d.field);
}

TEST(EstimateGradient, MatchesCommonRandomNumberDifferences) {
    SampleTile tile = init_random({4, 4, 2}, 1, 2, 8);
    SpatioTemporalKernel g = small_kernel();
    ASSERT_LE(g.extent().x, 4);
    const int batch = 10000;
    const uint64_t seed = 31;
    GradientEstimate est = estimate_gradient(tile, g, batch, seed);
    const double h = 1e-6;
    double num2 = 0.0, err2 = 0.0;
    for (std::size_t i = 0; i < tile.coords().size(); ++i) {
        SampleTile a = tile, b = tile;
        a.coords()[i] += h;
        b.coords()[i] -= h;
        const double fd =
            (estimate_gradient(a, g, batch, seed).mean_squared - estimate_gradient(b, g, batch, seed).mean_squared) /
            (2 * h);
        err2 += (fd - est.field[i]) * (fd - est.field[i]);
        num2 += est.field[i] * est.field[i];
    }
    EXPECT_LT(std::sqrt(err2 / num2), 5e-3);
}

TEST(Reflect, StaysInUnitAndPreservesUniform) {
    EXPECT_EQ(reflect_unit(0.3), 0.3);
    EXPECT_DOUBLE_EQ(reflect_unit(-0.25), 0.25);
    EXPECT_DOUBLE_EQ(reflect_unit(1.25), 0.75);
    EXPECT_DOUBLE_EQ(reflect_unit(2.25), 0.25);
    EXPECT_LT(reflect_unit(1.0), 1.0);
    EXPECT_GE(reflect_unit(-2.0), 0.0);

    Rng rng(3);
    std::vector<double> v(100000);
    for (double &x : v) {
        x = reflect_unit(3.0 * rng.uniform() - 1.0);
        ASSERT_GE(x, 0.0);
        ASSERT_LT(x, 1.0);
    }
    EXPECT_LT(ks_uniform(v), 0.01);
}

TEST(Adam, BiasCorrectedFirstStep) {
    OptimizerConfig cfg;
    AdamState s(2);
    std::vector<double> p{1.0, 1.0}, gr{0.5, -2.0};
    s.update(p, gr, cfg);
    // First step moves each coordinate by lr * sign(g) (up to eps).
    EXPECT_NEAR(p[0], 1.0 - cfg.learning_rate, 1e-9);
    EXPECT_NEAR(p[1], 1.0 + cfg.learning_rate, 1e-9);
    EXPECT_EQ(s.step, 1);
}

TEST(OptimizerConfig, ValidationNamesKey) {
    auto msg_of = [](OptimizerConfig c) {
        try {
            c.validate();
        } catch (const InvalidParameter &e) {
            return std::string(e.what());
        }
        return std::string();
    };
    OptimizerConfig c;
    EXPECT_EQ(msg_of(c), "");
    c.batch_size = 0;
    EXPECT_NE(msg_of(c).find("batch"), std::string::npos);
    c = {};
    c.learning_rate = 0;
    EXPECT_NE(msg_of(c).find("lr"), std::string::npos);
    c = {};
    c.adam_beta2 = 1.0;
    EXPECT_NE(msg_of(c).find("beta2"), std::string::npos);
}

TEST(Optimize, ZeroIterationsIsIdentity) {
    SampleTile tile = init_random({8, 8, 4}, 1, 2, 7);
    OptimizerConfig cfg;
    cfg.iterations = 0;
    OptimizeResult r = optimize(tile, small_kernel(), cfg);
    EXPECT_EQ(r.tile, tile);
    EXPECT_TRUE(r.log.empty());
}

TEST(Optimize, KernelLargerThanTileRejected) {
    OptimizerConfig cfg;
    cfg.iterations = 1;
    EXPECT_THROW(optimize(init_random({4, 4, 4}, 1, 2, 1), compose(make_spatial_gaussian(2.1), TemporalTaps::delta()),
                          cfg),
                 InvalidParameter);
    auto w = check_tile_kernel_ratio({32, 80, 8}, compose(make_spatial_gaussian(2.1), TemporalTaps::delta()));
    EXPECT_EQ(w.size(), 2u);  // x and t
}

TEST(Optimize, LipschitzScalesLogOnly) {
    SampleTile tile = init_random({12, 12, 4}, 1, 2, 7);
    SpatioTemporalKernel g = compose(make_spatial_gaussian(2.1), TemporalTaps{0, {0.6, 0.4}});
    OptimizerConfig cfg;
    cfg.iterations = 30;
    cfg.batch_size = 64;
    OptimizeResult a = optimize(tile, g, cfg);
    cfg.lipschitz_scale = 3.0;
    OptimizeResult b = optimize(tile, g, cfg);
    EXPECT_EQ(a.tile, b.tile);
    for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_DOUBLE_EQ(b.log[i].objective, 3.0 * a.log[i].objective);
    for (double c : a.tile.coords()) {
        ASSERT_GE(c, 0.0);
        ASSERT_LT(c, 1.0);
    }
}

TEST(Optimize, ObjectiveDescends) {
    SampleTile tile = init_random({16, 16, 8}, 1, 2, 7);
    TaaKernel ka = make_taa_kernel(0.2, 8);
    SpatioTemporalKernel g = compose(make_spatial_gaussian(2.1), nullptr, &ka);
    OptimizerConfig cfg;
    cfg.iterations = 2000;
    cfg.batch_size = 128;
    OptimizeResult r = optimize(tile, g, cfg);
    ASSERT_EQ(r.log.size(), 2000u);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 100; ++i) {
        first += r.log[std::size_t(i)].objective;
        last += r.log[std::size_t(1900 + i)].objective;
    }
    EXPECT_LT(last, first);

    std::ostringstream csv;
    write_convergence_csv(r.log, csv);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "iteration,objective,empty_subset_count,wall_ms");
}

TEST(Optimize, SpatialOnlyGivesIndependentBlueNoiseLayers) {
    SampleTile tile = init_random({32, 32, 4}, 1, 2, 7);
    OptimizerConfig cfg;
    cfg.iterations = 800;
    cfg.batch_size = 256;
    OptimizeResult r = optimize(tile, compose(make_spatial_gaussian(2.1), TemporalTaps::delta()), cfg);

    auto layer = [&](const SampleTile &t, int frame) {
        Image2D img(32, 32);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) img.at(x, y) = t.sample({x, y, frame}, 0)[0];
        return img;
    };
    for (int f = 0; f < 4; ++f) {
        const double opt = lowfreq_energy_ratio(dft_power(layer(r.tile, f)), 0.25);
        const double white = lowfreq_energy_ratio(dft_power(layer(tile, f)), 0.25);
        EXPECT_LT(opt, 0.5 * white) << "frame " << f;
    }
    // Pixelwise correlation between consecutive frames.
    for (int f = 0; f < 3; ++f) {
        Image2D a = layer(r.tile, f), b = layer(r.tile, f + 1);
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            ma += a.values[i];
            mb += b.values[i];
        }
        ma /= 1024;
        mb /= 1024;
        double sab = 0, saa = 0, sbb = 0;
        for (std::size_t i = 0; i < a.values.size(); ++i) {
            sab += (a.values[i] - ma) * (b.values[i] - mb);
            saa += (a.values[i] - ma) * (a.values[i] - ma);
            sbb += (b.values[i] - mb) * (b.values[i] - mb);
        }
        EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 3.0 / std::sqrt(1024.0));
    }
}
