#include <stbn/synth.h>

#include <stbn/error.h>
#include <stbn/rng.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace stbn {

namespace {

double ramp_mean(double x, double, double t) { return 0.1 + 0.005 * x + 0.0002 * t; }

double blob_mean(double x, double y, double t) {
    const double cx = 24.0 + 0.025 * t, cy = 28.0, s = 10.0;
    const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    return 0.05 + 0.9 * std::exp(-r2 / (2.0 * s * s));
}

// Offsets the step edge per pixel-frame so neighbouring pixels disagree.
double step_phase(double x, double y, double t) {
    const double p = 0.6180339887 * x + 0.4142135624 * y + 0.2718281828 * t;
    return p - std::floor(p);
}

std::vector<TestScene> make_scenes() {
    std::vector<TestScene> s;
    s.push_back({"constant", [](double, double, double, std::span<const double>) { return 0.5; },
                 [](double, double, double) { return 0.5; }, 0.0, "0.5 everywhere, independent of the sample"});
    s.push_back({"ramp",
                 [](double x, double y, double t, std::span<const double> u) {
                     double v = ramp_mean(x, y, t) + 0.4 * (u[0] - 0.5);
                     if (u.size() > 1) v += 0.4 * (u[1] - 0.5);
                     return v;
                 },
                 ramp_mean, 0.4 * std::numbers::sqrt2,
                 "mean 0.1 + 0.005 x + 0.0002 t, linear in the first two payload dimensions"});
    s.push_back({"blob",
                 [](double x, double y, double t, std::span<const double> u) {
                     double shade = 1.0 + 0.5 * std::cos(std::numbers::pi * u[0]);
                     if (u.size() > 1) shade += 0.5 * std::cos(std::numbers::pi * u[1]);
                     return blob_mean(x, y, t) * shade;
                 },
                 blob_mean, 0.95 * 0.5 * std::numbers::pi * std::numbers::sqrt2,
                 "Gaussian bump (sigma 10 px) drifting +0.025 px/frame in x, smooth cosine shading in u"});
    s.push_back({"step",
                 [](double x, double y, double t, std::span<const double> u) {
                     double f = u[0] + step_phase(x, y, t);
                     f -= std::floor(f);
                     return ramp_mean(x, y, t) + 0.4 * (f < 0.5 ? 1.0 : -1.0);
                 },
                 ramp_mean, std::numeric_limits<double>::infinity(),
                 "ramp mean plus a +-0.4 step in u[0] whose edge shifts per pixel-frame"});
    return s;
}

}  // namespace

const std::vector<TestScene> &builtin_scenes() {
    static const std::vector<TestScene> scenes = make_scenes();
    return scenes;
}

const TestScene &find_scene(const std::string &name) {
    std::string known;
    for (const auto &s : builtin_scenes()) {
        if (s.name == name) return s;
        known += (known.empty() ? "" : ", ") + s.name;
    }
    throw InvalidParameter("unknown scene '" + name + "' (known: " + known + ")");
}

FrameSequence render_with_tile(const TestScene &scene, const SampleTile &tile, int width, int height, int frames) {
    FrameSequence out(Dims3{width, height, frames});
    const double inv_spp = 1.0 / tile.spp();
    for (int t = 0; t < frames; ++t)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double acc = 0.0;
                for (int s = 0; s < tile.spp(); ++s) acc += scene.integrand(x, y, t, tile.sample({x, y, t}, s));
                out.at(x, y, t) = acc * inv_spp;
            }
    return out;
}

FrameSequence render_reference(const TestScene &scene, int width, int height, int frames) {
    FrameSequence out(Dims3{width, height, frames});
    for (int t = 0; t < frames; ++t)
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) out.at(x, y, t) = scene.analytic_mean(x, y, t);
    return out;
}

CandidateBank make_candidate_bank(Dims3 dims, int m, int dim, uint64_t seed) {
    if (!dims.positive() || m < 1 || dim < 1) throw InvalidParameter("candidate bank sizes must be positive");
    CandidateBank bank;
    bank.dims = dims;
    bank.m = m;
    bank.dim = dim;
    bank.payloads.resize(dims.volume() * std::size_t(m) * std::size_t(dim));
    Rng rng(seed);
    for (double &p : bank.payloads) p = rng.uniform();
    bank.chosen.assign(dims.volume(), 0);
    return bank;
}

FrameSequence render_bank(const TestScene &scene, const CandidateBank &bank) {
    FrameSequence out(bank.dims);
    std::size_t pf = 0;
    for (int t = 0; t < bank.dims.t; ++t)
        for (int y = 0; y < bank.dims.y; ++y)
            for (int x = 0; x < bank.dims.x; ++x, ++pf)
                out.at(x, y, t) = scene.integrand(x, y, t, bank.payload(pf, bank.chosen[pf]));
    return out;
}

double perceptual_l1(const PerceptualModel &model, const FrameSequence &raw, const FrameSequence &reference) {
    const auto ev = model.evaluate(raw, reference);
    std::vector<double> a(ev.error.values().size());
    std::transform(ev.error.values().begin(), ev.error.values().end(), a.begin(), [](double v) { return std::abs(v); });
    return pairwise_sum(a);
}

namespace {

// Response of the model's temporal chain (TAA, then perception) at frame
// `to` to a unit impulse in raw frame `from`.
std::vector<std::vector<std::pair<int, double>>> temporal_influence(const PerceptualModel &model, int frames) {
    PerceptualModel temporal_only = model;
    temporal_only.ks = SpatialKernel::delta();
    std::vector<std::vector<std::pair<int, double>>> influence(static_cast<std::size_t>(frames));
    const FrameSequence zero(Dims3{1, 1, frames}, 0.0);
    for (int s = 0; s < frames; ++s) {
        FrameSequence impulse(Dims3{1, 1, frames}, 0.0);
        impulse.at(0, 0, s) = 1.0;
        const auto ev = temporal_only.evaluate(impulse, zero);
        double peak = 0.0;
        for (double v : ev.error.values()) peak = std::max(peak, std::abs(v));
        for (int t = 0; t < frames; ++t) {
            const double g = ev.error.at(0, 0, t);
            if (std::abs(g) > 1e-12 * peak) influence[std::size_t(s)].emplace_back(t, g);
        }
    }
    return influence;
}

}  // namespace

VerticalResult aposteriori_vertical(const TestScene &scene, CandidateBank bank, const PerceptualModel &model,
                                    int sweeps, uint64_t seed) {
    if (sweeps < 0) throw InvalidParameter("sweeps must be >= 0");
    const Dims3 d = bank.dims;
    const int r = model.ks.radius;
    if (d.x < 2 * r + 1 || d.y < 2 * r + 1) throw InvalidInput("image smaller than the spatial kernel");

    const FrameSequence reference = render_reference(scene, d.x, d.y, d.t);
    const std::size_t n = d.volume();
    const int m = bank.m;

    std::vector<double> value(n * std::size_t(m));
    {
        std::size_t pf = 0;
        for (int t = 0; t < d.t; ++t)
            for (int y = 0; y < d.y; ++y)
                for (int x = 0; x < d.x; ++x, ++pf)
                    for (int c = 0; c < m; ++c)
                        value[pf * std::size_t(m) + std::size_t(c)] = scene.integrand(x, y, t, bank.payload(pf, c));
    }

    const auto influence = temporal_influence(model, d.t);

    VerticalResult res;
    FrameSequence raw = render_bank(scene, bank);
    res.objective.push_back(perceptual_l1(model, raw, reference));
    if (m < 2) {
        for (int s = 0; s < sweeps; ++s) res.objective.push_back(res.objective.back());
        res.bank = std::move(bank);
        return res;
    }

    std::vector<std::size_t> visit(n);
    std::iota(visit.begin(), visit.end(), std::size_t(0));
    Rng rng(seed);
    std::vector<double> delta_cost(static_cast<std::size_t>(m));

    for (int sweep = 0; sweep < sweeps; ++sweep) {
        ErrorSequence err = model.evaluate(raw, reference).error;
        const double tolerance = 1e-12 * std::max(1.0, res.objective.back());

        for (std::size_t i = n; i > 1; --i) std::swap(visit[i - 1], visit[rng.uniform_index(i)]);

        for (std::size_t pf : visit) {
            const int x = int(pf % std::size_t(d.x));
            const int y = int((pf / std::size_t(d.x)) % std::size_t(d.y));
            const int t = int(pf / (std::size_t(d.x) * std::size_t(d.y)));
            const double current = value[pf * std::size_t(m) + std::size_t(bank.chosen[pf])];
            const auto &frames = influence[std::size_t(t)];

            std::fill(delta_cost.begin(), delta_cost.end(), 0.0);
            for (auto [tt, g] : frames)
                for (int dy = -r; dy <= r; ++dy) {
                    const int yy = wrap(y + dy, d.y);
                    for (int dx = -r; dx <= r; ++dx) {
                        const double w = g * model.ks.at(dx, dy);
                        const double e = err.at(wrap(x + dx, d.x), yy, tt);
                        const double ae = std::abs(e);
                        for (int c = 0; c < m; ++c) {
                            const double delta = value[pf * std::size_t(m) + std::size_t(c)] - current;
                            delta_cost[std::size_t(c)] += std::abs(e + delta * w) - ae;
                        }
                    }
                }

            int best = bank.chosen[pf];
            double best_cost = -tolerance;
            for (int c = 0; c < m; ++c)
                if (delta_cost[std::size_t(c)] < best_cost) {
                    best_cost = delta_cost[std::size_t(c)];
                    best = c;
                }
            if (best == bank.chosen[pf]) continue;

            const double delta = value[pf * std::size_t(m) + std::size_t(best)] - current;
            for (auto [tt, g] : frames)
                for (int dy = -r; dy <= r; ++dy) {
                    const int yy = wrap(y + dy, d.y);
                    for (int dx = -r; dx <= r; ++dx) err.at(wrap(x + dx, d.x), yy, tt) += delta * g * model.ks.at(dx, dy);
                }
            bank.chosen[pf] = best;
            raw.at(x, y, t) = value[pf * std::size_t(m) + std::size_t(best)];
            ++res.accepted;
        }
        res.objective.push_back(perceptual_l1(model, raw, reference));
    }
    res.bank = std::move(bank);
    return res;
}

}  // namespace stbn
