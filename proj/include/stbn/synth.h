#pragma once

#include <stbn/percept.h>
#include <stbn/sequence.h>
#include <stbn/tile.h>

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace stbn {

// Analytic stand-in for a rendered scene. Pixel (x, y) and frame t are
// integers passed as doubles; u is the pixel's payload sample in [0,1)^d.
struct TestScene {
    std::string name;
    std::function<double(double x, double y, double t, std::span<const double> u)> integrand;
    // Exact average of the integrand over u in [0,1)^d.
    std::function<double(double x, double y, double t)> analytic_mean;
    // Lipschitz constant in u; infinity for discontinuous integrands.
    double lipschitz_bound = 0.0;
    std::string description;
};

// constant, ramp, blob, step.
const std::vector<TestScene> &builtin_scenes();
// Throws InvalidParameter listing the known names.
const TestScene &find_scene(const std::string &name);

// Each pixel averages the integrand over the spp samples of tile cell
// (x mod X, y mod Y, t mod T).
FrameSequence render_with_tile(const TestScene &scene, const SampleTile &tile, int width, int height, int frames);
FrameSequence render_reference(const TestScene &scene, int width, int height, int frames);

// Per pixel-frame candidate payloads for the a posteriori optimizer.
struct CandidateBank {
    Dims3 dims;
    int m = 0;
    int dim = 0;
    std::vector<double> payloads;  // (pixel-frame, candidate, component)
    std::vector<int> chosen;       // per pixel-frame, in [0, m)

    std::span<const double> payload(std::size_t pixel_frame, int candidate) const {
        return {payloads.data() + (pixel_frame * std::size_t(m) + std::size_t(candidate)) * std::size_t(dim),
                std::size_t(dim)};
    }
    bool operator==(const CandidateBank &) const = default;
};

// White-noise candidates; chosen starts at 0 everywhere.
CandidateBank make_candidate_bank(Dims3 dims, int m, int dim, uint64_t seed);

FrameSequence render_bank(const TestScene &scene, const CandidateBank &bank);

struct VerticalResult {
    CandidateBank bank;
    // L1 norm of the perceptual error: entry 0 before the first sweep, then
    // one entry after each sweep.
    std::vector<double> objective;
    long accepted = 0;
};

// L1 norm of model.evaluate(raw, reference).error over all pixels and frames.
double perceptual_l1(const PerceptualModel &model, const FrameSequence &raw, const FrameSequence &reference);

// Coordinate descent over candidate choices: visits pixel-frames in a seeded
// random order and keeps the candidate with the lowest L1 perceptual error
// given all other choices.
VerticalResult aposteriori_vertical(const TestScene &scene, CandidateBank bank, const PerceptualModel &model,
                                    int sweeps, uint64_t seed);

}  // namespace stbn
