#pragma once

#include <stbn/kernels.h>
#include <stbn/sequence.h>

#include <optional>
#include <vector>

namespace stbn {

// Displayed image: causal EMA over raw frames, renormalized over the frames
// that exist (frame 0 is passed through unchanged).
FrameSequence apply_taa(const FrameSequence &raw, const TaaKernel &ka);

// Kt * Ks * (displayed - reference). `displayed` is expected to be TAA
// filtered already when TAA is modeled. kt == nullptr means no temporal
// perception. Temporal filtering is causal with renormalization.
ErrorSequence error_sequence(const FrameSequence &displayed, const FrameSequence &reference,
                             const SpatialKernel &ks, const TemporalPerceptKernel *kt,
                             BoundaryPolicy policy = BoundaryPolicy::causal_renormalized);

// Kt * Ks * reference; the denominator of the relative error.
FrameSequence filter_reference(const FrameSequence &reference, const SpatialKernel &ks,
                               const TemporalPerceptKernel *kt,
                               BoundaryPolicy policy = BoundaryPolicy::causal_renormalized);

inline constexpr double kRelMseEpsilon = 0.01;

// Mean over pixels of eps^2 / (I_filtered^2 + 0.01) at 0-based frame
// `frame`. Throws InvalidInput naming the valid range otherwise.
double prelmse(const ErrorSequence &err, const FrameSequence &filtered_reference, int frame);

// Everything needed to score a raw render against its reference.
struct PerceptualModel {
    SpatialKernel ks;
    std::optional<TemporalPerceptKernel> kt;
    std::optional<TaaKernel> ka;
    BoundaryPolicy policy = BoundaryPolicy::causal_renormalized;

    struct Evaluation {
        FrameSequence displayed;
        ErrorSequence error;
        FrameSequence filtered_reference;

        double prelmse(int frame) const { return stbn::prelmse(error, filtered_reference, frame); }
    };

    Evaluation evaluate(const FrameSequence &raw, const FrameSequence &reference) const;
};

// Real 2D image, x fastest.
struct Image2D {
    int width = 0, height = 0;
    std::vector<double> values;

    Image2D() = default;
    Image2D(int w, int h, double fill = 0.0) : width(w), height(h), values(std::size_t(w) * std::size_t(h), fill) {}
    double &at(int x, int y) { return values[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
    double at(int x, int y) const { return values[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
};

Image2D xy_slice(const FrameSequence &seq, int t, int x0 = 0, int y0 = 0, int w = -1, int h = -1);
Image2D xt_slice(const FrameSequence &seq, int y);

// |DFT|^2 / N with DC at (width/2, height/2). The DC bin is stored in
// `dc_power` and zeroed in `values`, so `sum(values)` equals the energy of
// the mean-removed input (Parseval).
struct SpectrumImage {
    int width = 0, height = 0;
    std::vector<double> values;
    double dc_power = 0.0;

    double at(int x, int y) const { return values[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
    double total() const;
};

SpectrumImage dft_power(const Image2D &img);

// Share of the (non-DC) energy inside the centered window |f| <= r Nyquist,
// with |f| the larger of the two axis frequencies in Nyquist units.
double lowfreq_energy_ratio(const SpectrumImage &spec, double radius_fraction);

// Radially averaged power in `bins` rings over [0, Nyquist] (Euclidean).
std::vector<double> radial_mean_power(const SpectrumImage &spec, int bins);

}  // namespace stbn
