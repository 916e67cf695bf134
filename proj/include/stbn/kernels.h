#pragma once

#include <stbn/sequence.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stbn {

// Threshold (relative to the peak) at which Gaussian tails are cut. 0.2
// yields a 7x7 kernel at sigma = 2.1 px.
inline constexpr double kDefaultGaussianTruncation = 0.2;

// Isotropic, normalized 2D Gaussian on a (2r+1)^2 grid.
struct SpatialKernel {
    int radius = 0;
    double sigma = 0.0;
    std::vector<double> weights;  // row-major, dy slowest

    int size() const { return 2 * radius + 1; }
    double at(int dx, int dy) const { return weights[std::size_t((dy + radius) * size() + dx + radius)]; }

    static SpatialKernel delta();
};

SpatialKernel make_spatial_gaussian(double sigma, double truncation_threshold = kDefaultGaussianTruncation);

// 1D taps along the frame axis. Tap k applies to lag (min_lag + k), where a
// lag of j means "j frames in the past": out(t) = sum_j w(j) in(t - j).
struct TemporalTaps {
    int min_lag = 0;
    std::vector<double> weights;

    int size() const { return int(weights.size()); }
    bool empty() const { return weights.empty(); }
    int max_lag() const { return min_lag + size() - 1; }
    double at_lag(int lag) const {
        const int k = lag - min_lag;
        return (k < 0 || k >= size()) ? 0.0 : weights[std::size_t(k)];
    }
    double sum() const;
    bool causal() const { return min_lag >= 0; }

    static TemporalTaps delta() { return {0, {1.0}}; }
    static TemporalTaps none() { return {0, {}}; }
};

// Full discrete convolution of two tap lists.
TemporalTaps convolve(const TemporalTaps &a, const TemporalTaps &b);
// Elementwise sum over the union of supports.
TemporalTaps add(const TemporalTaps &a, const TemporalTaps &b);

// Symmetric temporal Gaussian, normalized, cut like the spatial one.
TemporalTaps make_temporal_gaussian(double sigma_frames,
                                    double truncation_threshold = kDefaultGaussianTruncation);

struct TemporalPerceptKernel {
    TemporalTaps sustained;  // low-pass, sums to 1
    TemporalTaps transient;  // band-pass, sums to 0
    double frame_rate = 60.0;

    TemporalTaps combined() const { return add(sustained, transient); }
};

// Parameters of the built-in sustained/transient model.
struct PerceptModelParams {
    double time_constant_s = 0.150;
    double transient_gain = 1.0;
    double support_s = 8.0 / 60.0;  // 8 taps at 60 Hz
};

TemporalPerceptKernel make_temporal_percept(double frame_rate, const PerceptModelParams &params = {});
// Loads a table file; throws ParseError on malformed lines, ValidationError
// listing every violated invariant otherwise.
TemporalPerceptKernel load_temporal_percept(const std::filesystem::path &path);
TemporalPerceptKernel parse_temporal_percept(const std::string &text);
// Throws ValidationError naming the failed invariants.
void validate(const TemporalPerceptKernel &k);

struct TaaKernel {
    double alpha = 0.2;
    std::vector<double> weights;  // lag 0 first

    int length() const { return int(weights.size()); }
    TemporalTaps taps() const { return {0, weights}; }
};

// length <= 0 selects the default: the first j with alpha (1-alpha)^j < 1e-3 alpha.
TaaKernel make_taa_kernel(double alpha, int length = 0);
int default_taa_length(double alpha);

enum class BoundaryPolicy { toroidal, causal_renormalized, causal_zero_pad };

const char *to_string(BoundaryPolicy p);

// g = Ks * Kt * Ka as a dense (lag, dy, dx) grid. The temporal factor is
// kept in two parts: `lowpass` (the normalized sustained/TAA path) and
// `bandpass` (transient path). Causal renormalization at the start of a
// sequence rescales only the first.
class SpatioTemporalKernel {
  public:
    SpatioTemporalKernel(SpatialKernel spatial, TemporalTaps lowpass, TemporalTaps bandpass,
                         BoundaryPolicy policy);

    int radius_x() const { return spatial_.radius; }
    int radius_y() const { return spatial_.radius; }
    int min_lag() const { return min_lag_; }
    int max_lag() const { return min_lag_ + lags_ - 1; }
    Dims3 extent() const { return {spatial_.size(), spatial_.size(), lags_}; }

    double at(int dx, int dy, int lag) const {
        const int s = spatial_.size();
        return weights_[(std::size_t(lag - min_lag_) * std::size_t(s) + std::size_t(dy + spatial_.radius)) *
                            std::size_t(s) +
                        std::size_t(dx + spatial_.radius)];
    }
    const std::vector<double> &weights() const { return weights_; }

    // Largest |g|; upper end of the threshold range.
    double max_weight() const { return max_weight_; }
    // Analytic DC gain: product of the factor sums.
    double dc_gain() const { return dc_gain_; }
    double sum_of_weights() const;
    double sum_of_squares() const;

    BoundaryPolicy policy() const { return policy_; }
    const SpatialKernel &spatial() const { return spatial_; }
    const TemporalTaps &lowpass() const { return lowpass_; }
    const TemporalTaps &bandpass() const { return bandpass_; }
    TemporalTaps temporal() const { return add(lowpass_, bandpass_); }

    SpatioTemporalKernel with_policy(BoundaryPolicy p) const {
        return SpatioTemporalKernel(spatial_, lowpass_, bandpass_, p);
    }

    std::string describe() const;

  private:
    SpatialKernel spatial_;
    TemporalTaps lowpass_, bandpass_;
    BoundaryPolicy policy_;
    int min_lag_ = 0, lags_ = 1;
    std::vector<double> weights_;
    double max_weight_ = 0.0, dc_gain_ = 1.0;
};

// Omitted temporal factors act as a delta.
SpatioTemporalKernel compose(const SpatialKernel &ks, const TemporalPerceptKernel *kt, const TaaKernel *ka,
                             BoundaryPolicy policy = BoundaryPolicy::toroidal);
SpatioTemporalKernel compose(const SpatialKernel &ks, const TemporalTaps &temporal,
                             BoundaryPolicy policy = BoundaryPolicy::toroidal);

// Spatial axes always wrap. The temporal axis wraps (toroidal) or drops taps
// outside [0, T) (causal policies), renormalizing the low-pass part for
// causal_renormalized.
FrameSequence convolve_sequence(const FrameSequence &seq, const SpatioTemporalKernel &k);

// Per-frame spatial filtering only (toroidal).
FrameSequence convolve_spatial(const FrameSequence &seq, const SpatialKernel &ks);

// Named optimization targets; all include the spatial Gaussian.
//   spatial      Ks only (frames independent)
//   gaussian     Ks * symmetric temporal Gaussian
//   taa          Ks * Ka
//   percept      Ks * Kt
//   percept+taa  Ks * Kt * Ka
enum class KernelPreset { spatial, gaussian, taa, percept, percept_taa };

KernelPreset parse_kernel_preset(const std::string &name);
const char *to_string(KernelPreset p);

struct KernelSpec {
    KernelPreset preset = KernelPreset::percept_taa;
    double sigma = 2.1;
    double truncation = kDefaultGaussianTruncation;
    double temporal_sigma = 2.1;  // frames, `gaussian` preset
    double alpha = 0.2;
    int taa_taps = 8;
    double frame_rate = 60.0;
    std::filesystem::path percept_table;  // empty: built-in model
};

SpatioTemporalKernel build_kernel(const KernelSpec &spec, BoundaryPolicy policy = BoundaryPolicy::toroidal);

}  // namespace stbn
