#include <stbn/percept.h>

#include <stbn/error.h>

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>

namespace stbn {

FrameSequence apply_taa(const FrameSequence &raw, const TaaKernel &ka) {
    if (raw.empty()) throw InvalidInput("apply_taa: empty sequence");
    const SpatioTemporalKernel k(SpatialKernel::delta(), ka.taps(), TemporalTaps::none(),
                                 BoundaryPolicy::causal_renormalized);
    return convolve_sequence(raw, k);
}

ErrorSequence error_sequence(const FrameSequence &displayed, const FrameSequence &reference,
                             const SpatialKernel &ks, const TemporalPerceptKernel *kt, BoundaryPolicy policy) {
    if (!(displayed.dims() == reference.dims()))
        throw InvalidInput("error_sequence: dims mismatch " + displayed.dims().to_string() + " vs " +
                           reference.dims().to_string());
    return convolve_sequence(displayed - reference, compose(ks, kt, nullptr, policy));
}

FrameSequence filter_reference(const FrameSequence &reference, const SpatialKernel &ks,
                               const TemporalPerceptKernel *kt, BoundaryPolicy policy) {
    return convolve_sequence(reference, compose(ks, kt, nullptr, policy));
}

double prelmse(const ErrorSequence &err, const FrameSequence &filtered_reference, int frame) {
    if (!(err.dims() == filtered_reference.dims())) throw InvalidInput("prelmse: dims mismatch");
    if (frame < 0 || frame >= err.dims().t)
        throw InvalidInput("frame " + std::to_string(frame) + " out of range [0, " + std::to_string(err.dims().t) +
                           ")");
    const auto e = err.frame(frame);
    const auto ref = filtered_reference.frame(frame);
    std::vector<double> terms(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) terms[i] = e[i] * e[i] / (ref[i] * ref[i] + kRelMseEpsilon);
    return pairwise_sum(terms) / double(terms.size());
}

PerceptualModel::Evaluation PerceptualModel::evaluate(const FrameSequence &raw, const FrameSequence &reference) const {
    Evaluation ev;
    ev.displayed = ka ? apply_taa(raw, *ka) : raw;
    const TemporalPerceptKernel *t = kt ? &*kt : nullptr;
    ev.error = error_sequence(ev.displayed, reference, ks, t, policy);
    ev.filtered_reference = filter_reference(reference, ks, t, policy);
    return ev;
}

Image2D xy_slice(const FrameSequence &seq, int t, int x0, int y0, int w, int h) {
    const Dims3 d = seq.dims();
    if (w < 0) w = d.x - x0;
    if (h < 0) h = d.y - y0;
    if (t < 0 || t >= d.t || x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > d.x || y0 + h > d.y)
        throw InvalidInput("xy_slice: crop outside sequence " + d.to_string());
    Image2D img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = seq.at(x0 + x, y0 + y, t);
    return img;
}

Image2D xt_slice(const FrameSequence &seq, int y) {
    const Dims3 d = seq.dims();
    if (y < 0 || y >= d.y) throw InvalidInput("xt_slice: row outside sequence");
    Image2D img(d.x, d.t);
    for (int t = 0; t < d.t; ++t)
        for (int x = 0; x < d.x; ++x) img.at(x, t) = seq.at(x, y, t);
    return img;
}

double SpectrumImage::total() const { return pairwise_sum(values); }

SpectrumImage dft_power(const Image2D &img) {
    if (img.width <= 0 || img.height <= 0 || img.values.size() != std::size_t(img.width) * std::size_t(img.height))
        throw InvalidInput("dft_power: empty image");
    const int w = img.width, h = img.height;
    const std::size_t n = std::size_t(w) * std::size_t(h);
    struct FftwFree {
        void operator()(void *p) const { fftw_free(p); }
    };
    std::unique_ptr<fftw_complex[], FftwFree> in(fftw_alloc_complex(n)), out(fftw_alloc_complex(n));
    for (std::size_t i = 0; i < n; ++i) {
        in[i][0] = img.values[i];
        in[i][1] = 0.0;
    }
    fftw_plan plan = fftw_plan_dft_2d(h, w, in.get(), out.get(), FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    SpectrumImage s;
    s.width = w;
    s.height = h;
    s.values.assign(n, 0.0);
    for (int ky = 0; ky < h; ++ky)
        for (int kx = 0; kx < w; ++kx) {
            const std::size_t i = std::size_t(ky) * std::size_t(w) + std::size_t(kx);
            const double p = (out[i][0] * out[i][0] + out[i][1] * out[i][1]) / double(n);
            const int cx = (kx + w / 2) % w, cy = (ky + h / 2) % h;
            s.values[std::size_t(cy) * std::size_t(w) + std::size_t(cx)] = p;
        }
    const std::size_t dc = std::size_t(h / 2) * std::size_t(w) + std::size_t(w / 2);
    s.dc_power = s.values[dc];
    s.values[dc] = 0.0;
    return s;
}

namespace {

// Signed frequency of a centered bin in Nyquist units.
double nyquist_freq(int c, int n) { return double(c - n / 2) / (double(n) / 2.0); }

}  // namespace

double lowfreq_energy_ratio(const SpectrumImage &spec, double radius_fraction) {
    if (!(radius_fraction > 0.0 && radius_fraction <= 1.0))
        throw InvalidParameter("radius_fraction must be in (0,1]");
    std::vector<double> inside;
    inside.reserve(spec.values.size());
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const double f = std::max(std::abs(nyquist_freq(x, spec.width)), std::abs(nyquist_freq(y, spec.height)));
            if (f <= radius_fraction) inside.push_back(spec.at(x, y));
        }
    const double total = spec.total();
    if (total <= 0.0) return 0.0;
    return pairwise_sum(inside) / total;
}

std::vector<double> radial_mean_power(const SpectrumImage &spec, int bins) {
    if (bins < 1) throw InvalidParameter("radial_mean_power: bins must be >= 1");
    std::vector<double> sum(std::size_t(bins), 0.0), count(std::size_t(bins), 0.0);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            if (x == spec.width / 2 && y == spec.height / 2) continue;
            const double f = std::hypot(nyquist_freq(x, spec.width), nyquist_freq(y, spec.height));
            if (f > 1.0) continue;
            const int b = std::min(bins - 1, int(f * bins));
            sum[std::size_t(b)] += spec.at(x, y);
            count[std::size_t(b)] += 1.0;
        }
    for (std::size_t b = 0; b < sum.size(); ++b) sum[b] = count[b] > 0 ? sum[b] / count[b] : 0.0;
    return sum;
}

}  // namespace stbn
