#include <stbn/kernels.h>

#include <stbn/error.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace stbn {

namespace {

// Smallest r such that exp(-(r+1)^2 / (2 sigma^2)) < threshold.
int gaussian_radius(double sigma, double threshold) {
    int r = 0;
    while (std::exp(-double((r + 1) * (r + 1)) / (2.0 * sigma * sigma)) >= threshold) ++r;
    return r;
}

void check_gaussian_params(double sigma, double threshold) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw InvalidParameter("gaussian sigma must be positive, got " + std::to_string(sigma));
    if (!(threshold > 0.0 && threshold < 1.0))
        throw InvalidParameter("truncation threshold must be in (0,1), got " + std::to_string(threshold));
}

}  // namespace

SpatialKernel SpatialKernel::delta() { return {0, 0.0, {1.0}}; }

SpatialKernel make_spatial_gaussian(double sigma, double truncation_threshold) {
    check_gaussian_params(sigma, truncation_threshold);
    SpatialKernel k;
    k.sigma = sigma;
    k.radius = gaussian_radius(sigma, truncation_threshold);
    const int n = k.size();
    k.weights.resize(std::size_t(n * n));
    for (int dy = -k.radius; dy <= k.radius; ++dy)
        for (int dx = -k.radius; dx <= k.radius; ++dx)
            k.weights[std::size_t((dy + k.radius) * n + dx + k.radius)] =
                std::exp(-double(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    const double total = pairwise_sum(k.weights);
    for (double &w : k.weights) w /= total;
    return k;
}

double TemporalTaps::sum() const { return pairwise_sum(weights); }

TemporalTaps convolve(const TemporalTaps &a, const TemporalTaps &b) {
    if (a.empty() || b.empty()) return TemporalTaps::none();
    TemporalTaps out;
    out.min_lag = a.min_lag + b.min_lag;
    out.weights.assign(std::size_t(a.size() + b.size() - 1), 0.0);
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < b.size(); ++j)
            out.weights[std::size_t(i + j)] += a.weights[std::size_t(i)] * b.weights[std::size_t(j)];
    return out;
}

TemporalTaps add(const TemporalTaps &a, const TemporalTaps &b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    TemporalTaps out;
    out.min_lag = std::min(a.min_lag, b.min_lag);
    const int hi = std::max(a.max_lag(), b.max_lag());
    out.weights.resize(std::size_t(hi - out.min_lag + 1));
    for (int lag = out.min_lag; lag <= hi; ++lag)
        out.weights[std::size_t(lag - out.min_lag)] = a.at_lag(lag) + b.at_lag(lag);
    return out;
}

TemporalTaps make_temporal_gaussian(double sigma_frames, double truncation_threshold) {
    check_gaussian_params(sigma_frames, truncation_threshold);
    const int r = gaussian_radius(sigma_frames, truncation_threshold);
    TemporalTaps taps{-r, {}};
    for (int lag = -r; lag <= r; ++lag)
        taps.weights.push_back(std::exp(-double(lag * lag) / (2.0 * sigma_frames * sigma_frames)));
    const double total = taps.sum();
    for (double &w : taps.weights) w /= total;
    return taps;
}

TemporalPerceptKernel make_temporal_percept(double frame_rate, const PerceptModelParams &params) {
    if (!(frame_rate > 0.0) || !std::isfinite(frame_rate))
        throw InvalidParameter("frame_rate must be positive, got " + std::to_string(frame_rate));
    if (!(params.time_constant_s > 0.0) || !(params.support_s > 0.0))
        throw InvalidParameter("percept time constant and support must be positive");

    const int taps = std::max(1, int(std::lround(params.support_s * frame_rate)));
    const double decay = std::exp(-1.0 / (params.time_constant_s * frame_rate));

    TemporalPerceptKernel k;
    k.frame_rate = frame_rate;
    k.sustained.weights.resize(std::size_t(taps));
    for (int j = 0; j < taps; ++j) k.sustained.weights[std::size_t(j)] = std::pow(decay, j);
    const double total = k.sustained.sum();
    for (double &w : k.sustained.weights) w /= total;

    // First difference of the sustained response, shifted to zero DC.
    k.transient.weights.resize(std::size_t(taps));
    for (int j = 0; j < taps; ++j) {
        const double prev = j > 0 ? k.sustained.weights[std::size_t(j - 1)] : 0.0;
        k.transient.weights[std::size_t(j)] = k.sustained.weights[std::size_t(j)] - prev;
    }
    const double mean = k.transient.sum() / taps;
    for (double &w : k.transient.weights) w = params.transient_gain * (w - mean);
    return k;
}

void validate(const TemporalPerceptKernel &k) {
    std::vector<std::string> failed;
    if (!(k.frame_rate > 0.0)) failed.push_back("frame_rate > 0");
    if (k.sustained.empty()) failed.push_back("sustained channel non-empty");
    if (k.transient.empty()) failed.push_back("transient channel non-empty");
    if (std::any_of(k.sustained.weights.begin(), k.sustained.weights.end(), [](double w) { return w < 0.0; }))
        failed.push_back("sustained weights >= 0");
    if (!k.sustained.empty() && std::abs(k.sustained.sum() - 1.0) > 1e-6) failed.push_back("sustained sums to 1");
    if (!k.transient.empty() && std::abs(k.transient.sum()) > 1e-6) failed.push_back("transient sums to 0");
    auto support_ok = [](const TemporalTaps &t) {
        return t.empty() || t.causal() || t.min_lag == -t.max_lag();
    };
    if (!support_ok(k.sustained) || !support_ok(k.transient))
        failed.push_back("offsets causal (<= 0) or symmetric");
    for (const TemporalTaps *t : {&k.sustained, &k.transient})
        if (std::any_of(t->weights.begin(), t->weights.end(), [](double w) { return !std::isfinite(w); })) {
            failed.push_back("finite weights");
            break;
        }
    if (failed.empty()) return;
    std::string msg = "temporal kernel violates:";
    for (const auto &f : failed) msg += " [" + f + "]";
    throw ValidationError(msg);
}

TemporalPerceptKernel parse_temporal_percept(const std::string &text) {
    std::map<std::string, std::map<int, double>> channels;
    std::map<std::string, double> rates;
    std::string current;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue;
        if (first == "channel") {
            std::string name, key, extra;
            double hz = 0.0;
            if (!(ls >> name >> key >> hz) || key != "frame_rate" || (ls >> extra))
                throw ParseError(lineno, "expected 'channel sustained|transient frame_rate <Hz>'");
            if (name != "sustained" && name != "transient")
                throw ParseError(lineno, "unknown channel '" + name + "'");
            if (channels.count(name)) throw ParseError(lineno, "duplicate channel '" + name + "'");
            channels[name];
            rates[name] = hz;
            current = name;
            continue;
        }
        if (current.empty()) throw ParseError(lineno, "data line before any 'channel' header");
        std::istringstream ps(line);
        long offset = 0;
        double weight = 0.0;
        std::string extra;
        if (!(ps >> offset >> weight) || (ps >> extra))
            throw ParseError(lineno, "expected '<offset> <weight>'");
        if (offset > 1'000'000 || offset < -1'000'000) throw ParseError(lineno, "offset out of range");
        const int lag = -int(offset);
        if (!channels[current].emplace(lag, weight).second)
            throw ParseError(lineno, "duplicate offset " + std::to_string(offset));
    }

    auto to_taps = [](const std::map<int, double> &m) {
        TemporalTaps t;
        if (m.empty()) return t;
        t.min_lag = m.begin()->first;
        t.weights.assign(std::size_t(m.rbegin()->first - t.min_lag + 1), 0.0);
        for (auto [lag, w] : m) t.weights[std::size_t(lag - t.min_lag)] = w;
        return t;
    };

    std::vector<std::string> failed;
    if (!channels.count("sustained")) failed.push_back("sustained channel present");
    if (!channels.count("transient")) failed.push_back("transient channel present");
    if (rates.size() == 2 && rates["sustained"] != rates["transient"]) failed.push_back("channel frame rates agree");
    if (!failed.empty()) {
        std::string msg = "temporal kernel table violates:";
        for (const auto &f : failed) msg += " [" + f + "]";
        throw ValidationError(msg);
    }

    TemporalPerceptKernel k;
    k.sustained = to_taps(channels["sustained"]);
    k.transient = to_taps(channels["transient"]);
    k.frame_rate = rates["sustained"];
    validate(k);
    return k;
}

TemporalPerceptKernel load_temporal_percept(const std::filesystem::path &path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open kernel table '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_temporal_percept(ss.str());
}

int default_taa_length(double alpha) {
    int j = 0;
    while (std::pow(1.0 - alpha, j) >= 1e-3) ++j;
    return j;
}

TaaKernel make_taa_kernel(double alpha, int length) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw InvalidParameter("TAA alpha must be in (0,1), got " + std::to_string(alpha));
    if (length <= 0) length = default_taa_length(alpha);
    TaaKernel k;
    k.alpha = alpha;
    k.weights.resize(std::size_t(length));
    for (int j = 0; j < length; ++j) k.weights[std::size_t(j)] = alpha * std::pow(1.0 - alpha, j);
    const double total = pairwise_sum(k.weights);
    for (double &w : k.weights) w /= total;
    return k;
}

const char *to_string(BoundaryPolicy p) {
    switch (p) {
    case BoundaryPolicy::toroidal:
        return "toroidal";
    case BoundaryPolicy::causal_renormalized:
        return "causal-renormalized";
    case BoundaryPolicy::causal_zero_pad:
        return "causal-zero-pad";
    }
    return "?";
}

SpatioTemporalKernel::SpatioTemporalKernel(SpatialKernel spatial, TemporalTaps lowpass, TemporalTaps bandpass,
                                           BoundaryPolicy policy)
    : spatial_(std::move(spatial)), lowpass_(std::move(lowpass)), bandpass_(std::move(bandpass)), policy_(policy) {
    if (lowpass_.empty() && bandpass_.empty()) lowpass_ = TemporalTaps::delta();
    const TemporalTaps temporal = add(lowpass_, bandpass_);
    min_lag_ = temporal.min_lag;
    lags_ = temporal.size();
    const std::size_t plane = spatial_.weights.size();
    weights_.resize(plane * std::size_t(lags_));
    for (int k = 0; k < lags_; ++k)
        for (std::size_t i = 0; i < plane; ++i)
            weights_[std::size_t(k) * plane + i] = temporal.weights[std::size_t(k)] * spatial_.weights[i];
    for (double w : weights_) max_weight_ = std::max(max_weight_, std::abs(w));
    dc_gain_ = pairwise_sum(spatial_.weights) * (lowpass_.sum() + bandpass_.sum());
}

double SpatioTemporalKernel::sum_of_weights() const { return pairwise_sum(weights_); }

double SpatioTemporalKernel::sum_of_squares() const {
    std::vector<double> sq(weights_.size());
    std::transform(weights_.begin(), weights_.end(), sq.begin(), [](double w) { return w * w; });
    return pairwise_sum(sq);
}

std::string SpatioTemporalKernel::describe() const {
    std::ostringstream os;
    os << "spatial sigma=" << spatial_.sigma << " radius=" << spatial_.radius << "; lags [" << min_lag_ << ", "
       << max_lag() << "]; extent " << extent().to_string() << "; policy " << to_string(policy_);
    return os.str();
}

SpatioTemporalKernel compose(const SpatialKernel &ks, const TemporalPerceptKernel *kt, const TaaKernel *ka,
                             BoundaryPolicy policy) {
    const TemporalTaps taa = ka ? ka->taps() : TemporalTaps::delta();
    if (!kt) return SpatioTemporalKernel(ks, taa, TemporalTaps::none(), policy);
    return SpatioTemporalKernel(ks, convolve(kt->sustained, taa), convolve(kt->transient, taa), policy);
}

SpatioTemporalKernel compose(const SpatialKernel &ks, const TemporalTaps &temporal, BoundaryPolicy policy) {
    return SpatioTemporalKernel(ks, temporal, TemporalTaps::none(), policy);
}

FrameSequence convolve_spatial(const FrameSequence &seq, const SpatialKernel &ks) {
    if (seq.empty()) throw InvalidInput("convolve: empty sequence");
    const Dims3 d = seq.dims();
    FrameSequence out(d);
    const int r = ks.radius;
    for (int t = 0; t < d.t; ++t)
        for (int y = 0; y < d.y; ++y)
            for (int x = 0; x < d.x; ++x) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    const int sy = wrap(y - dy, d.y);
                    for (int dx = -r; dx <= r; ++dx) acc += ks.at(dx, dy) * seq.at(wrap(x - dx, d.x), sy, t);
                }
                out.at(x, y, t) = acc;
            }
    return out;
}

FrameSequence convolve_sequence(const FrameSequence &seq, const SpatioTemporalKernel &k) {
    if (seq.empty()) throw InvalidInput("convolve: empty sequence");
    const FrameSequence spatial = convolve_spatial(seq, k.spatial());
    const Dims3 d = seq.dims();
    FrameSequence out(d);
    const TemporalTaps &low = k.lowpass();
    const TemporalTaps &band = k.bandpass();
    const double low_total = low.sum();
    const std::size_t plane = std::size_t(d.x) * std::size_t(d.y);

    for (int t = 0; t < d.t; ++t) {
        std::vector<std::pair<int, double>> taps;  // (source frame, weight)
        if (k.policy() == BoundaryPolicy::toroidal) {
            for (int lag = k.min_lag(); lag <= k.max_lag(); ++lag)
                taps.emplace_back(wrap(t - lag, d.t), low.at_lag(lag) + band.at_lag(lag));
        } else {
            double avail = 0.0;
            for (int lag = k.min_lag(); lag <= k.max_lag(); ++lag)
                if (t - lag >= 0 && t - lag < d.t) avail += low.at_lag(lag);
            double scale = 1.0;
            if (k.policy() == BoundaryPolicy::causal_renormalized) scale = avail != 0.0 ? low_total / avail : 0.0;
            for (int lag = k.min_lag(); lag <= k.max_lag(); ++lag)
                if (t - lag >= 0 && t - lag < d.t)
                    taps.emplace_back(t - lag, scale * low.at_lag(lag) + band.at_lag(lag));
        }
        auto dst = out.frame(t);
        for (auto [src, w] : taps) {
            if (w == 0.0) continue;
            auto s = spatial.frame(src);
            for (std::size_t i = 0; i < plane; ++i) dst[i] += w * s[i];
        }
    }
    return out;
}

KernelPreset parse_kernel_preset(const std::string &name) {
    for (KernelPreset p : {KernelPreset::spatial, KernelPreset::gaussian, KernelPreset::taa, KernelPreset::percept,
                           KernelPreset::percept_taa})
        if (name == to_string(p)) return p;
    throw InvalidParameter("unknown kernel '" + name + "' (expected spatial|gaussian|taa|percept|percept+taa)");
}

const char *to_string(KernelPreset p) {
    switch (p) {
    case KernelPreset::spatial:
        return "spatial";
    case KernelPreset::gaussian:
        return "gaussian";
    case KernelPreset::taa:
        return "taa";
    case KernelPreset::percept:
        return "percept";
    case KernelPreset::percept_taa:
        return "percept+taa";
    }
    return "?";
}

SpatioTemporalKernel build_kernel(const KernelSpec &spec, BoundaryPolicy policy) {
    const SpatialKernel ks = make_spatial_gaussian(spec.sigma, spec.truncation);
    auto percept = [&] {
        return spec.percept_table.empty() ? make_temporal_percept(spec.frame_rate)
                                          : load_temporal_percept(spec.percept_table);
    };
    switch (spec.preset) {
    case KernelPreset::spatial:
        return compose(ks, TemporalTaps::delta(), policy);
    case KernelPreset::gaussian:
        return compose(ks, make_temporal_gaussian(spec.temporal_sigma, spec.truncation), policy);
    case KernelPreset::taa: {
        const TaaKernel ka = make_taa_kernel(spec.alpha, spec.taa_taps);
        return compose(ks, nullptr, &ka, policy);
    }
    case KernelPreset::percept: {
        const TemporalPerceptKernel kt = percept();
        return compose(ks, &kt, nullptr, policy);
    }
    case KernelPreset::percept_taa: {
        const TemporalPerceptKernel kt = percept();
        const TaaKernel ka = make_taa_kernel(spec.alpha, spec.taa_taps);
        return compose(ks, &kt, &ka, policy);
    }
    }
    throw InvalidParameter("unknown kernel preset");
}

}  // namespace stbn
