#include <stbn/sequence.h>

#include <stbn/error.h>

#include <algorithm>
#include <cmath>

namespace stbn {

std::string Dims3::to_string() const {
    return std::to_string(x) + "x" + std::to_string(y) + "x" + std::to_string(t);
}

FrameSequence::FrameSequence(Dims3 dims, double fill) : dims_(dims) {
    if (!dims.positive())
        throw InvalidInput("frame sequence dims must be positive, got " + dims.to_string());
    values_.assign(dims.volume(), fill);
}

FrameSequence &FrameSequence::operator+=(const FrameSequence &o) {
    if (!(dims_ == o.dims_))
        throw InvalidInput("dims mismatch: " + dims_.to_string() + " vs " + o.dims_.to_string());
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}

FrameSequence &FrameSequence::operator-=(const FrameSequence &o) {
    if (!(dims_ == o.dims_))
        throw InvalidInput("dims mismatch: " + dims_.to_string() + " vs " + o.dims_.to_string());
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
}

FrameSequence &FrameSequence::operator*=(double s) {
    for (double &v : values_) v *= s;
    return *this;
}

FrameSequence operator+(FrameSequence a, const FrameSequence &b) { return a += b; }
FrameSequence operator-(FrameSequence a, const FrameSequence &b) { return a -= b; }
FrameSequence operator*(double s, FrameSequence a) { return a *= s; }

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace stbn
