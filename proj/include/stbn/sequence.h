#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stbn {

struct Dims3 {
    int x = 0, y = 0, t = 0;

    std::size_t volume() const { return std::size_t(x) * std::size_t(y) * std::size_t(t); }
    bool positive() const { return x > 0 && y > 0 && t > 0; }
    bool operator==(const Dims3 &) const = default;
    std::string to_string() const;
};

// Toroidal index wrap; total for any integer input.
inline int wrap(int v, int n) {
    const int r = v % n;
    return r < 0 ? r + n : r;
}

// Scalar image stack, x fastest, then y, then t.
class FrameSequence {
  public:
    FrameSequence() = default;
    explicit FrameSequence(Dims3 dims, double fill = 0.0);

    const Dims3 &dims() const { return dims_; }
    bool empty() const { return values_.empty(); }

    std::size_t index(int x, int y, int t) const {
        return (std::size_t(t) * std::size_t(dims_.y) + std::size_t(y)) * std::size_t(dims_.x) +
               std::size_t(x);
    }
    double &at(int x, int y, int t) { return values_[index(x, y, t)]; }
    double at(int x, int y, int t) const { return values_[index(x, y, t)]; }

    std::span<double> frame(int t) {
        return {values_.data() + index(0, 0, t), std::size_t(dims_.x) * std::size_t(dims_.y)};
    }
    std::span<const double> frame(int t) const {
        return {values_.data() + index(0, 0, t), std::size_t(dims_.x) * std::size_t(dims_.y)};
    }

    std::vector<double> &values() { return values_; }
    const std::vector<double> &values() const { return values_; }

    FrameSequence &operator+=(const FrameSequence &o);
    FrameSequence &operator-=(const FrameSequence &o);
    FrameSequence &operator*=(double s);

  private:
    Dims3 dims_;
    std::vector<double> values_;
};

FrameSequence operator+(FrameSequence a, const FrameSequence &b);
FrameSequence operator-(FrameSequence a, const FrameSequence &b);
FrameSequence operator*(double s, FrameSequence a);

// Signed perceptual error per pixel per frame; same layout as FrameSequence.
using ErrorSequence = FrameSequence;

// Pairwise (cascade) summation; deterministic for a given input order.
double pairwise_sum(std::span<const double> v);

}  // namespace stbn
