#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace reachplan {

using Vec = std::vector<double>;

/// Closed scalar interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (!(lo <= hi)) throw std::invalid_argument("Interval: lo > hi");
    }
    static Interval point(double v) { return Interval(v, v); }

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
    bool intersects(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }

    Interval operator+(const Interval& o) const { return {lo + o.lo, hi + o.hi}; }
    Interval operator-(const Interval& o) const { return {lo - o.hi, hi - o.lo}; }
    Interval operator*(double s) const {
        return s >= 0 ? Interval(lo * s, hi * s) : Interval(hi * s, lo * s);
    }
    Interval hull(const Interval& o) const {
        return {std::min(lo, o.lo), std::max(hi, o.hi)};
    }
    Interval intersect(const Interval& o) const {
        return {std::max(lo, o.lo), std::min(hi, o.hi)};
    }
    Interval widen(double eps) const { return {lo - eps, hi + eps}; }
};

/// Axis-aligned box in R^n; the unit of all set computation.
class IntervalBox {
public:
    IntervalBox() = default;
    IntervalBox(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
        if (lo_.size() != hi_.size())
            throw std::invalid_argument("IntervalBox: dim mismatch");
        for (std::size_t j = 0; j < lo_.size(); ++j) {
            if (!std::isfinite(lo_[j]) || !std::isfinite(hi_[j]) || lo_[j] > hi_[j])
                throw std::invalid_argument("IntervalBox: bad bounds at dim " +
                                            std::to_string(j));
        }
    }
    static IntervalBox point(const Vec& x) { return IntervalBox(x, x); }

    std::size_t dim() const { return lo_.size(); }
    double lo(std::size_t j) const { return lo_[j]; }
    double hi(std::size_t j) const { return hi_[j]; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    Interval at(std::size_t j) const { return {lo_[j], hi_[j]}; }
    void set(std::size_t j, const Interval& iv) { lo_[j] = iv.lo; hi_[j] = iv.hi; }

    double width(std::size_t j) const { return hi_[j] - lo_[j]; }
    Vec widths() const {
        Vec w(dim());
        for (std::size_t j = 0; j < dim(); ++j) w[j] = width(j);
        return w;
    }
    Vec center() const {
        Vec c(dim());
        for (std::size_t j = 0; j < dim(); ++j) c[j] = 0.5 * (lo_[j] + hi_[j]);
        return c;
    }
    bool degenerate(std::size_t j, double tol = 0.0) const {
        return width(j) <= tol;
    }

    bool contains(const Vec& x, double tol = 0.0) const {
        if (x.size() != dim()) return false;
        for (std::size_t j = 0; j < dim(); ++j)
            if (x[j] < lo_[j] - tol || x[j] > hi_[j] + tol) return false;
        return true;
    }
    bool contains(const IntervalBox& o, double tol = 0.0) const {
        if (o.dim() != dim()) return false;
        for (std::size_t j = 0; j < dim(); ++j)
            if (o.lo_[j] < lo_[j] - tol || o.hi_[j] > hi_[j] + tol) return false;
        return true;
    }
    bool intersects(const IntervalBox& o) const {
        for (std::size_t j = 0; j < dim(); ++j)
            if (!at(j).intersects(o.at(j))) return false;
        return true;
    }
    IntervalBox hull(const IntervalBox& o) const {
        IntervalBox r = *this;
        for (std::size_t j = 0; j < dim(); ++j) r.set(j, at(j).hull(o.at(j)));
        return r;
    }

private:
    Vec lo_, hi_;
};

/// Interval value of an affine form a.x + b over a box. Exact.
inline Interval affine_over_box(const Vec& a, double b, const IntervalBox& box) {
    double lo = b, hi = b;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (a[j] >= 0) {
            lo += a[j] * box.lo(j);
            hi += a[j] * box.hi(j);
        } else {
            lo += a[j] * box.hi(j);
            hi += a[j] * box.lo(j);
        }
    }
    return {lo, hi};
}

}  // namespace reachplan
