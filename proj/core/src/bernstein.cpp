#include "reachplan/bernstein.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reachplan::bernstein {

namespace {
constexpr double kDegeneracyTol = 0.0;  // exact zero width counts as fixed
constexpr double kDomainTol = 1e-9;
}  // namespace

std::size_t BernsteinPoly::offset(const std::vector<int>& idx) const {
    std::size_t o = 0;
    for (std::size_t k = 0; k < idx.size(); ++k)
        o += static_cast<std::size_t>(idx[k]) * stride_[k];
    return o;
}

BernsteinPoly build_bernstein(const ScalarFn& f, const IntervalBox& box,
                              const std::vector<int>& degrees) {
    if (degrees.size() != box.dim())
        throw std::invalid_argument("build_bernstein: degree vector dim mismatch");

    BernsteinPoly p;
    p.domain_ = box;
    for (std::size_t j = 0; j < box.dim(); ++j) {
        if (box.width(j) > kDegeneracyTol) {
            if (degrees[j] < 1)
                throw std::invalid_argument(
                    "build_bernstein: degree must be >= 1 for non-degenerate dim " +
                    std::to_string(j));
            p.active_.push_back(j);
            p.degree_.push_back(degrees[j]);
        }
    }

    std::size_t total = 1;
    p.stride_.assign(p.active_.size(), 0);
    for (std::size_t k = p.active_.size(); k-- > 0;) {
        p.stride_[k] = total;
        total *= static_cast<std::size_t>(p.degree_[k] + 1);
    }
    p.coeffs_.assign(total, 0.0);

    Vec x = box.lo();  // degenerate dims stay at lo == hi
    std::vector<int> idx(p.active_.size(), 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        for (std::size_t k = 0; k < p.active_.size(); ++k) {
            std::size_t j = p.active_[k];
            double u = static_cast<double>(idx[k]) / p.degree_[k];
            x[j] = box.lo(j) + u * box.width(j);
        }
        double v = f(x);
        if (!std::isfinite(v))
            throw std::runtime_error("build_bernstein: f non-finite at grid point");
        p.coeffs_[p.offset(idx)] = v;
        for (std::size_t k = p.active_.size(); k-- > 0;) {
            if (++idx[k] <= p.degree_[k]) break;
            idx[k] = 0;
        }
    }
    return p;
}

double BernsteinPoly::eval(const Vec& x) const {
    if (x.size() != domain_.dim())
        throw std::invalid_argument("BernsteinPoly::eval: dim mismatch");
    if (!domain_.contains(x, kDomainTol))
        throw std::domain_error("BernsteinPoly::eval: point outside domain");

    Vec work = coeffs_;
    std::size_t count = coeffs_.size();
    // Collapse one active dimension at a time, innermost (stride 1) first.
    for (std::size_t k = active_.size(); k-- > 0;) {
        std::size_t j = active_[k];
        double u = (x[j] - domain_.lo(j)) / domain_.width(j);
        std::size_t n = static_cast<std::size_t>(degree_[k]) + 1;
        std::size_t slices = count / n;
        for (std::size_t s = 0; s < slices; ++s) {
            double* b = work.data() + s * n;
            for (std::size_t r = n - 1; r >= 1; --r)
                for (std::size_t i = 0; i < r; ++i)
                    b[i] = (1.0 - u) * b[i] + u * b[i + 1];
            work[s] = b[0];
        }
        count = slices;
    }
    return work.empty() ? 0.0 : work[0];
}

Interval BernsteinPoly::range() const {
    double lo = coeffs_[0], hi = coeffs_[0];
    for (double c : coeffs_) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    return {lo, hi};
}

AffineEnclosure BernsteinPoly::affine_enclosure() const {
    std::size_t n = domain_.dim();
    AffineEnclosure enc;
    enc.g.assign(n, 0.0);
    Vec c = domain_.center();

    // Tangent slope at the center per active dimension. Central differences
    // at quarter width are exact through cubic degree; any inexactness is
    // absorbed by the remainder bound below either way.
    for (std::size_t k = 0; k < active_.size(); ++k) {
        std::size_t j = active_[k];
        double hs = 0.25 * domain_.width(j);
        Vec xp = c, xm = c;
        xp[j] += hs;
        xm[j] -= hs;
        enc.g[j] = (eval(xp) - eval(xm)) / (2.0 * hs);
    }
    enc.h = eval(c);
    for (std::size_t j = 0; j < n; ++j) enc.h -= enc.g[j] * c[j];

    // Bernstein coefficients of B - affine: the affine part is represented
    // exactly by its values at the grid nodes, so the coefficient range of
    // the difference soundly bounds the remainder.
    double cmin = 0.0, cmax = 0.0;
    bool first = true;
    Vec x = domain_.lo();
    std::vector<int> idx(active_.size(), 0);
    for (std::size_t flat = 0; flat < coeffs_.size(); ++flat) {
        double a = enc.h;
        for (std::size_t j = 0; j < n; ++j) a += enc.g[j] * x[j];
        for (std::size_t k = 0; k < active_.size(); ++k) {
            std::size_t j = active_[k];
            double u = static_cast<double>(idx[k]) / degree_[k];
            a += enc.g[j] * (domain_.lo(j) + u * domain_.width(j) - x[j]);
        }
        double d = coeffs_[offset(idx)] - a;
        if (first || d < cmin) cmin = d;
        if (first || d > cmax) cmax = d;
        first = false;
        for (std::size_t k = active_.size(); k-- > 0;) {
            if (++idx[k] <= degree_[k]) break;
            idx[k] = 0;
        }
    }
    enc.w = std::max(std::fabs(cmin), std::fabs(cmax));
    return enc;
}

double BernsteinPoly::lipschitz_bound() const {
    double sq = 0.0;
    for (std::size_t k = 0; k < active_.size(); ++k) {
        std::size_t n = static_cast<std::size_t>(degree_[k]) + 1;
        double maxdiff = 0.0;
        // max first difference of coefficients along axis k
        std::vector<int> idx(active_.size(), 0);
        for (std::size_t flat = 0; flat < coeffs_.size(); ++flat) {
            if (idx[k] + 1 < static_cast<int>(n)) {
                std::vector<int> nxt = idx;
                ++nxt[k];
                maxdiff = std::max(
                    maxdiff, std::fabs(coeffs_[offset(nxt)] - coeffs_[offset(idx)]));
            }
            for (std::size_t kk = active_.size(); kk-- > 0;) {
                if (++idx[kk] <= degree_[kk]) break;
                idx[kk] = 0;
            }
        }
        double g = maxdiff * degree_[k] / domain_.width(active_[k]);
        sq += g * g;
    }
    return std::sqrt(sq);
}

std::pair<BernsteinPoly, BernsteinPoly> BernsteinPoly::subdivide(
    std::size_t axis) const {
    if (axis >= active_.size())
        throw std::invalid_argument("subdivide: bad axis");

    BernsteinPoly left = *this, right = *this;
    std::size_t j = active_[axis];
    double mid = domain_.at(j).mid();
    left.domain_.set(j, {domain_.lo(j), mid});
    right.domain_.set(j, {mid, domain_.hi(j)});

    std::size_t n = static_cast<std::size_t>(degree_[axis]) + 1;
    std::size_t str = stride_[axis];

    Vec row(n);
    for (std::size_t base = 0; base < coeffs_.size(); ++base) {
        // visit each 1-D fiber along `axis` exactly once
        if ((base / str) % n != 0) continue;
        for (std::size_t i = 0; i < n; ++i) row[i] = coeffs_[base + i * str];
        // de Casteljau at u = 0.5: row fronts give left, row backs give right
        Vec lcoef(n), rcoef(n);
        lcoef[0] = row[0];
        rcoef[n - 1] = row[n - 1];
        for (std::size_t r = n - 1; r >= 1; --r) {
            for (std::size_t i = 0; i < r; ++i)
                row[i] = 0.5 * (row[i] + row[i + 1]);
            lcoef[n - r] = row[0];
            rcoef[r - 1] = row[r - 1];
        }
        for (std::size_t i = 0; i < n; ++i) {
            left.coeffs_[base + i * str] = lcoef[i];
            right.coeffs_[base + i * str] = rcoef[i];
        }
    }
    return {std::move(left), std::move(right)};
}

Interval BernsteinPoly::refined_range(int depth) const {
    Interval parent = range();
    if (depth <= 0 || active_.empty()) return parent;
    std::size_t axis = static_cast<std::size_t>(depth - 1) % active_.size();
    auto [l, r] = subdivide(axis);
    Interval child = l.refined_range(depth - 1).hull(r.refined_range(depth - 1));
    return child.intersect(parent);
}

double error_bound(const ScalarFn& f, double lipschitz_f,
                   const BernsteinPoly& poly, int grid_per_dim) {
    if (grid_per_dim < 2)
        throw std::invalid_argument("error_bound: grid_per_dim must be >= 2");
    if (!std::isfinite(lipschitz_f))
        throw std::invalid_argument("error_bound: Lipschitz bound must be finite");

    const IntervalBox& box = poly.domain();
    const auto& active = poly.active_dims();

    // grid_per_dim sets the point count along the widest active dimension;
    // narrower dimensions get proportionally fewer points. The bound uses the
    // actual per-dimension cell sizes, so this spends evaluations where they
    // shrink r the most.
    double wmax = 0.0;
    for (std::size_t j : active) wmax = std::max(wmax, box.width(j));
    std::vector<int> counts(active.size(), 2);
    for (std::size_t k = 0; k < active.size(); ++k) {
        double w = box.width(active[k]);
        counts[k] = std::max(
            2, static_cast<int>(std::ceil(grid_per_dim * w / wmax)));
    }

    double rsq = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
        double cell = box.width(active[k]) / (counts[k] - 1);
        rsq += 0.25 * cell * cell;
    }
    double r = std::sqrt(rsq);

    std::size_t total = 1;
    for (std::size_t k = 0; k < active.size(); ++k)
        total *= static_cast<std::size_t>(counts[k]);

    Vec x = box.lo();
    std::vector<int> idx(active.size(), 0);
    double maxdiff = 0.0;
    for (std::size_t flat = 0; flat < total; ++flat) {
        for (std::size_t k = 0; k < active.size(); ++k) {
            std::size_t j = active[k];
            double u = static_cast<double>(idx[k]) / (counts[k] - 1);
            x[j] = box.lo(j) + u * box.width(j);
        }
        maxdiff = std::max(maxdiff, std::fabs(f(x) - poly.eval(x)));
        for (std::size_t k = active.size(); k-- > 0;) {
            if (++idx[k] < counts[k]) break;
            idx[k] = 0;
        }
    }
    return maxdiff + (lipschitz_f + poly.lipschitz_bound()) * r;
}

std::vector<int> degree_vector(const BernsteinConfig& cfg, std::size_t dim) {
    std::vector<int> d(dim, cfg.degree);
    for (std::size_t j : cfg.clock_dims)
        if (j < dim) d[j] = cfg.clock_degree;
    return d;
}

CertifiedApprox certify(const ScalarFn& f, double lipschitz_f,
                        const IntervalBox& box, const std::vector<int>& degrees,
                        int grid_per_dim, std::string tag) {
    CertifiedApprox ca;
    ca.poly = build_bernstein(f, box, degrees);
    ca.epsilon = error_bound(f, lipschitz_f, ca.poly, grid_per_dim);
    ca.source_tag = std::move(tag);
    return ca;
}

Interval approx_range(const ScalarFn& f, double lipschitz_f,
                      const IntervalBox& box, const std::vector<int>& degrees,
                      int grid_per_dim, int range_refine) {
    CertifiedApprox ca = certify(f, lipschitz_f, box, degrees, grid_per_dim);
    return ca.poly.refined_range(range_refine).widen(ca.epsilon);
}

}  // namespace reachplan::bernstein
