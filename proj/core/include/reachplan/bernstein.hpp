#pragma once

#include <functional>
#include <string>
#include <vector>

#include "reachplan/interval.hpp"

namespace reachplan::bernstein {

using ScalarFn = std::function<double(const Vec&)>;

/// Sound affine enclosure of a function on a box:
/// |f(x) - (g . x + h)| <= w for all x in the box.
struct AffineEnclosure {
    Vec g;
    double h = 0.0;
    double w = 0.0;
};

/// Tensor-product polynomial in the Bernstein basis over a box. Coefficients
/// are samples of the approximated function at the uniform grid a_j/d_j
/// mapped back to the box. Dimensions of zero width are held fixed and
/// excluded from the basis. Immutable.
class BernsteinPoly {
public:
    BernsteinPoly() = default;

    const IntervalBox& domain() const { return domain_; }
    const std::vector<std::size_t>& active_dims() const { return active_; }
    const std::vector<int>& degrees() const { return degree_; }
    const Vec& coefficients() const { return coeffs_; }

    /// Stable evaluation via per-dimension de Casteljau reduction.
    /// Throws if x lies outside the domain.
    double eval(const Vec& x) const;

    /// Coefficient-enclosure range [min coeff, max coeff]; sound on domain.
    Interval range() const;

    /// Range after `depth` rounds of midpoint subdivision. Only shrinks.
    Interval refined_range(int depth) const;

    /// Lipschitz bound of the polynomial over the domain in the physical
    /// L2 box metric, from degree-scaled coefficient first differences.
    double lipschitz_bound() const;

    /// Affine enclosure of the polynomial over its domain: tangent plane at
    /// the domain center, with the remainder bounded through the Bernstein
    /// coefficients of the difference (exact representation, since an affine
    /// function is multi-affine in every basis degree). Entries of g for
    /// zero-width dimensions are 0.
    AffineEnclosure affine_enclosure() const;

    /// Split the domain in half along the given active-dim index (position
    /// in active_dims(), not a state index).
    std::pair<BernsteinPoly, BernsteinPoly> subdivide(std::size_t axis) const;

    friend BernsteinPoly build_bernstein(const ScalarFn&, const IntervalBox&,
                                         const std::vector<int>&);

private:
    IntervalBox domain_;
    std::vector<std::size_t> active_;  // state indices with nonzero width
    std::vector<int> degree_;          // per active dim
    std::vector<std::size_t> stride_;  // row-major strides over active dims
    Vec coeffs_;

    std::size_t offset(const std::vector<int>& idx) const;
};

/// Samples f at the Bernstein grid over the box. Degrees are given per
/// state dimension; entries for zero-width dimensions are ignored.
/// Throws if f is non-finite at any grid point or any active degree < 1.
BernsteinPoly build_bernstein(const ScalarFn& f, const IntervalBox& box,
                              const std::vector<int>& degrees);

/// Certified error bound: |f(x) - B(x)| <= epsilon on the whole box.
/// Computed as the max |f - B| over a sample grid plus (L_f + L_B) * r,
/// where r is the half-diagonal of a grid cell. grid_per_dim sets the point
/// count along the widest active dimension; narrower dimensions get
/// proportionally fewer points (at least 2). L_f must be a Lipschitz bound
/// on f in the physical L2 box metric.
double error_bound(const ScalarFn& f, double lipschitz_f,
                   const BernsteinPoly& poly, int grid_per_dim);

struct CertifiedApprox {
    BernsteinPoly poly;
    double epsilon = 0.0;
    std::string source_tag;
};

struct BernsteinConfig {
    int degree = 2;         // per active state dimension
    int clock_degree = 1;   // for dimensions flagged clock-like
    int grid_per_dim = 8;   // m for the error bound
    /// Error-bound grid for the behavior net; 0 means grid_per_dim. A
    /// coarser behavior grid gives a wider certified band around the
    /// behavior output, which keeps borderline behaviors in play instead of
    /// resolving them away.
    int behavior_grid_per_dim = 0;
    int range_refine = 1;   // subdivision rounds in range enclosures
    std::vector<std::size_t> clock_dims;
};

std::vector<int> degree_vector(const BernsteinConfig& cfg, std::size_t dim);

CertifiedApprox certify(const ScalarFn& f, double lipschitz_f,
                        const IntervalBox& box, const std::vector<int>& degrees,
                        int grid_per_dim, std::string tag = {});

/// Sound enclosure of f's range on the box: coefficient range of the
/// Bernstein approximation widened by the certified error.
Interval approx_range(const ScalarFn& f, double lipschitz_f,
                      const IntervalBox& box, const std::vector<int>& degrees,
                      int grid_per_dim, int range_refine = 0);

}  // namespace reachplan::bernstein
