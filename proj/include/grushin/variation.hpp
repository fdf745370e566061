/// @file variation.hpp
/// @brief Domain-variation machinery: the anisotropic cutoff, the translating
///        and scaling one-parameter map families, their closed-form Jacobian
///        determinants, and the direct numerical stationarity check that
///        t -> I(u o Phi_t) has vanishing derivative at t = 0 for a minimizer.

#ifndef GRUSHIN_VARIATION_HPP
#define GRUSHIN_VARIATION_HPP

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "grushin/fields_ops.hpp"
#include "grushin/geometry.hpp"
#include "grushin/solver.hpp"

namespace grushin {

// ===========================================================================
// Cutoff
// ===========================================================================

/// C^1 cutoff supported on the delta-shell around a subdomain D: phi = 1 on
/// the closure of D, phi = 0 at anisotropic distance >= delta, and a cubic
/// smoothstep blend in between.  The blend keeps grad(phi) well defined
/// everywhere, which the Jacobian formulas require.
class Cutoff {
 public:
  /// Construction verifies that the delta-shell stays strictly inside the
  /// grid's domain (so the cutoff vanishes on the boundary and the variation
  /// maps fix it); violations raise ShellRangeError.
  Cutoff(const SubBox& D, double delta, const GrushinGeometry& geo)
      : D_(D), delta_(delta), geo_(geo), dbox_(D.physical_box()) {
    if (!(delta > 0.0)) throw std::invalid_argument("Cutoff: delta must be > 0");
    (void)delta_shell(D, delta, geo);  // range validation
  }

  const SubBox& D() const { return D_; }
  double delta() const { return delta_; }
  const GrushinGeometry& geometry() const { return geo_; }

  /// Decreasing cubic smoothstep: 1 for s <= 0, 0 for s >= 1, else
  /// 1 - 3 s^2 + 2 s^3; its derivative vanishes at both ends.
  static double blend(double s) {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    return 1.0 - 3.0 * s * s + 2.0 * s * s * s;
  }

  double value(const Point& z) const {
    const double d = anisotropic_distance(z, dbox_, geo_.N, geo_.gamma);
    return blend(d / delta_);
  }

  /// Analytic gradient of the cutoff.  Writing X = |x - Px|^2 and
  /// Y = |y - Py|^2 for the componentwise projections P onto D, the distance
  /// is d = S^{1/(2+2 gamma)} with S = X^{1+gamma}/(1+gamma)^2 + Y, and the
  /// chain rule gives the components below.  The gradient is identically
  /// zero on D (d = 0) and outside the shell (d >= delta).
  Point grad(const Point& z) const {
    Point g = make_point();
    const double gamma = geo_.gamma;
    double X = 0.0, Y = 0.0;
    Point disp = make_point();
    for (int k = 0; k < geo_.dim(); ++k) {
      const double c = std::min(std::max(z[k], dbox_.lo[k]), dbox_.hi[k]);
      disp[k] = z[k] - c;
      if (geo_.is_x_axis(k))
        X += disp[k] * disp[k];
      else
        Y += disp[k] * disp[k];
    }
    const double kappa = 1.0 / ((1.0 + gamma) * (1.0 + gamma));
    const double S = kappa * std::pow(X, 1.0 + gamma) + Y;
    if (S <= 0.0) return g;  // inside the closure of D
    const double e = 1.0 / (2.0 + 2.0 * gamma);
    const double d = std::pow(S, e);
    const double s = d / delta_;
    if (s >= 1.0) return g;  // outside the shell
    const double dB = -6.0 * s * (1.0 - s);  // blend'(s)
    const double pre = (dB / delta_) * e * std::pow(S, e - 1.0);
    const double xw = (X > 0.0) ? std::pow(X, gamma) / (1.0 + gamma) : 0.0;
    for (int k = 0; k < geo_.dim(); ++k) {
      if (disp[k] == 0.0) continue;
      g[k] = pre * 2.0 * disp[k] * (geo_.is_x_axis(k) ? xw : 1.0);
    }
    return g;
  }

  std::vector<double> nodal_values() const {
    const Grid& grid = *D_.grid;
    std::vector<double> out(static_cast<size_t>(grid.node_count()));
    IndexVec lo = make_index(), hi = make_index();
    for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;
    for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
      out[static_cast<size_t>(grid.encode(iv))] = value(grid.node_point(iv));
    });
    return out;
  }

 private:
  SubBox D_;
  double delta_;
  GrushinGeometry geo_;
  Box dbox_;
};

// ===========================================================================
// Variation maps
// ===========================================================================

/// Thrown when a mapped or resampled point leaves the computational domain.
struct MapRangeError : std::range_error {
  using std::range_error::range_error;
};

/// One-parameter family of self-maps of the domain: translation along one
/// coordinate axis, Phi_t(z) = z + t phi(z) e_axis, or radial scaling,
/// Phi_t(z) = (1 + t phi(z)) z.  Phi_0 is the identity; the cutoff localizes
/// the motion to the shell around its subdomain, fixing the boundary.
struct VariationMap {
  enum class Kind { Translate, Scale };
  Kind kind = Kind::Translate;
  int axis = 0;  ///< 0-based coordinate axis (Translate only)
  Cutoff cutoff;

  static VariationMap translate(int axis, Cutoff c) {
    if (axis < 0 || axis >= c.geometry().dim())
      throw std::invalid_argument("VariationMap::translate: axis out of range");
    return VariationMap{Kind::Translate, axis, std::move(c)};
  }
  static VariationMap scale(Cutoff c) { return VariationMap{Kind::Scale, 0, std::move(c)}; }
};

inline Point apply_map(const VariationMap& map, double t, const Point& z) {
  const double phi = map.cutoff.value(z);
  Point w = z;
  if (map.kind == VariationMap::Kind::Translate) {
    w[map.axis] += t * phi;
  } else {
    const double a = 1.0 + t * phi;
    for (int k = 0; k < map.cutoff.geometry().dim(); ++k) w[k] = a * z[k];
  }
  const Box& omega = map.cutoff.D().grid->box;
  if (!omega.contains(w, 1e-12)) {
    throw MapRangeError("apply_map: image point left the domain (|t| too large for this cutoff)");
  }
  return w;
}

/// Closed-form determinant of the Jacobian of Phi_t.  Translation perturbs
/// the identity by a rank-one matrix t e_axis (grad phi)^T, so the
/// determinant is 1 + t d(phi)/d(z_axis); scaling gives
/// (1 + t phi)^n + (1 + t phi)^{n-1} t <z, grad phi> with n the dimension.
inline double jacobian_det(const VariationMap& map, double t, const Point& z) {
  if (map.kind == VariationMap::Kind::Translate) {
    return 1.0 + t * map.cutoff.grad(z)[map.axis];
  }
  const int n = map.cutoff.geometry().dim();
  const double phi = map.cutoff.value(z);
  const Point g = map.cutoff.grad(z);
  double zg = 0.0;
  for (int k = 0; k < n; ++k) zg += z[k] * g[k];
  const double a = 1.0 + t * phi;
  return std::pow(a, n) + std::pow(a, n - 1) * t * zg;
}

/// d/dt of det Jac Phi_t^{-1} at t = 0: the negative divergence of the
/// variation's velocity field.
inline double ddet_dt_at_zero(const VariationMap& map, const Point& z) {
  if (map.kind == VariationMap::Kind::Translate) return -map.cutoff.grad(z)[map.axis];
  const int n = map.cutoff.geometry().dim();
  const double phi = map.cutoff.value(z);
  const Point g = map.cutoff.grad(z);
  double zg = 0.0;
  for (int k = 0; k < n; ++k) zg += z[k] * g[k];
  return -(static_cast<double>(n) * phi + zg);
}

// ===========================================================================
// Multilinear resampling
// ===========================================================================

namespace detail {

/// Multilinear interpolation of nodal values at an arbitrary point of the
/// grid's box (points outside raise MapRangeError).
inline double interpolate(const Grid& g, const std::vector<double>& f, const Point& z) {
  if (!g.box.contains(z, 1e-12))
    throw MapRangeError("interpolate: query point outside the domain");
  IndexVec cell = make_index();
  Point w = make_point();
  for (int k = 0; k < g.dim; ++k) {
    double s = (z[k] - g.box.lo[k]) / g.h[k];
    std::int64_t i = static_cast<std::int64_t>(std::floor(s));
    if (i < 0) i = 0;
    if (i > g.m[k] - 2) i = g.m[k] - 2;
    cell[k] = i;
    double frac = s - static_cast<double>(i);
    w[k] = std::min(std::max(frac, 0.0), 1.0);
  }
  double out = 0.0;
  const int corners = 1 << g.dim;
  for (int c = 0; c < corners; ++c) {
    IndexVec iv = cell;
    double weight = 1.0;
    for (int k = 0; k < g.dim; ++k) {
      if (c & (1 << k)) {
        iv[k] += 1;
        weight *= w[k];
      } else {
        weight *= 1.0 - w[k];
      }
    }
    if (weight != 0.0) out += weight * f[static_cast<size_t>(g.encode(iv))];
  }
  return out;
}

}  // namespace detail

/// Resample u o Phi_t onto the grid by multilinear interpolation: the value at
/// node z is u evaluated at Phi_t(z).  The cutoff vanishes on the boundary, so
/// boundary nodes map to themselves and the composition stays admissible.
inline ScalarField compose_with_map(const ScalarField& u, const VariationMap& map, double t) {
  const Grid& grid = *map.cutoff.D().grid;
  ScalarField v(grid);
  v.dirichlet_zero = u.dirichlet_zero;
  IndexVec lo = make_index(), hi = make_index();
  for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;
  for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
    const Point z = grid.node_point(iv);
    const Point w = apply_map(map, t, z);
    v[grid.encode(iv)] = detail::interpolate(grid, u.v, w);
  });
  if (v.dirichlet_zero) v.enforce_dirichlet();
  return v;
}

// ===========================================================================
// Stationarity check
// ===========================================================================

/// u plus a fixed smooth interior bump, amplitude * prod_k sin(pi s_k) with
/// s_k the normalized coordinate: a deterministic, Dirichlet-compatible
/// perturbation used as the non-minimizing control in stationarity studies.
inline ScalarField add_interior_bump(const ScalarField& u, double amplitude) {
  const Grid& grid = *u.grid;
  ScalarField v = u;
  IndexVec lo = make_index(), hi = make_index();
  for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;
  constexpr double pi = 3.14159265358979323846;
  for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
    double b = amplitude;
    for (int k = 0; k < grid.dim; ++k) {
      const double s = static_cast<double>(iv[k]) / static_cast<double>(grid.m[k] - 1);
      b *= std::sin(pi * s);
    }
    v[grid.encode(iv)] += b;
  });
  if (v.dirichlet_zero) v.enforce_dirichlet();
  return v;
}

struct StationaritySample {
  double t = 0.0;
  double energy = 0.0;
};

struct StationarityResult {
  std::vector<StationaritySample> samples;  ///< (t, I(u o Phi_t)) pairs, ascending t
  double t0 = 0.0;
  double energy0 = 0.0;      ///< I(u)
  double slope_t0 = 0.0;     ///< central difference with spacing t0
  double slope_half = 0.0;   ///< central difference with spacing t0/2
  double slope = 0.0;        ///< Richardson extrapolation of the two
};

/// Evaluate I(u o Phi_t) at t in {-t0, -t0/2, 0, +t0/2, +t0} (I the discrete
/// energy with the given nodal forcing) and estimate dI/dt at 0 by central
/// differences plus Richardson extrapolation.  For a discrete minimizer the
/// extrapolated slope vanishes up to resampling and solver-tolerance error.
inline StationarityResult stationarity_check(const ScalarField& u, const ScalarField& g,
                                             const GrushinGeometry& geo, const Grid& grid,
                                             const VariationMap& map, double t0) {
  if (!(t0 > 0.0)) throw std::invalid_argument("stationarity_check: t0 must be > 0");
  EnergyAssembler assembler(grid, geo);
  auto I_at = [&](double t) -> double {
    if (t == 0.0) return assembler.energy(u.v, g.v, 0.0);
    const ScalarField v = compose_with_map(u, map, t);
    return assembler.energy(v.v, g.v, 0.0);
  };

  StationarityResult res;
  res.t0 = t0;
  const double ts[5] = {-t0, -0.5 * t0, 0.0, 0.5 * t0, t0};
  double I[5];
  for (int i = 0; i < 5; ++i) {
    I[i] = I_at(ts[i]);
    res.samples.push_back({ts[i], I[i]});
  }
  res.energy0 = I[2];
  res.slope_t0 = (I[4] - I[0]) / (2.0 * t0);
  res.slope_half = (I[3] - I[1]) / t0;
  res.slope = (4.0 * res.slope_half - res.slope_t0) / 3.0;
  return res;
}

}  // namespace grushin

#endif  // GRUSHIN_VARIATION_HPP
