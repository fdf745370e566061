/// @file pohozaev.hpp
/// @brief Term-by-term assembly of the Pohozaev-type identities on axis-
///        aligned subdomains: the two translating identities, the local
///        scaling identity (with its auxiliary integration-by-parts relation),
///        the global scaling identity with boundary traces, and the
///        whole-space study over growing domains.
///
/// Term naming is frozen: each side's integral terms are named lhs_t1..lhs_tK
/// and rhs_t1..rhs_tK in reading order of the identity, signs included, so
/// lhs = sum(lhs_t*) and rhs = sum(rhs_t*) and residual = lhs - rhs.
///
/// Surface gradients are evaluated at face nodes with second-order one-sided
/// differences into the slab for the normal component and nodal differences
/// along the face for tangential components.  On the outer boundary (where
/// u = 0) the tangential components vanish identically, which makes the
/// trace collapse of the global identity an exact pointwise algebraic fact.

#ifndef GRUSHIN_POHOZAEV_HPP
#define GRUSHIN_POHOZAEV_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "grushin/fields_ops.hpp"
#include "grushin/geometry.hpp"
#include "grushin/quadrature.hpp"
#include "grushin/solver.hpp"

namespace grushin {

// ===========================================================================
// Report type
// ===========================================================================

struct IdentityReport {
  std::string kind;  ///< translate-x | translate-y | scale-local | scale-global
  int axis = 0;      ///< 1-based component for translating identities, else 0
  std::vector<std::pair<std::string, double>> terms;  ///< named, signed terms
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double relative_residual = 0.0;

  // Auxiliary integration-by-parts identity (scale-local reports only):
  // int_D |grad_gamma u|^p = int_D f u + oint |grad_gamma u|^{p-2} u <grad_gamma u, nu_gamma>.
  bool has_aux = false;
  double aux_lhs = 0.0;
  double aux_rhs_t1 = 0.0;
  double aux_rhs_t2 = 0.0;
  double aux_residual = 0.0;
  double aux_relative_residual = 0.0;

  // Trace-collapse diagnostic (scale-global reports only): max abs pointwise
  // difference between the two equivalent boundary integrands.
  bool has_collapse = false;
  double collapse_max_abs_diff = 0.0;

  double term(const std::string& name) const {
    for (const auto& [n, v] : terms)
      if (n == name) return v;
    throw std::out_of_range("IdentityReport: no term named " + name);
  }

  /// Sum the named terms into lhs/rhs and derive residuals.  The relative
  /// residual divides by the total term magnitude (0/0 reads as 0).
  void finalize() {
    std::vector<double> ls, rs;
    double denom = 0.0;
    for (const auto& [n, v] : terms) {
      (n.rfind("lhs_", 0) == 0 ? ls : rs).push_back(v);
      denom += std::abs(v);
    }
    lhs = pairwise_sum(ls);
    rhs = pairwise_sum(rs);
    residual = lhs - rhs;
    relative_residual = denom > 0.0 ? std::abs(residual) / denom : 0.0;
  }

  void finalize_aux() {
    has_aux = true;
    aux_residual = aux_lhs - (aux_rhs_t1 + aux_rhs_t2);
    const double denom = std::abs(aux_lhs) + std::abs(aux_rhs_t1) + std::abs(aux_rhs_t2);
    aux_relative_residual = denom > 0.0 ? std::abs(aux_residual) / denom : 0.0;
  }
};

/// Thrown when a translating-x identity is requested on a subdomain touching
/// the degenerate slab |x| < h while 0 < gamma < 1 (the |x|^{2(gamma-1)}
/// volume weight would be singular there).
struct SingularSlabError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ===========================================================================
// Pointwise trace and volume quantities
// ===========================================================================

namespace detail {

/// Weight |G|^{p-2} written as a function of |G|^2, with the convention that
/// a zero gradient yields 0 (every use multiplies by at least one further
/// gradient factor, so the p < 2 limit of the product is 0).
inline double weight_pm2(double grad_sq, double p) {
  if (p == 2.0) return 1.0;
  if (grad_sq == 0.0) return 0.0;
  return std::pow(grad_sq, 0.5 * (p - 2.0));
}

/// One-sided second-order derivative along `axis` at a face node, differencing
/// into the slab (side = +1 means the face sits at the upper index).
inline double one_sided_into_slab(const Grid& g, const std::vector<double>& f, const IndexVec& iv,
                                  int axis, int side) {
  const std::int64_t i = g.encode(iv);
  const std::int64_t s = g.stride[axis];
  const double h = g.h[axis];
  if (side > 0)
    return (3.0 * f[static_cast<size_t>(i)] - 4.0 * f[static_cast<size_t>(i - s)] +
            f[static_cast<size_t>(i - 2 * s)]) /
           (2.0 * h);
  return (-3.0 * f[static_cast<size_t>(i)] + 4.0 * f[static_cast<size_t>(i + s)] -
          f[static_cast<size_t>(i + 2 * s)]) /
         (2.0 * h);
}

struct SurfaceTrace {
  Point z = make_point();
  double u = 0.0;
  Point grad_full = make_point();   ///< Euclidean gradient of u at the face node
  Point grad_gamma = make_point();  ///< (grad_x u, |x|^gamma grad_y u)
  Point nu = make_point();          ///< outward unit normal
  Point nu_gamma = make_point();    ///< (nu_x, |x|^gamma nu_y)
  double gg2 = 0.0;                 ///< |grad_gamma u|^2
  double flux = 0.0;                ///< <grad_gamma u, nu_gamma>
};

inline SurfaceTrace surface_trace(const Grid& g, const GrushinGeometry& geo, const ScalarField& u,
                                  const Face& face, const IndexVec& iv) {
  SurfaceTrace t;
  t.z = g.node_point(iv);
  t.u = u[g.encode(iv)];
  for (int k = 0; k < g.dim; ++k) {
    t.grad_full[k] = (k == face.axis) ? one_sided_into_slab(g, u.v, iv, k, face.side)
                                      : nodal_derivative(g, u.v, iv, k);
  }
  const double w = geo.x_norm_pow(t.z, geo.gamma);
  for (int k = 0; k < g.dim; ++k)
    t.grad_gamma[k] = geo.is_x_axis(k) ? t.grad_full[k] : w * t.grad_full[k];
  t.nu = outward_normal(face);
  t.nu_gamma = grushin_normal(t.nu, t.z, geo);
  for (int k = 0; k < g.dim; ++k) {
    t.gg2 += t.grad_gamma[k] * t.grad_gamma[k];
    t.flux += t.grad_gamma[k] * t.nu_gamma[k];
  }
  return t;
}

struct VolumePoint {
  Point z = make_point();
  double u = 0.0;
  Point grad_full = make_point();
  double gg2 = 0.0;  ///< |grad_gamma u|^2
  double gy2 = 0.0;  ///< plain |grad_y u|^2 (unweighted)
};

inline VolumePoint volume_point(const Grid& g, const GrushinGeometry& geo, const ScalarField& u,
                                const IndexVec& iv) {
  VolumePoint q;
  q.z = g.node_point(iv);
  q.u = u[g.encode(iv)];
  const double w2 = geo.x_norm_pow(q.z, 2.0 * geo.gamma);
  for (int k = 0; k < g.dim; ++k) {
    const double d = nodal_derivative(g, u.v, iv, k);
    q.grad_full[k] = d;
    if (geo.is_x_axis(k))
      q.gg2 += d * d;
    else {
      q.gg2 += w2 * d * d;
      q.gy2 += d * d;
    }
  }
  return q;
}

/// Validate that every axis of the slab spans at least two cells (required by
/// the one-sided surface stencils).
inline void require_stencil_depth(const Grid& g, const IndexVec& lo, const IndexVec& hi) {
  for (int k = 0; k < g.dim; ++k)
    if (hi[k] - lo[k] < 2)
      throw std::invalid_argument(
          "identity assembly: subdomain must span at least 2 cells on every axis (axis " +
          std::to_string(k) + ")");
}

/// Enforce the degenerate-slab exclusion for the translating-x identity when
/// 0 < gamma < 1: the |x|^{2(gamma-1)} weight must stay regular on D.
inline void require_slab_exclusion(const Grid& g, const GrushinGeometry& geo, const IndexVec& lo,
                                   const IndexVec& hi) {
  if (!(geo.gamma > 0.0 && geo.gamma < 1.0)) return;
  double hx = 0.0;
  for (int k = 0; k < geo.N; ++k) hx = std::max(hx, g.h[k]);
  // Distance from the origin to the x-block projection of D.
  double nearest2 = 0.0;
  for (int k = 0; k < geo.N; ++k) {
    const double a = g.coord(k, lo[k]);
    const double b = g.coord(k, hi[k]);
    const double c = std::min(std::max(0.0, a), b);
    nearest2 += c * c;
  }
  if (std::sqrt(nearest2) < hx * (1.0 - 1e-12))
    throw SingularSlabError(
        "translating-x identity with 0 < gamma < 1 requires the subdomain to exclude the slab "
        "|x| < h around the degenerate set x = 0; shrink or move D away from x = 0");
}

}  // namespace detail

// ===========================================================================
// Translating identities
// ===========================================================================

/// Identity obtained from translating variations along x_i (1-based i <= N):
///   (1/p) oint |grad_gamma u|^p nu_x^i
///   - oint |grad_gamma u|^{p-2} (du/dx_i) <grad_gamma u, nu_gamma>
///   - int_D |grad_gamma u|^{p-2} gamma |x|^{2(gamma-1)} x_i |grad_y u|^2
///   = oint F nu_x^i - int_D dF/dx_i.
template <class NL>
inline IdentityReport translating_identity_x(const ScalarField& u, const NL& nl,
                                             const GrushinGeometry& geo, const Grid& grid,
                                             const SubBox& D, int i) {
  if (i < 1 || i > geo.N)
    throw std::invalid_argument("translating_identity_x: axis index must be in 1..N");
  detail::require_stencil_depth(grid, D.lo, D.hi);
  detail::require_slab_exclusion(grid, geo, D.lo, D.hi);
  const int c = i - 1;
  const double p = geo.p;

  IdentityReport rep;
  rep.kind = "translate-x";
  rep.axis = i;

  const double lhs_t1 =
      (1.0 / p) * surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        return std::pow(t.gg2, 0.5 * p) * t.nu[c];
      });
  const double lhs_t2 =
      -surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        return detail::weight_pm2(t.gg2, p) * t.grad_full[c] * t.flux;
      });
  double lhs_t3 = 0.0;
  if (geo.gamma > 0.0) {  // the gamma factor annihilates this term exactly at gamma = 0
    lhs_t3 = -volume_integral(grid, D.lo, D.hi, [&](const IndexVec& iv) {
      const auto q = detail::volume_point(grid, geo, u, iv);
      if (q.gy2 == 0.0) return 0.0;
      const double w = geo.x_norm_pow(q.z, 2.0 * (geo.gamma - 1.0));
      return detail::weight_pm2(q.gg2, p) * geo.gamma * w * q.z[c] * q.gy2;
    });
  }
  const double rhs_t1 =
      surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        return nl.F(t.z, t.u) * t.nu[c];
      });
  const double rhs_t2 = -volume_integral(grid, D.lo, D.hi, [&](const IndexVec& iv) {
    const std::int64_t idx = grid.encode(iv);
    return nl.dF_dz(grid.node_point(iv), u[idx])[c];
  });

  rep.terms = {{"lhs_t1", lhs_t1}, {"lhs_t2", lhs_t2}, {"lhs_t3", lhs_t3},
               {"rhs_t1", rhs_t1}, {"rhs_t2", rhs_t2}};
  rep.finalize();
  return rep;
}

/// Identity from translating variations along y_j (1-based j <= l); no
/// singular volume term appears in this direction:
///   (1/p) oint |grad_gamma u|^p nu_y^j
///   - oint |grad_gamma u|^{p-2} (du/dy_j) <grad_gamma u, nu_gamma>
///   = oint F nu_y^j - int_D dF/dy_j.
template <class NL>
inline IdentityReport translating_identity_y(const ScalarField& u, const NL& nl,
                                             const GrushinGeometry& geo, const Grid& grid,
                                             const SubBox& D, int j) {
  if (j < 1 || j > geo.l)
    throw std::invalid_argument("translating_identity_y: axis index must be in 1..l");
  detail::require_stencil_depth(grid, D.lo, D.hi);
  const int c = geo.N + j - 1;
  const double p = geo.p;

  IdentityReport rep;
  rep.kind = "translate-y";
  rep.axis = j;

  const double lhs_t1 =
      (1.0 / p) * surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        return std::pow(t.gg2, 0.5 * p) * t.nu[c];
      });
  const double lhs_t2 =
      -surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        return detail::weight_pm2(t.gg2, p) * t.grad_full[c] * t.flux;
      });
  const double rhs_t1 =
      surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        return nl.F(t.z, t.u) * t.nu[c];
      });
  const double rhs_t2 = -volume_integral(grid, D.lo, D.hi, [&](const IndexVec& iv) {
    const std::int64_t idx = grid.encode(iv);
    return nl.dF_dz(grid.node_point(iv), u[idx])[c];
  });

  rep.terms = {{"lhs_t1", lhs_t1}, {"lhs_t2", lhs_t2}, {"rhs_t1", rhs_t1}, {"rhs_t2", rhs_t2}};
  rep.finalize();
  return rep;
}

// ===========================================================================
// Local scaling identity and its auxiliary relation
// ===========================================================================

/// Identity from scaling variations on a subdomain D, with n = N + l:
///   (1 - n/p) int_D f u
///   + (1 - n/p) oint |grad_gamma u|^{p-2} u <grad_gamma u, nu_gamma>
///   + (1/p) oint |grad_gamma u|^p <z, nu>
///   - oint |grad_gamma u|^{p-2} <grad u, z> <grad_gamma u, nu_gamma>
///   - int_D gamma |x|^{2 gamma} |grad_gamma u|^{p-2} |grad_y u|^2
///   = oint F <z, nu> - n int_D F - int_D <grad_z F, z>.
/// <grad u, z> pairs the full Euclidean gradient with z, exactly as the
/// identity is stated.  The auxiliary relation is reported alongside.
template <class NL>
inline IdentityReport scaling_identity_local(const ScalarField& u, const NL& nl,
                                             const GrushinGeometry& geo, const Grid& grid,
                                             const SubBox& D) {
  detail::require_stencil_depth(grid, D.lo, D.hi);
  const double p = geo.p;
  const double n = static_cast<double>(geo.dim());
  const double cf = 1.0 - n / p;

  IdentityReport rep;
  rep.kind = "scale-local";

  const double int_fu = volume_integral(grid, D.lo, D.hi, [&](const IndexVec& iv) {
    const std::int64_t idx = grid.encode(iv);
    const double uv = u[idx];
    return nl.f(grid.node_point(iv), uv) * uv;
  });
  const double bdry_uflux =
      surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        return detail::weight_pm2(t.gg2, p) * t.u * t.flux;
      });

  const double lhs_t1 = cf * int_fu;
  const double lhs_t2 = cf * bdry_uflux;
  const double lhs_t3 =
      (1.0 / p) * surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        double zdotnu = 0.0;
        for (int k = 0; k < grid.dim; ++k) zdotnu += t.z[k] * t.nu[k];
        return std::pow(t.gg2, 0.5 * p) * zdotnu;
      });
  const double lhs_t4 =
      -surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        double gradz = 0.0;
        for (int k = 0; k < grid.dim; ++k) gradz += t.grad_full[k] * t.z[k];
        return detail::weight_pm2(t.gg2, p) * gradz * t.flux;
      });
  double lhs_t5 = 0.0;
  if (geo.gamma > 0.0) {
    lhs_t5 = -volume_integral(grid, D.lo, D.hi, [&](const IndexVec& iv) {
      const auto q = detail::volume_point(grid, geo, u, iv);
      if (q.gy2 == 0.0) return 0.0;
      const double w = geo.x_norm_pow(q.z, 2.0 * geo.gamma);
      return geo.gamma * w * detail::weight_pm2(q.gg2, p) * q.gy2;
    });
  }
  const double rhs_t1 =
      surface_integral_fn(grid, D.lo, D.hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        double zdotnu = 0.0;
        for (int k = 0; k < grid.dim; ++k) zdotnu += t.z[k] * t.nu[k];
        return nl.F(t.z, t.u) * zdotnu;
      });
  const double rhs_t2 = -n * volume_integral(grid, D.lo, D.hi, [&](const IndexVec& iv) {
    const std::int64_t idx = grid.encode(iv);
    return nl.F(grid.node_point(iv), u[idx]);
  });
  const double rhs_t3 = -volume_integral(grid, D.lo, D.hi, [&](const IndexVec& iv) {
    const std::int64_t idx = grid.encode(iv);
    const Point z = grid.node_point(iv);
    const Point dF = nl.dF_dz(z, u[idx]);
    double s = 0.0;
    for (int k = 0; k < grid.dim; ++k) s += dF[k] * z[k];
    return s;
  });

  rep.terms = {{"lhs_t1", lhs_t1}, {"lhs_t2", lhs_t2}, {"lhs_t3", lhs_t3}, {"lhs_t4", lhs_t4},
               {"lhs_t5", lhs_t5}, {"rhs_t1", rhs_t1}, {"rhs_t2", rhs_t2}, {"rhs_t3", rhs_t3}};
  rep.finalize();

  // Auxiliary relation: int_D |grad_gamma u|^p = int_D f u + oint |...|^{p-2} u flux.
  rep.aux_lhs = volume_integral(grid, D.lo, D.hi, [&](const IndexVec& iv) {
    const auto q = detail::volume_point(grid, geo, u, iv);
    return std::pow(q.gg2, 0.5 * p);
  });
  rep.aux_rhs_t1 = int_fu;
  rep.aux_rhs_t2 = bdry_uflux;
  rep.finalize_aux();
  return rep;
}

// ===========================================================================
// Global scaling identity
// ===========================================================================

/// Global identity on the whole grid domain Omega with u = 0 on its boundary:
///   (1 - n/p) int_Omega f u
///   + (1/p - 1) oint_{dOmega} |grad_gamma u|^p <z, nu>
///   - int_Omega gamma |x|^{2 gamma} |grad_gamma u|^{p-2} |grad_y u|^2
///   = -n int_Omega F - int_Omega <grad_z F, z>.
/// The boundary term uses the collapse of
///   oint |grad_gamma u|^{p-2} <grad u, z> <grad_gamma u, nu_gamma>
/// into oint |grad_gamma u|^p <z, nu>, which is a pointwise algebraic identity
/// for traces with zero tangential components; the report carries the maximum
/// pointwise discrepancy between the two integrands as a diagnostic.
template <class NL>
inline IdentityReport scaling_identity_global(const ScalarField& u, const NL& nl,
                                              const GrushinGeometry& geo, const Grid& grid) {
  if (!u.check_dirichlet())
    throw std::invalid_argument("scaling_identity_global: u must vanish on the domain boundary");
  const double p = geo.p;
  const double n = static_cast<double>(geo.dim());

  IndexVec lo = make_index(), hi = make_index();
  for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;

  IdentityReport rep;
  rep.kind = "scale-global";

  const double lhs_t1 = (1.0 - n / p) * volume_integral(grid, lo, hi, [&](const IndexVec& iv) {
    const std::int64_t idx = grid.encode(iv);
    const double uv = u[idx];
    return nl.f(grid.node_point(iv), uv) * uv;
  });
  double collapse = 0.0;
  const double lhs_t2 =
      (1.0 / p - 1.0) * surface_integral_fn(grid, lo, hi, [&](const IndexVec& iv, const Face& face) {
        const auto t = detail::surface_trace(grid, geo, u, face, iv);
        double zdotnu = 0.0, gradz = 0.0;
        for (int k = 0; k < grid.dim; ++k) {
          zdotnu += t.z[k] * t.nu[k];
          gradz += t.grad_full[k] * t.z[k];
        }
        const double direct = std::pow(t.gg2, 0.5 * p) * zdotnu;
        const double via_flux = detail::weight_pm2(t.gg2, p) * gradz * t.flux;
        collapse = std::max(collapse, std::abs(direct - via_flux));
        return direct;
      });
  double lhs_t3 = 0.0;
  if (geo.gamma > 0.0) {
    lhs_t3 = -volume_integral(grid, lo, hi, [&](const IndexVec& iv) {
      const auto q = detail::volume_point(grid, geo, u, iv);
      if (q.gy2 == 0.0) return 0.0;
      const double w = geo.x_norm_pow(q.z, 2.0 * geo.gamma);
      return geo.gamma * w * detail::weight_pm2(q.gg2, p) * q.gy2;
    });
  }
  const double rhs_t1 = -n * volume_integral(grid, lo, hi, [&](const IndexVec& iv) {
    const std::int64_t idx = grid.encode(iv);
    return nl.F(grid.node_point(iv), u[idx]);
  });
  const double rhs_t2 = -volume_integral(grid, lo, hi, [&](const IndexVec& iv) {
    const std::int64_t idx = grid.encode(iv);
    const Point z = grid.node_point(iv);
    const Point dF = nl.dF_dz(z, u[idx]);
    double s = 0.0;
    for (int k = 0; k < grid.dim; ++k) s += dF[k] * z[k];
    return s;
  });

  rep.terms = {{"lhs_t1", lhs_t1}, {"lhs_t2", lhs_t2}, {"lhs_t3", lhs_t3},
               {"rhs_t1", rhs_t1}, {"rhs_t2", rhs_t2}};
  rep.finalize();
  rep.has_collapse = true;
  rep.collapse_max_abs_diff = collapse;
  return rep;
}

// ===========================================================================
// Whole-space study over growing domains
// ===========================================================================

/// Signals a solver failure that aborts a study (mapped to its own CLI exit
/// code, distinct from configuration errors).
struct SolverDidNotConverge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WholeSpaceRow {
  int level = 0;
  double domain_halfwidth = 0.0;  ///< max |bound| over axes, for reporting
  double h = 0.0;
  double boundary_term = 0.0;     ///< the global identity's boundary term
  double residual_global = 0.0;   ///< residual of the identity with boundary term
  double rel_residual_global = 0.0;
  double residual_free = 0.0;     ///< residual of the boundary-free variant
  double rel_residual_free = 0.0;
  long iterations = 0;
};

/// For each grid (a growing sequence of boxes), solve with the given forcing
/// and report the global identity's boundary term together with the residual
/// of the boundary-free (whole-space) variant, which omits that term.  The
/// optional callback receives each row as soon as it is computed, so partial
/// results survive a solver failure on a later domain.
template <class NL>
inline std::vector<WholeSpaceRow> whole_space_study(
    const NL& nl, const GrushinGeometry& geo, const std::vector<Grid>& grids,
    const SolverConfig& cfg, const std::function<void(const WholeSpaceRow&)>& on_row = {}) {
  std::vector<WholeSpaceRow> rows;
  int level = 0;
  for (const Grid& grid : grids) {
    PicardResult pr = picard_solve(nl, geo, grid, cfg);
    if (!pr.converged)
      throw SolverDidNotConverge("whole-space study aborted at level " + std::to_string(level) +
                                 ": " + (pr.diagnostic.empty() ? "solver did not converge"
                                                               : pr.diagnostic));
    IdentityReport rep = scaling_identity_global(pr.u, nl, geo, grid);

    WholeSpaceRow row;
    row.level = level;
    for (int k = 0; k < grid.dim; ++k)
      row.domain_halfwidth =
          std::max({row.domain_halfwidth, std::abs(grid.box.lo[k]), std::abs(grid.box.hi[k])});
    row.h = grid.max_h();
    row.boundary_term = rep.term("lhs_t2");
    row.residual_global = rep.residual;
    row.rel_residual_global = rep.relative_residual;
    row.residual_free = rep.residual - row.boundary_term;
    double denom = 0.0;
    for (const auto& [name, v] : rep.terms)
      if (name != "lhs_t2") denom += std::abs(v);
    row.rel_residual_free = denom > 0.0 ? std::abs(row.residual_free) / denom : 0.0;
    row.iterations = pr.last_solve.iterations;
    rows.push_back(row);
    if (on_row) on_row(row);
    ++level;
  }
  return rows;
}

/// Least-squares slope of log(residual) against log(h) across refinement
/// levels: the observed convergence order.  Levels whose residual is exactly
/// zero are skipped (already at round-off); with fewer than two usable points
/// the order is reported as +infinity.
inline double observed_order(const std::vector<double>& h, const std::vector<double>& residual) {
  if (h.size() != residual.size())
    throw std::invalid_argument("observed_order: mismatched h/residual lengths");
  std::vector<double> x, y;
  for (size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0.0)) throw std::invalid_argument("observed_order: h must be positive");
    if (std::abs(residual[i]) > 0.0) {
      x.push_back(std::log(h[i]));
      y.push_back(std::log(std::abs(residual[i])));
    }
  }
  if (x.size() < 2) return std::numeric_limits<double>::infinity();
  double xm = 0.0, ym = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= static_cast<double>(x.size());
  ym /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - xm) * (y[i] - ym);
    sxx += (x[i] - xm) * (x[i] - xm);
  }
  if (sxx == 0.0) throw std::invalid_argument("observed_order: needs at least two distinct h");
  return sxy / sxx;
}

}  // namespace grushin

#endif  // GRUSHIN_POHOZAEV_HPP
