/// @file solver.hpp
/// @brief Minimize the energy functional I(u) = (1/p) int |grad_gamma u|^p -
///        int g u over Dirichlet fields to produce the weak solution, plus the
///        Picard outer loop for u-dependent right-hand sides, the Poincare
///        ratio diagnostic, and the analytic torsion oracle.
///
/// The energy is assembled cell by cell from corner (edge-difference)
/// gradients: each cell contributes its volume times the average over its
/// 2^dim corners of (1/p)|G|^p, with G the vector of per-axis edge differences
/// at the corner (y-components weighted by |x|^gamma at the corner node).
/// The load term uses the tensor trapezoid rule.  energy_gradient is the
/// exact derivative of this assembly, so finite-difference checks pass to
/// tight tolerance and the optimizer sees a consistent objective.
///
/// Gradient norms (and tol_grad) refer to the volume-weight-normalized
/// gradient, i.e. the nodal residual of -div_gamma(w grad_gamma u) - g; this
/// makes the stopping threshold comparable across resolutions.

#ifndef GRUSHIN_SOLVER_HPP
#define GRUSHIN_SOLVER_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "grushin/fields_ops.hpp"
#include "grushin/geometry.hpp"
#include "grushin/nonlinearity.hpp"
#include "grushin/quadrature.hpp"

namespace grushin {

// ===========================================================================
// Configuration and reports
// ===========================================================================

struct SolverConfig {
  double tol_grad = 0.0;   ///< 0 = auto: 1e-8 * sqrt(node count)
  long max_iter = 20000;
  double eps_w = 0.0;      ///< 0 = auto: 0 for p >= 2, 1e-8 * load scale for p < 2
  int picard_max = 50;
  double picard_tol = 1e-7;
  enum class Init { Zeros, Random } init = Init::Zeros;
  std::uint64_t seed = 12345;

  double effective_tol(const Grid& g) const {
    return tol_grad > 0.0 ? tol_grad : 1e-8 * std::sqrt(static_cast<double>(g.node_count()));
  }
};

struct TraceRow {
  long iter = 0;
  double energy = 0.0;     ///< objective value at this iterate
  double grad_norm = 0.0;  ///< normalized gradient 2-norm at this iterate
  double step = 0.0;       ///< step length used to reach this iterate
};

struct EnergyReport {
  double energy = 0.0;      ///< unregularized energy at the final iterate
  double grad_norm = 0.0;   ///< final normalized gradient norm
  long iterations = 0;
  long backtracks = 0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

// ===========================================================================
// Energy assembly
// ===========================================================================

/// Shared state for repeated energy/gradient evaluations on one grid: cached
/// corner offsets, nodal |x|^{2 gamma} weights and trapezoid volume weights,
/// and reusable reduction buffers (deterministic pairwise summation).
class EnergyAssembler {
 public:
  EnergyAssembler(const Grid& grid, const GrushinGeometry& geo) : grid_(&grid), geo_(geo) {
    if (grid.dim != geo.dim())
      throw std::invalid_argument("EnergyAssembler: grid dimension does not match geometry");
    const int d = grid.dim;
    ncorner_ = 1 << d;
    corner_off_.resize(static_cast<size_t>(ncorner_));
    for (int s = 0; s < ncorner_; ++s) {
      std::int64_t off = 0;
      for (int k = 0; k < d; ++k)
        if (s & (1 << k)) off += grid.stride[k];
      corner_off_[static_cast<size_t>(s)] = off;
    }
    cellvol_ = 1.0;
    for (int k = 0; k < d; ++k) cellvol_ *= grid.h[k];
    corner_weight_ = cellvol_ / static_cast<double>(ncorner_);

    const std::int64_t n = grid.node_count();
    wg2_.resize(static_cast<size_t>(n));
    wnode_.resize(static_cast<size_t>(n));
    IndexVec lo = make_index(), hi = make_index();
    for (int k = 0; k < d; ++k) hi[k] = grid.m[k] - 1;
    for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
      const std::int64_t i = grid.encode(iv);
      const Point z = grid.node_point(iv);
      wg2_[static_cast<size_t>(i)] = geo.x_norm_pow(z, 2.0 * geo.gamma);
      wnode_[static_cast<size_t>(i)] = slab_node_weight(grid, iv, lo, hi);
    });

    // Flat indices of cell bases (lower corners).
    cell_base_.reserve(static_cast<size_t>(grid.cell_count()));
    IndexVec chi = make_index();
    for (int k = 0; k < d; ++k) chi[k] = grid.m[k] - 2;
    for_each_index(grid, lo, chi,
                   [&](const IndexVec& iv) { cell_base_.push_back(grid.encode(iv)); });
  }

  const Grid& grid() const { return *grid_; }
  const GrushinGeometry& geo() const { return geo_; }
  const std::vector<double>& node_weights() const { return wnode_; }

  /// Energy with weight regularization eps_w (eps_w = 0 gives the plain
  /// functional).  Never singular: the density |G|^p is finite for p > 1.
  double energy(const std::vector<double>& u, const std::vector<double>& g, double eps_w) const {
    const double eps2 = eps_w * eps_w;
    const double halfp = 0.5 * geo_.p;
    cellbuf_.clear();
    cellbuf_.reserve(cell_base_.size());
    const int d = grid_->dim;
    for (const std::int64_t base : cell_base_) {
      double acc = 0.0;
      for (int s = 0; s < ncorner_; ++s) {
        const double a2 = corner_grad_sq(u, base, s, d);
        acc += std::pow(a2 + eps2, halfp);
      }
      cellbuf_.push_back(acc);
    }
    const double grad_part = corner_weight_ / geo_.p * pairwise_sum(cellbuf_);
    nodebuf_.resize(u.size());
    for (size_t i = 0; i < u.size(); ++i) nodebuf_[i] = wnode_[i] * g[i] * u[i];
    return grad_part - pairwise_sum(nodebuf_);
  }

  /// Exact gradient of energy(., g, eps_w), zeroed on boundary nodes.
  /// Throws SingularWeightError for p < 2, eps_w = 0 at a critical corner.
  void gradient(const std::vector<double>& u, const std::vector<double>& g, double eps_w,
                std::vector<double>& grad) const {
    const double p = geo_.p;
    grad.assign(u.size(), 0.0);
    const int d = grid_->dim;
    for (const std::int64_t base : cell_base_) {
      for (int s = 0; s < ncorner_; ++s) {
        const std::int64_t node = base + corner_off_[static_cast<size_t>(s)];
        const double wg = wg2_[static_cast<size_t>(node)];
        double a2 = 0.0;
        double dk[kMaxDim];
        for (int k = 0; k < d; ++k) {
          const std::int64_t ihi = base + corner_off_[static_cast<size_t>(s | (1 << k))];
          const std::int64_t ilo = base + corner_off_[static_cast<size_t>(s & ~(1 << k))];
          const double dd = (u[static_cast<size_t>(ihi)] - u[static_cast<size_t>(ilo)]) / grid_->h[k];
          dk[k] = dd;
          a2 += (k < geo_.N) ? dd * dd : wg * dd * dd;
        }
        const double w = regularized_weight(a2, p, eps_w);
        for (int k = 0; k < d; ++k) {
          const double axis_w = (k < geo_.N) ? 1.0 : wg;
          const double coef = corner_weight_ * w * axis_w * dk[k] / grid_->h[k];
          if (coef == 0.0) continue;
          const std::int64_t ihi = base + corner_off_[static_cast<size_t>(s | (1 << k))];
          const std::int64_t ilo = base + corner_off_[static_cast<size_t>(s & ~(1 << k))];
          grad[static_cast<size_t>(ihi)] += coef;
          grad[static_cast<size_t>(ilo)] -= coef;
        }
      }
    }
    for (size_t i = 0; i < u.size(); ++i) grad[i] -= wnode_[i] * g[i];
    // Dirichlet mask: boundary nodes are fixed.
    mask_boundary(grad);
  }

  /// 2-norm of the volume-weight-normalized gradient (nodal residual).
  double normalized_norm(const std::vector<double>& grad) const {
    nodebuf_.resize(grad.size());
    for (size_t i = 0; i < grad.size(); ++i) {
      const double r = wnode_[i] > 0.0 ? grad[i] / wnode_[i] : 0.0;
      nodebuf_[i] = r * r;
    }
    return std::sqrt(pairwise_sum(nodebuf_));
  }

  double dot(const std::vector<double>& a, const std::vector<double>& b) const {
    nodebuf_.resize(a.size());
    for (size_t i = 0; i < a.size(); ++i) nodebuf_[i] = a[i] * b[i];
    return pairwise_sum(nodebuf_);
  }

  void mask_boundary(std::vector<double>& a) const {
    const Grid& g = *grid_;
    IndexVec lo = make_index(), hi = make_index();
    for (int k = 0; k < g.dim; ++k) hi[k] = g.m[k] - 1;
    for_each_index(g, lo, hi, [&](const IndexVec& iv) {
      if (g.on_boundary(iv)) a[static_cast<size_t>(g.encode(iv))] = 0.0;
    });
  }

 private:
  double corner_grad_sq(const std::vector<double>& u, std::int64_t base, int s, int d) const {
    const std::int64_t node = base + corner_off_[static_cast<size_t>(s)];
    const double wg = wg2_[static_cast<size_t>(node)];
    double a2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const std::int64_t ihi = base + corner_off_[static_cast<size_t>(s | (1 << k))];
      const std::int64_t ilo = base + corner_off_[static_cast<size_t>(s & ~(1 << k))];
      const double dd = (u[static_cast<size_t>(ihi)] - u[static_cast<size_t>(ilo)]) / grid_->h[k];
      a2 += (k < geo_.N) ? dd * dd : wg * dd * dd;
    }
    return a2;
  }

  const Grid* grid_;
  GrushinGeometry geo_;
  int ncorner_ = 0;
  double cellvol_ = 0.0;
  double corner_weight_ = 0.0;
  std::vector<std::int64_t> corner_off_;
  std::vector<std::int64_t> cell_base_;
  std::vector<double> wg2_;
  std::vector<double> wnode_;
  mutable std::vector<double> cellbuf_;
  mutable std::vector<double> nodebuf_;
};

/// I(u) = (1/p) int |grad_gamma u|^p - int g u with the library's quadrature.
inline double energy(const ScalarField& u, const ScalarField& g, const GrushinGeometry& geo,
                     const Grid& grid) {
  EnergyAssembler asmbl(grid, geo);
  return asmbl.energy(u.v, g.v, 0.0);
}

/// Exact nodal gradient of the discrete energy (same quadrature, same
/// stencils), zero on the Dirichlet boundary.
inline ScalarField energy_gradient(const ScalarField& u, const ScalarField& g,
                                   const GrushinGeometry& geo, const Grid& grid, double eps_w) {
  EnergyAssembler asmbl(grid, geo);
  ScalarField out(grid);
  asmbl.gradient(u.v, g.v, eps_w, out.v);
  return out;
}

// ===========================================================================
// Random Dirichlet fields (deterministic seeding)
// ===========================================================================

/// Uniform(-amplitude, amplitude) values on interior nodes, zero boundary.
inline ScalarField random_dirichlet_field(const Grid& grid, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  ScalarField u(grid, 0.0, /*dirichlet=*/true);
  IndexVec lo = make_index(), hi = make_index();
  for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;
  for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
    const double x = dist(rng);  // advance the stream on every node for grid-shape stability
    if (!grid.on_boundary(iv)) u[grid.encode(iv)] = x;
  });
  return u;
}

// ===========================================================================
// Minimization: Barzilai-Borwein step seeding + Armijo backtracking
// ===========================================================================

/// Minimize the energy for fixed load g.  When `lift` is provided its
/// boundary values are held fixed (inhomogeneous Dirichlet data) and the
/// iterate starts from the lift; otherwise the boundary is zero.
inline std::pair<ScalarField, EnergyReport> minimize(const ScalarField& g,
                                                     const GrushinGeometry& geo, const Grid& grid,
                                                     const SolverConfig& cfg,
                                                     const ScalarField* lift = nullptr) {
  EnergyAssembler asmbl(grid, geo);
  const double tol = cfg.effective_tol(grid);
  double eps_w = cfg.eps_w;
  if (eps_w == 0.0 && geo.p < 2.0) eps_w = 1e-8 * std::max(1.0, g.max_abs());

  ScalarField u = lift ? *lift : ScalarField(grid, 0.0, true);
  if (!lift) u.enforce_dirichlet();
  if (cfg.init == SolverConfig::Init::Random) {
    ScalarField noise = random_dirichlet_field(grid, cfg.seed, 0.1);
    for (size_t i = 0; i < u.v.size(); ++i) u.v[i] += noise.v[i];
  }

  EnergyReport rep;
  std::vector<double> grad, grad_prev, u_prev, trial;
  asmbl.gradient(u.v, g.v, eps_w, grad);
  double E = asmbl.energy(u.v, g.v, eps_w);
  double rnorm = asmbl.normalized_norm(grad);
  rep.trace.push_back({0, E, rnorm, 0.0});

  const double armijo_c = 1e-4;
  const int max_backtracks = 60;
  double t = 1.0;
  long iter = 0;
  bool converged = rnorm <= tol;

  while (!converged && iter < cfg.max_iter) {
    // Step seed: Barzilai-Borwein (BB1) after the first iteration.
    if (iter > 0) {
      double ss = 0.0, sy = 0.0;
      for (size_t i = 0; i < u.v.size(); ++i) {
        const double s = u.v[i] - u_prev[i];
        const double y = grad[i] - grad_prev[i];
        ss += s * s;
        sy += s * y;
      }
      if (sy > 0.0 && std::isfinite(ss / sy))
        t = ss / sy;
      else
        t *= 2.0;
      t = std::min(std::max(t, 1e-14), 1e14);
    }

    const double gg = asmbl.dot(grad, grad);
    if (!(gg > 0.0)) break;  // flat point below tolerance resolution

    // Armijo backtracking along d = -grad; allow for roundoff in E.
    const double slope = -gg;
    const double fuzz = 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(E) + 1e-300);
    trial.resize(u.v.size());
    int bt = 0;
    double Enew = 0.0;
    bool accepted = false;
    for (; bt <= max_backtracks; ++bt) {
      for (size_t i = 0; i < u.v.size(); ++i) trial[i] = u.v[i] - t * grad[i];
      Enew = asmbl.energy(trial, g.v, eps_w);
      if (std::isfinite(Enew) && Enew <= E + armijo_c * t * slope + fuzz) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    rep.backtracks += bt;
    if (!accepted) break;  // cannot make progress beyond roundoff

    u_prev = u.v;
    grad_prev = grad;
    u.v.swap(trial);
    E = std::min(Enew, E);  // guard: non-increasing record even at roundoff level
    ++iter;

    asmbl.gradient(u.v, g.v, eps_w, grad);
    rnorm = asmbl.normalized_norm(grad);
    rep.trace.push_back({iter, E, rnorm, t});
    converged = rnorm <= tol;
  }

  rep.iterations = iter;
  rep.grad_norm = rnorm;
  rep.converged = converged;
  rep.energy = asmbl.energy(u.v, g.v, 0.0);
  u.dirichlet_zero = (lift == nullptr) || lift->dirichlet_zero;
  return {std::move(u), std::move(rep)};
}

// ===========================================================================
// Picard outer iteration for u-dependent right-hand sides
// ===========================================================================

struct PicardResult {
  ScalarField u;
  EnergyReport last_solve;
  std::vector<double> trace;  ///< max-norm change per outer iteration
  bool converged = false;
  std::string diagnostic;
};

/// Iterate minimize with frozen g_k(z) = f(z, u_k(z)) until the max-norm
/// change drops below picard_tol.  Divergence (change growing three
/// consecutive iterations) aborts with a diagnostic.
template <class NL>
inline PicardResult picard_solve(const NL& nl, const GrushinGeometry& geo, const Grid& grid,
                                 const SolverConfig& cfg, const ScalarField* lift = nullptr) {
  PicardResult res{ScalarField(grid, 0.0, true), {}, {}, false, ""};
  ScalarField g(grid);
  const bool u_dep = nl.depends_on_u();

  ScalarField u_prev = lift ? *lift : ScalarField(grid, 0.0, true);
  int grows = 0;
  for (int k = 0; k < std::max(1, cfg.picard_max); ++k) {
    IndexVec lo = make_index(), hi = make_index();
    for (int kk = 0; kk < grid.dim; ++kk) hi[kk] = grid.m[kk] - 1;
    for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
      const std::int64_t i = grid.encode(iv);
      g[i] = nl.f(grid.node_point(iv), u_prev[i]);
    });

    SolverConfig inner = cfg;
    if (k > 0) inner.init = SolverConfig::Init::Zeros;  // randomize the first start only
    auto [u, rep] = minimize(g, geo, grid, inner, k > 0 ? &u_prev : lift);
    res.last_solve = rep;
    if (!rep.converged) {
      res.u = std::move(u);
      res.diagnostic = "inner solve did not converge at picard iteration " + std::to_string(k + 1);
      return res;
    }

    double change = 0.0;
    for (size_t i = 0; i < u.v.size(); ++i) change = std::max(change, std::abs(u.v[i] - u_prev.v[i]));
    res.trace.push_back(change);
    res.u = u;
    u_prev = std::move(u);

    if (!u_dep) {
      res.converged = true;
      return res;
    }
    if (change <= cfg.picard_tol) {
      res.converged = true;
      return res;
    }
    const size_t n = res.trace.size();
    if (n >= 2 && res.trace[n - 1] > res.trace[n - 2])
      ++grows;
    else
      grows = 0;
    if (grows >= 3) {
      res.diagnostic = "picard iteration diverging: change grew 3 consecutive iterations";
      return res;
    }
  }
  res.diagnostic = "picard iteration reached picard_max without meeting picard_tol";
  return res;
}

// ===========================================================================
// Poincare-ratio diagnostic
// ===========================================================================

struct ZeroFieldError : std::domain_error {
  using std::domain_error::domain_error;
};

/// int |u|^p / int |grad_gamma u|^p: a lower-bound probe for the constant in
/// the weighted Poincare inequality.  Undefined for u = 0.
inline double poincare_ratio(const ScalarField& u, const GrushinGeometry& geo, const Grid& grid) {
  if (u.max_abs() == 0.0) throw ZeroFieldError("poincare_ratio: undefined for the zero field");
  const VectorField G = grushin_gradient(u, geo);
  IndexVec lo = make_index(), hi = make_index();
  for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;
  const double num = volume_integral(grid, lo, hi, [&](const IndexVec& iv) {
    return std::pow(std::abs(u[grid.encode(iv)]), geo.p);
  });
  const double den = volume_integral(grid, lo, hi, [&](const IndexVec& iv) {
    const std::int64_t i = grid.encode(iv);
    double gs = 0.0;
    for (int c = 0; c < grid.dim; ++c) gs += G.at(i, c) * G.at(i, c);
    return std::pow(gs, 0.5 * geo.p);
  });
  return num / den;
}

// ===========================================================================
// Torsion oracle: the radial solution of -Delta_p u = 1 on a ball
// ===========================================================================

/// u(r) = ((p-1)/p) n^{-1/(p-1)} (R^{p/(p-1)} - r^{p/(p-1)}), n = N + l.
/// Solves -div(|grad u|^{p-2} grad u) = 1 with u(R) = 0; the flux is the
/// linear field -z/n, so the equation holds on any subregion of the ball.
/// Only meaningful for gamma = 0 (construction rejects anything else).
struct TorsionOracle {
  int n = 0;
  double p = 2.0;
  double R = 1.0;

  TorsionOracle(const GrushinGeometry& geo, double R_) : n(geo.dim()), p(geo.p), R(R_) {
    if (geo.gamma != 0.0)
      throw std::invalid_argument("TorsionOracle: requires gamma = 0");
    if (!(R > 0.0)) throw std::invalid_argument("TorsionOracle: R must be > 0");
  }

  double value(double r) const {
    if (r > R * (1.0 + 1e-12))
      throw std::out_of_range("TorsionOracle: evaluation restricted to |z| <= R");
    const double e = p / (p - 1.0);
    return (p - 1.0) / p * std::pow(static_cast<double>(n), -1.0 / (p - 1.0)) *
           (std::pow(R, e) - std::pow(r, e));
  }

  double value_at(const Point& z, int dim) const {
    double r2 = 0.0;
    for (int k = 0; k < dim; ++k) r2 += z[k] * z[k];
    return value(std::sqrt(r2));
  }

  /// Nodal field of oracle values over the whole grid (grid must sit inside
  /// the ball of radius R).
  ScalarField field(const Grid& grid) const {
    ScalarField u(grid);
    IndexVec lo = make_index(), hi = make_index();
    for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;
    for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
      u[grid.encode(iv)] = value_at(grid.node_point(iv), grid.dim);
    });
    return u;
  }
};

}  // namespace grushin

#endif  // GRUSHIN_SOLVER_HPP
