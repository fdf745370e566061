/// @file fields_ops.hpp
/// @brief Scalar/vector fields on a Grid and the discrete Grushin differential
///        operators: weighted gradient, weighted divergence, and the
///        p-sub-Laplacian built from them.
///
/// Stencil policy: interior nodes use centered second-order differences;
/// boundary nodes use one-sided second-order differences (three-point).  The
/// |x|^gamma weight is evaluated at nodes; nodes with x = 0 carry weight 0.

#ifndef GRUSHIN_FIELDS_OPS_HPP
#define GRUSHIN_FIELDS_OPS_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "grushin/geometry.hpp"

namespace grushin {

// ===========================================================================
// Field containers
// ===========================================================================

/// Nodal scalar field.  When dirichlet_zero is set the boundary nodes are
/// required to be exactly zero; enforce_dirichlet() stamps them.
struct ScalarField {
  const Grid* grid = nullptr;
  std::vector<double> v;
  bool dirichlet_zero = false;

  ScalarField() = default;
  explicit ScalarField(const Grid& g, double fill = 0.0, bool dirichlet = false)
      : grid(&g), v(static_cast<size_t>(g.node_count()), fill), dirichlet_zero(dirichlet) {}

  double& operator[](std::int64_t i) { return v[static_cast<size_t>(i)]; }
  double operator[](std::int64_t i) const { return v[static_cast<size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }

  /// Stamp exact zeros on boundary nodes and set the flag.
  void enforce_dirichlet() {
    for_each_index(*grid, zero_index(), top_index(), [&](const IndexVec& iv) {
      if (grid->on_boundary(iv)) v[static_cast<size_t>(grid->encode(iv))] = 0.0;
    });
    dirichlet_zero = true;
  }

  /// Verify the Dirichlet invariant (exact zeros on the boundary).
  bool check_dirichlet() const {
    bool ok = true;
    for_each_index(*grid, zero_index(), top_index(), [&](const IndexVec& iv) {
      if (grid->on_boundary(iv) && v[static_cast<size_t>(grid->encode(iv))] != 0.0) ok = false;
    });
    return ok;
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  }

 private:
  IndexVec zero_index() const { return make_index(); }
  IndexVec top_index() const {
    IndexVec t = make_index();
    for (int k = 0; k < grid->dim; ++k) t[k] = grid->m[k] - 1;
    return t;
  }
};

/// Nodal vector field with dim components per node, stored node-major.
struct VectorField {
  const Grid* grid = nullptr;
  int ncomp = 0;
  std::vector<double> v;

  VectorField() = default;
  VectorField(const Grid& g, int ncomp_)
      : grid(&g), ncomp(ncomp_), v(static_cast<size_t>(g.node_count()) * ncomp_, 0.0) {}

  double& at(std::int64_t node, int c) { return v[static_cast<size_t>(node) * ncomp + c]; }
  double at(std::int64_t node, int c) const { return v[static_cast<size_t>(node) * ncomp + c]; }

  Point vector_at(std::int64_t node) const {
    Point p = make_point();
    for (int c = 0; c < ncomp; ++c) p[c] = at(node, c);
    return p;
  }
};

// ===========================================================================
// Nodal difference stencils
// ===========================================================================

/// d/dz_axis of the flat array f at node iv: centered in the interior,
/// one-sided second-order at the grid boundary.
inline double nodal_derivative(const Grid& g, const std::vector<double>& f,
                               const IndexVec& iv, int axis) {
  const std::int64_t i = g.encode(iv);
  const std::int64_t s = g.stride[axis];
  const double h = g.h[axis];
  const int ia = iv[axis];
  if (ia == 0)
    return (-3.0 * f[static_cast<size_t>(i)] + 4.0 * f[static_cast<size_t>(i + s)] -
            f[static_cast<size_t>(i + 2 * s)]) /
           (2.0 * h);
  if (ia == g.m[axis] - 1)
    return (3.0 * f[static_cast<size_t>(i)] - 4.0 * f[static_cast<size_t>(i - s)] +
            f[static_cast<size_t>(i - 2 * s)]) /
           (2.0 * h);
  return (f[static_cast<size_t>(i + s)] - f[static_cast<size_t>(i - s)]) / (2.0 * h);
}

// ===========================================================================
// Grushin operators
// ===========================================================================

/// Weighted gradient (grad_x u, |x|^gamma grad_y u) at every node.
inline VectorField grushin_gradient(const ScalarField& u, const GrushinGeometry& geo) {
  const Grid& g = *u.grid;
  if (g.dim != geo.dim())
    throw std::invalid_argument("grushin_gradient: grid dimension does not match geometry");
  VectorField out(g, g.dim);
  IndexVec lo = make_index(), hi = make_index();
  for (int k = 0; k < g.dim; ++k) hi[k] = g.m[k] - 1;
  for_each_index(g, lo, hi, [&](const IndexVec& iv) {
    const std::int64_t i = g.encode(iv);
    const Point z = g.node_point(iv);
    const double w = geo.x_norm_pow(z, geo.gamma);
    for (int k = 0; k < g.dim; ++k) {
      double d = nodal_derivative(g, u.v, iv, k);
      if (!geo.is_x_axis(k)) d *= w;
      out.at(i, k) = d;
    }
  });
  return out;
}

/// Weighted divergence sum_i dp_i/dx_i + |x|^gamma sum_j dq_j/dy_j.
inline ScalarField grushin_divergence(const VectorField& P, const GrushinGeometry& geo) {
  const Grid& g = *P.grid;
  if (g.dim != geo.dim() || P.ncomp != geo.dim())
    throw std::invalid_argument("grushin_divergence: dimensions do not match geometry");
  ScalarField out(g);
  // Reuse the scalar stencil per component: extract one component at a time.
  std::vector<double> comp(static_cast<size_t>(g.node_count()));
  IndexVec lo = make_index(), hi = make_index();
  for (int k = 0; k < g.dim; ++k) hi[k] = g.m[k] - 1;
  for (int c = 0; c < g.dim; ++c) {
    for (std::int64_t i = 0; i < g.node_count(); ++i)
      comp[static_cast<size_t>(i)] = P.at(i, c);
    for_each_index(g, lo, hi, [&](const IndexVec& iv) {
      const std::int64_t i = g.encode(iv);
      double d = nodal_derivative(g, comp, iv, c);
      if (!geo.is_x_axis(c)) {
        const Point z = g.node_point(iv);
        d *= geo.x_norm_pow(z, geo.gamma);
      }
      out[i] += d;
    });
  }
  return out;
}

/// Thrown when p < 2, eps_w = 0 and the weight |grad_gamma u|^{p-2} is
/// evaluated at a critical point of u.
struct SingularWeightError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Regularized weight (|G|^2 + eps_w^2)^{(p-2)/2}; throws SingularWeightError
/// when that expression is singular.
inline double regularized_weight(double grad_sq, double p, double eps_w) {
  const double s = grad_sq + eps_w * eps_w;
  if (p == 2.0) return 1.0;
  if (s == 0.0) {
    if (p > 2.0) return 0.0;
    throw SingularWeightError(
        "weight |grad u|^{p-2} is singular at a critical point (p < 2, eps_w = 0)");
  }
  return std::pow(s, 0.5 * (p - 2.0));
}

/// div_gamma( w * grad_gamma u ) with w = (|grad_gamma u|^2 + eps_w^2)^{(p-2)/2}.
inline ScalarField p_sublaplacian(const ScalarField& u, const GrushinGeometry& geo, double eps_w) {
  const Grid& g = *u.grid;
  VectorField G = grushin_gradient(u, geo);
  for (std::int64_t i = 0; i < g.node_count(); ++i) {
    double gs = 0.0;
    for (int c = 0; c < g.dim; ++c) gs += G.at(i, c) * G.at(i, c);
    const double w = regularized_weight(gs, geo.p, eps_w);
    for (int c = 0; c < g.dim; ++c) G.at(i, c) *= w;
  }
  return grushin_divergence(G, geo);
}

}  // namespace grushin

#endif  // GRUSHIN_FIELDS_OPS_HPP
