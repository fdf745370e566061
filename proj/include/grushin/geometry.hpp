/// @file geometry.hpp
/// @brief Box domains, uniform tensor grids, axis-aligned subdomains with
///        oriented faces and outward normals, and the anisotropic distance
///        attached to the Grushin geometry.
///
/// Conventions used throughout the library:
///  - A point z in R^{N+l} splits into z = (x, y) with x the first N
///    coordinates and y the remaining l coordinates.
///  - The Grushin weight on y-derivatives is |x|^gamma with |x| the Euclidean
///    norm of the x-block.
///  - Grids are uniform tensor grids with node coordinates a_k + i*h_k, so
///    node addressing is exactly reproducible.

#ifndef GRUSHIN_GEOMETRY_HPP
#define GRUSHIN_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace grushin {

/// Maximum supported spatial dimension N + l.  Desk-scale studies use 3 or 4;
/// the fixed bound keeps points and index tuples in cheap inline arrays.
inline constexpr int kMaxDim = 6;

using Point = std::array<double, kMaxDim>;
using IndexVec = std::array<int, kMaxDim>;

inline Point make_point() {
  Point p{};
  p.fill(0.0);
  return p;
}

inline IndexVec make_index() {
  IndexVec iv{};
  iv.fill(0);
  return iv;
}

// ===========================================================================
// GrushinGeometry: the (N, l, gamma, p) tuple defining the operator family
// ===========================================================================

/// Parameters of the degenerate operator family: N x-coordinates, l
/// y-coordinates, weight exponent gamma >= 0, and integrability power p > 1.
/// The standing assumption N + l >= 3 is enforced at construction.
struct GrushinGeometry {
  int N = 0;
  int l = 0;
  double gamma = 0.0;
  double p = 2.0;

  GrushinGeometry(int N_, int l_, double gamma_, double p_)
      : N(N_), l(l_), gamma(gamma_), p(p_) {
    if (N < 1 || l < 1)
      throw std::invalid_argument("GrushinGeometry: N and l must be >= 1");
    if (N + l < 3)
      throw std::invalid_argument("GrushinGeometry: N + l must be >= 3");
    if (N + l > kMaxDim)
      throw std::invalid_argument("GrushinGeometry: N + l exceeds supported maximum");
    if (!(gamma >= 0.0))
      throw std::invalid_argument("GrushinGeometry: gamma must be >= 0");
    if (!(p > 1.0))
      throw std::invalid_argument("GrushinGeometry: p must be > 1");
  }

  int dim() const { return N + l; }

  /// True if axis k (0-based) belongs to the x-block.
  bool is_x_axis(int k) const { return k < N; }

  /// Euclidean norm of the x-block of z.
  double x_norm(const Point& z) const {
    double s = 0.0;
    for (int k = 0; k < N; ++k) s += z[k] * z[k];
    return std::sqrt(s);
  }

  /// |x|^e with the 0^0 = 1 convention (relevant only for gamma = 0).
  double x_norm_pow(const Point& z, double e) const {
    if (e == 0.0) return 1.0;
    const double r = x_norm(z);
    if (r == 0.0) return 0.0;
    return std::pow(r, e);
  }
};

// ===========================================================================
// Box: an axis-aligned physical box
// ===========================================================================

struct Box {
  int dim = 0;
  Point lo = make_point();
  Point hi = make_point();

  Box() = default;
  Box(int dim_, const Point& lo_, const Point& hi_) : dim(dim_), lo(lo_), hi(hi_) {
    for (int k = 0; k < dim; ++k)
      if (!(lo[k] <= hi[k]))
        throw std::invalid_argument("Box: lo must be <= hi on every axis");
  }

  double side(int k) const { return hi[k] - lo[k]; }

  double volume() const {
    double v = 1.0;
    for (int k = 0; k < dim; ++k) v *= side(k);
    return v;
  }

  bool contains(const Point& z, double tol = 0.0) const {
    for (int k = 0; k < dim; ++k)
      if (z[k] < lo[k] - tol || z[k] > hi[k] + tol) return false;
    return true;
  }
};

// ===========================================================================
// Grid: uniform tensor grid over a box
// ===========================================================================

/// Uniform tensor grid.  Node i = (i_0..i_{d-1}) sits at lo_k + i_k * h_k.
/// Flat node indices are row-major with the last axis fastest.
struct Grid {
  int dim = 0;
  Box box;
  IndexVec m = make_index();   ///< node count per axis (>= 3)
  Point h = make_point();      ///< spacing per axis
  std::array<std::int64_t, kMaxDim> stride{};

  Grid() = default;
  Grid(const Box& box_, const IndexVec& m_) : dim(box_.dim), box(box_), m(m_) {
    for (int k = 0; k < dim; ++k) {
      if (m[k] < 3)
        throw std::invalid_argument("Grid: every axis needs at least 3 nodes");
      if (!(box.side(k) > 0.0))
        throw std::invalid_argument("Grid: box must have positive extent on every axis");
      h[k] = box.side(k) / static_cast<double>(m[k] - 1);
    }
    stride.fill(0);
    std::int64_t s = 1;
    for (int k = dim - 1; k >= 0; --k) {
      stride[k] = s;
      s *= m[k];
    }
  }

  std::int64_t node_count() const {
    std::int64_t n = 1;
    for (int k = 0; k < dim; ++k) n *= m[k];
    return n;
  }

  std::int64_t cell_count() const {
    std::int64_t n = 1;
    for (int k = 0; k < dim; ++k) n *= (m[k] - 1);
    return n;
  }

  double coord(int axis, int i) const {
    return box.lo[axis] + static_cast<double>(i) * h[axis];
  }

  std::int64_t encode(const IndexVec& iv) const {
    std::int64_t s = 0;
    for (int k = 0; k < dim; ++k) s += stride[k] * iv[k];
    return s;
  }

  IndexVec decode(std::int64_t flat) const {
    IndexVec iv = make_index();
    for (int k = 0; k < dim; ++k) {
      iv[k] = static_cast<int>(flat / stride[k]);
      flat -= stride[k] * iv[k];
    }
    return iv;
  }

  Point node_point(const IndexVec& iv) const {
    Point z = make_point();
    for (int k = 0; k < dim; ++k) z[k] = coord(k, iv[k]);
    return z;
  }

  bool on_boundary(const IndexVec& iv) const {
    for (int k = 0; k < dim; ++k)
      if (iv[k] == 0 || iv[k] == m[k] - 1) return true;
    return false;
  }

  double max_h() const {
    double v = 0.0;
    for (int k = 0; k < dim; ++k) v = std::max(v, h[k]);
    return v;
  }

  /// Smallest cell size; useful for step-size heuristics.
  double min_h() const {
    double v = h[0];
    for (int k = 1; k < dim; ++k) v = std::min(v, h[k]);
    return v;
  }
};

/// Iterate all index tuples of the slab lo..hi (inclusive), calling fn(iv).
template <class Fn>
inline void for_each_index(const Grid& grid, const IndexVec& lo, const IndexVec& hi, Fn&& fn) {
  IndexVec iv = lo;
  const int d = grid.dim;
  while (true) {
    fn(iv);
    int k = d - 1;
    while (k >= 0) {
      if (iv[k] < hi[k]) {
        ++iv[k];
        break;
      }
      iv[k] = lo[k];
      --k;
    }
    if (k < 0) break;
  }
}

// ===========================================================================
// SubBox: axis-aligned subdomain D of the grid, with oriented faces
// ===========================================================================

/// One oriented face of a SubBox: the slab of nodes with i_axis fixed at the
/// lo (side = -1) or hi (side = +1) index of the box.
struct Face {
  int axis = 0;
  int side = +1;  ///< -1 or +1

  std::string name() const {
    return std::string(side > 0 ? "+" : "-") + "axis" + std::to_string(axis);
  }
  bool operator==(const Face& o) const { return axis == o.axis && side == o.side; }
};

/// Axis-aligned subdomain D given by inclusive node-index bounds.  When
/// require_interior is set (the default) D must be strictly interior to the
/// grid with at least one node layer of clearance, matching the standing
/// assumption D compactly contained in Omega.
struct SubBox {
  const Grid* grid = nullptr;
  IndexVec lo = make_index();
  IndexVec hi = make_index();

  SubBox() = default;
  SubBox(const Grid& g, const IndexVec& lo_, const IndexVec& hi_, bool require_interior = true)
      : grid(&g), lo(lo_), hi(hi_) {
    for (int k = 0; k < g.dim; ++k) {
      if (lo[k] > hi[k])
        throw std::invalid_argument("SubBox: lo index exceeds hi index on axis " + std::to_string(k));
      if (lo[k] < 0 || hi[k] > g.m[k] - 1)
        throw std::invalid_argument("SubBox: index range leaves the grid on axis " + std::to_string(k));
      if (require_interior && (lo[k] < 1 || hi[k] > g.m[k] - 2))
        throw std::invalid_argument(
            "SubBox: subdomain must be strictly interior to the grid (axis " + std::to_string(k) + ")");
      if (require_interior && lo[k] == hi[k])
        throw std::invalid_argument("SubBox: subdomain has empty interior on axis " + std::to_string(k));
    }
  }

  Box physical_box() const {
    Point a = make_point(), b = make_point();
    for (int k = 0; k < grid->dim; ++k) {
      a[k] = grid->coord(k, lo[k]);
      b[k] = grid->coord(k, hi[k]);
    }
    return Box(grid->dim, a, b);
  }

  std::vector<Face> faces() const {
    std::vector<Face> fs;
    fs.reserve(2 * static_cast<size_t>(grid->dim));
    for (int k = 0; k < grid->dim; ++k) {
      fs.push_back(Face{k, -1});
      fs.push_back(Face{k, +1});
    }
    return fs;
  }
};

// ===========================================================================
// Normals
// ===========================================================================

/// Outward unit normal of a SubBox face: +-e_axis.
inline Point outward_normal(const Face& face) {
  Point nu = make_point();
  nu[face.axis] = static_cast<double>(face.side);
  return nu;
}

/// The weighted normal nu_gamma = (nu_x, |x|^gamma nu_y) at point z.
inline Point grushin_normal(const Point& nu, const Point& z, const GrushinGeometry& geo) {
  Point ng = nu;
  const double w = geo.x_norm_pow(z, geo.gamma);
  for (int k = geo.N; k < geo.dim(); ++k) ng[k] = w * nu[k];
  return ng;
}

// ===========================================================================
// Anisotropic distance and delta-shells
// ===========================================================================

/// Anisotropic distance from z to the closure of the box D:
///
///   d(z, D) = ( (1+gamma)^{-2} |x - xb|^{2+2gamma} + |y - yb|^2 )^{1/(2+2gamma)}
///
/// where (xb, yb) is the Euclidean-nearest point of the closure of D, i.e.
/// the componentwise clamp of z onto D.  The first n_x axes of the box are
/// treated as the x-block.  Returns 0 exactly when z lies in the closure.
inline double anisotropic_distance(const Point& z, const Box& D, int n_x, double gamma) {
  double xx = 0.0, yy = 0.0;
  for (int k = 0; k < D.dim; ++k) {
    const double c = std::min(std::max(z[k], D.lo[k]), D.hi[k]);
    const double d = z[k] - c;
    if (k < n_x)
      xx += d * d;
    else
      yy += d * d;
  }
  if (xx == 0.0 && yy == 0.0) return 0.0;
  const double kappa = 1.0 / ((1.0 + gamma) * (1.0 + gamma));
  const double s = kappa * std::pow(xx, 1.0 + gamma) + yy;
  return std::pow(s, 1.0 / (2.0 + 2.0 * gamma));
}

inline double anisotropic_distance(const Point& z, const SubBox& D, const GrushinGeometry& geo) {
  return anisotropic_distance(z, D.physical_box(), geo.N, geo.gamma);
}

/// Thrown when a delta-shell would touch the grid boundary.
struct ShellRangeError : std::range_error {
  using std::range_error::range_error;
};

/// Smallest SubBox containing all grid nodes with anisotropic_distance < delta
/// from D.  The extreme nodes of the anisotropic ball around a box lie on the
/// coordinate axes through the box, so per-axis scans of pure-offset distances
/// determine the bounds.  Throws ShellRangeError if the shell would touch the
/// grid boundary (the shell must stay compactly inside Omega).
inline SubBox delta_shell(const SubBox& D, double delta, const GrushinGeometry& geo) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta_shell: delta must be > 0");
  const Grid& g = *D.grid;
  const Box dbox = D.physical_box();
  // Continuum extent of the shell along each axis block: a pure offset t on an
  // x-axis reaches distance (1+gamma)^{-1/(1+gamma)} t, on a y-axis t^{1/(1+gamma)}.
  const double ext_x = std::pow(1.0 + geo.gamma, 1.0 / (1.0 + geo.gamma)) * delta;
  const double ext_y = std::pow(delta, 1.0 + geo.gamma);
  for (int k = 0; k < g.dim; ++k) {
    const double ext = (k < geo.N) ? ext_x : ext_y;
    if (dbox.lo[k] - ext <= g.box.lo[k] || dbox.hi[k] + ext >= g.box.hi[k])
      throw ShellRangeError("delta_shell: shell of width delta=" + std::to_string(delta) +
                            " touches the domain boundary on axis " + std::to_string(k));
  }
  IndexVec lo = D.lo, hi = D.hi;
  for (int k = 0; k < g.dim; ++k) {
    Point z = make_point();
    for (int kk = 0; kk < g.dim; ++kk) z[kk] = dbox.lo[kk];  // a point of D's closure
    while (lo[k] > 1) {
      z[k] = g.coord(k, lo[k] - 1);
      if (anisotropic_distance(z, dbox, geo.N, geo.gamma) < delta)
        --lo[k];
      else
        break;
    }
    z[k] = dbox.lo[k];
    while (hi[k] < g.m[k] - 2) {
      z[k] = g.coord(k, hi[k] + 1);
      if (anisotropic_distance(z, dbox, geo.N, geo.gamma) < delta)
        ++hi[k];
      else
        break;
    }
  }
  return SubBox(*D.grid, lo, hi, /*require_interior=*/true);
}

}  // namespace grushin

#endif  // GRUSHIN_GEOMETRY_HPP
