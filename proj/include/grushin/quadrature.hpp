/// @file quadrature.hpp
/// @brief Volume integrals over index slabs (sub-boxes) and surface integrals
///        over their faces: tensor trapezoid rules with deterministic pairwise
///        summation.  dS is the plain Euclidean surface measure; all weights
///        sit inside integrands.

#ifndef GRUSHIN_QUADRATURE_HPP
#define GRUSHIN_QUADRATURE_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "grushin/geometry.hpp"

namespace grushin {

// ===========================================================================
// Deterministic reduction
// ===========================================================================

/// Pairwise (cascade) summation: deterministic for a fixed element order and
/// much better conditioned than sequential accumulation.
inline double pairwise_sum(const double* a, size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i];
    return s;
  }
  const size_t half = n / 2;
  return pairwise_sum(a, half) + pairwise_sum(a + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& a) { return pairwise_sum(a.data(), a.size()); }

// ===========================================================================
// Trapezoid weights on index slabs
// ===========================================================================

/// Tensor trapezoid weight of node iv within the slab lo..hi (volume rule):
/// product over axes of h_k, halved at slab-extreme indices.  Degenerate axes
/// (lo == hi) yield weight zero.
inline double slab_node_weight(const Grid& g, const IndexVec& iv, const IndexVec& lo,
                               const IndexVec& hi) {
  double w = 1.0;
  for (int k = 0; k < g.dim; ++k) {
    if (lo[k] == hi[k]) return 0.0;
    w *= g.h[k] * ((iv[k] == lo[k] || iv[k] == hi[k]) ? 0.5 : 1.0);
  }
  return w;
}

/// Trapezoid weight of node iv on the face slab of `face` (the axis of the
/// face contributes no h factor; tangential axes are halved at slab edges).
inline double face_node_weight(const Grid& g, const IndexVec& iv, const IndexVec& lo,
                               const IndexVec& hi, const Face& face) {
  double w = 1.0;
  for (int k = 0; k < g.dim; ++k) {
    if (k == face.axis) continue;
    if (lo[k] == hi[k]) return 0.0;
    w *= g.h[k] * ((iv[k] == lo[k] || iv[k] == hi[k]) ? 0.5 : 1.0);
  }
  return w;
}

// ===========================================================================
// Quadrature rule descriptor
// ===========================================================================

/// Descriptor of one tensor trapezoid rule over a slab or its face set.  The
/// weight sum is exactly the analytic volume/area of the target box, which is
/// the defining invariant of the rule.
struct QuadratureRule {
  enum class Kind { Volume, Surface };
  Kind kind = Kind::Volume;
  const Grid* grid = nullptr;
  IndexVec lo = make_index();
  IndexVec hi = make_index();

  double weight_sum() const {
    const Grid& g = *grid;
    std::vector<double> ws;
    if (kind == Kind::Volume) {
      for_each_index(g, lo, hi, [&](const IndexVec& iv) { ws.push_back(slab_node_weight(g, iv, lo, hi)); });
    } else {
      for (int axis = 0; axis < g.dim; ++axis)
        for (int side : {-1, +1}) {
          Face f{axis, side};
          IndexVec flo = lo, fhi = hi;
          flo[axis] = fhi[axis] = (side < 0) ? lo[axis] : hi[axis];
          for_each_index(g, flo, fhi,
                         [&](const IndexVec& iv) { ws.push_back(face_node_weight(g, iv, lo, hi, f)); });
        }
    }
    return pairwise_sum(ws);
  }
};

// ===========================================================================
// Volume integrals
// ===========================================================================

/// Trapezoid integral of fn(iv) over the slab lo..hi.  An empty (zero-volume)
/// slab integrates to 0 and raises the warning flag if provided.
template <class Fn>
inline double volume_integral(const Grid& g, const IndexVec& lo, const IndexVec& hi, Fn&& fn,
                              bool* empty_warning = nullptr) {
  bool empty = false;
  for (int k = 0; k < g.dim; ++k)
    if (lo[k] == hi[k]) empty = true;
  if (empty_warning) *empty_warning = empty;
  if (empty) return 0.0;
  std::vector<double> contrib;
  contrib.reserve(64);
  for_each_index(g, lo, hi, [&](const IndexVec& iv) {
    contrib.push_back(slab_node_weight(g, iv, lo, hi) * fn(iv));
  });
  return pairwise_sum(contrib);
}

template <class Fn>
inline double volume_integral(const SubBox& D, Fn&& fn, bool* empty_warning = nullptr) {
  return volume_integral(*D.grid, D.lo, D.hi, std::forward<Fn>(fn), empty_warning);
}

// ===========================================================================
// Surface integrals
// ===========================================================================

/// Thrown when surface data is missing for one of the faces.
struct MissingFaceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-face nodal data: values in for_each_index order over the face slab.
struct FaceValues {
  Face face;
  std::vector<double> values;
};

/// Face slab bounds of `face` within lo..hi.
inline void face_bounds(const IndexVec& lo, const IndexVec& hi, const Face& face, IndexVec& flo,
                        IndexVec& fhi) {
  flo = lo;
  fhi = hi;
  flo[face.axis] = fhi[face.axis] = (face.side < 0) ? lo[face.axis] : hi[face.axis];
}

/// Number of nodes on the face slab.
inline std::int64_t face_node_count(const Grid& g, const IndexVec& lo, const IndexVec& hi,
                                    const Face& face) {
  std::int64_t n = 1;
  for (int k = 0; k < g.dim; ++k)
    if (k != face.axis) n *= (hi[k] - lo[k] + 1);
  return n;
}

/// Trapezoid integral of fn(iv) over one face of the slab.
template <class Fn>
inline double face_integral(const Grid& g, const IndexVec& lo, const IndexVec& hi, const Face& face,
                            Fn&& fn) {
  IndexVec flo = make_index(), fhi = make_index();
  face_bounds(lo, hi, face, flo, fhi);
  std::vector<double> contrib;
  contrib.reserve(64);
  for_each_index(g, flo, fhi, [&](const IndexVec& iv) {
    contrib.push_back(face_node_weight(g, iv, lo, hi, face) * fn(iv));
  });
  return pairwise_sum(contrib);
}

/// Surface integral from externally supplied per-face data over all 2*dim
/// faces of the slab.  Throws MissingFaceError naming the absent face.
inline double surface_integral(const Grid& g, const IndexVec& lo, const IndexVec& hi,
                               const std::vector<FaceValues>& data) {
  std::vector<double> per_face;
  for (int axis = 0; axis < g.dim; ++axis)
    for (int side : {-1, +1}) {
      const Face face{axis, side};
      const FaceValues* fv = nullptr;
      for (const auto& d : data)
        if (d.face == face) fv = &d;
      if (!fv) throw MissingFaceError("surface_integral: missing data for face " + face.name());
      const std::int64_t want = face_node_count(g, lo, hi, face);
      if (static_cast<std::int64_t>(fv->values.size()) != want)
        throw MissingFaceError("surface_integral: face " + face.name() + " has " +
                               std::to_string(fv->values.size()) + " values, expected " +
                               std::to_string(want));
      std::int64_t at = 0;
      per_face.push_back(face_integral(g, lo, hi, face, [&](const IndexVec&) {
        return fv->values[static_cast<size_t>(at++)];
      }));
    }
  return pairwise_sum(per_face);
}

inline double surface_integral(const SubBox& D, const std::vector<FaceValues>& data) {
  return surface_integral(*D.grid, D.lo, D.hi, data);
}

/// Surface integral of fn(iv, face) over all faces of the slab.
template <class Fn>
inline double surface_integral_fn(const Grid& g, const IndexVec& lo, const IndexVec& hi, Fn&& fn) {
  std::vector<double> per_face;
  for (int axis = 0; axis < g.dim; ++axis)
    for (int side : {-1, +1}) {
      const Face face{axis, side};
      per_face.push_back(
          face_integral(g, lo, hi, face, [&](const IndexVec& iv) { return fn(iv, face); }));
    }
  return pairwise_sum(per_face);
}

}  // namespace grushin

#endif  // GRUSHIN_QUADRATURE_HPP
