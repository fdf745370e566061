/// @file io.hpp
/// @brief Configuration loading and report serialization: the JSON run-config
///        schema (validated before any compute; the four physical parameters
///        N, l, gamma, p have no defaults), identity-report JSON and CSV
///        emission, and solution/trace writers.  All numeric output is
///        formatted deterministically so identical runs produce identical
///        bytes.

#ifndef GRUSHIN_IO_HPP
#define GRUSHIN_IO_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "grushin/fields_ops.hpp"
#include "grushin/geometry.hpp"
#include "grushin/nonlinearity.hpp"
#include "grushin/pohozaev.hpp"
#include "grushin/solver.hpp"

namespace grushin {

using njson = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// printf-style shortest-faithful double formatting for CSV output.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

// ===========================================================================
// Run configuration
// ===========================================================================

struct StudyParams {
  int levels = 3;                   ///< refinement levels (grid halving)
  std::vector<double> radii;        ///< whole-space domains [-r, r]^dim
  double h = 0.0;                   ///< whole-space target spacing
  double delta = 0.0;               ///< stationarity cutoff shell width
  double t0_factor = 0.4;           ///< stationarity step t0 = factor * max h
  int translate_axis = 1;           ///< 1-based axis for the translate family
  bool has_window = false;          ///< compactly supported forcing window
  Point window_center = make_point();
  Point window_halfwidth = make_point();
};

struct RunConfig {
  explicit RunConfig(const GrushinGeometry& g) : geo(g) {}

  GrushinGeometry geo;
  Box domain;
  IndexVec resolution = make_index();
  std::string nonlinearity_text;
  Nonlinearity nl;
  SolverConfig solver;

  bool has_subdomain = false;
  std::array<double, kMaxDim> sub_lo_frac{};
  std::array<double, kMaxDim> sub_hi_frac{};

  enum class Lift { None, Torsion };
  Lift lift = Lift::None;
  double lift_R = 0.0;

  double threshold = std::numeric_limits<double>::infinity();
  StudyParams study;
  std::string out_dir = "out";

  /// Grid at refinement level k: every axis's cell count doubles per level.
  Grid make_grid(int level = 0) const {
    if (level < 0 || level > 12) throw ConfigError("refinement level out of range");
    IndexVec m = make_index();
    for (int k = 0; k < geo.dim(); ++k) m[k] = ((resolution[k] - 1) << level) + 1;
    return Grid(domain, m);
  }

  /// Realize the fractional subdomain bounds on a grid.  Fractions must land
  /// exactly on grid nodes (within 1e-9 of an index) so that refinement
  /// studies keep D fixed; otherwise the config is rejected.
  SubBox make_subdomain(const Grid& grid) const {
    if (!has_subdomain) throw ConfigError("this command requires a 'subdomain' block");
    IndexVec lo = make_index(), hi = make_index();
    for (int k = 0; k < grid.dim; ++k) {
      const double flo = sub_lo_frac[k] * static_cast<double>(grid.m[k] - 1);
      const double fhi = sub_hi_frac[k] * static_cast<double>(grid.m[k] - 1);
      lo[k] = static_cast<std::int64_t>(std::llround(flo));
      hi[k] = static_cast<std::int64_t>(std::llround(fhi));
      if (std::abs(flo - static_cast<double>(lo[k])) > 1e-9 ||
          std::abs(fhi - static_cast<double>(hi[k])) > 1e-9)
        throw ConfigError("subdomain fractions must land on grid nodes at every level (axis " +
                          std::to_string(k + 1) + ")");
    }
    try {
      return SubBox(grid, lo, hi);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("subdomain: ") + e.what());
    }
  }
};

namespace detail {

inline const njson& require_key(const njson& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing required key '" + where + "." + key + "'");
  return *it;
}

inline double as_number(const njson& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError("'" + where + "' must be a number");
  return j.get<double>();
}

inline std::int64_t as_integer(const njson& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError("'" + where + "' must be an integer");
  return j.get<std::int64_t>();
}

inline std::string as_string(const njson& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError("'" + where + "' must be a string");
  return j.get<std::string>();
}

inline std::vector<double> as_number_array(const njson& j, size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n)
    throw ConfigError("'" + where + "' must be an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (size_t i = 0; i < n; ++i) out.push_back(as_number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline void reject_unknown_keys(const njson& j, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) ok = true;
    if (!ok) throw ConfigError("unknown key '" + where + "." + it.key() + "'");
  }
}

}  // namespace detail

/// Parse and validate a configuration document.  Every constraint violated
/// raises ConfigError with a path to the offending key; geometry constraints
/// are checked before anything is computed.
inline RunConfig parse_config(const std::string& text) {
  njson j;
  try {
    j = njson::parse(text);
  } catch (const njson::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  detail::reject_unknown_keys(j,
                              {"geometry", "domain", "nonlinearity", "solver", "subdomain", "lift",
                               "threshold", "study", "output"},
                              "config");

  // --- geometry: all four physical parameters are mandatory ---
  const njson& jg = detail::require_key(j, "geometry", "config");
  const int N = static_cast<int>(detail::as_integer(detail::require_key(jg, "N", "geometry"), "geometry.N"));
  const int l = static_cast<int>(detail::as_integer(detail::require_key(jg, "l", "geometry"), "geometry.l"));
  const double gamma = detail::as_number(detail::require_key(jg, "gamma", "geometry"), "geometry.gamma");
  const double p = detail::as_number(detail::require_key(jg, "p", "geometry"), "geometry.p");
  GrushinGeometry geo = [&] {
    try {
      return GrushinGeometry(N, l, gamma, p);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("geometry: ") + e.what());
    }
  }();
  const int dim = geo.dim();

  RunConfig rc(geo);

  // --- domain ---
  const njson& jd = detail::require_key(j, "domain", "config");
  const auto lo = detail::as_number_array(detail::require_key(jd, "lo", "domain"), dim, "domain.lo");
  const auto hi = detail::as_number_array(detail::require_key(jd, "hi", "domain"), dim, "domain.hi");
  Box box;
  box.dim = dim;
  for (int k = 0; k < dim; ++k) {
    box.lo[k] = lo[static_cast<size_t>(k)];
    box.hi[k] = hi[static_cast<size_t>(k)];
    if (!(box.lo[k] < box.hi[k]))
      throw ConfigError("domain: lo must be strictly below hi on axis " + std::to_string(k + 1));
  }
  rc.domain = box;
  const njson& jres = detail::require_key(jd, "resolution", "domain");
  if (!jres.is_array() || jres.size() != static_cast<size_t>(dim))
    throw ConfigError("'domain.resolution' must be an array of " + std::to_string(dim) +
                      " integers");
  for (int k = 0; k < dim; ++k) {
    rc.resolution[k] = detail::as_integer(jres[static_cast<size_t>(k)], "domain.resolution");
    if (rc.resolution[k] < 3)
      throw ConfigError("domain.resolution: every axis needs at least 3 nodes");
  }

  // --- nonlinearity ---
  rc.nonlinearity_text =
      detail::as_string(detail::require_key(j, "nonlinearity", "config"), "nonlinearity");
  try {
    rc.nl = Nonlinearity::parse(rc.nonlinearity_text, N, l);
  } catch (const ParseError& e) {
    throw ConfigError("nonlinearity: " + std::string(e.what()));
  }

  // --- solver (optional; every field has a documented default) ---
  if (j.contains("solver")) {
    const njson& js = j["solver"];
    detail::reject_unknown_keys(
        js, {"tol_grad", "max_iter", "eps_w", "picard_max", "picard_tol", "init", "seed"},
        "solver");
    if (js.contains("tol_grad")) rc.solver.tol_grad = detail::as_number(js["tol_grad"], "solver.tol_grad");
    if (js.contains("max_iter"))
      rc.solver.max_iter = static_cast<long>(detail::as_integer(js["max_iter"], "solver.max_iter"));
    if (js.contains("eps_w")) rc.solver.eps_w = detail::as_number(js["eps_w"], "solver.eps_w");
    if (js.contains("picard_max"))
      rc.solver.picard_max = static_cast<int>(detail::as_integer(js["picard_max"], "solver.picard_max"));
    if (js.contains("picard_tol"))
      rc.solver.picard_tol = detail::as_number(js["picard_tol"], "solver.picard_tol");
    if (js.contains("init")) {
      const std::string init = detail::as_string(js["init"], "solver.init");
      if (init == "zeros")
        rc.solver.init = SolverConfig::Init::Zeros;
      else if (init == "random")
        rc.solver.init = SolverConfig::Init::Random;
      else
        throw ConfigError("solver.init must be 'zeros' or 'random'");
    }
    if (js.contains("seed"))
      rc.solver.seed = static_cast<std::uint64_t>(detail::as_integer(js["seed"], "solver.seed"));
  }

  // --- subdomain (optional; required by the local identities) ---
  if (j.contains("subdomain")) {
    const njson& jsub = j["subdomain"];
    detail::reject_unknown_keys(jsub, {"lo_fraction", "hi_fraction"}, "subdomain");
    const auto flo = detail::as_number_array(detail::require_key(jsub, "lo_fraction", "subdomain"),
                                             dim, "subdomain.lo_fraction");
    const auto fhi = detail::as_number_array(detail::require_key(jsub, "hi_fraction", "subdomain"),
                                             dim, "subdomain.hi_fraction");
    for (int k = 0; k < dim; ++k) {
      if (!(flo[static_cast<size_t>(k)] > 0.0 && fhi[static_cast<size_t>(k)] < 1.0 &&
            flo[static_cast<size_t>(k)] < fhi[static_cast<size_t>(k)]))
        throw ConfigError("subdomain fractions must satisfy 0 < lo < hi < 1 on axis " +
                          std::to_string(k + 1));
      rc.sub_lo_frac[static_cast<size_t>(k)] = flo[static_cast<size_t>(k)];
      rc.sub_hi_frac[static_cast<size_t>(k)] = fhi[static_cast<size_t>(k)];
    }
    rc.has_subdomain = true;
  }

  // --- lift (optional Dirichlet data; 'torsion' imposes the radial oracle) ---
  if (j.contains("lift")) {
    const njson& jl = j["lift"];
    detail::reject_unknown_keys(jl, {"kind", "R"}, "lift");
    const std::string kind = detail::as_string(detail::require_key(jl, "kind", "lift"), "lift.kind");
    if (kind == "none") {
      rc.lift = RunConfig::Lift::None;
    } else if (kind == "torsion") {
      rc.lift = RunConfig::Lift::Torsion;
      rc.lift_R = detail::as_number(detail::require_key(jl, "R", "lift"), "lift.R");
      if (geo.gamma != 0.0) throw ConfigError("lift.kind 'torsion' requires gamma = 0");
      if (!(rc.lift_R > 0.0)) throw ConfigError("lift.R must be > 0");
      // Every corner of the domain must lie inside the oracle's ball.
      for (int corner = 0; corner < (1 << dim); ++corner) {
        double r2 = 0.0;
        for (int k = 0; k < dim; ++k) {
          const double c = (corner & (1 << k)) ? box.hi[k] : box.lo[k];
          r2 += c * c;
        }
        if (std::sqrt(r2) > rc.lift_R)
          throw ConfigError("lift: domain must be contained in the ball of radius R");
      }
    } else {
      throw ConfigError("lift.kind must be 'none' or 'torsion'");
    }
  }

  // --- threshold (optional residual gate used by 'verify') ---
  if (j.contains("threshold")) {
    rc.threshold = detail::as_number(j["threshold"], "threshold");
    if (!(rc.threshold >= 0.0)) throw ConfigError("threshold must be >= 0");
  }

  // --- study parameters (optional; validated here, consumed by 'study') ---
  if (j.contains("study")) {
    const njson& jst = j["study"];
    detail::reject_unknown_keys(
        jst, {"levels", "radii", "h", "delta", "t0_factor", "translate_axis", "window"}, "study");
    if (jst.contains("levels")) {
      rc.study.levels = static_cast<int>(detail::as_integer(jst["levels"], "study.levels"));
      if (rc.study.levels < 1 || rc.study.levels > 8)
        throw ConfigError("study.levels must be in 1..8");
    }
    if (jst.contains("radii")) {
      if (!jst["radii"].is_array() || jst["radii"].size() < 2)
        throw ConfigError("study.radii must be an array of at least 2 increasing radii");
      double prev = 0.0;
      for (size_t i = 0; i < jst["radii"].size(); ++i) {
        const double r = detail::as_number(jst["radii"][i], "study.radii");
        if (!(r > prev)) throw ConfigError("study.radii must be strictly increasing and positive");
        rc.study.radii.push_back(r);
        prev = r;
      }
    }
    if (jst.contains("h")) {
      rc.study.h = detail::as_number(jst["h"], "study.h");
      if (!(rc.study.h > 0.0)) throw ConfigError("study.h must be > 0");
    }
    if (jst.contains("delta")) {
      rc.study.delta = detail::as_number(jst["delta"], "study.delta");
      if (!(rc.study.delta > 0.0)) throw ConfigError("study.delta must be > 0");
    }
    if (jst.contains("t0_factor")) {
      rc.study.t0_factor = detail::as_number(jst["t0_factor"], "study.t0_factor");
      if (!(rc.study.t0_factor > 0.0 && rc.study.t0_factor <= 10.0))
        throw ConfigError("study.t0_factor must be in (0, 10]");
    }
    if (jst.contains("translate_axis")) {
      rc.study.translate_axis =
          static_cast<int>(detail::as_integer(jst["translate_axis"], "study.translate_axis"));
      if (rc.study.translate_axis < 1 || rc.study.translate_axis > dim)
        throw ConfigError("study.translate_axis must be in 1.." + std::to_string(dim));
    }
    if (jst.contains("window")) {
      const njson& jw = jst["window"];
      detail::reject_unknown_keys(jw, {"center", "halfwidth"}, "study.window");
      const auto c = detail::as_number_array(detail::require_key(jw, "center", "study.window"),
                                             dim, "study.window.center");
      const auto hw = detail::as_number_array(
          detail::require_key(jw, "halfwidth", "study.window"), dim, "study.window.halfwidth");
      for (int k = 0; k < dim; ++k) {
        if (!(hw[static_cast<size_t>(k)] > 0.0))
          throw ConfigError("study.window.halfwidth must be > 0");
        rc.study.window_center[k] = c[static_cast<size_t>(k)];
        rc.study.window_halfwidth[k] = hw[static_cast<size_t>(k)];
      }
      rc.study.has_window = true;
    }
  }

  // --- output ---
  if (j.contains("output")) {
    const njson& jo = j["output"];
    detail::reject_unknown_keys(jo, {"dir"}, "output");
    if (jo.contains("dir")) rc.out_dir = detail::as_string(jo["dir"], "output.dir");
  }

  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

// ===========================================================================
// Report serialization
// ===========================================================================

inline njson grid_json(const Grid& grid) {
  njson g;
  std::vector<double> h;
  std::vector<std::int64_t> m;
  for (int k = 0; k < grid.dim; ++k) {
    h.push_back(grid.h[k]);
    m.push_back(grid.m[k]);
  }
  g["h"] = h;
  g["m"] = m;
  return g;
}

inline njson identity_report_json(const IdentityReport& rep, const Grid& grid) {
  njson j;
  j["kind"] = rep.kind;
  if (rep.axis > 0) j["axis"] = rep.axis;
  j["grid"] = grid_json(grid);
  njson terms;
  for (const auto& [name, value] : rep.terms) terms[name] = value;
  j["terms"] = terms;
  j["lhs"] = rep.lhs;
  j["rhs"] = rep.rhs;
  j["residual"] = rep.residual;
  j["relative_residual"] = rep.relative_residual;
  if (rep.has_aux) {
    njson aux;
    aux["lhs"] = rep.aux_lhs;
    aux["rhs_t1"] = rep.aux_rhs_t1;
    aux["rhs_t2"] = rep.aux_rhs_t2;
    aux["residual"] = rep.aux_residual;
    aux["relative_residual"] = rep.aux_relative_residual;
    j["aux"] = aux;
  }
  if (rep.has_collapse) j["collapse_max_abs_diff"] = rep.collapse_max_abs_diff;
  return j;
}

/// CSV header matching identity_csv_row for a report of this shape.
inline std::string identity_csv_header(const IdentityReport& rep) {
  std::string s = "kind,axis,h_max,lhs,rhs,residual,relative_residual";
  for (const auto& [name, value] : rep.terms) {
    (void)value;
    s += "," + name;
  }
  if (rep.has_aux) s += ",aux_residual,aux_relative_residual";
  if (rep.has_collapse) s += ",collapse_max_abs_diff";
  return s;
}

inline std::string identity_csv_row(const IdentityReport& rep, const Grid& grid) {
  std::string s = rep.kind + "," + std::to_string(rep.axis) + "," + fmt_g17(grid.max_h()) + "," +
                  fmt_g17(rep.lhs) + "," + fmt_g17(rep.rhs) + "," + fmt_g17(rep.residual) + "," +
                  fmt_g17(rep.relative_residual);
  for (const auto& [name, value] : rep.terms) {
    (void)name;
    s += "," + fmt_g17(value);
  }
  if (rep.has_aux) s += "," + fmt_g17(rep.aux_residual) + "," + fmt_g17(rep.aux_relative_residual);
  if (rep.has_collapse) s += "," + fmt_g17(rep.collapse_max_abs_diff);
  return s;
}

// ===========================================================================
// File writers
// ===========================================================================

inline void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_json_file(const std::string& path, const njson& j) {
  write_text_file(path, j.dump(2) + "\n");
}

/// Solution field as CSV: coordinate columns x1..xN, y1..yl, then u, one row
/// per node in storage order.
inline void write_solution_csv(const std::string& path, const ScalarField& u,
                               const GrushinGeometry& geo) {
  const Grid& grid = *u.grid;
  std::string s;
  for (int k = 0; k < geo.N; ++k) s += "x" + std::to_string(k + 1) + ",";
  for (int k = 0; k < geo.l; ++k) s += "y" + std::to_string(k + 1) + ",";
  s += "u\n";
  IndexVec lo = make_index(), hi = make_index();
  for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;
  for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
    const Point z = grid.node_point(iv);
    for (int k = 0; k < grid.dim; ++k) s += fmt_g17(z[k]) + ",";
    s += fmt_g17(u[grid.encode(iv)]) + "\n";
  });
  write_text_file(path, s);
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace) {
  std::string s = "iter,energy,grad_norm,step\n";
  for (const TraceRow& r : trace)
    s += std::to_string(r.iter) + "," + fmt_g17(r.energy) + "," + fmt_g17(r.grad_norm) + "," +
         fmt_g17(r.step) + "\n";
  write_text_file(path, s);
}

}  // namespace grushin

#endif  // GRUSHIN_IO_HPP
