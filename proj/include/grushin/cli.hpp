/// @file cli.hpp
/// @brief The `grushin` command-line tool: `solve` (solve and dump the field),
///        `verify` (solve, assemble one identity, gate on its relative
///        residual, optionally across refinement levels), and `study`
///        (refinement / whole-space / stationarity experiments).  All state
///        comes from a JSON config plus a few overriding flags; identical
///        inputs produce byte-identical outputs.
///
/// Exit codes: 0 success, 1 configuration error, 2 solver non-convergence,
/// 3 residual above the configured threshold.

#ifndef GRUSHIN_CLI_HPP
#define GRUSHIN_CLI_HPP

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grushin/io.hpp"
#include "grushin/pohozaev.hpp"
#include "grushin/solver.hpp"
#include "grushin/variation.hpp"

namespace grushin {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitThreshold = 3;

namespace cli_detail {

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  double threshold_override = -1.0;
  int levels_override = 0;
  std::int64_t seed_override = -1;
};

inline RunConfig load_with_overrides(const CommonOpts& o) {
  RunConfig rc = load_config(o.config_path);
  if (!o.out_override.empty()) rc.out_dir = o.out_override;
  if (o.threshold_override >= 0.0) rc.threshold = o.threshold_override;
  if (o.levels_override > 0) rc.study.levels = o.levels_override;
  if (o.seed_override >= 0) rc.solver.seed = static_cast<std::uint64_t>(o.seed_override);
  return rc;
}

inline std::string joinp(const std::string& dir, const std::string& name) {
  return dir.empty() ? name : dir + "/" + name;
}

/// Solve on a grid per config: a torsion lift imposes the radial oracle as
/// Dirichlet data (and initial iterate); otherwise homogeneous data.
inline PicardResult solve_on_grid(const RunConfig& rc, const Grid& grid) {
  if (rc.lift == RunConfig::Lift::Torsion) {
    TorsionOracle oracle(rc.geo, rc.lift_R);
    const ScalarField lift = oracle.field(grid);
    return picard_solve(rc.nl, rc.geo, grid, rc.solver, &lift);
  }
  return picard_solve(rc.nl, rc.geo, grid, rc.solver);
}

inline IdentityReport assemble_identity(const RunConfig& rc, const std::string& which, int axis,
                                        const ScalarField& u, const Grid& grid) {
  if (which == "translate-x")
    return translating_identity_x(u, rc.nl, rc.geo, grid, rc.make_subdomain(grid), axis);
  if (which == "translate-y")
    return translating_identity_y(u, rc.nl, rc.geo, grid, rc.make_subdomain(grid), axis);
  if (which == "scale-local")
    return scaling_identity_local(u, rc.nl, rc.geo, grid, rc.make_subdomain(grid));
  return scaling_identity_global(u, rc.nl, rc.geo, grid);
}

inline njson solve_summary_json(const PicardResult& pr, const Grid& grid) {
  njson j;
  j["converged"] = pr.converged;
  j["iterations"] = pr.last_solve.iterations;
  j["energy"] = pr.last_solve.energy;
  j["grad_norm"] = pr.last_solve.grad_norm;
  j["picard_iterations"] = pr.trace.size();
  j["node_count"] = grid.node_count();
  j["grid"] = grid_json(grid);
  if (!pr.diagnostic.empty()) j["diagnostic"] = pr.diagnostic;
  return j;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

inline int cmd_solve(const RunConfig& rc) {
  const Grid grid = rc.make_grid();
  const PicardResult pr = solve_on_grid(rc, grid);

  write_solution_csv(joinp(rc.out_dir, "solution.csv"), pr.u, rc.geo);
  write_trace_csv(joinp(rc.out_dir, "solver_trace.csv"), pr.last_solve.trace);
  njson j = solve_summary_json(pr, grid);
  if (rc.lift == RunConfig::Lift::Torsion) {
    const TorsionOracle oracle(rc.geo, rc.lift_R);
    double err = 0.0;
    IndexVec lo = make_index(), hi = make_index();
    for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;
    for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
      err = std::max(err, std::abs(pr.u[grid.encode(iv)] -
                                   oracle.value_at(grid.node_point(iv), grid.dim)));
    });
    j["lift_oracle_max_error"] = err;
  }
  write_json_file(joinp(rc.out_dir, "solve.json"), j);

  std::printf("solve: converged=%s iterations=%ld grad_norm=%.3e energy=%.17g\n",
              pr.converged ? "yes" : "no", pr.last_solve.iterations, pr.last_solve.grad_norm,
              pr.last_solve.energy);
  if (!pr.converged) {
    std::fprintf(stderr, "solver did not converge: %s\n", pr.diagnostic.c_str());
    return kExitSolver;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

inline int cmd_verify(const RunConfig& rc, const std::string& which, int axis, int levels) {
  const std::string tag = which + (axis > 0 ? "-" + std::to_string(axis) : "");

  if (levels <= 1) {
    const Grid grid = rc.make_grid(0);
    const PicardResult pr = solve_on_grid(rc, grid);
    if (!pr.converged) {
      std::fprintf(stderr, "solver did not converge: %s\n", pr.diagnostic.c_str());
      return kExitSolver;
    }
    const IdentityReport rep = assemble_identity(rc, which, axis, pr.u, grid);
    write_json_file(joinp(rc.out_dir, "verify_" + tag + ".json"),
                    identity_report_json(rep, grid));
    std::printf("verify %s: residual=%.6e relative_residual=%.6e\n", tag.c_str(), rep.residual,
                rep.relative_residual);
    return rep.relative_residual <= rc.threshold ? kExitOk : kExitThreshold;
  }

  // Refinement mode: re-solve per level, stream the CSV as rows complete.
  const std::string csv_path = joinp(rc.out_dir, "verify_" + tag + "_refinement.csv");
  std::string csv;
  std::vector<double> hs, abs_res, rel_res;
  njson rows = njson::array();
  IdentityReport finest;
  for (int level = 0; level < levels; ++level) {
    const Grid grid = rc.make_grid(level);
    const PicardResult pr = solve_on_grid(rc, grid);
    if (!pr.converged) {
      std::fprintf(stderr, "solver did not converge at level %d: %s\n", level,
                   pr.diagnostic.c_str());
      return kExitSolver;
    }
    const IdentityReport rep = assemble_identity(rc, which, axis, pr.u, grid);
    if (csv.empty()) csv = "level," + identity_csv_header(rep) + "\n";
    csv += std::to_string(level) + "," + identity_csv_row(rep, grid) + "\n";
    write_text_file(csv_path, csv);

    hs.push_back(grid.max_h());
    abs_res.push_back(std::abs(rep.residual));
    rel_res.push_back(rep.relative_residual);
    njson row = identity_report_json(rep, grid);
    row["level"] = level;
    rows.push_back(row);
    finest = rep;
    std::printf("verify %s level %d: h=%.6g relative_residual=%.6e\n", tag.c_str(), level,
                grid.max_h(), rep.relative_residual);
  }
  njson j;
  j["kind"] = finest.kind;
  if (finest.axis > 0) j["axis"] = finest.axis;
  j["rows"] = rows;
  j["observed_order_residual"] = observed_order(hs, abs_res);
  j["observed_order_relative_residual"] = observed_order(hs, rel_res);
  write_json_file(joinp(rc.out_dir, "verify_" + tag + "_refinement.json"), j);
  std::printf("verify %s: observed_order=%.3f finest relative_residual=%.6e\n", tag.c_str(),
              j["observed_order_relative_residual"].get<double>(), finest.relative_residual);
  return finest.relative_residual <= rc.threshold ? kExitOk : kExitThreshold;
}

// ---------------------------------------------------------------------------
// study refinement
// ---------------------------------------------------------------------------

inline int cmd_study_refinement(const RunConfig& rc) {
  const int levels = rc.study.levels;

  // Identity selectors run at every level: both translating identities for
  // every axis, plus both scaling identities.
  std::vector<std::pair<std::string, int>> selectors;
  for (int i = 1; i <= rc.geo.N; ++i) selectors.emplace_back("translate-x", i);
  for (int jj = 1; jj <= rc.geo.l; ++jj) selectors.emplace_back("translate-y", jj);
  selectors.emplace_back("scale-local", 0);
  selectors.emplace_back("scale-global", 0);

  struct Track {
    std::string csv;
    std::vector<double> hs, abs_res, rel_res;
    njson rows = njson::array();
  };
  std::vector<Track> tracks(selectors.size());
  auto tag_of = [](const std::pair<std::string, int>& s) {
    return s.first + (s.second > 0 ? "-" + std::to_string(s.second) : "");
  };

  for (int level = 0; level < levels; ++level) {
    const Grid grid = rc.make_grid(level);
    const PicardResult pr = solve_on_grid(rc, grid);
    if (!pr.converged) {
      std::fprintf(stderr, "solver did not converge at level %d: %s\n", level,
                   pr.diagnostic.c_str());
      return kExitSolver;
    }
    for (size_t s = 0; s < selectors.size(); ++s) {
      const IdentityReport rep =
          assemble_identity(rc, selectors[s].first, selectors[s].second, pr.u, grid);
      Track& tr = tracks[s];
      if (tr.csv.empty()) tr.csv = "level," + identity_csv_header(rep) + "\n";
      tr.csv += std::to_string(level) + "," + identity_csv_row(rep, grid) + "\n";
      write_text_file(joinp(rc.out_dir, "refinement_" + tag_of(selectors[s]) + ".csv"), tr.csv);
      tr.hs.push_back(grid.max_h());
      tr.abs_res.push_back(std::abs(rep.residual));
      tr.rel_res.push_back(rep.relative_residual);
      njson row = identity_report_json(rep, grid);
      row["level"] = level;
      tr.rows.push_back(row);
    }
    std::printf("study refinement: level %d done (h=%.6g)\n", level, grid.max_h());
  }

  njson j;
  for (size_t s = 0; s < selectors.size(); ++s) {
    njson e;
    e["rows"] = tracks[s].rows;
    e["observed_order_residual"] = observed_order(tracks[s].hs, tracks[s].abs_res);
    e["observed_order_relative_residual"] = observed_order(tracks[s].hs, tracks[s].rel_res);
    j[tag_of(selectors[s])] = e;
  }
  write_json_file(joinp(rc.out_dir, "study_refinement.json"), j);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// study whole-space
// ---------------------------------------------------------------------------

inline int cmd_study_whole_space(const RunConfig& rc) {
  if (rc.study.radii.size() < 2)
    throw ConfigError("study whole-space requires 'study.radii' (>= 2 increasing radii)");
  if (!(rc.study.h > 0.0)) throw ConfigError("study whole-space requires 'study.h'");
  if (!rc.study.has_window)
    throw ConfigError("study whole-space requires 'study.window' (compact forcing support)");
  const int dim = rc.geo.dim();

  // The windowed forcing must be supported inside the smallest domain.
  for (int k = 0; k < dim; ++k) {
    const double r0 = rc.study.radii.front();
    if (rc.study.window_center[k] - rc.study.window_halfwidth[k] < -r0 ||
        rc.study.window_center[k] + rc.study.window_halfwidth[k] > r0)
      throw ConfigError("study.window support must fit inside the smallest domain");
  }
  Window w;
  w.dim = dim;
  w.center = rc.study.window_center;
  w.halfwidth = rc.study.window_halfwidth;
  const WindowedNonlinearity wnl(rc.nl, w);

  std::vector<Grid> grids;
  for (const double r : rc.study.radii) {
    Box box;
    box.dim = dim;
    IndexVec m = make_index();
    for (int k = 0; k < dim; ++k) {
      box.lo[k] = -r;
      box.hi[k] = r;
      const double cells = 2.0 * r / rc.study.h;
      const auto n = static_cast<std::int64_t>(std::llround(cells));
      if (std::abs(cells - static_cast<double>(n)) > 1e-9 || n < 2)
        throw ConfigError("study.h must divide every domain [-r, r] into >= 2 whole cells");
      m[k] = n + 1;
    }
    grids.emplace_back(box, m);
  }

  const std::string csv_path = joinp(rc.out_dir, "whole_space.csv");
  std::string csv =
      "level,halfwidth,h,boundary_term,residual_global,rel_residual_global,"
      "residual_free,rel_residual_free,iterations\n";
  const auto on_row = [&](const WholeSpaceRow& r) {
    csv += std::to_string(r.level) + "," + fmt_g17(r.domain_halfwidth) + "," + fmt_g17(r.h) + "," +
           fmt_g17(r.boundary_term) + "," + fmt_g17(r.residual_global) + "," +
           fmt_g17(r.rel_residual_global) + "," + fmt_g17(r.residual_free) + "," +
           fmt_g17(r.rel_residual_free) + "," + std::to_string(r.iterations) + "\n";
    write_text_file(csv_path, csv);
    std::printf("whole-space level %d: boundary_term=%.6e residual_free=%.6e\n", r.level,
                r.boundary_term, r.residual_free);
  };
  const std::vector<WholeSpaceRow> rows =
      whole_space_study(wnl, rc.geo, grids, rc.solver, on_row);

  bool bterm_decreasing = true, free_decreasing = true;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (!(std::abs(rows[i].boundary_term) < std::abs(rows[i - 1].boundary_term)))
      bterm_decreasing = false;
    if (!(std::abs(rows[i].residual_free) < std::abs(rows[i - 1].residual_free)))
      free_decreasing = false;
  }
  njson j;
  njson jrows = njson::array();
  for (const WholeSpaceRow& r : rows) {
    njson row;
    row["level"] = r.level;
    row["halfwidth"] = r.domain_halfwidth;
    row["h"] = r.h;
    row["boundary_term"] = r.boundary_term;
    row["residual_global"] = r.residual_global;
    row["rel_residual_global"] = r.rel_residual_global;
    row["residual_free"] = r.residual_free;
    row["rel_residual_free"] = r.rel_residual_free;
    row["iterations"] = r.iterations;
    jrows.push_back(row);
  }
  j["rows"] = jrows;
  j["boundary_term_decreasing"] = bterm_decreasing;
  j["residual_free_decreasing"] = free_decreasing;
  write_json_file(joinp(rc.out_dir, "whole_space.json"), j);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// study stationarity
// ---------------------------------------------------------------------------

inline int cmd_study_stationarity(const RunConfig& rc) {
  if (!rc.has_subdomain) throw ConfigError("study stationarity requires a 'subdomain' block");
  if (!(rc.study.delta > 0.0)) throw ConfigError("study stationarity requires 'study.delta'");
  const int levels = rc.study.levels;

  const std::string csv_path = joinp(rc.out_dir, "stationarity.csv");
  std::string csv =
      "level,h,t0,slope_translate,slope_scale,control_slope_translate,control_slope_scale\n";
  njson rows = njson::array();

  for (int level = 0; level < levels; ++level) {
    const Grid grid = rc.make_grid(level);
    const PicardResult pr = solve_on_grid(rc, grid);
    if (!pr.converged) {
      std::fprintf(stderr, "solver did not converge at level %d: %s\n", level,
                   pr.diagnostic.c_str());
      return kExitSolver;
    }
    const ScalarField& u = pr.u;
    ScalarField g(grid);
    IndexVec lo = make_index(), hi = make_index();
    for (int k = 0; k < grid.dim; ++k) hi[k] = grid.m[k] - 1;
    for_each_index(grid, lo, hi, [&](const IndexVec& iv) {
      const std::int64_t i = grid.encode(iv);
      g[i] = rc.nl.f(grid.node_point(iv), u[i]);
    });

    const SubBox D = rc.make_subdomain(grid);
    const Cutoff cut(D, rc.study.delta, rc.geo);
    const VariationMap map_t = VariationMap::translate(rc.study.translate_axis - 1, cut);
    const VariationMap map_s = VariationMap::scale(cut);
    const double t0 = rc.study.t0_factor * grid.max_h();

    const StationarityResult rt = stationarity_check(u, g, rc.geo, grid, map_t, t0);
    const StationarityResult rs = stationarity_check(u, g, rc.geo, grid, map_s, t0);
    const ScalarField uc = add_interior_bump(u, 0.1 * std::max(1.0, u.max_abs()));
    const StationarityResult rct = stationarity_check(uc, g, rc.geo, grid, map_t, t0);
    const StationarityResult rcs = stationarity_check(uc, g, rc.geo, grid, map_s, t0);

    const StationarityResult* results[2] = {&rt, &rs};
    const char* names[2] = {"translate", "scale"};
    for (int q = 0; q < 2; ++q) {
      std::string sc = "t,energy\n";
      for (const StationaritySample& s : results[q]->samples)
        sc += fmt_g17(s.t) + "," + fmt_g17(s.energy) + "\n";
      write_text_file(joinp(rc.out_dir, "stationarity_samples_L" + std::to_string(level) + "_" +
                                            names[q] + ".csv"),
                      sc);
    }

    csv += std::to_string(level) + "," + fmt_g17(grid.max_h()) + "," + fmt_g17(t0) + "," +
           fmt_g17(rt.slope) + "," + fmt_g17(rs.slope) + "," + fmt_g17(rct.slope) + "," +
           fmt_g17(rcs.slope) + "\n";
    write_text_file(csv_path, csv);

    njson row;
    row["level"] = level;
    row["h"] = grid.max_h();
    row["t0"] = t0;
    row["slope_translate"] = rt.slope;
    row["slope_scale"] = rs.slope;
    row["control_slope_translate"] = rct.slope;
    row["control_slope_scale"] = rcs.slope;
    rows.push_back(row);
    std::printf("stationarity level %d: slope_translate=%.6e slope_scale=%.6e\n", level, rt.slope,
                rs.slope);
  }
  njson j;
  j["rows"] = rows;
  write_json_file(joinp(rc.out_dir, "stationarity.json"), j);
  return kExitOk;
}

}  // namespace cli_detail

/// Parse arguments (program name excluded) and dispatch.  Never throws: all
/// failures map to the documented exit codes.
inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Degenerate p-Laplace energy minimization and Pohozaev identity checks"};
  app.name("grushin");
  app.require_subcommand(1);

  cli_detail::CommonOpts opts;
  std::string which, study_kind;
  int axis = 0;

  CLI::App* solve =
      app.add_subcommand("solve", "Solve the Dirichlet problem and write the solution field");
  CLI::App* verify = app.add_subcommand(
      "verify", "Solve, assemble one Pohozaev identity, and gate on its relative residual");
  CLI::App* study =
      app.add_subcommand("study", "Run a refinement, whole-space, or stationarity study");
  for (CLI::App* sub : {solve, verify, study}) {
    sub->add_option("--config", opts.config_path, "Path to the JSON run configuration")
        ->required();
    sub->add_option("--out", opts.out_override, "Output directory (overrides config)");
    sub->add_option("--seed", opts.seed_override, "Solver RNG seed (overrides config)");
  }
  verify
      ->add_option("which", which, "translate-x | translate-y | scale-local | scale-global")
      ->required()
      ->check(CLI::IsMember({"translate-x", "translate-y", "scale-local", "scale-global"}));
  verify->add_option("axis", axis, "1-based component index (translate identities only)");
  verify->add_option("--threshold", opts.threshold_override,
                     "Exit 3 if the relative residual exceeds this value");
  verify->add_option("--levels", opts.levels_override,
                     "Run a refinement study over this many grid levels");
  study->add_option("kind", study_kind, "refinement | whole-space | stationarity")
      ->required()
      ->check(CLI::IsMember({"refinement", "whole-space", "stationarity"}));
  study->add_option("--levels", opts.levels_override, "Number of refinement levels");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig rc = cli_detail::load_with_overrides(opts);
    if (solve->parsed()) return cli_detail::cmd_solve(rc);
    if (verify->parsed()) {
      if ((which == "translate-x" || which == "translate-y") && axis < 1)
        throw ConfigError("verify " + which + " requires a 1-based axis argument");
      const int levels = opts.levels_override > 0 ? opts.levels_override : 1;
      return cli_detail::cmd_verify(rc, which, axis, levels);
    }
    if (study_kind == "refinement") return cli_detail::cmd_study_refinement(rc);
    if (study_kind == "whole-space") return cli_detail::cmd_study_whole_space(rc);
    return cli_detail::cmd_study_stationarity(rc);
  } catch (const SolverDidNotConverge& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  } catch (const std::exception& e) {
    // Configuration, parsing, precondition, and I/O problems all count as
    // config errors: the run never started.
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}

}  // namespace grushin

#endif  // GRUSHIN_CLI_HPP
