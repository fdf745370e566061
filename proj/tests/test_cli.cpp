// Configuration loading and the command-line driver: schema validation with
// pathed error messages, the documented exit codes, output file shapes, and
// byte-level determinism of repeated runs.  run_cli is exercised in-process,
// so these tests cover exactly what the installed binary does.

#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <grushin/cli.hpp>
#include <grushin/io.hpp>

namespace {

using namespace grushin;
namespace fs = std::filesystem;

njson base_config() {
  njson j;
  j["geometry"] = {{"N", 2}, {"l", 1}, {"gamma", 0.0}, {"p", 2.0}};
  j["domain"] = {{"lo", {-1.0, -1.0, -1.0}},
                 {"hi", {1.0, 1.0, 1.0}},
                 {"resolution", {9, 9, 9}}};
  j["nonlinearity"] = "1";
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << "missing file: " << path;
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

size_t count_lines(const std::string& text) {
  size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static int counter = 0;
    dir_ = fs::temp_directory_path() /
           ("grushin_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir_);
  }
  void TearDown() override {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_config(njson j, const std::string& name = "config.json") {
    if (!j.contains("output")) j["output"] = {{"dir", path("out")}};
    const std::string p = path(name);
    write_text_file(p, j.dump(2) + "\n");
    return p;
  }

  fs::path dir_;
};

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

TEST(ConfigParseTest, RejectsMalformedDocumentsWithPathedMessages) {
  auto message_of = [](const std::string& text) -> std::string {
    try {
      (void)parse_config(text);
    } catch (const ConfigError& e) {
      return e.what();
    }
    return "";
  };

  EXPECT_NE(message_of("{ not json").find("parse error"), std::string::npos);
  EXPECT_NE(message_of("[1, 2]").find("root must be a JSON object"), std::string::npos);

  njson j = base_config();
  j["extra"] = 1;
  EXPECT_NE(message_of(j.dump()).find("unknown key 'config.extra'"), std::string::npos);

  j = base_config();
  j["geometry"].erase("N");
  EXPECT_NE(message_of(j.dump()).find("missing required key 'geometry.N'"), std::string::npos);

  j = base_config();
  j["geometry"]["N"] = 1;
  j["geometry"]["l"] = 1;  // N + l = 2 violates the standing assumption
  EXPECT_NE(message_of(j.dump()).find("geometry:"), std::string::npos);

  j = base_config();
  j["domain"]["hi"] = {-2.0, 1.0, 1.0};
  EXPECT_NE(message_of(j.dump()).find("axis 1"), std::string::npos);

  j = base_config();
  j["domain"]["resolution"] = {9, 2, 9};
  EXPECT_NE(message_of(j.dump()).find("at least 3 nodes"), std::string::npos);

  // The nonlinearity error carries the offending token and its position.
  j = base_config();
  j["nonlinearity"] = "x1 + x3*u";
  const std::string msg = message_of(j.dump());
  EXPECT_NE(msg.find("nonlinearity:"), std::string::npos);
  EXPECT_NE(msg.find("x3"), std::string::npos);

  j = base_config();
  j["solver"] = {{"init", "sideways"}};
  EXPECT_NE(message_of(j.dump()).find("'zeros' or 'random'"), std::string::npos);

  j = base_config();
  j["solver"] = {{"stepsize", 0.1}};
  EXPECT_NE(message_of(j.dump()).find("unknown key 'solver.stepsize'"), std::string::npos);

  j = base_config();
  j["subdomain"] = {{"lo_fraction", {0.0, 0.25, 0.25}}, {"hi_fraction", {0.75, 0.75, 0.75}}};
  EXPECT_NE(message_of(j.dump()).find("0 < lo < hi < 1"), std::string::npos);

  j = base_config();
  j["threshold"] = -1.0;
  EXPECT_NE(message_of(j.dump()).find("threshold"), std::string::npos);

  j = base_config();
  j["study"] = {{"levels", 9}};
  EXPECT_NE(message_of(j.dump()).find("1..8"), std::string::npos);

  j = base_config();
  j["study"] = {{"radii", {1.0, 1.0}}};
  EXPECT_NE(message_of(j.dump()).find("strictly increasing"), std::string::npos);

  j = base_config();
  j["study"] = {{"translate_axis", 4}};
  EXPECT_NE(message_of(j.dump()).find("translate_axis"), std::string::npos);

  j = base_config();
  j["study"] = {{"window", {{"center", {0.0, 0.0, 0.0}}, {"halfwidth", {0.5, 0.0, 0.5}}}}};
  EXPECT_NE(message_of(j.dump()).find("halfwidth"), std::string::npos);
}

TEST(ConfigParseTest, LiftRequiresACompatibleGeometryAndDomain) {
  njson j = base_config();
  j["lift"] = {{"kind", "torsion"}, {"R", 2.0}};
  EXPECT_NO_THROW(parse_config(j.dump()));

  j["lift"]["kind"] = "sideways";
  EXPECT_THROW(parse_config(j.dump()), ConfigError);

  j["lift"]["kind"] = "torsion";
  j["lift"]["R"] = 0.0;
  EXPECT_THROW(parse_config(j.dump()), ConfigError);

  // The domain's corners must fit inside the ball of radius R.
  j["lift"]["R"] = 1.0;
  EXPECT_THROW(parse_config(j.dump()), ConfigError);

  // The radial oracle only exists for the unweighted gradient.
  j["lift"]["R"] = 2.0;
  j["geometry"]["gamma"] = 1.0;
  EXPECT_THROW(parse_config(j.dump()), ConfigError);
}

TEST(ConfigParseTest, AppliesDocumentedDefaults) {
  const RunConfig rc = parse_config(base_config().dump());
  EXPECT_EQ(rc.solver.max_iter, 20000);
  EXPECT_DOUBLE_EQ(rc.solver.tol_grad, 0.0);  // 0 = auto-scaled at solve time
  EXPECT_EQ(rc.study.levels, 3);
  EXPECT_EQ(rc.study.translate_axis, 1);
  EXPECT_FALSE(rc.has_subdomain);
  EXPECT_EQ(rc.lift, RunConfig::Lift::None);
  EXPECT_TRUE(std::isinf(rc.threshold));
  EXPECT_EQ(rc.out_dir, "out");
}

TEST(ConfigParseTest, GridAndSubdomainRealization) {
  njson j = base_config();
  j["subdomain"] = {{"lo_fraction", {0.25, 0.25, 0.25}}, {"hi_fraction", {0.75, 0.75, 0.75}}};
  const RunConfig rc = parse_config(j.dump());

  const Grid g0 = rc.make_grid(0);
  EXPECT_EQ(g0.m[0], 9);
  const Grid g2 = rc.make_grid(2);
  EXPECT_EQ(g2.m[0], 33);  // cells double per level
  EXPECT_THROW(rc.make_grid(-1), ConfigError);
  EXPECT_THROW(rc.make_grid(13), ConfigError);

  const SubBox D = rc.make_subdomain(g0);
  EXPECT_EQ(D.lo[0], 2);
  EXPECT_EQ(D.hi[0], 6);
  const SubBox D2 = rc.make_subdomain(g2);
  EXPECT_EQ(D2.lo[0], 8);  // same physical box at every level
  EXPECT_EQ(D2.hi[0], 24);

  // Fractions that miss every node are rejected rather than silently snapped.
  njson jbad = base_config();
  jbad["subdomain"] = {{"lo_fraction", {0.3, 0.25, 0.25}}, {"hi_fraction", {0.75, 0.75, 0.75}}};
  const RunConfig rcbad = parse_config(jbad.dump());
  EXPECT_THROW(rcbad.make_subdomain(g0), ConfigError);

  // Without a subdomain block the local identities cannot be requested.
  const RunConfig rcnone = parse_config(base_config().dump());
  EXPECT_THROW(rcnone.make_subdomain(g0), ConfigError);
}

// ---------------------------------------------------------------------------
// Exit codes
// ---------------------------------------------------------------------------

TEST_F(CliTest, ArgumentAndConfigProblemsExitOne) {
  EXPECT_EQ(run_cli({}), kExitConfig);                        // no subcommand
  EXPECT_EQ(run_cli({"frobnicate"}), kExitConfig);            // unknown subcommand
  EXPECT_EQ(run_cli({"solve"}), kExitConfig);                 // missing --config
  EXPECT_EQ(run_cli({"solve", "--config", path("no-such-file.json")}), kExitConfig);
  EXPECT_EQ(run_cli({"--help"}), kExitOk);

  const std::string cfg = write_config(base_config());
  EXPECT_EQ(run_cli({"verify", "nonsense", "--config", cfg}), kExitConfig);
  // The translating identities need the 1-based component argument.
  EXPECT_EQ(run_cli({"verify", "translate-x", "--config", cfg}), kExitConfig);

  std::ofstream(path("bad.json")) << "{ this is not json";
  EXPECT_EQ(run_cli({"solve", "--config", path("bad.json")}), kExitConfig);
}

TEST_F(CliTest, SolverFailureExitsTwo) {
  njson j = base_config();
  j["nonlinearity"] = "x1";
  j["solver"] = {{"max_iter", 1}};
  const std::string cfg = write_config(j);
  EXPECT_EQ(run_cli({"solve", "--config", cfg}), kExitSolver);
  // The summary is still written, reporting the failure honestly.
  const std::string summary = read_file(path("out") + "/solve.json");
  EXPECT_NE(summary.find("\"converged\": false"), std::string::npos);
}

TEST_F(CliTest, DegenerateSlabInsideTheSubdomainExitsOne) {
  // For 0 < gamma < 1 the translating-x identity must refuse a subdomain
  // whose x-range crosses the degenerate slab x = 0.
  njson j = base_config();
  j["geometry"]["gamma"] = 0.5;
  j["domain"] = {{"lo", {-0.4, -0.4, -0.4}}, {"hi", {0.4, 0.4, 0.4}}, {"resolution", {9, 9, 9}}};
  j["subdomain"] = {{"lo_fraction", {0.25, 0.25, 0.25}}, {"hi_fraction", {0.75, 0.75, 0.75}}};
  const std::string cfg = write_config(j);
  EXPECT_EQ(run_cli({"verify", "translate-x", "1", "--config", cfg}), kExitConfig);
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

TEST_F(CliTest, ZeroForcingSolvesToTheZeroFieldAndWritesOutputs) {
  njson j = base_config();
  j["nonlinearity"] = "0";
  const std::string cfg = write_config(j);
  ASSERT_EQ(run_cli({"solve", "--config", cfg}), kExitOk);

  const std::string csv = read_file(path("out") + "/solution.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x1,x2,y1,u");
  EXPECT_EQ(count_lines(csv), 1u + 9u * 9u * 9u);
  // Every nodal value is exactly zero: the zero field is the minimizer.
  size_t pos = csv.find('\n') + 1;
  while (pos < csv.size()) {
    const size_t eol = csv.find('\n', pos);
    const std::string row = csv.substr(pos, eol - pos);
    EXPECT_EQ(row.substr(row.rfind(',') + 1), "0");
    pos = eol + 1;
  }

  const std::string summary = read_file(path("out") + "/solve.json");
  EXPECT_NE(summary.find("\"converged\": true"), std::string::npos);
  EXPECT_NE(summary.find("\"iterations\": 0"), std::string::npos);
  EXPECT_NE(summary.find("\"node_count\": 729"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("out") + "/solver_trace.csv"));
}

TEST_F(CliTest, TorsionLiftReproducesTheRadialProfile) {
  njson j = base_config();
  j["domain"] = {{"lo", {0.15, -0.25, -0.2}}, {"hi", {0.55, 0.15, 0.2}}, {"resolution", {9, 9, 9}}};
  j["lift"] = {{"kind", "torsion"}, {"R", 1.0}};
  const std::string cfg = write_config(j);
  ASSERT_EQ(run_cli({"solve", "--config", cfg}), kExitOk);

  // For p = 2 the discrete operator is exact on the quadratic profile, so
  // the solve keeps the lift untouched and the recorded error is rounding.
  const njson summary = njson::parse(read_file(path("out") + "/solve.json"));
  ASSERT_TRUE(summary.contains("lift_oracle_max_error"));
  EXPECT_LE(summary["lift_oracle_max_error"].get<double>(), 1e-12);
}

TEST_F(CliTest, RepeatedRunsProduceIdenticalBytes) {
  njson j = base_config();
  j["solver"] = {{"init", "random"}, {"seed", 12345}};
  j["output"] = {{"dir", path("a")}};
  const std::string cfg_a = write_config(j, "a.json");
  j["output"] = {{"dir", path("b")}};
  const std::string cfg_b = write_config(j, "b.json");

  ASSERT_EQ(run_cli({"solve", "--config", cfg_a}), kExitOk);
  ASSERT_EQ(run_cli({"solve", "--config", cfg_b}), kExitOk);
  EXPECT_EQ(read_file(path("a") + "/solution.csv"), read_file(path("b") + "/solution.csv"));
  EXPECT_EQ(read_file(path("a") + "/solve.json"), read_file(path("b") + "/solve.json"));
  EXPECT_EQ(read_file(path("a") + "/solver_trace.csv"), read_file(path("b") + "/solver_trace.csv"));

  // The --out override redirects without touching the config.
  ASSERT_EQ(run_cli({"solve", "--config", cfg_a, "--out", path("c")}), kExitOk);
  EXPECT_EQ(read_file(path("c") + "/solution.csv"), read_file(path("a") + "/solution.csv"));
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

TEST_F(CliTest, VerifyGatesOnTheRelativeResidual) {
  njson j = base_config();
  j["nonlinearity"] = "0";
  j["subdomain"] = {{"lo_fraction", {0.25, 0.25, 0.25}}, {"hi_fraction", {0.75, 0.75, 0.75}}};
  j["threshold"] = 1e-12;
  const std::string cfg = write_config(j);

  // The zero solution satisfies every identity identically.
  ASSERT_EQ(run_cli({"verify", "scale-local", "--config", cfg}), kExitOk);
  const njson rep = njson::parse(read_file(path("out") + "/verify_scale-local.json"));
  EXPECT_DOUBLE_EQ(rep["lhs"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(rep["residual"].get<double>(), 0.0);
  EXPECT_TRUE(rep.contains("aux"));
  EXPECT_TRUE(rep["terms"].contains("lhs_t1"));

  // A real solve has a discretization residual; an absurd threshold trips
  // the gate (the report is still written for inspection).
  njson j2 = base_config();
  j2["subdomain"] = {{"lo_fraction", {0.25, 0.25, 0.25}}, {"hi_fraction", {0.75, 0.75, 0.75}}};
  const std::string cfg2 = write_config(j2, "config2.json");
  EXPECT_EQ(run_cli({"verify", "translate-x", "1", "--config", cfg2, "--threshold", "1e-30"}),
            kExitThreshold);
  EXPECT_TRUE(fs::exists(path("out") + "/verify_translate-x-1.json"));
}

TEST_F(CliTest, VerifyRefinementModeWritesTheLevelTable) {
  njson j = base_config();
  j["geometry"] = {{"N", 1}, {"l", 2}, {"gamma", 1.0}, {"p", 2.0}};
  j["domain"] = {{"lo", {0.6, -0.7, -0.45}}, {"hi", {1.6, 0.5, 0.75}}, {"resolution", {9, 9, 9}}};
  j["subdomain"] = {{"lo_fraction", {0.25, 0.25, 0.25}}, {"hi_fraction", {0.625, 0.625, 0.625}}};
  const std::string cfg = write_config(j);
  ASSERT_EQ(run_cli({"verify", "translate-y", "1", "--config", cfg, "--levels", "2"}), kExitOk);

  const std::string csv = read_file(path("out") + "/verify_translate-y-1_refinement.csv");
  EXPECT_EQ(count_lines(csv), 3u);  // header + one row per level
  EXPECT_EQ(csv.substr(0, 31), "level,kind,axis,h_max,lhs,rhs,r");

  const njson jrep = njson::parse(read_file(path("out") + "/verify_translate-y-1_refinement.json"));
  ASSERT_EQ(jrep["rows"].size(), 2u);
  EXPECT_TRUE(jrep.contains("observed_order_relative_residual"));
  EXPECT_EQ(jrep["rows"][1]["level"].get<int>(), 1);
}

// ---------------------------------------------------------------------------
// study
// ---------------------------------------------------------------------------

TEST_F(CliTest, RefinementStudyCoversEveryIdentity) {
  njson j = base_config();
  j["geometry"] = {{"N", 1}, {"l", 2}, {"gamma", 1.0}, {"p", 2.0}};
  j["domain"] = {{"lo", {0.6, -0.7, -0.45}}, {"hi", {1.6, 0.5, 0.75}}, {"resolution", {9, 9, 9}}};
  j["subdomain"] = {{"lo_fraction", {0.25, 0.25, 0.25}}, {"hi_fraction", {0.625, 0.625, 0.625}}};
  j["study"] = {{"levels", 2}};
  const std::string cfg = write_config(j);
  ASSERT_EQ(run_cli({"study", "refinement", "--config", cfg}), kExitOk);

  for (const char* tag : {"translate-x-1", "translate-y-1", "translate-y-2", "scale-local",
                          "scale-global"}) {
    const std::string csv = read_file(path("out") + "/refinement_" + std::string(tag) + ".csv");
    EXPECT_EQ(count_lines(csv), 3u) << tag;
  }
  const njson js = njson::parse(read_file(path("out") + "/study_refinement.json"));
  ASSERT_TRUE(js.contains("scale-global"));
  EXPECT_TRUE(js["scale-global"].contains("observed_order_residual"));
  ASSERT_EQ(js["translate-x-1"]["rows"].size(), 2u);
}

TEST_F(CliTest, WholeSpaceStudyWritesTheDomainSweep) {
  njson j = base_config();
  j["geometry"] = {{"N", 1}, {"l", 2}, {"gamma", 1.0}, {"p", 2.0}};
  j["study"] = {{"radii", {1.0, 1.5}},
                {"h", 0.5},
                {"window", {{"center", {0.0, 0.0, 0.0}}, {"halfwidth", {0.5, 0.5, 0.5}}}}};
  const std::string cfg = write_config(j);
  ASSERT_EQ(run_cli({"study", "whole-space", "--config", cfg}), kExitOk);

  const std::string csv = read_file(path("out") + "/whole_space.csv");
  EXPECT_EQ(count_lines(csv), 3u);
  EXPECT_EQ(csv.substr(0, 16), "level,halfwidth,");
  const njson js = njson::parse(read_file(path("out") + "/whole_space.json"));
  ASSERT_EQ(js["rows"].size(), 2u);
  EXPECT_TRUE(js.contains("boundary_term_decreasing"));

  // Its preconditions are config errors, reported before any solve.
  njson jbad = base_config();
  const std::string cfgbad = write_config(jbad, "bad.json");
  EXPECT_EQ(run_cli({"study", "whole-space", "--config", cfgbad}), kExitConfig);
}

TEST_F(CliTest, StationarityStudyWritesSlopesAndSampleCurves) {
  njson j = base_config();
  j["geometry"] = {{"N", 1}, {"l", 2}, {"gamma", 1.0}, {"p", 2.0}};
  j["subdomain"] = {{"lo_fraction", {0.25, 0.25, 0.25}}, {"hi_fraction", {0.75, 0.75, 0.75}}};
  j["study"] = {{"levels", 1}, {"delta", 0.15}};
  const std::string cfg = write_config(j);
  ASSERT_EQ(run_cli({"study", "stationarity", "--config", cfg}), kExitOk);

  const std::string csv = read_file(path("out") + "/stationarity.csv");
  EXPECT_EQ(count_lines(csv), 2u);
  EXPECT_EQ(csv.substr(0, 11), "level,h,t0,");
  for (const char* name : {"translate", "scale"}) {
    const std::string sc =
        read_file(path("out") + "/stationarity_samples_L0_" + std::string(name) + ".csv");
    EXPECT_EQ(count_lines(sc), 6u) << name;  // header + five t samples
  }

  // Without a subdomain the command cannot build its cutoff.
  njson jbad = base_config();
  jbad["study"] = {{"levels", 1}, {"delta", 0.15}};
  const std::string cfgbad = write_config(jbad, "bad.json");
  EXPECT_EQ(run_cli({"study", "stationarity", "--config", cfgbad}), kExitConfig);
}

}  // namespace
