#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "sphobs/cli.hpp"
#include "test_support.hpp"

using namespace sphobs;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sphobs_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "sphobs");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream es;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), es);
  if (err) *err = es.str();
  return code;
}

std::string header_of(const fs::path& csv) {
  const std::string text = read_file(csv);
  return text.substr(0, text.find('\n'));
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& csv) {
  std::istringstream in(read_file(csv));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) rows.push_back(split(line, ','));
  return rows;
}

void expect_common_files(const fs::path& dir) {
  EXPECT_TRUE(fs::exists(dir / "config.txt"));
  ASSERT_TRUE(fs::exists(dir / "version.txt"));
  EXPECT_EQ(read_file(dir / "version.txt"), std::string(kVersion) + "\n");
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp") << e.path();
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration.

TEST(Config, FlagOverridesFile) {
  const ExperimentConfig cfg = parse_config("evolve", "alpha = 2\nT = 3\n", {{"alpha", "1"}});
  EXPECT_EQ(cfg.real("alpha"), 1.0);
  EXPECT_EQ(cfg.real("T"), 3.0);
  EXPECT_EQ(cfg.line_of("alpha"), 0);
  EXPECT_EQ(cfg.line_of("T"), 2);
}

TEST(Config, CommentsAndBlankLines) {
  const ExperimentConfig cfg = parse_config("evolve", "# header\n\n  alpha = 0.5   # trailing\n\tlmax=12\n", {});
  EXPECT_EQ(cfg.real("alpha"), 0.5);
  EXPECT_EQ(cfg.integer("lmax"), 12);
}

TEST(Config, RegionOfTwoCaps) {
  const ExperimentConfig cfg = parse_config("vgcc", std::nullopt, {{"region", "0,0,1,0.15;0,1,0,0.15"}});
  const Region r = cfg.region();
  ASSERT_EQ(r.caps.size(), 2u);
  EXPECT_EQ(r.caps[0].center.vec(), Vec3(0, 0, 1));
  EXPECT_EQ(r.caps[1].center.vec(), Vec3(0, 1, 0));
  EXPECT_EQ(r.caps[0].radius, 0.15);
  EXPECT_EQ(r.caps[1].radius, 0.15);
}

TEST(Config, TriaxialOrderingRejected) {
  try {
    parse_config("synth", "a = 2\nb = 1\nc = 3\n", {});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("requires 0<a<b<c"), std::string::npos) << e.what();
    EXPECT_GT(e.line(), 0);
  }
  EXPECT_THROW(parse_config("synth", std::nullopt, {{"a", "1"}, {"b", "2"}}), ConfigError);
  EXPECT_NO_THROW(parse_config("synth", std::nullopt, {{"a", "1"}, {"b", "2"}, {"c", "3"}}));
}

TEST(Config, UnknownKeyNamesKeyAndLine) {
  try {
    parse_config("evolve", "alpha = 2\n\nbeta = 1\n", {});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "beta");
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(parse_config("evolve", std::nullopt, {{"beta", "1"}}), ConfigError);
}

TEST(Config, TypeMismatchNamesKeyAndLine) {
  try {
    parse_config("evolve", "alpha = 2\nlmax = 3.5\n", {});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "lmax");
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(parse_config("evolve", "alpha = two\n", {}), ConfigError);
  EXPECT_THROW(parse_config("radon", "invert = maybe\n", {}), ConfigError);
  EXPECT_THROW(parse_config("evolve", "alpha = nan\n", {}), ConfigError);
}

TEST(Config, ConstraintViolations) {
  EXPECT_THROW(parse_config("evolve", "alpha = 0\n", {}), ConfigError);
  EXPECT_THROW(parse_config("evolve", "h = 1.5\n", {}), ConfigError);
  EXPECT_THROW(parse_config("evolve", "T = 1\ndt = 2\n", {}), ConfigError);
  EXPECT_THROW(parse_config("evolve", "generator = schroedinger\n", {}), ConfigError);
  EXPECT_THROW(parse_config("vgcc", "region = 0,0,1\n", {}), ConfigError);
  EXPECT_THROW(parse_config("vgcc", "region = 0,0,0,0.1\n", {}), ConfigError);
  EXPECT_THROW(parse_config("evolve", "wavepacket = 1,0,0\n", {}), ConfigError);
  EXPECT_THROW(parse_config("evolve", "lmax = -1\n", {}), ConfigError);
}

TEST(Config, MalformedAndDuplicateLines) {
  EXPECT_THROW(parse_config("evolve", "alpha 2\n", {}), ConfigError);
  try {
    parse_config("evolve", "alpha = 2\nalpha = 3\n", {});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}

TEST(Config, ErrorIsPreconditionError) {
  EXPECT_THROW(parse_config("evolve", "foo = 1\n", {}), PreconditionError);
}

TEST(Config, EchoIsSortedAndComplete) {
  const ExperimentConfig cfg = parse_config("evolve", "lmax = 8\nalpha = 2\n", {{"h", "0.2"}});
  const std::string echo = cfg.echo();
  EXPECT_NE(echo.find("subcommand = evolve"), std::string::npos);
  const auto pa = echo.find("alpha = 2"), ph = echo.find("h = 0.2"), pl = echo.find("lmax = 8");
  ASSERT_NE(pa, std::string::npos);
  ASSERT_NE(ph, std::string::npos);
  ASSERT_NE(pl, std::string::npos);
  EXPECT_LT(pa, ph);
  EXPECT_LT(ph, pl);
}

TEST(Config, ParsePhasePoint) {
  const PhasePoint p = parse_phase_point("1,0,0;0,1,0");
  EXPECT_EQ(p.base().vec(), Vec3(1, 0, 0));
  EXPECT_EQ(p.dir().vec(), Vec3(0, 1, 0));
  EXPECT_THROW(parse_phase_point("1,0,0"), PreconditionError);
}

// ---------------------------------------------------------------------------
// Serialization.

TEST(Io, CoefficientJsonRoundTrip) {
  std::mt19937_64 rng(7);
  const HarmonicCoeffs c = random_coeffs(9, rng, false);
  const HarmonicCoeffs back = coeffs_from_json(nlohmann::json::parse(coeffs_to_json(c).dump()));
  ASSERT_EQ(back.lmax(), 9);
  EXPECT_EQ(back.max_abs_diff(c), 0.0);
}

TEST(Io, CoefficientRecordSchema) {
  const nlohmann::json j = coeffs_to_json(HarmonicCoeffs::delta(2, 2, -1, cplx(0.5, -0.25)), 0.0);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["l"], 2);
  EXPECT_EQ(j[0]["m"], -1);
  EXPECT_EQ(j[0]["re"], 0.5);
  EXPECT_EQ(j[0]["im"], -0.25);
}

TEST(Io, CoefficientValidation) {
  using nlohmann::json;
  EXPECT_THROW(coeffs_from_json(json::object()), PreconditionError);
  EXPECT_THROW(coeffs_from_json(json::parse(R"([{"l":1,"m":0,"re":1}])")), PreconditionError);
  EXPECT_THROW(coeffs_from_json(json::parse(R"([{"l":1,"m":2,"re":1,"im":0}])")), PreconditionError);
  EXPECT_THROW(coeffs_from_json(json::parse(R"([{"l":-1,"m":0,"re":1,"im":0}])")), PreconditionError);
  EXPECT_THROW(coeffs_from_json(json::parse(R"([{"l":1,"m":0,"re":"x","im":0}])")), PreconditionError);
  EXPECT_THROW(coeffs_from_json(json::parse(R"([{"l":1,"m":0,"re":1,"im":0},{"l":1,"m":0,"re":2,"im":0}])")), PreconditionError);
  EXPECT_THROW(coeffs_from_json(json::parse(R"([{"l":3,"m":0,"re":1,"im":0}])"), 2), PreconditionError);
  EXPECT_EQ(coeffs_from_json(json::parse(R"([{"l":1,"m":0,"re":1,"im":0}])"), 4).lmax(), 4);
}

TEST(Io, ReadRejectsInvalidJson) {
  const fs::path dir = scratch("bad_json");
  write_file_atomic(dir / "x.json", "[{\"l\": 0,");
  EXPECT_THROW(read_coeffs(dir / "x.json"), PreconditionError);
  EXPECT_THROW(read_coeffs(dir / "missing.json"), PreconditionError);
}

TEST(Io, AtomicWriteReplacesContent) {
  const fs::path dir = scratch("atomic");
  write_file_atomic(dir / "sub" / "a.txt", "one");
  write_file_atomic(dir / "sub" / "a.txt", "two");
  EXPECT_EQ(read_file(dir / "sub" / "a.txt"), "two");
  EXPECT_FALSE(fs::exists(dir / "sub" / "a.txt.tmp"));
}

TEST(Io, NumbersRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    EXPECT_EQ(std::strtod(format_number(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-1.0), "-1");
}

TEST(Io, CsvTableLayout) {
  CsvTable t({"a", "b", "c"});
  t.row() << 1 << 0.5 << "x";
  t.row() << std::size_t{2} << -0.25 << std::string("y");
  EXPECT_EQ(t.str(), "a,b,c\n1,0.5,x\n2,-0.25,y\n");
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_THROW(t.row() << 1 << 2, std::logic_error);
}

TEST(Io, GridValuesTable) {
  const QuadGrid g(3);
  std::vector<cplx> v(g.size(), cplx(1.0, -2.0));
  const CsvTable t = grid_values_table(v, g);
  EXPECT_EQ(t.rows(), g.size());
  EXPECT_EQ(t.str().substr(0, t.str().find('\n')), "theta,phi,re,im");
  v.pop_back();
  EXPECT_THROW(grid_values_table(v, g), PreconditionError);
}

// ---------------------------------------------------------------------------
// Command line.

TEST(Cli, SynthEmitsOnlyDegreeZeroAndTwo) {
  const fs::path dir = scratch("synth");
  ASSERT_EQ(cli({"synth", "--a", "1", "--b", "2", "--c", "3", "--out", dir.string()}), 0);
  const nlohmann::json j = nlohmann::json::parse(read_file(dir / "potential.json"));
  ASSERT_FALSE(j.empty());
  std::set<int> degrees;
  for (const auto& e : j) degrees.insert(e["l"].get<int>());
  EXPECT_EQ(degrees, (std::set<int>{0, 2}));
  EXPECT_EQ(read_file(dir / "formula.txt"), "V(x) = 6 - 2*(1*x1^2 + 2*x2^2 + 3*x3^2)\n");
  expect_common_files(dir);

  // Circle averages of the emitted V reproduce Q (quadrature oracle).
  const HarmonicCoeffs v = read_coeffs(dir / "potential.json");
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const UnitVec3 n = sphobs::testing::random_unit(rng);
    const double avg = funk_transform_quadrature([&](const Vec3& x) { return evaluate(v, x).real(); }, n);
    EXPECT_NEAR(avg, n.x() * n.x() + 2 * n.y() * n.y() + 3 * n.z() * n.z(), 1e-10);
  }
}

TEST(Cli, SynthRejectsBadOrdering) {
  std::string err;
  EXPECT_EQ(cli({"synth", "--a", "2", "--b", "1", "--c", "3", "--out", scratch("synth_bad").string()}, &err), 2);
  EXPECT_NE(err.find("requires 0<a<b<c"), std::string::npos) << err;
}

TEST(Cli, RadonLeavesInputUntouched) {
  const fs::path dir = scratch("radon");
  std::mt19937_64 rng(5);
  const HarmonicCoeffs c = random_coeffs(6, rng, true);
  write_coeffs(dir / "in.json", c);
  const std::string before = read_file(dir / "in.json");
  ASSERT_EQ(cli({"radon", "--input", (dir / "in.json").string(), "--out", (dir / "out").string()}), 0);
  EXPECT_EQ(read_file(dir / "in.json"), before);
  const HarmonicCoeffs f = read_coeffs(dir / "out" / "in.funk.json");
  EXPECT_LT(f.max_abs_diff(funk_transform_coeffs(c)), 1e-15);
  expect_common_files(dir / "out");

  ASSERT_EQ(cli({"radon", "--input", (dir / "out" / "in.funk.json").string(), "--invert", "true", "--out", (dir / "inv").string()}), 0);
  const HarmonicCoeffs back = read_coeffs(dir / "inv" / "in.funk.funk_inverse.json");
  HarmonicCoeffs even = c;
  for (int l = 1; l <= 6; l += 2)
    for (int m = -l; m <= l; ++m) even(l, m) = 0.0;
  EXPECT_LT(back.max_abs_diff(even), 1e-12);
}

TEST(Cli, GccPolarCapFailsAtEquator) {
  const fs::path dir = scratch("gcc");
  ASSERT_EQ(cli({"gcc", "--region", "0,0,1,0.785398", "--samples", "400", "--out", dir.string()}), 0);
  EXPECT_EQ(header_of(dir / "gcc_summary.csv"),
            "holds,worst_margin,worst_normal_x,worst_normal_y,worst_normal_z,worst_start,n_checked,certified");
  const auto rows = csv_rows(dir / "gcc_summary.csv");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0][0], "0");
  EXPECT_GT(std::abs(std::stod(rows[0][4])), 0.99);
  EXPECT_EQ(rows[0][7], "0");
}

TEST(Cli, VgccTwoPointSetupHolds) {
  const fs::path dir = scratch("vgcc");
  ASSERT_EQ(cli({"vgcc", "--samples", "150", "--trajectory", "1,0.3,0", "--record_every", "50", "--out", dir.string()}), 0);
  EXPECT_EQ(header_of(dir / "vgcc.csv"), "n_x,n_y,n_z,energy,orbit_class,first_hit_time,margin");
  EXPECT_EQ(header_of(dir / "vgcc_summary.csv"), "holds,margin,T,slowest_period,n_samples,n_uncontrolled,certified");
  EXPECT_EQ(header_of(dir / "trajectory.csv"), "s,n_x,n_y,n_z,H");
  const auto summary = csv_rows(dir / "vgcc_summary.csv");
  ASSERT_EQ(summary.size(), 1u);
  EXPECT_EQ(summary[0][0], "1");
  EXPECT_NEAR(std::stod(summary[0][2]), 3.0 * std::stod(summary[0][3]), 1e-9);
  std::set<std::string> classes;
  for (const auto& r : csv_rows(dir / "vgcc.csv")) {
    ASSERT_EQ(r.size(), 7u);
    classes.insert(r[4]);
    EXPECT_GE(std::stod(r[5]), 0.0);
  }
  EXPECT_TRUE(classes.count("around_c1"));
  EXPECT_TRUE(classes.count("around_c3"));
  EXPECT_TRUE(classes.count("separatrix"));
  for (const auto& r : csv_rows(dir / "trajectory.csv")) EXPECT_NEAR(std::stod(r[4]), 1.0 + 0.09 / 1.09, 1e-10);
  expect_common_files(dir);
}

TEST(Cli, VgccOutputIsDeterministic) {
  const fs::path a = scratch("vgcc_a"), b = scratch("vgcc_b");
  ASSERT_EQ(cli({"vgcc", "--samples", "40", "--T", "5", "--out", a.string()}), 0);
  ASSERT_EQ(cli({"vgcc", "--samples", "40", "--T", "5", "--out", b.string()}), 0);
  EXPECT_EQ(read_file(a / "vgcc.csv"), read_file(b / "vgcc.csv"));
  EXPECT_EQ(read_file(a / "vgcc_summary.csv"), read_file(b / "vgcc_summary.csv"));
}

TEST(Cli, StepGuardMapsToExitThree) {
  std::string err;
  EXPECT_EQ(cli({"vgcc", "--samples", "1", "--T", "1e7", "--ds", "1e-3", "--out", scratch("guard").string()}, &err), 3);
  EXPECT_NE(err.find("numerical guard"), std::string::npos) << err;
}

TEST(Cli, EvolveWithConfigFile) {
  const fs::path dir = scratch("evolve");
  write_file_atomic(dir / "run.cfg", "alpha = 2\nh = 0.2\nT = 0.5\ndt = 1e-3\nlmax = 20\nregion = 0,0,1,0.7853981633974483\n"
                                     "wavepacket = 1,0,0;0,1,0\n");
  ASSERT_EQ(cli({"evolve", "--config", (dir / "run.cfg").string(), "--alpha", "1", "--out", (dir / "out").string()}), 0);
  EXPECT_EQ(header_of(dir / "out" / "timeseries.csv"), "t,mass_omega,norm");
  const nlohmann::json rep = nlohmann::json::parse(read_file(dir / "out" / "report.json"));
  for (const char* k : {"quotient", "norm_drift", "params"}) EXPECT_TRUE(rep.contains(k)) << k;
  EXPECT_EQ(rep["params"]["alpha"], "1");
  EXPECT_LE(rep["norm_drift"].get<double>(), 1e-8);
  EXPECT_GE(rep["quotient"].get<double>(), 0.0);
  EXPECT_LE(rep["quotient"].get<double>(), 0.5);
  const auto rows = csv_rows(dir / "out" / "timeseries.csv");
  EXPECT_EQ(std::stod(rows.front()[0]), 0.0);
  EXPECT_NEAR(std::stod(rows.back()[0]), 0.5, 1e-12);
  EXPECT_NE(read_file(dir / "out" / "config.txt").find("alpha = 1"), std::string::npos);
  expect_common_files(dir / "out");
}

TEST(Cli, EvolveNeedsExactlyOneInitialState) {
  EXPECT_EQ(cli({"evolve", "--region", "0,0,1,0.5", "--out", scratch("evolve_none").string()}), 2);
}

TEST(Cli, EvolveWithInitAndPotential) {
  const fs::path dir = scratch("evolve_init");
  write_coeffs(dir / "u0.json", HarmonicCoeffs::delta(3, 3, 1));
  ASSERT_EQ(cli({"synth", "--out", (dir / "v").string()}), 0);
  ASSERT_EQ(cli({"evolve", "--init", (dir / "u0.json").string(), "--potential", (dir / "v" / "potential.json").string(), "--eps",
                 "0.5", "--region", "0,0,1,0.5", "--T", "0.2", "--dt", "1e-3", "--lmax", "8", "--out", (dir / "out").string()}),
            0);
  const nlohmann::json rep = nlohmann::json::parse(read_file(dir / "out" / "report.json"));
  EXPECT_LE(rep["norm_drift"].get<double>(), 1e-10);
}

TEST(Cli, EigenobsSchema) {
  const fs::path dir = scratch("eigenobs");
  ASSERT_EQ(cli({"eigenobs", "--lmax", "8", "--a", "1", "--b", "2", "--c", "3", "--out", dir.string()}), 0);
  EXPECT_EQ(header_of(dir / "eigenobs.csv"), "index,lambda,cluster_k,mass_omega,min_in_cluster,trusted");
  const auto rows = csv_rows(dir / "eigenobs.csv");
  ASSERT_EQ(rows.size(), 81u);
  double prev = -1e300;
  for (const auto& r : rows) {
    const double lambda = std::stod(r[1]);
    EXPECT_GE(lambda, prev);
    prev = lambda;
    EXPECT_TRUE(r[5] == "0" || r[5] == "1");
    EXPECT_LE(std::stod(r[4]), std::stod(r[3]) + 1e-15);
  }
  EXPECT_EQ(header_of(dir / "clusters.csv"), "cluster_k,min_mass,trusted");
  expect_common_files(dir);
}

TEST(Cli, SpectrumWithoutPotential) {
  const fs::path dir = scratch("spectrum");
  ASSERT_EQ(cli({"spectrum", "--lmax", "4", "--alpha", "2", "--out", dir.string()}), 0);
  const auto rows = csv_rows(dir / "spectrum.csv");
  ASSERT_EQ(rows.size(), 25u);
  for (const auto& r : rows) {
    const int k = std::stoi(r[2]);
    EXPECT_NEAR(std::stod(r[1]), k * (k + 1.0), 1e-12);
  }
}

TEST(Cli, WavepacketOutputs) {
  const fs::path dir = scratch("wavepacket");
  ASSERT_EQ(cli({"wavepacket", "--wavepacket", "0,0,1;1,0,0", "--h", "0.2", "--lmax", "24", "--out", dir.string()}), 0);
  EXPECT_EQ(header_of(dir / "grid_values.csv"), "theta,phi,re,im");
  EXPECT_NEAR(read_coeffs(dir / "wavepacket.json").norm(), 1.0, 1e-8);
  const auto s = csv_rows(dir / "wavepacket_summary.csv");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_GT(std::stod(s[0][3]), 0.5);
  EXPECT_EQ(csv_rows(dir / "grid_values.csv").size(), QuadGrid(24).size());
}

TEST(Cli, ChartViolationMapsToExitTwo) {
  EXPECT_EQ(cli({"wavepacket", "--wavepacket", "0,0,1;1,0,0", "--h", "0.9", "--out", scratch("wp_bad").string()}), 2);
}

TEST(Cli, UnknownFlagAndMissingSubcommand) {
  EXPECT_EQ(cli({}), 2);
  EXPECT_EQ(cli({"synth", "--alpha", "1"}), 2);
  EXPECT_EQ(cli({"teleport"}), 2);
}

TEST(Cli, ConfigFileErrorsCarryLine) {
  const fs::path dir = scratch("cfg_err");
  write_file_atomic(dir / "bad.cfg", "# comment\nalpha = 2\nzeta = 1\n");
  std::string err;
  EXPECT_EQ(cli({"evolve", "--config", (dir / "bad.cfg").string()}, &err), 2);
  EXPECT_NE(err.find("'zeta'"), std::string::npos) << err;
  EXPECT_NE(err.find("line 3"), std::string::npos) << err;
}
