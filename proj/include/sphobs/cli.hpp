#pragma once

// Subcommand runners behind the sphobs executable.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sphobs/config.hpp"
#include "sphobs/evolution.hpp"
#include "sphobs/geodesic_space.hpp"
#include "sphobs/io.hpp"
#include "sphobs/radon.hpp"
#include "sphobs/spectra.hpp"

namespace sphobs {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitPrecondition = 2, kExitNumericalGuard = 3 };

/// Caps of radius 0.15 at p = (0,0,1) and q = (0,1,0).
inline constexpr const char* kTwoPointRegion = "0,0,1,0.15;0,1,0,0.15";

struct SubcommandInfo {
  const char* name;
  const char* help;
  std::vector<const char*> keys;
};

inline const std::vector<SubcommandInfo>& subcommands() {
  static const std::vector<SubcommandInfo> s = {
      {"synth", "potential V = eps*((a+b+c) - 2Q) as coefficient JSON plus its closed form", {"a", "b", "c", "eps", "out"}},
      {"radon", "Funk transform (or its inverse on even functions) of a coefficient file", {"input", "invert", "lmax", "out"}},
      {"gcc", "sampled geometric control check for a region and time T", {"region", "T", "samples", "out"}},
      {"vgcc",
       "sampled V-GCC check on geodesic space for the flow of the Funk transform of V",
       {"a", "b", "c", "eps", "potential", "region", "T", "T_factor", "samples", "separatrix_samples", "ds", "tol", "trajectory",
        "record_every", "out"}},
      {"evolve",
       "propagate an initial state and report the observability quotient",
       {"alpha", "h", "T", "T_h", "dt", "lmax", "generator", "a", "b", "c", "eps", "potential", "region", "wavepacket", "init",
        "steepness", "out"}},
      {"eigenobs",
       "eigenfunction observability scan",
       {"alpha", "lmax", "a", "b", "c", "eps", "potential", "region", "degeneracy_gap", "out"}},
      {"wavepacket", "build a normalized wave packet and its frequency-window mass", {"wavepacket", "h", "lmax", "steepness", "out"}},
      {"spectrum", "eigenvalues of (-Laplacian)^{alpha/2} + V", {"alpha", "lmax", "a", "b", "c", "eps", "potential", "out"}},
  };
  return s;
}

namespace cli_detail {

inline std::filesystem::path out_dir(const ExperimentConfig& cfg) { return cfg.string("out", "sphobs_out"); }

inline void write_common(const ExperimentConfig& cfg) {
  const auto dir = out_dir(cfg);
  write_file_atomic(dir / "config.txt", cfg.echo());
  write_file_atomic(dir / "version.txt", std::string(kVersion) + "\n");
}

/// V from a coefficient file (times eps if given) or from a, b, c (times eps, default default_eps).
inline std::optional<HarmonicCoeffs> load_potential(const ExperimentConfig& cfg, double default_eps) {
  if (cfg.has("potential") && cfg.has("a")) throw ConfigError("potential", cfg.line_of("potential"), "give either potential or a, b, c");
  if (cfg.has("potential")) {
    HarmonicCoeffs v = read_coeffs(cfg.string("potential"));
    v *= cfg.real("eps", 1.0);
    return v;
  }
  if (const auto q = cfg.triaxial()) return scaled_potential(*q, cfg.real("eps", default_eps));
  if (cfg.has("eps")) throw ConfigError("eps", cfg.line_of("eps"), "eps needs a potential (a, b, c or potential)");
  return std::nullopt;
}

inline nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  j["subcommand"] = cfg.subcommand;
  for (const auto& [k, e] : cfg.entries()) j[k] = e.value;
  return j;
}

inline int run_synth(const ExperimentConfig& cfg) {
  const TriaxialForm q(cfg.real("a", 1.0), cfg.real("b", 2.0), cfg.real("c", 3.0));
  const double eps = cfg.real("eps", 1.0);
  const HarmonicCoeffs v = scaled_potential(q, eps);
  double vmax = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) vmax = std::max(vmax, std::abs(v[i]));
  const auto dir = out_dir(cfg);
  write_coeffs(dir / "potential.json", v, 1e-12 * vmax);
  std::string formula = potential_formula(q);
  if (eps != 1.0) formula = "V(x) = " + format_number(eps) + " * (" + formula.substr(7) + ")";
  write_file_atomic(dir / "formula.txt", formula + "\n");
  write_common(cfg);
  std::cout << formula << "\n";
  return kExitOk;
}

inline int run_radon(const ExperimentConfig& cfg) {
  const HarmonicCoeffs c = read_coeffs(cfg.string("input"), static_cast<int>(cfg.integer("lmax", -1)));
  const bool inv = cfg.flag("invert", false);
  const HarmonicCoeffs r = inv ? invert_even(c) : funk_transform_coeffs(c);
  const auto dir = out_dir(cfg);
  const std::string stem = std::filesystem::path(cfg.string("input")).stem().string();
  write_coeffs(dir / (stem + (inv ? ".funk_inverse.json" : ".funk.json")), r);
  CsvTable s({"lmax", "odd_part_max", "max_amplification"});
  const FunkMultiplierTable table(c.lmax());
  double amp = 0.0;
  for (int l = 0; l <= c.lmax(); l += 2) amp = std::max(amp, table.amplification(l));
  s.row() << c.lmax() << odd_part_max(c) << (inv ? amp : 1.0);
  s.write(dir / "summary.csv");
  write_common(cfg);
  return kExitOk;
}

inline int run_gcc(const ExperimentConfig& cfg) {
  const Region region = cfg.region();
  const double T = cfg.real("T", kTwoPi);
  const GccResult g = check_gcc(region, T, static_cast<int>(cfg.integer("samples", 2000)));
  CsvTable s({"holds", "worst_margin", "worst_normal_x", "worst_normal_y", "worst_normal_z", "worst_start", "n_checked", "certified"});
  s.row() << int(g.holds) << g.worst_margin << g.worst_normal.x() << g.worst_normal.y() << g.worst_normal.z() << g.worst_start
          << g.n_checked << int(g.certified);
  s.write(out_dir(cfg) / "gcc_summary.csv");
  write_common(cfg);
  std::cout << "holds=" << (g.holds ? "true" : "false") << " worst_margin=" << format_number(g.worst_margin) << "\n";
  return kExitOk;
}

inline int run_vgcc(const ExperimentConfig& cfg) {
  const Region region = cfg.has("region") ? cfg.region() : parse_region(kTwoPointRegion);
  std::optional<HarmonicCoeffs> v = load_potential(cfg, 1.0);
  if (!v) v = scaled_potential(TriaxialForm(1.0, 2.0, 3.0), 1.0);
  const QuadraticHamiltonian h = QuadraticHamiltonian::from_coeffs(funk_transform_coeffs(*v));
  const double ds = cfg.real("ds", 1e-3), tol = cfg.real("tol", 1e-9);
  const Vec3 e = quadratic_frame(h).energies;
  const bool nondegenerate = e(1) - e(0) > tol && e(2) - e(1) > tol;

  std::vector<GeodesicPoint> extra;
  if (nondegenerate) extra = separatrix_starts(h, static_cast<int>(cfg.integer("separatrix_samples", 16)));
  const int n_samples = static_cast<int>(cfg.integer("samples", 2000));
  double T = cfg.real("T", 0.0);
  double slowest = -1.0;
  if (!(T > 0.0)) {
    std::vector<GeodesicPoint> starts = fibonacci_lattice(n_samples);
    const auto p = nondegenerate ? slowest_period(h, starts, ds, tol) : std::nullopt;
    if (!p) throw PreconditionError("vgcc: no periodic orbit found, set T explicitly");
    slowest = *p;
    T = cfg.real("T_factor", 3.0) * slowest;
  }
  const VgccResult r = check_vgcc(region, h, T, n_samples, ds, extra);

  const auto dir = out_dir(cfg);
  CsvTable t({"n_x", "n_y", "n_z", "energy", "orbit_class", "first_hit_time", "margin"});
  for (const VgccSample& smp : r.samples) {
    const std::string cls = nondegenerate ? orbit_class_name(classify_orbit(smp.n0, h, tol).tag) : "unclassified";
    t.row() << smp.n0.x() << smp.n0.y() << smp.n0.z() << smp.energy << cls << smp.first_hit_time << smp.margin;
  }
  t.write(dir / "vgcc.csv");
  CsvTable s({"holds", "margin", "T", "slowest_period", "n_samples", "n_uncontrolled", "certified"});
  s.row() << int(r.holds) << r.margin << r.T << slowest << r.samples.size() << r.uncontrolled.size() << int(r.certified);
  s.write(dir / "vgcc_summary.csv");
  if (cfg.has("trajectory")) {
    const FlowResult f = vflow(parse_unit_vector(cfg.string("trajectory")), h, T, ds, static_cast<int>(cfg.integer("record_every", 10)));
    CsvTable tr({"s", "n_x", "n_y", "n_z", "H"});
    for (const TrajectorySample& p : f.trajectory) tr.row() << p.s << p.n.x() << p.n.y() << p.n.z() << p.energy;
    tr.write(dir / "trajectory.csv");
  }
  write_common(cfg);
  std::cout << "holds=" << (r.holds ? "true" : "false") << " margin=" << format_number(r.margin) << " T=" << format_number(T)
            << " uncontrolled=" << r.uncontrolled.size() << "\n";
  return kExitOk;
}

inline WavePacketSpec wavepacket_spec(const ExperimentConfig& cfg) {
  WavePacketSpec spec{parse_phase_point(cfg.string("wavepacket")), cfg.real("h", 0.1)};
  spec.validate();
  return spec;
}

inline int run_evolve(const ExperimentConfig& cfg) {
  if (cfg.has("wavepacket") == cfg.has("init")) throw ConfigError("init", cfg.line_of("init"), "give exactly one of wavepacket or init");
  EvolutionParams p;
  p.alpha = cfg.real("alpha", 2.0);
  p.T = cfg.real("T", 1.0);
  p.dt = cfg.real("dt", 1e-3);
  p.lmax = static_cast<int>(cfg.integer("lmax", 48));
  p.generator = cfg.string("generator", "fractional") == "halfwave" ? Generator::HalfWave : Generator::Fractional;
  p.potential = load_potential(cfg, 1.0);
  const Region region = cfg.region();
  const HarmonicCoeffs u0 = cfg.has("init") ? read_coeffs(cfg.string("init"), p.lmax)
                                            : make_wavepacket(wavepacket_spec(cfg), wavepacket_grid(p.lmax), p.lmax);
  const double T_h = cfg.real("T_h", 0.0);
  const ObservabilityReport rep =
      T_h > 0.0 ? long_time_quotient(u0, p, region, T_h, FrequencyWindow(cfg.real("h", 0.1), cfg.real("steepness", 1.0)))
                : observability_quotient(u0, p, region);

  const auto dir = out_dir(cfg);
  CsvTable t({"t", "mass_omega", "norm"});
  for (std::size_t i = 0; i < rep.times.size(); ++i) t.row() << rep.times[i] << rep.mass_omega[i] << rep.norms[i];
  t.write(dir / "timeseries.csv");
  nlohmann::json j;
  j["quotient"] = rep.quotient;
  j["norm_drift"] = rep.norm_drift;
  j["window_mass"] = rep.window_mass;
  j["horizon"] = rep.horizon;
  j["averaged"] = rep.averaged;
  j["n_steps"] = rep.plan.n_steps;
  j["dt_effective"] = rep.plan.dt;
  j["save_every"] = rep.plan.save_every;
  j["params"] = config_json(cfg);
  write_file_atomic(dir / "report.json", j.dump(2) + "\n");
  write_common(cfg);
  std::cout << "quotient=" << format_number(rep.quotient) << " norm_drift=" << format_number(rep.norm_drift) << "\n";
  return kExitOk;
}

inline SpectralDecomposition solve_from_config(const ExperimentConfig& cfg, int default_lmax) {
  const int lmax = static_cast<int>(cfg.integer("lmax", default_lmax));
  const std::optional<TriaxialForm> q = cfg.has("potential") ? std::nullopt : cfg.triaxial();
  const std::optional<HarmonicCoeffs> v = load_potential(cfg, q ? default_potential_scale(*q) : 1.0);
  return eigensolve(cfg.real("alpha", 2.0), v ? *v : HarmonicCoeffs(0), lmax);
}

inline int run_eigenobs(const ExperimentConfig& cfg) {
  const Region region = cfg.has("region") ? cfg.region() : parse_region(kTwoPointRegion);
  const SpectralDecomposition d = solve_from_config(cfg, 40);
  const EigenObsScan scan = eigen_obs_scan(d, region, cfg.real("degeneracy_gap", 1e-8));
  const auto dir = out_dir(cfg);
  CsvTable t({"index", "lambda", "cluster_k", "mass_omega", "min_in_cluster", "trusted"});
  for (const EigenObsRow& r : scan.rows) t.row() << r.index << r.lambda << r.cluster_k << r.mass_omega << r.min_in_cluster << int(r.trusted);
  t.write(dir / "eigenobs.csv");
  CsvTable c({"cluster_k", "min_mass", "trusted"});
  for (const ClusterSummary& s : scan.clusters) c.row() << s.k << s.min_mass << int(s.trusted);
  c.write(dir / "clusters.csv");
  CsvTable s({"min_mass", "trust_threshold", "n_blocks", "hermiticity_defect", "max_residual"});
  s.row() << scan.min_mass << scan.trust_threshold << d.n_blocks << d.hermiticity_defect
          << *std::max_element(d.residuals.begin(), d.residuals.end());
  s.write(dir / "eigenobs_summary.csv");
  write_common(cfg);
  std::cout << "min_mass=" << format_number(scan.min_mass) << " eigenpairs=" << scan.rows.size() << "\n";
  return kExitOk;
}

inline int run_spectrum(const ExperimentConfig& cfg) {
  const SpectralDecomposition d = solve_from_config(cfg, 24);
  CsvTable t({"index", "lambda", "cluster_k", "residual"});
  for (std::size_t i = 0; i < d.eigenvalues.size(); ++i)
    t.row() << i << d.eigenvalues[i] << static_cast<int>(std::floor(std::sqrt(static_cast<double>(i)))) << d.residuals[i];
  t.write(out_dir(cfg) / "spectrum.csv");
  write_common(cfg);
  return kExitOk;
}

inline int run_wavepacket(const ExperimentConfig& cfg) {
  const int lmax = static_cast<int>(cfg.integer("lmax", 56));
  const WavePacketSpec spec = wavepacket_spec(cfg);
  const HarmonicCoeffs u = make_wavepacket(spec, wavepacket_grid(lmax), lmax);
  const HarmonicCoeffs w = apply_frequency_window(u, FrequencyWindow(spec.h, cfg.real("steepness", 1.0)));
  const auto dir = out_dir(cfg);
  write_coeffs(dir / "wavepacket.json", u);
  const QuadGrid grid(lmax);
  grid_values_table(synthesize(u, grid), grid).write(dir / "grid_values.csv");
  CsvTable s({"h", "lmax", "norm", "window_norm"});
  s.row() << spec.h << lmax << u.norm() << w.norm();
  s.write(dir / "wavepacket_summary.csv");
  write_common(cfg);
  return kExitOk;
}

}  // namespace cli_detail

/// Dispatches a validated configuration.
inline int run(const ExperimentConfig& cfg) {
  using namespace cli_detail;
  const std::string& s = cfg.subcommand;
  if (s == "synth") return run_synth(cfg);
  if (s == "radon") return run_radon(cfg);
  if (s == "gcc") return run_gcc(cfg);
  if (s == "vgcc") return run_vgcc(cfg);
  if (s == "evolve") return run_evolve(cfg);
  if (s == "eigenobs") return run_eigenobs(cfg);
  if (s == "wavepacket") return run_wavepacket(cfg);
  if (s == "spectrum") return run_spectrum(cfg);
  throw ConfigError("subcommand", 0, "unknown subcommand '" + s + "'");
}

/// Full command line entry point; maps errors to exit codes 2 (precondition) and 3 (numerical guard).
inline int run_cli(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Observability experiments for fractional Schroedinger equations on the sphere", "sphobs"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help message and exit");
  app.set_version_flag("--version", kVersion);
  std::map<std::string, std::string> flags;
  std::string config_file;
  for (const SubcommandInfo& info : subcommands()) {
    CLI::App* sub = app.add_subcommand(info.name, info.help);
    sub->add_option("--config", config_file, "key = value configuration file; flags override it")->check(CLI::ExistingFile);
    for (const char* key : info.keys) {
      const KeySpec* spec = find_key(key);
      const std::string name = key;
      sub->add_option_function<std::string>(
          "--" + name, [&flags, name](const std::string& v) { flags[name] = v; }, spec->help);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, err);
    return code == 0 ? kExitOk : kExitPrecondition;
  }
  const CLI::App* chosen = app.get_subcommands().front();
  try {
    const std::optional<std::string> text = config_file.empty() ? std::nullopt : std::optional<std::string>(read_file(config_file));
    const ExperimentConfig cfg = parse_config(chosen->get_name(), text, flags);
    if (text) {
      const SubcommandInfo* info = nullptr;
      for (const auto& i : subcommands())
        if (chosen->get_name() == i.name) info = &i;
      for (const auto& [k, e] : cfg.entries())
        if (std::find_if(info->keys.begin(), info->keys.end(), [&](const char* x) { return k == x; }) == info->keys.end())
          err << "warning: key '" << k << "' (line " << e.line << ") is not used by " << info->name << "\n";
    }
    return run(cfg);
  } catch (const NumericalGuardError& e) {
    err << "numerical guard: " << e.what() << "\n";
    return kExitNumericalGuard;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace sphobs
