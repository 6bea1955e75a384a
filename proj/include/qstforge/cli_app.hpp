#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qstforge/chaos.hpp"
#include "qstforge/json_io.hpp"
#include "qstforge/robustness.hpp"

namespace qstforge::cli {

inline constexpr int kSchemaVersion = 1;

// Exit codes: 0 success, 2 schema violation, 3 resource limit, 4 numerical
// failure.
enum ExitCode : int {
  exit_ok = 0,
  exit_schema = 2,
  exit_resource = 3,
  exit_numerical = 4,
};

struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

struct StateSpec {
  bool bell = false;
  std::vector<int> sites;  // 0-based site indices

  int n_excitations() const { return bell ? 1 : static_cast<int>(sites.size()); }
};

inline Site json_io_site(const Json& j, const std::string& field) {
  return qstforge::detail::site_from_json(j, field);
}

inline StateSpec parse_state(const Json& j, const LatticeSpec& lattice,
                             const std::string& field) {
  StateSpec spec;
  auto q_to_index = [&](int q) {
    if (q < 1 || q > lattice.n_sites())
      throw schema_error(field, "qubit number out of range");
    return q - 1;
  };
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (!s.starts_with("bell:")) throw schema_error(field, "expected \"bell:[a,b]\"");
    Json pair;
    try {
      pair = Json::parse(s.substr(5));
    } catch (const Json::exception&) {
      throw schema_error(field, "malformed bell site pair");
    }
    if (!pair.is_array() || pair.size() != 2)
      throw schema_error(field, "bell spec needs exactly two sites");
    spec.bell = true;
    for (const auto& e : pair) spec.sites.push_back(q_to_index(e.get<int>()));
    if (spec.sites[0] == spec.sites[1]) throw schema_error(field, "bell sites must differ");
    return spec;
  }
  if (!j.is_array() || j.empty() || j.size() > 2)
    throw schema_error(field, "expected 1 or 2 occupied sites");
  for (const auto& e : j) {
    if (e.is_array())
      spec.sites.push_back(lattice.site_index(json_io_site(e, field)));
    else
      spec.sites.push_back(q_to_index(e.get<int>()));
  }
  if (spec.sites.size() == 2 && spec.sites[0] == spec.sites[1])
    throw schema_error(field, "occupied sites must differ");
  return spec;
}

inline Json state_to_json(const StateSpec& spec) {
  if (spec.bell) {
    std::ostringstream os;
    os << "bell:[" << spec.sites[0] + 1 << "," << spec.sites[1] + 1 << "]";
    return os.str();
  }
  Json arr = Json::array();
  for (int s : spec.sites) arr.push_back(s + 1);
  return arr;
}

inline StateVector make_state(const LatticeSpec& lattice, std::shared_ptr<const FockBasis> basis,
                              const StateSpec& spec) {
  if (spec.bell)
    return bell_state(lattice, std::move(basis), lattice.site_at(spec.sites[0]),
                      lattice.site_at(spec.sites[1]));
  if (spec.sites.size() == 1) return basis_state(std::move(basis), Occupation::single(spec.sites[0]));
  return basis_state(std::move(basis), Occupation::pair(spec.sites[0], spec.sites[1]));
}

struct Csv {
  std::ostringstream out;

  void header(const std::vector<std::string>& columns) {
    for (std::size_t i = 0; i < columns.size(); ++i)
      out << (i ? "," : "") << columns[i];
    out << "\n";
  }

  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      out << (i ? "," : "") << format_double(values[i]);
    out << "\n";
  }

  void mixed_row(const std::vector<std::string>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      out << (i ? "," : "") << values[i];
    out << "\n";
  }
};

}  // namespace detail

// Fully resolved job description; serialized back out as manifest.json.
struct Job {
  std::string command;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  bool quiet = false;
  std::filesystem::path output_dir = ".";
  Json manifest;

  LatticeSpec lattice;
  std::optional<CouplingConfig> couplings;
  bool protocol_standard = false;
  double j_mhz = -2.0;
  double cross_mhz = 0.0;
  CouplingSymmetry symmetry = CouplingSymmetry::inversion;
  std::optional<detail::StateSpec> initial;
  std::optional<detail::StateSpec> target;
  double t_qst_ns = 0.0;
  double t_max_ns = 0.0;
  int n_points = 0;
  AnnealSchedule schedule;

  // spectrum
  int n_excitations = 2;
  bool resolve_sectors = true;
  std::optional<int> ensemble_count;
  double ensemble_j_min = -10.0;
  double ensemble_j_max = -0.1;

  // transport
  std::optional<std::pair<double, double>> spread_fit_ns;

  // noise
  NoiseKind noise_kind = NoiseKind::coupling;
  std::vector<double> noise_sigmas;
  int noise_instances = 200;

  // thermal
  ThermalProtocol thermal_protocol = ThermalProtocol::single_excitation;
  std::vector<std::pair<int, int>> thermal_sizes{{2, 2}, {2, 3}, {3, 3}, {3, 4}};
  std::vector<double> thermal_gammas{0.005};
  int thermal_realizations = 25;
  int extrapolate_sites = 36;

  int effective_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }
};

namespace detail {

inline const char* command_of(const Json& job, const std::string& cli_command) {
  static const char* known[] = {"anneal", "evolve", "spectrum", "noise",
                                "thermal", "qsl", "transport"};
  std::string cmd = cli_command;
  if (job.contains("command")) {
    const std::string file_cmd = qstforge::detail::require<std::string>(job, "command");
    if (!cmd.empty() && file_cmd != cmd)
      throw schema_error("command", "job file command does not match the CLI subcommand");
    cmd = file_cmd;
  }
  for (const char* k : known)
    if (cmd == k) return k;
  throw schema_error("command", "unknown command");
}

}  // namespace detail

inline Job resolve_job(const Json& spec, const std::string& cli_command,
                       const Overrides& overrides) {
  using qstforge::detail::require;
  using qstforge::detail::value_or;

  if (spec.contains("schema") && spec.at("schema").get<int>() != kSchemaVersion)
    throw schema_error("schema", "unsupported schema version");

  Job job;
  job.command = detail::command_of(spec, cli_command);
  job.seed = overrides.seed.value_or(value_or<std::uint64_t>(spec, "seed", 1));
  job.threads = overrides.threads.value_or(value_or<int>(spec, "threads", 0));
  job.quiet = overrides.quiet;
  job.output_dir = overrides.out_dir.value_or(value_or<std::string>(spec, "output_dir", "."));

  if (spec.contains("lattice")) {
    job.lattice = lattice_from_json(spec.at("lattice"));
  } else if (job.command != "thermal") {
    throw schema_error("lattice", "missing required field");
  }

  job.j_mhz = value_or<double>(spec, "j_mhz", -2.0);
  if (job.j_mhz == 0.0) throw schema_error("j_mhz", "coupling scale must be nonzero");
  job.cross_mhz = value_or<double>(spec, "cross_mhz", 0.0);
  const std::string sym = value_or<std::string>(spec, "symmetry", "inversion");
  if (sym != "inversion" && sym != "free")
    throw schema_error("symmetry", "expected \"inversion\" or \"free\"");
  job.symmetry = sym == "inversion" ? CouplingSymmetry::inversion : CouplingSymmetry::free;

  if (spec.contains("couplings")) {
    const Json& c = spec.at("couplings");
    if (c.is_string()) {
      if (c.get<std::string>() != "protocol:standard")
        throw schema_error("couplings", "expected a config object or \"protocol:standard\"");
      job.protocol_standard = true;
    } else {
      job.couplings = couplings_from_json(job.lattice, c);
    }
  }

  if (spec.contains("initial"))
    job.initial = detail::parse_state(spec.at("initial"), job.lattice, "initial");
  if (spec.contains("target"))
    job.target = detail::parse_state(spec.at("target"), job.lattice, "target");

  job.t_qst_ns = value_or<double>(spec, "t_qst_ns", 0.0);
  if (spec.contains("times")) {
    const Json& t = spec.at("times");
    job.t_max_ns = value_or<double>(t, "t_max_ns", 0.0);
    job.n_points = value_or<int>(t, "n_points", 201);
    if (job.t_max_ns <= 0.0) throw schema_error("times.t_max_ns", "must be positive");
    if (job.n_points < 2) throw schema_error("times.n_points", "need at least two samples");
  }

  job.schedule = schedule_from_json(value_or<Json>(spec, "schedule", Json::object()), job.seed);
  if (!spec.contains("schedule") || !spec.at("schedule").contains("replicas"))
    job.schedule.replicas = 5;

  job.n_excitations = value_or<int>(spec, "n_excitations",
                                    job.initial ? job.initial->n_excitations() : 2);
  if (spec.contains("ensemble")) {
    const Json& e = spec.at("ensemble");
    job.ensemble_count = require<int>(e, "count");
    if (*job.ensemble_count < 1) throw schema_error("ensemble.count", "must be >= 1");
    if (e.contains("bounds_mhz")) {
      const Json& b = e.at("bounds_mhz");
      if (!b.is_array() || b.size() != 2)
        throw schema_error("ensemble.bounds_mhz", "expected [j_min, j_max]");
      job.ensemble_j_min = b[0].get<double>();
      job.ensemble_j_max = b[1].get<double>();
      if (!(job.ensemble_j_min < job.ensemble_j_max))
        throw schema_error("ensemble.bounds_mhz", "requires j_min < j_max");
    }
  }
  job.resolve_sectors = value_or<bool>(spec, "sectors", true);

  if (spec.contains("spread_fit_ns")) {
    const Json& w = spec.at("spread_fit_ns");
    if (!w.is_array() || w.size() != 2)
      throw schema_error("spread_fit_ns", "expected [t_lo_ns, t_hi_ns]");
    job.spread_fit_ns = {w[0].get<double>(), w[1].get<double>()};
  }

  if (spec.contains("noise")) {
    const Json& n = spec.at("noise");
    const std::string kind = value_or<std::string>(n, "kind", "coupling");
    if (kind == "coupling") {
      job.noise_kind = NoiseKind::coupling;
    } else if (kind == "frequency") {
      job.noise_kind = NoiseKind::frequency;
    } else {
      throw schema_error("noise.kind", "expected \"coupling\" or \"frequency\"");
    }
    job.noise_sigmas = require<std::vector<double>>(n, "sigmas");
    job.noise_instances = value_or<int>(n, "n_instances", 200);
  }

  if (spec.contains("thermal")) {
    const Json& t = spec.at("thermal");
    if (t.contains("sizes")) {
      job.thermal_sizes.clear();
      for (const auto& s : t.at("sizes")) {
        if (!s.is_array() || s.size() != 2)
          throw schema_error("thermal.sizes", "expected [n1, n2] pairs");
        job.thermal_sizes.emplace_back(s[0].get<int>(), s[1].get<int>());
      }
    }
    job.thermal_gammas = value_or<std::vector<double>>(t, "gammas", job.thermal_gammas);
    job.thermal_realizations = value_or<int>(t, "n_realizations", 25);
    job.extrapolate_sites = value_or<int>(t, "extrapolate_sites", 36);
    const std::string proto = value_or<std::string>(t, "protocol", "single");
    if (proto == "single") {
      job.thermal_protocol = ThermalProtocol::single_excitation;
    } else if (proto == "bell") {
      job.thermal_protocol = ThermalProtocol::bell;
    } else if (proto == "two") {
      job.thermal_protocol = ThermalProtocol::two_excitation;
    } else {
      throw schema_error("thermal.protocol", "expected \"single\", \"bell\" or \"two\"");
    }
  }

  // Manifest: the job with every default made explicit.
  Json m;
  m["schema"] = kSchemaVersion;
  m["command"] = job.command;
  m["seed"] = job.seed;
  m["threads"] = job.threads;
  m["output_dir"] = job.output_dir.string();
  if (spec.contains("lattice")) m["lattice"] = lattice_to_json(job.lattice);
  m["j_mhz"] = job.j_mhz;
  m["cross_mhz"] = job.cross_mhz;
  m["symmetry"] = job.symmetry == CouplingSymmetry::inversion ? "inversion" : "free";
  if (job.protocol_standard)
    m["couplings"] = "protocol:standard";
  else if (job.couplings)
    m["couplings"] = couplings_to_json(job.lattice, *job.couplings);
  if (job.initial) m["initial"] = detail::state_to_json(*job.initial);
  if (job.target) m["target"] = detail::state_to_json(*job.target);
  if (job.t_qst_ns > 0.0) m["t_qst_ns"] = job.t_qst_ns;
  if (job.t_max_ns > 0.0)
    m["times"] = Json{{"t_max_ns", job.t_max_ns}, {"n_points", job.n_points}};
  if (job.command == "anneal") m["schedule"] = schedule_to_json(job.schedule);
  if (job.command == "spectrum") {
    m["n_excitations"] = job.n_excitations;
    m["sectors"] = job.resolve_sectors;
    if (job.ensemble_count)
      m["ensemble"] = Json{{"count", *job.ensemble_count},
                           {"bounds_mhz", Json::array({job.ensemble_j_min, job.ensemble_j_max})}};
  }
  if (job.command == "transport" && job.spread_fit_ns)
    m["spread_fit_ns"] = Json::array({job.spread_fit_ns->first, job.spread_fit_ns->second});
  if (job.command == "noise")
    m["noise"] = Json{{"kind", job.noise_kind == NoiseKind::coupling ? "coupling" : "frequency"},
                      {"sigmas", job.noise_sigmas},
                      {"n_instances", job.noise_instances}};
  if (job.command == "thermal") {
    Json sizes = Json::array();
    for (auto [a, b] : job.thermal_sizes) sizes.push_back(Json::array({a, b}));
    const char* proto = job.thermal_protocol == ThermalProtocol::single_excitation ? "single"
                        : job.thermal_protocol == ThermalProtocol::bell            ? "bell"
                                                                                   : "two";
    m["thermal"] = Json{{"sizes", sizes},
                        {"gammas", job.thermal_gammas},
                        {"n_realizations", job.thermal_realizations},
                        {"protocol", proto},
                        {"extrapolate_sites", job.extrapolate_sites}};
  }
  job.manifest = std::move(m);
  return job;
}

namespace detail {

inline CouplingConfig resolve_couplings(const Job& job) {
  if (job.couplings) return *job.couplings;
  if (job.protocol_standard) {
    if (job.lattice.n2() == 1) {
      CouplingConfig config(job.lattice, CouplingSymmetry::inversion);
      const auto js = standard_protocol(job.lattice.n1(), job.j_mhz);
      for (std::size_t b = 0; b < job.lattice.bonds().size(); ++b) {
        const Bond& bond = job.lattice.bonds()[b];
        if (!bond.fixed)
          config.set_value(b, js[static_cast<std::size_t>(bond.a.x) - 1]);
      }
      return config;
    }
    CouplingConfig config = product_protocol(job.lattice, job.j_mhz);
    set_cross_couplings(job.lattice, config, job.cross_mhz);
    return config;
  }
  throw schema_error("couplings", "this command needs couplings or \"protocol:standard\"");
}

inline void require_states(const Job& job, bool need_target) {
  if (!job.initial) throw schema_error("initial", "missing required field");
  if (need_target && !job.target) throw schema_error("target", "missing required field");
  if (need_target && job.target &&
      job.initial->n_excitations() != job.target->n_excitations())
    throw schema_error("target", "initial and target excitation counts differ");
}

inline std::vector<double> time_grid(const Job& job, double fallback_tmax) {
  const double t_max = job.t_max_ns > 0.0 ? job.t_max_ns : fallback_tmax;
  const int n = job.n_points >= 2 ? job.n_points : 201;
  std::vector<double> times(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    times[static_cast<std::size_t>(i)] = t_max * static_cast<double>(i) / (n - 1);
  return times;
}

inline void write_json(const std::filesystem::path& dir, const std::string& name, const Json& j) {
  write_atomic(dir / name, j.dump(2) + "\n");
}

// ---- command implementations ----

inline void cmd_evolve(const Job& job) {
  require_states(job, true);
  auto basis = build_basis(job.lattice.n_sites(), job.initial->n_excitations());
  const CouplingConfig couplings = resolve_couplings(job);
  auto h = build_hamiltonian(job.lattice, couplings, basis);
  const StateVector psi0 = make_state(job.lattice, basis, *job.initial);
  const StateVector target = make_state(job.lattice, basis, *job.target);

  const double fallback = job.t_qst_ns > 0.0 ? 2.0 * job.t_qst_ns : 250.0;
  const auto times = time_grid(job, fallback);
  const bool spins = job.initial->n_excitations() == 1;

  Csv csv;
  std::vector<std::string> cols{"t_ns", "tJ", "overlap", "fidelity"};
  if (spins) for (const char* c : {"S1x", "S1y", "S1z", "S2x", "S2y", "S2z"}) cols.push_back(c);
  csv.header(cols);

  double peak_f = 0.0;
  double peak_t = 0.0;
  for (double t : times) {
    const StateVector psi_t = evolve(h, psi0, t);
    const double overlap = std::abs(psi0.amplitudes.dot(psi_t.amplitudes));
    const double fidelity = std::abs(target.amplitudes.dot(psi_t.amplitudes));
    if (fidelity > peak_f) {
      peak_f = fidelity;
      peak_t = t;
    }
    std::vector<double> row{t, dimensionless_time(t, std::abs(job.j_mhz)), overlap, fidelity};
    if (spins) {
      const auto s = spin_trajectory(psi_t, job.lattice);
      row.insert(row.end(), s.begin(), s.end());
    }
    csv.row(row);
  }
  write_atomic(job.output_dir / "series.csv", csv.out.str());

  Json result{{"schema", kSchemaVersion},
              {"peak_fidelity", peak_f},
              {"peak_population", peak_f * peak_f},
              {"t_peak_ns", peak_t}};
  if (job.t_qst_ns > 0.0) {
    const double f = transfer_fidelity(h, psi0, target, job.t_qst_ns);
    result["fidelity_at_t_qst"] = f;
    result["population_at_t_qst"] = f * f;
  }
  write_json(job.output_dir, "result.json", result);
}

inline void cmd_anneal(const Job& job) {
  require_states(job, true);
  if (job.t_qst_ns <= 0.0) throw schema_error("t_qst_ns", "annealing needs a positive target time");
  auto basis = build_basis(job.lattice.n_sites(), job.initial->n_excitations());
  CouplingConfig base(job.lattice, job.symmetry);
  set_cross_couplings(job.lattice, base, job.cross_mhz);
  const StateVector psi0 = make_state(job.lattice, basis, *job.initial);
  const StateVector target = make_state(job.lattice, basis, *job.target);

  AnnealSchedule schedule = job.schedule;
  if (!job.quiet)
    std::fprintf(stderr, "anneal: %d replicas x %ld steps, %zu free parameters\n",
                 schedule.replicas, schedule.steps,
                 free_parameter_groups(job.lattice, job.symmetry).size());
  const AnnealResult result = run_annealing(job.lattice, base, basis, psi0, target, job.t_qst_ns,
                                            schedule, job.effective_threads());
  if (!job.quiet) {
    const auto& trace = result.best().trace;
    const std::size_t deciles = 10;
    for (std::size_t d = 1; d <= deciles; ++d) {
      const auto& tp = trace[std::min(trace.size() - 1, d * trace.size() / deciles)];
      std::fprintf(stderr, "  step %8ld  T=%.3e  best=%.3e\n", tp.step, tp.temperature,
                   tp.best_infidelity);
    }
  }

  Json replicas = Json::array();
  for (const auto& rep : result.replicas)
    replicas.push_back({{"replica", rep.replica_index},
                        {"best_infidelity", rep.best_infidelity},
                        {"best_fidelity", std::sqrt(std::max(0.0, 1.0 - rep.best_infidelity))},
                        {"accepted", rep.accepted},
                        {"proposed", rep.proposed}});
  Json best{{"replica", result.best_index},
            {"infidelity", result.best().best_infidelity},
            {"fidelity", result.best_fidelity()},
            {"population", 1.0 - result.best().best_infidelity},
            {"couplings", couplings_to_json(job.lattice, result.best().best_couplings)}};
  write_json(job.output_dir, "result.json",
             Json{{"schema", kSchemaVersion},
                  {"best", best},
                  {"replicas", replicas},
                  {"free_parameters",
                   free_parameter_groups(job.lattice, job.symmetry).size()},
                  {"schedule", schedule_to_json(schedule)}});

  Csv trace_csv;
  trace_csv.header({"replica", "step", "temperature", "current_infidelity", "best_infidelity",
                    "accept_ratio"});
  for (const auto& rep : result.replicas)
    for (const auto& tp : rep.trace)
      trace_csv.row({static_cast<double>(rep.replica_index), static_cast<double>(tp.step),
                     tp.temperature, tp.current_infidelity, tp.best_infidelity, tp.accept_ratio});
  write_atomic(job.output_dir / "trace.csv", trace_csv.out.str());
}

inline void cmd_spectrum(const Job& job) {
  auto basis = build_basis(job.lattice.n_sites(), job.n_excitations);
  const auto sectors = parity_sectors(*basis, job.lattice);

  std::vector<std::pair<int, GapRatioStats>> member_stats;  // (member, per-sector stats)
  GapRatioStats pool_even, pool_odd;
  Csv pr_csv;
  pr_csv.header({"sector", "index", "pr", "member"});
  long degenerate = 0;

  const int count = job.ensemble_count.value_or(1);
  for (int member = 0; member < count; ++member) {
    CouplingConfig config(job.lattice, job.symmetry);
    set_cross_couplings(job.lattice, config, job.cross_mhz);
    if (job.ensemble_count) {
      RngStream rng = derive_stream(job.seed, "spectrum-ensemble",
                                    static_cast<std::uint64_t>(member));
      config = random_coupling_config(job.lattice, config, job.ensemble_j_min, job.ensemble_j_max,
                                      rng);
    } else {
      config = resolve_couplings(job);
    }
    auto h = build_hamiltonian(job.lattice, config, basis);
    if (job.resolve_sectors) {
      const auto stats = gap_ratios(h, sectors);
      pool_even.ratios.insert(pool_even.ratios.end(), stats.even.ratios.begin(),
                              stats.even.ratios.end());
      pool_odd.ratios.insert(pool_odd.ratios.end(), stats.odd.ratios.begin(),
                             stats.odd.ratios.end());
      degenerate += stats.combined.degenerate_pairs;
      const auto pr = participation_ratios(h, sectors);
      for (std::size_t i = 0; i < pr.even.size(); ++i)
        pr_csv.mixed_row({"even", std::to_string(i), format_double(pr.even[i]),
                          std::to_string(member)});
      for (std::size_t i = 0; i < pr.odd.size(); ++i)
        pr_csv.mixed_row({"odd", std::to_string(i), format_double(pr.odd[i]),
                          std::to_string(member)});
    } else {
      auto stats = gap_ratios_from_spectrum(h.eigenvalues());
      pool_even.ratios.insert(pool_even.ratios.end(), stats.ratios.begin(), stats.ratios.end());
      degenerate += stats.degenerate_pairs;
      const auto pr = participation_from_vectors(h.eigenvectors());
      for (std::size_t i = 0; i < pr.size(); ++i)
        pr_csv.mixed_row({"combined", std::to_string(i), format_double(pr[i]),
                          std::to_string(member)});
    }
  }

  qstforge::detail::finalize_stats(pool_even);
  qstforge::detail::finalize_stats(pool_odd);
  GapRatioStats pooled;
  pooled.ratios = pool_even.ratios;
  pooled.ratios.insert(pooled.ratios.end(), pool_odd.ratios.begin(), pool_odd.ratios.end());
  qstforge::detail::finalize_stats(pooled);
  pooled.degenerate_pairs = degenerate;

  Csv ratios_csv;
  ratios_csv.header({"sector", "r"});
  for (double r : pool_even.ratios)
    ratios_csv.mixed_row({job.resolve_sectors ? "even" : "combined", format_double(r)});
  for (double r : pool_odd.ratios) ratios_csv.mixed_row({"odd", format_double(r)});
  write_atomic(job.output_dir / "ratios.csv", ratios_csv.out.str());
  write_atomic(job.output_dir / "pr.csv", pr_csv.out.str());

  Json summary{{"schema", kSchemaVersion},
               {"dims", Json{{"even", sectors.dim_even()}, {"odd", sectors.dim_odd()}}},
               {"mean_r", pooled.mean_r},
               {"samples", pooled.count()},
               {"degenerate_pairs", pooled.degenerate_pairs},
               {"surmise_mean",
                Json{{"goe", surmise_mean(SurmiseKind::goe)},
                     {"poisson", surmise_mean(SurmiseKind::poisson)}}},
               {"goe_pr_reference",
                Json{{"even", goe_participation_reference(sectors.dim_even())},
                     {"odd", goe_participation_reference(sectors.dim_odd())}}}};
  if (job.resolve_sectors) {
    summary["mean_r_even"] = pool_even.mean_r;
    summary["mean_r_odd"] = pool_odd.mean_r;
  }
  if (pooled.count() >= 100) {
    const auto dist = classify_ensemble(pooled);
    summary["tv_distance"] = Json{{"goe", dist.to_goe}, {"poisson", dist.to_poisson}};
    summary["closer_to"] = dist.to_goe <= dist.to_poisson ? "goe" : "poisson";
  }
  write_json(job.output_dir, "summary.json", summary);
}

inline void cmd_noise(const Job& job) {
  require_states(job, true);
  if (job.noise_sigmas.empty()) throw schema_error("noise.sigmas", "missing required field");
  if (job.t_qst_ns <= 0.0) throw schema_error("t_qst_ns", "noise sweep needs a target time");
  auto basis = build_basis(job.lattice.n_sites(), job.initial->n_excitations());
  const CouplingConfig couplings = resolve_couplings(job);
  const StateVector psi0 = make_state(job.lattice, basis, *job.initial);
  const StateVector target = make_state(job.lattice, basis, *job.target);
  const NoiseSweepResult result =
      job.noise_kind == NoiseKind::coupling
          ? coupling_noise_sweep(job.lattice, couplings, basis, psi0, target, job.t_qst_ns,
                                 job.noise_sigmas, job.noise_instances, job.seed)
          : frequency_noise_sweep(job.lattice, couplings, basis, psi0, target, job.t_qst_ns,
                                  job.noise_sigmas, job.noise_instances, job.seed);

  Csv csv;
  csv.header({"sigma", "relative_fidelity_mean", "relative_fidelity_stderr"});
  for (std::size_t i = 0; i < result.sigmas.size(); ++i)
    csv.row({result.sigmas[i], result.relative_mean[i], result.relative_stderr[i]});
  write_atomic(job.output_dir / "sweep.csv", csv.out.str());
  write_json(job.output_dir, "summary.json",
             Json{{"schema", kSchemaVersion},
                  {"kind", result.kind == NoiseKind::coupling ? "coupling" : "frequency"},
                  {"n_instances", result.n_instances},
                  {"clean_fidelity", result.clean_fidelity},
                  {"sigmas", result.sigmas},
                  {"relative_fidelity_mean", result.relative_mean},
                  {"relative_fidelity_stderr", result.relative_stderr}});
}

inline void cmd_thermal(const Job& job) {
  const ThermalSweepResult result =
      thermal_sweep(job.thermal_sizes, job.thermal_protocol, job.thermal_gammas,
                    job.thermal_realizations, job.seed, job.j_mhz, job.extrapolate_sites);

  Csv csv;
  csv.header({"gamma", "sites", "infidelity_mean", "infidelity_std"});
  for (std::size_t g = 0; g < result.gammas.size(); ++g)
    for (std::size_t s = 0; s < result.site_counts.size(); ++s)
      csv.row({result.gammas[g], static_cast<double>(result.site_counts[s]),
               result.infidelity_mean[g][s], result.infidelity_std[g][s]});
  write_atomic(job.output_dir / "sweep.csv", csv.out.str());

  Json fits = Json::array();
  for (std::size_t g = 0; g < result.gammas.size(); ++g)
    fits.push_back({{"gamma", result.gammas[g]},
                    {"coefficients", result.fit_coefficients[g]},
                    {"extrapolated_infidelity", result.extrapolated[g]}});
  write_json(job.output_dir, "summary.json",
             Json{{"schema", kSchemaVersion},
                  {"sites", result.site_counts},
                  {"extrapolate_sites", result.extrapolate_sites},
                  {"fits", fits}});
}

inline void cmd_qsl(const Job& job) {
  require_states(job, false);
  auto basis = build_basis(job.lattice.n_sites(), job.initial->n_excitations());
  const CouplingConfig couplings = resolve_couplings(job);
  auto h = build_hamiltonian(job.lattice, couplings, basis);
  const StateVector psi0 = make_state(job.lattice, basis, *job.initial);

  const QslReport report = qsl_report(h, psi0);
  const double fallback = job.t_qst_ns > 0.0 ? job.t_qst_ns : 250.0;
  const auto times = time_grid(job, fallback);
  const auto curve = qsl_bounds_curve(h, psi0, times);

  Csv csv;
  csv.header({"t_ns", "overlap", "mt_bound", "ml_bound"});
  for (const auto& s : curve) csv.row({s.t_ns, s.overlap, s.mt_bound, s.ml_bound});
  write_atomic(job.output_dir / "bounds.csv", csv.out.str());

  Json j{{"schema", kSchemaVersion},
         {"energy_uncertainty_rad_ns", report.energy_uncertainty},
         {"mean_energy_gap_rad_ns", report.mean_energy_gap},
         {"t_de_finite", report.t_de_finite()},
         {"t_e_finite", report.t_e_finite()}};
  if (report.t_de_finite()) j["t_de_ns"] = report.t_de_ns;
  if (report.t_e_finite()) j["t_e_ns"] = report.t_e_ns;
  if (job.t_qst_ns > 0.0) {
    j["t_qst_ns"] = job.t_qst_ns;
    if (report.t_de_finite()) j["t_qst_respects_mt"] = job.t_qst_ns >= report.t_de_ns;
  }
  write_json(job.output_dir, "report.json", j);
}

inline void cmd_transport(const Job& job) {
  require_states(job, false);
  if (job.initial->n_excitations() != 2)
    throw schema_error("initial", "transport needs a two-excitation initial state");
  auto basis = build_basis(job.lattice.n_sites(), 2);
  const CouplingConfig couplings = resolve_couplings(job);
  auto h = build_hamiltonian(job.lattice, couplings, basis);
  const StateVector psi0 = make_state(job.lattice, basis, *job.initial);

  const double fallback = job.t_qst_ns > 0.0 ? 2.0 * job.t_qst_ns : 500.0;
  const auto times = time_grid(job, fallback);
  const TransportSeries series = transport_series(h, psi0, job.lattice, times);

  Csv csv;
  csv.header({"t_ns", "tJ", "mean_distance", "rms_spread"});
  for (std::size_t i = 0; i < series.times_ns.size(); ++i)
    csv.row({series.times_ns[i], dimensionless_time(series.times_ns[i], std::abs(job.j_mhz)),
             series.mean_distance[i], series.rms_spread[i]});
  write_atomic(job.output_dir / "series.csv", csv.out.str());

  Json summary{{"schema", kSchemaVersion},
               {"mean_distance_reference", series.reference_mean},
               {"max_distance", series.max_distance}};
  double peak = 0.0;
  for (double d : series.mean_distance) peak = std::max(peak, d);
  summary["peak_mean_distance"] = peak;
  if (job.spread_fit_ns)
    summary["spread_exponent"] =
        fit_spread_exponent(series, job.spread_fit_ns->first, job.spread_fit_ns->second);
  write_json(job.output_dir, "summary.json", summary);
}

}  // namespace detail

// Runs a resolved job; artifacts land in job.output_dir.
inline void run_job(const Job& job) {
  std::filesystem::create_directories(job.output_dir);
  detail::write_json(job.output_dir, "manifest.json", job.manifest);
  if (job.command == "evolve") return detail::cmd_evolve(job);
  if (job.command == "anneal") return detail::cmd_anneal(job);
  if (job.command == "spectrum") return detail::cmd_spectrum(job);
  if (job.command == "noise") return detail::cmd_noise(job);
  if (job.command == "thermal") return detail::cmd_thermal(job);
  if (job.command == "qsl") return detail::cmd_qsl(job);
  if (job.command == "transport") return detail::cmd_transport(job);
  throw schema_error("command", "unknown command");
}

// Parses, resolves and runs a job file, mapping failures to exit codes and a
// machine-readable error.json in the output directory.
inline int run_job_file(const std::string& job_path, const std::string& cli_command,
                        const Overrides& overrides) {
  std::filesystem::path error_dir = overrides.out_dir.value_or(".");
  auto fail = [&](int code, const std::string& kind, const std::string& field,
                  const std::string& message) {
    Json err{{"error", Json{{"exit", code}, {"kind", kind}, {"message", message}}}};
    if (!field.empty()) err["error"]["field"] = field;
    std::error_code ec;
    std::filesystem::create_directories(error_dir, ec);
    if (!ec) {
      try {
        write_atomic(error_dir / "error.json", err.dump(2) + "\n");
      } catch (...) {
      }
    }
    if (!overrides.quiet) std::fprintf(stderr, "error: %s\n", message.c_str());
    return code;
  };

  Json spec;
  try {
    std::ifstream in(job_path);
    if (!in) return fail(exit_schema, "schema", "", "cannot open job file " + job_path);
    spec = Json::parse(in);
  } catch (const Json::parse_error& e) {
    return fail(exit_schema, "schema", "$", e.what());
  }

  try {
    Job job = resolve_job(spec, cli_command, overrides);
    error_dir = job.output_dir;
    run_job(job);
    return exit_ok;
  } catch (const schema_error& e) {
    return fail(exit_schema, "schema", e.field, e.what());
  } catch (const resource_limit_error& e) {
    return fail(exit_resource, "resource-limit", "", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(exit_schema, "schema", "", e.what());
  } catch (const Json::exception& e) {
    return fail(exit_schema, "schema", "", e.what());
  } catch (const std::exception& e) {
    return fail(exit_numerical, "numerical", "", e.what());
  }
}

}  // namespace qstforge::cli
