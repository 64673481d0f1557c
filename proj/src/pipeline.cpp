#include "stokeshom/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "stokeshom/cutoff.hpp"
#include "stokeshom/effective.hpp"
#include "stokeshom/errors.hpp"
#include "stokeshom/homogenize.hpp"

namespace stokeshom {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"gen", "gaps", "cutoff-verify", "cell", "effective", "homogenize"};
  return names;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int worker_threads() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("STOKESHOM_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

void write_particles_csv(const std::string& path, const ParticleConfig& config) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::InvalidParameter, "cannot open " + path);
  out << "n";
  for (int k = 1; k <= config.dim; ++k) out << ",x_" << k;
  out << ",radius\n";
  for (std::size_t n = 0; n < config.size(); ++n) {
    out << n;
    for (int k = 0; k < config.dim; ++k) out << "," << format_double(config.particles[n].center[k]);
    out << "," << format_double(config.particles[n].radius) << "\n";
  }
}

ParticleConfig read_particles_csv(const std::string& path, int dim, double box, double delta) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidParameter, "cannot read particle file " + path);
  ParticleConfig c;
  c.dim = dim;
  c.box = box;
  c.delta = delta;
  c.periodic = true;
  std::string line;
  std::getline(in, line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidParameter, path + " line " + std::to_string(row) + ": bad number");
      }
    }
    if (vals.size() != static_cast<std::size_t>(dim) + 2)
      throw Error(ErrorKind::InvalidParameter, path + " line " + std::to_string(row) + ": expected " +
                                                   std::to_string(dim + 2) + " columns");
    Eigen::VectorXd x(dim);
    for (int k = 0; k < dim; ++k) x[k] = vals[static_cast<std::size_t>(k) + 1];
    c.particles.push_back({x, vals.back()});
  }
  validate_config(c);
  return c;
}

RunConfig resolve_config(const RunSpec& spec) {
  std::string text = "{}";
  if (!spec.config_path.empty()) {
    std::ifstream in(spec.config_path);
    if (!in) throw ConfigError({"config: cannot read " + spec.config_path});
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) text = "{}";
  }
  // overrides are merged before validation so they are checked like file input
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error&) {
    validate_config_text(text);  // reports the parse error with its line
  }
  if (j.is_object()) {
    if (spec.seeds) j["seeds"] = *spec.seeds;
    if (spec.grid) j["grid"] = *spec.grid;
    if (spec.kappa_ladder) j["kappa"] = *spec.kappa_ladder;
    if (spec.eps_ladder) j["eps"] = *spec.eps_ladder;
    if (spec.dim) j["dim"] = *spec.dim;
    text = j.dump();
  }
  return validate_config_text(text);
}

namespace {

std::string utc_now() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

ojson matrix_json(const Eigen::MatrixXd& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson row = ojson::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

ojson vector_json(const Eigen::VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

class Runner {
 public:
  Runner(const RunSpec& spec, RunConfig cfg) : spec_(spec), cfg_(std::move(cfg)), out_(spec.out_dir) {
    man_.subcommand = spec.subcommand;
    man_.parameters = emit_config(cfg_);
    man_.input_hash = fnv1a(man_.parameters);
    man_.threads = worker_threads();
    man_.started_at = utc_now();
  }

  RunResult go() {
    const std::string& s = spec_.subcommand;
    if (s == "gen") gen();
    else if (s == "gaps") gaps();
    else if (s == "cutoff-verify") cutoff();
    else if (s == "cell") cell();
    else if (s == "effective") effective();
    else if (s == "homogenize") homogenize();
    man_.finished_at = utc_now();
    write_manifest();
    RunResult r;
    r.manifest = man_;
    r.exit_code = 0;
    for (const auto& st : man_.steps)
      if (!st.ok) r.exit_code = 1;
    return r;
  }

 private:
  std::string path(const std::string& name) {
    man_.artifacts.push_back(name);
    return (out_ / name).string();
  }

  void text_file(const std::string& name, const std::string& body) {
    std::ofstream out(path(name));
    out << body;
  }

  template <class F>
  void step(const std::string& name, F&& body) {
    try {
      body();
      man_.steps.push_back({name, true, ""});
    } catch (const std::exception& e) {
      man_.steps.push_back({name, false, std::string(to_string(ErrorKind::StepFailed)) + ": " + name + ": " + e.what()});
    }
  }

  ParticleConfig particles_for(std::uint64_t seed) {
    if (!cfg_.particles.empty()) return read_particles_csv(cfg_.particles, cfg_.dim, cfg_.box, cfg_.delta);
    EnsembleSpec e = cfg_.ensemble();
    RsaOptions ro;
    ro.delta = e.delta;
    ro.max_attempts = e.max_attempts;
    return generate_rsa(seed, e.dim, e.box, e.target, e.radius, e.min_gap, ro);
  }

  GapSampling sampling() const {
    GapSampling g;
    g.boundary_points = cfg_.boundary_points;
    g.bisection_steps = cfg_.bisection_steps;
    return g;
  }

  void gen() {
    for (auto seed : cfg_.seeds)
      step("gen seed " + std::to_string(seed), [&] {
        ParticleConfig c = particles_for(seed);
        write_particles_csv(path("particles_seed" + std::to_string(seed) + ".csv"), c);
      });
  }

  void gaps() {
    for (auto seed : cfg_.seeds)
      step("gaps seed " + std::to_string(seed), [&] {
        ParticleConfig c = particles_for(seed);
        auto recs = gap_records(c, sampling());
        std::ofstream out(path("gaps_seed" + std::to_string(seed) + ".csv"));
        out << "n,rho_circ,rho_refined,nearest\n";
        for (const auto& r : recs)
          out << r.index << "," << format_double(r.rho_circ) << "," << format_double(r.rho_refined) << ","
              << r.nearest << "\n";
      });
  }

  void cutoff() {
    std::vector<ScalingReport> all;
    for (const auto& k : cfg_.cutoff_kinds)
      step("cutoff " + k, [&] {
        auto reps = exponent_regression(cfg_.cutoff_dims, cfg_.cutoff_rs, norm_kind_from_string(k), cfg_.rho_grid,
                                        cfg_.cutoff_a, cfg_.cutoff_resolution);
        all.insert(all.end(), reps.begin(), reps.end());
      });
    std::ofstream csv(path("scaling.csv"));
    csv << "d,r,kind,rho,norm\n";
    ojson doc = ojson::array();
    for (const auto& r : all) {
      for (std::size_t i = 0; i < r.rho.size(); ++i)
        csv << r.dim << "," << format_double(r.r) << "," << to_string(r.kind) << "," << format_double(r.rho[i]) << ","
            << format_double(r.norm[i]) << "\n";
      ojson e;
      e["d"] = r.dim;
      e["r"] = r.r;
      e["kind"] = to_string(r.kind);
      e["fitted_slope"] = r.fitted_slope;
      e["predicted_slope"] = r.predicted_slope;
      e["abs_error"] = r.abs_error;
      e["critical"] = r.critical;
      e["log_fit_r2"] = r.log_fit_r2;
      e["under_resolved"] = r.under_resolved;
      doc.push_back(e);
    }
    text_file("scaling.json", doc.dump(2) + "\n");
  }

  void cell() {
    for (auto seed : cfg_.seeds)
      step("cell seed " + std::to_string(seed), [&] {
        if (std::find(cfg_.fail_seeds.begin(), cfg_.fail_seeds.end(), seed) != cfg_.fail_seeds.end())
          throw NoConvergenceError("injected solver failure", 0, 1.0);
        ParticleConfig c = particles_for(seed);
        Grid g{cfg_.dim, cfg_.grid, cfg_.box, BoundaryKind::Periodic};
        Eigen::ArrayXd chi = rasterize(c, g);
        const std::string tag = "cell_seed" + std::to_string(seed);
        ojson doc;
        doc["seed"] = seed;
        doc["lambda"] = c.volume_fraction();
        doc["grid"] = cfg_.grid;
        ojson levels = ojson::array();
        for (std::size_t i = 0; i < cfg_.kappa.size(); ++i) {
          ViscosityField mu = make_viscosity(g, chi, cfg_.kappa[i]);
          auto sols = solve_basis(c, mu, cfg_.solver());
          auto ev = effective_viscosity(sols, mu, c.volume_fraction());
          auto eb = effective_b(sols, c, mu);
          ojson lv;
          lv["kappa"] = cfg_.kappa[i];
          lv["B_energy"] = matrix_json(ev.energy.B);
          lv["B_flux"] = matrix_json(ev.flux.B);
          lv["b_pressure"] = vector_json(eb.pressure.components);
          lv["b_boundary"] = vector_json(eb.boundary.components);
          ojson res = ojson::array(), rig = ojson::array(), its = ojson::array();
          for (const auto& s : sols) {
            res.push_back(s.state.res_mom);
            rig.push_back(rigidity_rms(mu, s.state, s.E));
            its.push_back(s.state.iterations);
          }
          lv["residuals"] = res;
          lv["rigidity_rms"] = rig;
          lv["iterations"] = its;
          levels.push_back(lv);
          if (i + 1 == cfg_.kappa.size()) {
            for (std::size_t e = 0; e < sols.size(); ++e) {
              const std::string base = tag + "_E" + std::to_string(e);
              for (int k = 0; k < cfg_.dim; ++k) {
                const std::string name = base + "_u" + std::to_string(k) + ".f64";
                write_field(path(name), g, "psi_" + std::to_string(k), sols[e].state.u[static_cast<std::size_t>(k)],
                            "face_" + std::to_string(k));
                man_.artifacts.push_back(name + ".json");
              }
              write_field(path(base + "_p.f64"), g, "Sigma", sols[e].state.p, "cell");
              man_.artifacts.push_back(base + "_p.f64.json");
            }
          }
        }
        doc["levels"] = levels;
        text_file(tag + ".json", doc.dump(2) + "\n");
      });
  }

  void effective() {
    MonteCarloOptions opts;
    opts.grid_n = cfg_.grid;
    opts.kappas = cfg_.kappa;
    opts.params = cfg_.solver();
    opts.fail_seeds = cfg_.fail_seeds;
    opts.threads = man_.threads;
    MonteCarloSummary sum;
    step("monte_carlo", [&] { sum = monte_carlo(cfg_.ensemble(), cfg_.seeds, opts); });
    for (const auto& f : sum.failures)
      man_.steps.push_back({"effective seed " + std::to_string(f.seed), false,
                            std::string(to_string(ErrorKind::StepFailed)) + ": " + f.step + ": " + f.message});
    for (const auto& r : sum.results) {
      man_.steps.push_back({"effective seed " + std::to_string(r.seed), true, ""});
      ojson doc;
      doc["seed"] = r.seed;
      doc["kappa"] = r.kappas.size() >= 3 ? ojson("inf") : ojson(r.kappas.back());
      doc["lambda"] = r.lambda;
      doc["B_matrix"] = matrix_json(r.B_extrapolated);
      doc["b_vector"] = vector_json(r.b_extrapolated);
      doc["estimator"] = "energy/pressure_average";
      doc["residuals"] = r.residuals;
      doc["non_monotone"] = r.non_monotone;
      ojson levels = ojson::array();
      for (std::size_t i = 0; i < r.kappas.size(); ++i) {
        ojson lv;
        lv["kappa"] = r.kappas[i];
        lv["B_energy"] = matrix_json(r.tensors[i].energy.B);
        lv["B_flux"] = matrix_json(r.tensors[i].flux.B);
        lv["b_pressure"] = vector_json(r.constants[i].pressure.components);
        lv["b_boundary"] = vector_json(r.constants[i].boundary.components);
        levels.push_back(lv);
      }
      doc["levels"] = levels;
      text_file("effective_seed" + std::to_string(r.seed) + ".json", doc.dump(2) + "\n");
    }
    if (sum.results.empty()) return;
    const auto m = sum.B_mean.rows();
    std::ofstream csv(path("effective.csv"));
    csv << "seed,lambda";
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) csv << ",B_" << a << b;
    for (Eigen::Index a = 0; a < m; ++a) csv << ",b_" << a;
    csv << ",non_monotone\n";
    for (const auto& r : sum.results) {
      csv << r.seed << "," << format_double(r.lambda);
      for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) csv << "," << format_double(r.B_extrapolated(a, b));
      for (Eigen::Index a = 0; a < m; ++a) csv << "," << format_double(r.b_extrapolated[a]);
      csv << "," << (r.non_monotone ? 1 : 0) << "\n";
    }
    ojson s;
    s["samples"] = sum.results.size();
    s["failures"] = sum.failures.size();
    s["lambda_mean"] = sum.lambda_mean;
    s["B_mean"] = matrix_json(sum.B_mean);
    s["B_stderr"] = matrix_json(sum.B_stderr);
    s["b_mean"] = vector_json(sum.b_mean);
    s["b_stderr"] = vector_json(sum.b_stderr);
    s["stderr_defined"] = sum.stderr_defined;
    s["anisotropy"] = sum.anisotropy;
    text_file("effective_summary.json", s.dump(2) + "\n");
  }

  void homogenize() {
    step("homogenize", [&] {
      if (cfg_.dim != 2) throw Error(ErrorKind::InvalidParameter, "homogenize runs in d = 2 only");
      EpsExperiment ex;
      ex.master = particles_for(cfg_.seeds.front());
      ex.eps = cfg_.eps;
      ex.cell_n = cfg_.cell_grid;
      ex.kappa = cfg_.hom_kappa;
      ex.f = swirl_force(cfg_.force_amplitude);
      ex.params = cfg_.solver();
      ex.q = cfg_.pressure_q;
      ex.moment = cfg_.moment;
      ex.threads = man_.threads;
      HomReport rep = convergence_table(ex);
      std::ofstream csv(path("hom_report.csv"));
      csv << "eps,h,err_L2,err_H1_naive,err_H1_corrected,err_pressure,moment_stat\n";
      for (const auto& r : rep.rows)
        csv << format_double(r.eps) << "," << format_double(r.h) << "," << format_double(r.err_L2) << ","
            << format_double(r.err_H1_naive) << "," << format_double(r.err_H1_corrected) << ","
            << format_double(r.err_pressure) << "," << format_double(r.moment_stat) << "\n";
      ojson doc;
      doc["lambda"] = rep.cell.lambda;
      doc["kappa"] = cfg_.hom_kappa;
      doc["B_matrix"] = matrix_json(rep.cell.Bbar);
      doc["b_vector"] = vector_json(rep.cell.bbar);
      ojson rows = ojson::array();
      for (const auto& r : rep.rows) {
        ojson e;
        e["eps"] = r.eps;
        e["selected"] = r.selected;
        e["moment_zero_gap"] = r.moment_zero_gap;
        e["err_pressure_c0"] = r.err_pressure_c0;
        e["ubar_H1"] = r.ubar_H1;
        rows.push_back(e);
      }
      doc["rows"] = rows;
      text_file("hom_cell.json", doc.dump(2) + "\n");
      if (!rep.failures.empty()) {
        std::string msg;
        for (const auto& f : rep.failures) msg += (msg.empty() ? "" : "; ") + f;
        throw Error(ErrorKind::StepFailed, msg);
      }
    });
  }

  void write_manifest() {
    ojson m;
    m["toolkit_version"] = man_.version;
    m["subcommand"] = man_.subcommand;
    m["input_hash"] = man_.input_hash;
    m["parameters"] = ojson::parse(man_.parameters);
    m["threads"] = man_.threads;
    ojson steps = ojson::array();
    for (const auto& s : man_.steps) steps.push_back({{"name", s.name}, {"status", s.ok ? "ok" : "failed"}, {"message", s.message}});
    m["steps"] = steps;
    man_.artifacts.push_back("manifest.json");
    m["artifacts"] = man_.artifacts;
    m["started_at"] = man_.started_at;
    m["finished_at"] = man_.finished_at;
    std::ofstream((out_ / "manifest.json").string()) << m.dump(2) << "\n";
  }

  RunSpec spec_;
  RunConfig cfg_;
  fs::path out_;
  Manifest man_;
};

}  // namespace

RunResult run(const RunSpec& spec) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), spec.subcommand) == names.end())
    throw ConfigError({"subcommand: unknown '" + spec.subcommand + "'"});
  RunConfig cfg = resolve_config(spec);
  std::error_code ec;
  fs::create_directories(spec.out_dir, ec);
  const fs::path probe = fs::path(spec.out_dir) / ".write_test";
  {
    std::ofstream t(probe);
    if (!t) throw ConfigError({"out: directory '" + spec.out_dir + "' is not writable"});
  }
  fs::remove(probe, ec);
  return Runner(spec, std::move(cfg)).go();
}

}  // namespace stokeshom
