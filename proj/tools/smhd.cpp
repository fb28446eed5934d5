// smhd: ensembles, limit studies, noise validation and the self-test battery.
//
// Exit codes: 0 success, 1 runtime failure or failed checks, 2 invalid configuration.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "smhd/error.hpp"
#include "smhd/montecarlo.hpp"
#include "smhd/noise.hpp"
#include "smhd/selftest.hpp"

namespace {

using namespace smhd;

struct Common {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::string> seed, out, paths, dt, n, eps, delta, dim, threads;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "key = value configuration file");
    app->add_option("--set", set, "extra key=value setting (repeatable)");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--paths", paths, "ensemble size");
    app->add_option("--dt", dt, "time step");
    app->add_option("--n", n, "Galerkin modes per axis");
    app->add_option("--eps", eps, "artificial viscosity");
    app->add_option("--delta", delta, "artificial pressure coefficient");
    app->add_option("--dim", dim, "spatial dimension (2 or 3)");
    app->add_option("--threads", threads, "worker threads (0: all cores)");
  }

  RunConfig build() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_config(config);
    const std::pair<const char*, const std::optional<std::string>*> flags[] = {
        {"seed", &seed}, {"out", &out},   {"paths", &paths},   {"dt", &dt},   {"n_per_axis", &n},
        {"eps", &eps},   {"delta", &delta}, {"dim", &dim}, {"threads", &threads}};
    for (const auto& [key, val] : flags)
      if (*val) apply_setting(cfg, key, **val);
    for (const auto& kv : set) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void ensure_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

int cmd_simulate(const Common& c) {
  RunConfig cfg = c.build();
  ensure_dir(cfg.out_dir);
  const EnsembleResult res = run_ensemble(cfg);
  const nlohmann::json j = nlohmann::json::parse(res.report.json());
  bool all = res.report.ok;
  for (const auto& t : j["tests"]) {
    all = all && t["pass"].get<bool>();
    if (!t["pass"].get<bool>()) std::cerr << "failed: " << t["name"].get<std::string>() << "\n";
  }
  std::cout << "paths " << res.report.paths << ", aborted " << res.report.aborted
            << ", sup energy " << res.report.sup_energy.mean << " +- "
            << res.report.sup_energy.se << "\nwrote " << cfg.out_dir << "/report.json and "
            << cfg.out_dir << "/timeseries.csv\n";
  return all ? 0 : 1;
}

int cmd_study(const Common& c, const std::string& kind) {
  RunConfig cfg = c.build();
  ensure_dir(cfg.out_dir);
  std::vector<StudyKind> kinds;
  if (kind == "n" || kind == "all") kinds.push_back(StudyKind::N);
  if (kind == "eps" || kind == "all") kinds.push_back(StudyKind::Eps);
  if (kind == "delta" || kind == "all") kinds.push_back(StudyKind::Delta);
  const std::string path = cfg.out_dir + "/study.csv";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  bool all = true;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const StudyTable table = convergence_study(cfg, kinds[i]);
    table.write_csv(out, i == 0);
    const bool pass = table.pass();
    all = all && pass;
    std::cout << study_name(kinds[i]) << "-study: " << (pass ? "PASS" : "FAIL")
              << " (distances decreasing: " << (table.distances_decreasing() ? "yes" : "no")
              << ")\n";
  }
  std::cout << "wrote " << path << "\n";
  return all ? 0 : 1;
}

/// Densities over several decades, random momenta and fields.
std::vector<GrowthSample> growth_sweep(const RunConfig& cfg) {
  const Domain& d = cfg.domain;
  const int cells = d.num_cells();
  std::mt19937_64 rng(cfg.master_seed);
  std::normal_distribution<double> normal;
  std::vector<GrowthSample> out;
  for (int s = 0; s < 16; ++s) {
    const double scale = std::pow(10.0, -2.0 + 4.0 * s / 15.0);
    GrowthSample g;
    g.rho.resize(cells);
    for (int i = 0; i < cells; ++i) g.rho[i] = scale * std::exp(0.5 * normal(rng));
    g.m.assign(d.dim, GridField(cells));
    g.B.assign(d.dim, GridField(cells));
    for (int a = 0; a < d.dim; ++a)
      for (int i = 0; i < cells; ++i) {
        g.m[a][i] = scale * normal(rng);
        g.B[a][i] = scale * normal(rng);
      }
    out.push_back(std::move(g));
  }
  return out;
}

int cmd_validate_noise(const Common& c) {
  RunConfig cfg = c.build();
  const NoiseModel model(cfg.domain, cfg.noise, cfg.params.gamma);
  const GrowthReport r = validate_growth(model, growth_sweep(cfg));
  const nlohmann::json j = {{"C_f1", r.C_f1},         {"C_df1", r.C_df1},
                            {"C_f2", r.C_f2},         {"C_g", r.C_g},
                            {"C_dg", r.C_dg},         {"bound_f1", r.bound_f1},
                            {"bound_f2", r.bound_f2}, {"bound_g", r.bound_g},
                            {"spread", r.spread},     {"hs_tail", r.hs_tail},
                            {"pass", r.pass}};
  std::cout << j.dump(2) << "\n";
  return r.pass ? 0 : 1;
}

int cmd_selftest(const Common& c, const std::vector<int>& only) {
  RunConfig cfg = c.build();
  SelftestOptions opts;
  opts.seed = cfg.master_seed;
  opts.paths = cfg.ensemble_size;
  opts.threads = cfg.threads;
  opts.only = only;
  const auto results = run_selftest(opts, [](const CriterionResult& r) {
    std::cout << format_result(r) << std::endl;
  });
  ensure_dir(cfg.out_dir);
  std::ofstream(cfg.out_dir + "/selftest.json") << results_json(results) << "\n";
  bool all = true;
  for (const auto& r : results) all = all && r.pass;
  std::cout << (all ? "selftest: all criteria passed" : "selftest: some criteria failed") << "\n";
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic compressible MHD: Galerkin ensembles and diagnostics"};
  app.require_subcommand(1);

  Common sim, study, noise, self;
  auto* s_sim = app.add_subcommand("simulate", "run one ensemble; writes report.json, timeseries.csv");
  sim.add_to(s_sim);
  auto* s_study = app.add_subcommand("study", "limit studies; writes study.csv");
  study.add_to(s_study);
  std::string kind = "all";
  s_study->add_option("--kind", kind, "n, eps, delta or all")
      ->check(CLI::IsMember({"n", "eps", "delta", "all"}));
  auto* s_noise = app.add_subcommand("validate-noise", "growth constants of the noise families");
  noise.add_to(s_noise);
  auto* s_self = app.add_subcommand("selftest", "invariant battery; writes selftest.json");
  self.add_to(s_self);
  std::vector<int> only;
  s_self->add_option("--only", only, "criterion ids to run");
  auto* s_keys = app.add_subcommand("config-keys", "list configuration keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (s_sim->parsed()) return cmd_simulate(sim);
    if (s_study->parsed()) return cmd_study(study, kind);
    if (s_noise->parsed()) return cmd_validate_noise(noise);
    if (s_self->parsed()) return cmd_selftest(self, only);
    if (s_keys->parsed()) {
      for (const auto& [k, help] : config_keys()) std::cout << k << "\t" << help << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
