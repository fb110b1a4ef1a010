// Command-line front end for the footstep sequencer library.
//
//   stepseq plan         chain single-step solves over a horizon
//   stepseq sensitivity  differentiate one solve and sweep the surface
//   stepseq simulate     closed-loop walking with pushes, slips, noise
//
// Exit codes: 0 success, 2 configuration or usage error, 3 solver error,
// 4 simulation stopped by an infeasible replan.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stepseq/stepseq.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitPlanFailed = 4;

void write_steps_csv(const fs::path& path, const stepseq::StepSequence& seq) {
  stepseq::CsvWriter csv(path.string(),
                         {"k", "side", "p_x", "p_y", "T", "gamma", "b_x", "b_y"});
  for (std::size_t k = 0; k < seq.steps.size(); ++k) {
    const stepseq::Step& s = seq.steps[k];
    csv.row({std::to_string(k), stepseq::to_string(s.side), stepseq::fmt17(s.p_T.x()),
             stepseq::fmt17(s.p_T.y()), stepseq::fmt17(s.T), stepseq::fmt17(s.gamma),
             stepseq::fmt17(s.b_T.x()), stepseq::fmt17(s.b_T.y())});
  }
}

int cmd_plan(const stepseq::Config& cfg) {
  const auto seq = stepseq::generate_sequence(cfg.sequencer, cfg.context, cfg.horizon);

  fs::create_directories(cfg.out_dir);
  write_steps_csv(fs::path(cfg.out_dir) / "steps.csv", seq);

  stepseq::CsvWriter chain((fs::path(cfg.out_dir) / "dcm_chain.csv").string(),
                           {"k", "zeta_x", "zeta_y"});
  for (std::size_t k = 0; k < seq.zeta_chain.size(); ++k)
    chain.row({std::to_string(k), stepseq::fmt17(seq.zeta_chain[k].x()),
               stepseq::fmt17(seq.zeta_chain[k].y())});

  const stepseq::Step& last = seq.steps.back();
  const double span = last.T - seq.t0;
  stepseq::Vec2 v = stepseq::Vec2::Zero();
  if (span > 0) v = (last.p_T - cfg.context.p0) / span;
  std::printf("steps: %zu\n", seq.steps.size());
  std::printf("mean velocity: %.6f %.6f m/s\n", v.x(), v.y());
  return kExitOk;
}

int cmd_sensitivity(const stepseq::Config& cfg, bool fd_check) {
  const auto problem = stepseq::build_problem(cfg.sequencer, cfg.context);
  const auto sol = stepseq::solve_step_full(cfg.sequencer, cfg.context);
  const auto sens = stepseq::dcm_sensitivity(problem, sol.qp);

  fs::create_directories(cfg.out_dir);

  ordered_json doc;
  doc["x_star"] = std::vector<double>(sol.qp.x.data(), sol.qp.x.data() + 5);
  doc["objective"] = sol.qp.objective;
  doc["active_set"] = sol.qp.active_set;
  doc["u"] = std::vector<double>(sol.qp.u.data(), sol.qp.u.data() + sol.qp.u.size());
  doc["w"] = std::vector<double>(sol.qp.w.data(), sol.qp.w.data() + sol.qp.w.size());
  doc["kkt_condition_number"] = sens.kkt_condition_number;
  auto matrix_to_json = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      rows.push_back({m(i, 0), m(i, 1)});
    return rows;
  };
  doc["d_primal"] = matrix_to_json(sens.d_primal);
  doc["d_full"] = matrix_to_json(sens.d_full);
  doc["theta_sigma"] = cfg.sensitivity.sigma;
  doc["samples"] = cfg.sensitivity.samples;

  if (fd_check) {
    const auto fd = stepseq::central_difference_sensitivity(cfg.sequencer, cfg.context,
                                                            cfg.sensitivity.fd_delta);
    const double scale = sens.d_primal.cwiseAbs().maxCoeff();
    double max_rel = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 2; ++j) {
        const double denom = std::max(std::abs(sens.d_primal(i, j)), 1e-3 * scale);
        max_rel = std::max(max_rel, std::abs(fd.d(i, j) - sens.d_primal(i, j)) / denom);
      }
    doc["fd_consistent_active_set"] = fd.active_consistent;
    doc["fd_max_rel_deviation"] = max_rel;
    std::printf("fd max rel deviation: %.3e\n", max_rel);
  }

  std::ofstream js(fs::path(cfg.out_dir) / "sensitivity.json");
  js << doc.dump(2) << '\n';

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, cfg.sensitivity.sigma);
  std::vector<stepseq::Vec2> thetas;
  thetas.reserve(cfg.sensitivity.samples);
  for (int i = 0; i < cfg.sensitivity.samples; ++i) {
    const double tx = gauss(rng);
    const double ty = gauss(rng);
    thetas.emplace_back(tx, ty);
  }
  const auto samples = stepseq::solution_surface(cfg.sequencer, cfg.context, thetas);

  stepseq::CsvWriter csv((fs::path(cfg.out_dir) / "surface.csv").string(),
                         {"theta_x", "theta_y", "p_x", "p_y", "gamma", "b_x", "b_y",
                          "solved", "active_match"});
  for (const auto& s : samples)
    csv.row({stepseq::fmt17(s.theta.x()), stepseq::fmt17(s.theta.y()),
             stepseq::fmt17(s.x(0)), stepseq::fmt17(s.x(1)), stepseq::fmt17(s.x(2)),
             stepseq::fmt17(s.x(3)), stepseq::fmt17(s.x(4)),
             s.solved ? "1" : "0", s.active_match ? "1" : "0"});

  std::printf("kkt condition number: %.6e\n", sens.kkt_condition_number);
  return kExitOk;
}

void write_metrics_json(const fs::path& path, const stepseq::RunMetrics& m) {
  ordered_json doc;
  doc["mean_velocity"] = {m.mean_velocity.x(), m.mean_velocity.y()};
  doc["target_velocity"] = {m.target_velocity.x(), m.target_velocity.y()};
  doc["tracking_error"] = {m.tracking_error.x(), m.tracking_error.y()};
  doc["steps_taken"] = m.steps_taken;
  doc["recovery_steps"] = m.recovery_steps ? json(*m.recovery_steps) : json(nullptr);
  doc["rise_time"] = m.rise_time ? json(*m.rise_time) : json(nullptr);
  doc["failed_at"] = m.failed_at ? json(*m.failed_at) : json(nullptr);
  std::ofstream js(path);
  js << doc.dump(2) << '\n';
}

int run_simulation(const stepseq::Config& cfg, bool quiet) {
  const auto res = stepseq::run(cfg.sequencer, cfg.scenario);

  fs::create_directories(cfg.out_dir);
  {
    stepseq::CsvWriter csv((fs::path(cfg.out_dir) / "trace.csv").string(),
                           {"t", "c_x", "c_y", "cdot_x", "cdot_y", "zeta_x", "zeta_y",
                            "zetahat_x", "zetahat_y", "p0_x", "p0_y", "support",
                            "swing_z", "plan_px", "plan_py", "plan_T"});
    for (const auto& r : res.trace)
      csv.row({stepseq::fmt17(r.t), stepseq::fmt17(r.c.x()), stepseq::fmt17(r.c.y()),
               stepseq::fmt17(r.c_dot.x()), stepseq::fmt17(r.c_dot.y()),
               stepseq::fmt17(r.zeta.x()), stepseq::fmt17(r.zeta.y()),
               stepseq::fmt17(r.zeta_hat.x()), stepseq::fmt17(r.zeta_hat.y()),
               stepseq::fmt17(r.p0.x()), stepseq::fmt17(r.p0.y()),
               stepseq::to_string(r.support), stepseq::fmt17(r.swing_z),
               stepseq::fmt17(r.plan_p.x()), stepseq::fmt17(r.plan_p.y()),
               stepseq::fmt17(r.plan_T)});
  }
  write_steps_csv(fs::path(cfg.out_dir) / "steps.csv", res.steps);
  write_metrics_json(fs::path(cfg.out_dir) / "metrics.json", res.metrics);

  if (res.metrics.failed_at) {
    std::fprintf(stderr, "plan failed at t=%.3f s; partial outputs written to %s\n",
                 *res.metrics.failed_at, cfg.out_dir.c_str());
    return kExitPlanFailed;
  }
  if (!quiet) {
    std::printf("steps: %d\n", res.metrics.steps_taken);
    std::printf("mean velocity: %.6f %.6f m/s\n", res.metrics.mean_velocity.x(),
                res.metrics.mean_velocity.y());
    std::printf("tracking error: %.6f %.6f m/s\n", res.metrics.tracking_error.x(),
                res.metrics.tracking_error.y());
  }
  return kExitOk;
}

int cmd_simulate(const json& base_doc, const stepseq::Config& cfg,
                 const std::string& sweep_path) {
  if (sweep_path.empty()) return run_simulation(cfg, false);

  std::ifstream is(sweep_path);
  if (!is) {
    std::fprintf(stderr, "error: cannot open sweep file %s\n", sweep_path.c_str());
    return kExitConfig;
  }
  json entries;
  try {
    entries = json::parse(is);
  } catch (const json::parse_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  if (!entries.is_array()) {
    std::fprintf(stderr, "error: sweep file must hold an array\n");
    return kExitConfig;
  }

  struct Job {
    std::string name;
    stepseq::Config cfg;
  };
  std::vector<Job> jobs;
  for (const json& e : entries) {
    if (!e.is_object() || !e.contains("name") || !e["name"].is_string()) {
      std::fprintf(stderr, "error: each sweep entry needs a \"name\" string\n");
      return kExitConfig;
    }
    json doc = base_doc;
    if (e.contains("config")) doc.merge_patch(e["config"]);
    for (const auto& [key, _] : e.items())
      if (key != "name" && key != "config") {
        std::fprintf(stderr, "error: unknown sweep entry key \"%s\"\n", key.c_str());
        return kExitConfig;
      }
    stepseq::Config sub;
    try {
      sub = stepseq::load_config(doc);
    } catch (const stepseq::ConfigError& err) {
      std::fprintf(stderr, "error in sweep entry \"%s\": %s\n",
                   e["name"].get<std::string>().c_str(), err.what());
      return kExitConfig;
    }
    sub.out_dir = (fs::path(cfg.out_dir) / e["name"].get<std::string>()).string();
    jobs.push_back({e["name"].get<std::string>(), std::move(sub)});
  }

  std::vector<std::future<int>> futures;
  futures.reserve(jobs.size());
  for (const Job& j : jobs)
    futures.push_back(std::async(std::launch::async,
                                 [&j] { return run_simulation(j.cfg, true); }));
  int worst = kExitOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    int code = kExitSolver;
    try {
      code = futures[i].get();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error in sweep entry \"%s\": %s\n", jobs[i].name.c_str(),
                   e.what());
    }
    std::printf("sweep %s: exit %d\n", jobs[i].name.c_str(), code);
    worst = std::max(worst, code);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DCM footstep sequencing, sensitivity analysis, and simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string sweep_path;
  double horizon = -1.0;
  long long samples = -1;
  long long seed = -1;
  bool fd_check = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file (JSON)");
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "random seed (overrides config)");
  };

  CLI::App* plan = app.add_subcommand("plan", "plan a footstep sequence over a horizon");
  add_common(plan);
  plan->add_option("--horizon", horizon, "horizon length in seconds (overrides config)");

  CLI::App* sens = app.add_subcommand("sensitivity",
                                      "differentiate the step solution and sweep it");
  add_common(sens);
  sens->add_option("--samples", samples, "number of sweep samples (overrides config)");
  sens->add_flag("--fd-check", fd_check,
                 "cross-check the derivative against central differences");

  CLI::App* sim = app.add_subcommand("simulate", "closed-loop walking simulation");
  add_common(sim);
  sim->add_option("--sweep", sweep_path, "JSON array of named config overlays");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitConfig;
  }

  json base_doc = json::object();
  stepseq::Config cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw stepseq::ConfigError("config: cannot open " + config_path);
      base_doc = json::parse(is);
    }
    cfg = stepseq::load_config(base_doc);
  } catch (const json::parse_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const stepseq::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }

  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.scenario.seed = cfg.seed;
  }
  if (plan->parsed() && horizon >= 0) cfg.horizon = horizon;
  if (sens->parsed() && samples >= 0) cfg.sensitivity.samples = static_cast<int>(samples);

  try {
    if (plan->parsed()) return cmd_plan(cfg);
    if (sens->parsed()) return cmd_sensitivity(cfg, fd_check);
    return cmd_simulate(base_doc, cfg, sweep_path);
  } catch (const stepseq::QpError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  } catch (const stepseq::WeakActivity& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  } catch (const stepseq::SingularJacobian& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
