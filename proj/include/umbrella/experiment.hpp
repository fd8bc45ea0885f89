#pragma once

// Batches of missions, calibration checks and report tables behind the CLI.

#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "umbrella/executor.hpp"
#include "umbrella/planner.hpp"
#include "umbrella/scenario.hpp"

namespace umbrella {

inline constexpr const char* kResultsVersion = "# umbrella results v1";

inline std::string fmt6(double v) {
  if (!std::isfinite(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Unbiased sample variance; 0 for fewer than two values.
inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double sample_mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline std::vector<std::uint64_t> seed_list(int n, std::uint64_t base) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(base + static_cast<std::uint64_t>(i));
  return out;
}

/// Planning problem over the tasks known at t = 0 (reactive rules excluded).
inline PlanningProblem initial_problem(const Scenario& s) {
  std::vector<CompiledTask> tasks;
  for (const auto& t : s.tasks) tasks.push_back(compile_task(t.id, parse_scltl(t.formula)));
  std::vector<const CompiledTask*> parts;
  for (const auto& t : tasks) parts.push_back(&t);
  PlanningProblem p = make_problem(merge_task_posets(parts), s.team, s.target_names(), 0.0);
  p.dt = s.params.dt;
  p.reach_threshold = s.params.reach_threshold;
  p.max_time = s.params.sim_max_time;
  p.semantics = s.params.precedence_semantics;
  if (!s.tasks.empty() && s.tasks.front().priority) {
    for (const auto& name : p.tasks)
      for (const auto& t : s.tasks)
        if (t.id == name) p.task_weights.push_back(*t.priority);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Planning at t = 0
// ---------------------------------------------------------------------------

struct PlanOutcome {
  PlanningProblem problem;
  SearchResult search;
  PredictionBundle bundle;
};

inline PlanOutcome plan_at_start(const Scenario& s, std::shared_ptr<TargetData> data, Method method,
                                 std::uint64_t seed) {
  Forecaster f(s, std::move(data), ground_truth(s, seed), method);
  PlanOutcome out;
  out.problem = initial_problem(s);
  out.bundle = f.bundle(0.0, f.horizon_steps(s.prediction.horizon));
  RiskConfig cfg = s.risk_config();
  cfg.uncertainty_term = f.settings().uncertainty_term;
  cfg.seed = derive_seed(seed, 0x91a7, 0);
  out.search = cp_mcts(out.problem, out.bundle, cfg);
  return out;
}

inline nlohmann::json plan_report(const Scenario& s, Method m, const PlanOutcome& o) {
  nlohmann::json j = to_json(o.problem, o.search.plan);
  j["scenario"] = s.name;
  j["method"] = to_string(m);
  j["search"] = to_json(o.search.stats);
  return j;
}

/// Value of executing a fixed plan on one ground-truth draw; capped runs count as the cap.
inline double open_loop_value(const PlanningProblem& p, const Assignment& a, const TargetPaths& truth) {
  const SimResult r = simulate(p, a, truth);
  return r.exceeded ? p.max_time - p.t_now : r.objective;
}

/// Each method plans once at t = 0; its plan is then executed without replanning on
/// every ground-truth draw. The clairvoyant method replans per draw.
inline std::map<Method, std::vector<double>> open_loop_comparison(const Scenario& s, std::shared_ptr<TargetData> data,
                                                                  const std::vector<Method>& methods,
                                                                  const std::vector<std::uint64_t>& seeds,
                                                                  std::uint64_t plan_seed) {
  std::map<Method, std::vector<double>> out;
  for (Method m : methods) {
    auto& values = out[m];
    if (method_settings(m).ground_truth) {
      for (auto seed : seeds) {
        const PlanOutcome o = plan_at_start(s, data, m, seed);
        values.push_back(open_loop_value(o.problem, o.search.plan.assignment, ground_truth(s, seed)));
      }
    } else {
      const PlanOutcome o = plan_at_start(s, data, m, plan_seed);
      for (auto seed : seeds)
        values.push_back(open_loop_value(o.problem, o.search.plan.assignment, ground_truth(s, seed)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mission batches
// ---------------------------------------------------------------------------

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MissionReport report;
};

struct BatchResult {
  Method method = Method::Ours;
  std::vector<SeedOutcome> runs;

  std::vector<double> values() const {
    std::vector<double> v;
    for (const auto& r : runs)
      if (r.ok) v.push_back(r.report.weighted_makespan ? *r.report.weighted_makespan : r.report.average_makespan);
    return v;
  }
};

/// Runs one mission per seed; a failing seed is recorded and the batch continues.
inline BatchResult run_batch(const Scenario& s, std::shared_ptr<TargetData> data, Method method,
                             const std::vector<std::uint64_t>& seeds) {
  BatchResult b;
  b.method = method;
  for (auto seed : seeds) {
    SeedOutcome o;
    o.seed = seed;
    try {
      o.report = run_mission(s, data, method, seed);
      o.ok = true;
    } catch (const Error& e) {
      o.error = e.what();
    }
    b.runs.push_back(std::move(o));
  }
  return b;
}

/// One row per seed. Only deterministic fields are written, so equal seeds give equal bytes.
inline void write_batch_csv(std::ostream& out, const std::vector<BatchResult>& batches) {
  out << kResultsVersion << "\n";
  out << "method,seed,status,average_makespan,weighted_makespan,replans,end_time,first_solution_iter,convergence_iter\n";
  for (const auto& b : batches)
    for (const auto& r : b.runs) {
      out << to_string(b.method) << ',' << r.seed << ',';
      if (!r.ok) {
        std::string msg = r.error;
        for (char& c : msg)
          if (c == ',' || c == '\n') c = ';';
        out << "error:" << msg << ",,,,,,\n";
        continue;
      }
      const auto& m = r.report;
      out << "ok," << fmt6(m.average_makespan) << ',' << (m.weighted_makespan ? fmt6(*m.weighted_makespan) : "")
          << ',' << m.replan_events.size() << ',' << fmt6(m.end_time) << ','
          << m.initial_search.first_solution_iter << ',' << m.initial_search.last_improvement_iter << '\n';
    }
}

inline nlohmann::json summary_json(const Scenario& s, const std::vector<BatchResult>& batches) {
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& b : batches) {
    const auto v = b.values();
    std::vector<double> first, conv;
    int failures = 0;
    for (const auto& r : b.runs) {
      if (!r.ok) {
        ++failures;
        continue;
      }
      first.push_back(r.report.initial_search.first_solution_s);
      conv.push_back(r.report.initial_search.last_improvement_s);
    }
    methods[to_string(b.method)] = {{"runs", b.runs.size()},
                                    {"failures", failures},
                                    {"mean", sample_mean(v)},
                                    {"variance", sample_variance(v)},
                                    {"first_solution_s", sample_mean(first)},
                                    {"convergence_s", sample_mean(conv)}};
  }
  return {{"scenario", s.name}, {"methods", methods}};
}

// ---------------------------------------------------------------------------
// Calibration check
// ---------------------------------------------------------------------------

struct CalibrationReport {
  std::string target;
  std::string predictor;
  double delta = 0.0;
  int horizon = 0;
  std::size_t n_train = 0, n_cal = 0, n_test = 0;
  double coverage = 0.0;
  std::vector<double> radii;
};

/// Fits on `train`, calibrates on `cal` and measures joint coverage on `test`, all observed up to index t.
inline CalibrationReport calibration_check(const std::string& target, const std::vector<Trajectory>& train,
                                           const std::vector<Trajectory>& cal, const std::vector<Trajectory>& test,
                                           PredictorKind kind, int t, int horizon, double delta, CpCorrection c) {
  CalibrationReport r;
  r.target = target;
  r.predictor = kind.to_string();
  r.delta = delta;
  r.horizon = horizon;
  r.n_train = train.size();
  r.n_cal = cal.size();
  r.n_test = test.size();
  const auto pred = fit_predictor(train, kind);
  r.radii = calibrate(*pred, cal, t, horizon, delta, c);
  r.coverage = empirical_joint_coverage(*pred, test, t, r.radii);
  return r;
}

inline nlohmann::json to_json(const CalibrationReport& r) {
  return {{"target", r.target}, {"predictor", r.predictor}, {"delta", r.delta},     {"horizon", r.horizon},
          {"n_train", r.n_train}, {"n_cal", r.n_cal},       {"n_test", r.n_test}, {"coverage", r.coverage},
          {"radii", r.radii}};
}

/// Splits a dataset 40/40/20 per target into train / calibration / test.
inline std::vector<CalibrationReport> calibrate_dataset(const TrajectoryDataset& ds, PredictorKind kind, double delta,
                                                        int t, int horizon, CpCorrection c) {
  std::vector<CalibrationReport> out;
  for (const auto& name : ds.targets()) {
    const auto all = ds.for_target(name);
    const std::size_t a = all.size() * 2 / 5, b = all.size() * 4 / 5;
    if (a < 20 || b - a < 20 || all.size() - b < 20)
      throw ScenarioError("target '" + name + "': every split needs at least 20 trajectories");
    std::size_t len = all.front().size();
    for (const auto& tr : all) len = std::min(len, tr.size());
    const int h = std::min<int>(horizon, static_cast<int>(len) - t - 1);
    if (h < 1) throw InsufficientCalibrationError("trajectories too short for the observation index");
    out.push_back(calibration_check(name, {all.begin(), all.begin() + a}, {all.begin() + a, all.begin() + b},
                                    {all.begin() + b, all.end()}, kind, t, h, delta, c));
  }
  return out;
}

/// Generator-based check for a scenario's targets: fresh train, calibration and test draws.
inline std::vector<CalibrationReport> calibrate_scenario(const Scenario& s, int n_test, double delta, int horizon) {
  std::vector<CalibrationReport> out;
  const int len = s.prediction.history_steps + horizon + 2;
  for (std::size_t m = 0; m < s.targets.size(); ++m) {
    if (s.targets[m].motion.kind == MotionSpec::Kind::Static) continue;
    std::vector<Trajectory> train;
    if (s.prediction.predictor.kind != PredictorKind::Kind::ConstantVelocity)
      train = generate_set(s, m, s.prediction.training_size, kTrainingStream, len);
    out.push_back(calibration_check(s.targets[m].id, train,
                                    generate_set(s, m, s.prediction.calibration_size, kCalibrationStream, len),
                                    generate_set(s, m, n_test, kTestStream, len), s.prediction.predictor,
                                    s.prediction.history_steps, horizon, delta, s.prediction.correction));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Gantt rows from mission reports: one per robot and subtask, plus one marker row per replan.
inline void write_gantt_csv(std::ostream& out, const std::vector<MissionReport>& missions) {
  out << kResultsVersion << "\n";
  out << "method,seed,kind,robot,subtask,task,start,end,reason,adopted\n";
  for (const auto& m : missions) {
    for (const auto& g : m.gantt)
      out << m.method << ',' << m.seed << ',' << (g.aborted ? "aborted" : "action") << ',' << g.robot << ','
          << g.subtask << ',' << g.task << ',' << fmt6(g.start) << ',' << fmt6(g.end) << ",,\n";
    for (const auto& e : m.replan_events)
      out << m.method << ',' << m.seed << ",replan,,,," << fmt6(e.t) << ',' << fmt6(e.t) << ',' << e.reason << ','
          << (e.adopted ? 1 : 0) << '\n';
  }
}

/// One row per method: mean and variance of the average makespan.
inline void write_metrics_csv(std::ostream& out, const nlohmann::json& summary) {
  out << kResultsVersion << "\n";
  out << "method,runs,failures,M,V,first_solution_s,convergence_s\n";
  for (const auto& [name, m] : summary.at("methods").items())
    out << name << ',' << m.at("runs").get<int>() << ',' << m.at("failures").get<int>() << ','
        << fmt6(m.at("mean").get<double>()) << ',' << fmt6(m.at("variance").get<double>()) << ','
        << fmt6(m.at("first_solution_s").get<double>()) << ',' << fmt6(m.at("convergence_s").get<double>()) << '\n';
}

inline MissionReport mission_from_json(const nlohmann::json& j) {
  MissionReport r;
  r.scenario = j.value("scenario", std::string());
  r.method = j.at("method").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.average_makespan = j.at("average_makespan").get<double>();
  for (const auto& [k, v] : j.at("makespans").items()) r.makespans[k] = v.get<double>();
  for (const auto& e : j.at("replan_events")) {
    ReplanEvent ev;
    ev.t = e.at("t").get<double>();
    ev.reason = e.at("reason").get<std::string>();
    ev.adopted = e.at("adopted").get<bool>();
    auto num = [&](const char* k) { return e.at(k).is_null() ? kInf : e.at(k).get<double>(); };
    ev.eta_before = num("eta_before");
    ev.eta_after = num("eta_after");
    ev.eta_t = num("eta_t");
    ev.eta_hat = num("eta_hat");
    ev.threshold = num("threshold");
    r.replan_events.push_back(ev);
  }
  for (const auto& g : j.at("gantt"))
    r.gantt.push_back({g.at("robot").get<std::string>(), g.at("subtask").get<std::string>(),
                       g.at("task").get<std::string>(), g.at("start").get<double>(), g.at("end").get<double>(),
                       g.at("aborted").get<bool>()});
  return r;
}

}  // namespace umbrella
