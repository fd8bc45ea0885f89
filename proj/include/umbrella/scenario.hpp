#pragma once

// Scenario files, ground truth, calibration data and per-method forecasts.

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "umbrella/formula.hpp"
#include "umbrella/motion.hpp"
#include "umbrella/planner.hpp"
#include "umbrella/prediction.hpp"
#include "umbrella/simulation.hpp"

namespace umbrella {

struct TargetSpec {
  std::string id;
  MotionSpec motion;               // distribution used for training and calibration
  std::optional<MotionSpec> truth; // ground-truth generator when it differs from `motion`
};

struct TaskSpec {
  std::string id;
  std::string formula;
  std::optional<double> priority;
};

struct Trigger {
  enum class Kind { Time, Proximity };
  Kind kind = Kind::Time;
  double t = 0.0;                 // Time
  std::string target;             // Proximity: a robot comes within `radius` of the target
  std::optional<std::string> robot;
  double radius = 0.0;
};

struct ReactiveSpec {
  std::string id;
  Trigger trigger;
  std::string response;  // released as F(response)
  std::optional<double> priority;
};

struct FailureSpec {
  std::string robot;
  double t = 0.0;
};

struct Parameters {
  double delta = 0.15;
  double alpha = 0.05;
  int z = 50;
  double Q = 1.5;
  double epsilon = 0.3;
  double t_b = 10.0;
  long iterations = 0;
  double gamma = 0.2;
  double dt = 0.5;
  double reach_threshold = 0.5;
  double sim_max_time = 900.0;      // simulation cap relative to the planning time, s
  double mission_max_time = 900.0;  // absolute mission cap, s
  int branching_limit = 64;
  PrecedenceSemantics precedence_semantics = PrecedenceSemantics::StartCompletion;
  double sample_smoothness = 0.0;
  int convergence_window = 100;
  double eta_step = -1.0;           // progress decrement per tick; negative means dt
  int seeds = 1;
  std::uint64_t seed_base = 0;
};

struct PredictionConfig {
  PredictorKind predictor;
  double dt = 2.0;                 // observation / forecast step, s
  int calibration_size = 1000;
  int training_size = 1000;
  int history_steps = 5;           // observations available before t = 0
  CpCorrection correction = CpCorrection::Bonferroni;
  double horizon = 120.0;          // initial forecast horizon, s
  double horizon_margin = 0.25;    // later horizons: incumbent remaining time plus this fraction
  int min_horizon_steps = 10;
  std::uint64_t data_seed = 7;
  std::string dataset;             // optional JSON-lines file replacing the generators
};

struct Workspace {
  double xmin = 0.0, ymin = 0.0, xmax = 800.0, ymax = 800.0;
};

struct Scenario {
  std::string name;
  Workspace workspace;
  TeamModel team;
  std::vector<TargetSpec> targets;
  std::vector<TaskSpec> tasks;
  std::vector<ReactiveSpec> reactive;
  std::vector<FailureSpec> failures;
  Parameters params;
  PredictionConfig prediction;

  std::vector<std::string> target_names() const {
    std::vector<std::string> out;
    for (const auto& t : targets) out.push_back(t.id);
    return out;
  }

  Declarations declarations() const {
    Declarations d;
    for (const auto& r : team.robots) d.robots.insert(r.id);
    for (const auto& t : targets) d.targets.insert(t.id);
    for (const auto& c : team.collaborations) d.collaborations.insert(c.id);
    return d;
  }

  RiskConfig risk_config() const {
    RiskConfig c;
    c.alpha = params.alpha;
    c.z = params.z;
    c.Q = params.Q;
    c.epsilon = params.epsilon;
    c.t_b = params.t_b;
    c.iterations = params.iterations;
    c.branching_limit = params.branching_limit;
    c.sample_smoothness = params.sample_smoothness;
    c.convergence_window = params.convergence_window;
    return c;
  }

  void validate() const;
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

inline Vec2 vec_from_json(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
inline nlohmann::json vec_to_json(const Vec2& v) { return {v.x, v.y}; }

inline MotionSpec motion_from_json(const nlohmann::json& j) {
  MotionSpec m;
  m.kind = motion_kind_from_string(j.value("generator", std::string("static")));
  m.start = vec_from_json(j.at("start"));
  if (j.contains("waypoints"))
    for (const auto& w : j.at("waypoints")) m.waypoints.push_back(vec_from_json(w));
  m.speed = j.value("speed", 0.0);
  m.waypoint_noise = j.value("waypoint_noise", 0.0);
  m.speed_noise = j.value("speed_noise", 0.0);
  m.fixed_waypoints = j.value("fixed_waypoints", 0);
  if (m.kind != MotionSpec::Kind::Static && m.waypoints.empty()) throw ScenarioError("moving target needs waypoints");
  if (m.speed < 0.0 || m.waypoint_noise < 0.0 || m.speed_noise < 0.0) throw ScenarioError("negative motion parameter");
  return m;
}

inline nlohmann::json motion_to_json(const MotionSpec& m) {
  nlohmann::json w = nlohmann::json::array();
  for (const auto& p : m.waypoints) w.push_back(vec_to_json(p));
  return {{"generator", to_string(m.kind)}, {"start", vec_to_json(m.start)}, {"waypoints", w},
          {"speed", m.speed}, {"waypoint_noise", m.waypoint_noise}, {"speed_noise", m.speed_noise},
          {"fixed_waypoints", m.fixed_waypoints}};
}

inline std::string semantics_to_string(PrecedenceSemantics s) {
  return s == PrecedenceSemantics::StartStart ? "start_start" : "start_completion";
}

inline PrecedenceSemantics semantics_from_string(const std::string& s) {
  if (s == "start_start") return PrecedenceSemantics::StartStart;
  if (s == "start_completion") return PrecedenceSemantics::StartCompletion;
  throw ScenarioError("unknown precedence_semantics '" + s + "'");
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  Scenario s;
  try {
    s.name = j.value("name", std::string("scenario"));
    if (j.contains("workspace")) {
      const auto& w = j.at("workspace");
      s.workspace = {w.at("xmin").get<double>(), w.at("ymin").get<double>(), w.at("xmax").get<double>(),
                     w.at("ymax").get<double>()};
    }
    for (const auto& r : j.at("robots")) {
      s.team.robots.push_back({r.at("id").get<std::string>(), r.at("capabilities").get<std::vector<std::string>>(),
                               r.at("vmax").get<double>(), detail::vec_from_json(r.at("position"))});
    }
    for (const auto& c : j.at("collaborations")) {
      s.team.collaborations.push_back({c.at("id").get<std::string>(), c.at("actions").get<std::vector<std::string>>(),
                                       c.at("duration").get<double>()});
    }
    for (const auto& t : j.at("targets")) {
      TargetSpec ts{t.at("id").get<std::string>(), detail::motion_from_json(t.at("motion")), std::nullopt};
      if (t.contains("truth")) ts.truth = detail::motion_from_json(t.at("truth"));
      s.targets.push_back(std::move(ts));
    }
    for (const auto& t : j.at("tasks")) {
      TaskSpec ts{t.at("id").get<std::string>(), t.at("formula").get<std::string>(), std::nullopt};
      if (t.contains("priority")) ts.priority = t.at("priority").get<double>();
      s.tasks.push_back(std::move(ts));
    }
    if (j.contains("reactive")) {
      for (const auto& r : j.at("reactive")) {
        ReactiveSpec rs;
        rs.id = r.at("id").get<std::string>();
        rs.response = r.at("response").get<std::string>();
        if (r.contains("priority")) rs.priority = r.at("priority").get<double>();
        const auto& tr = r.at("trigger");
        const std::string type = tr.at("type").get<std::string>();
        if (type == "time") {
          rs.trigger.kind = Trigger::Kind::Time;
          rs.trigger.t = tr.at("t").get<double>();
        } else if (type == "proximity") {
          rs.trigger.kind = Trigger::Kind::Proximity;
          rs.trigger.target = tr.at("target").get<std::string>();
          if (tr.contains("robot")) rs.trigger.robot = tr.at("robot").get<std::string>();
          rs.trigger.radius = tr.at("radius").get<double>();
        } else {
          throw ScenarioError("unknown trigger type '" + type + "'");
        }
        s.reactive.push_back(std::move(rs));
      }
    }
    if (j.contains("failures"))
      for (const auto& f : j.at("failures")) s.failures.push_back({f.at("robot").get<std::string>(), f.at("t").get<double>()});
    if (j.contains("parameters")) {
      const auto& p = j.at("parameters");
      auto& q = s.params;
      read_opt(p, "delta", q.delta);
      read_opt(p, "alpha", q.alpha);
      read_opt(p, "z", q.z);
      read_opt(p, "Q", q.Q);
      read_opt(p, "epsilon", q.epsilon);
      read_opt(p, "t_b", q.t_b);
      read_opt(p, "iterations", q.iterations);
      read_opt(p, "gamma", q.gamma);
      read_opt(p, "dt", q.dt);
      read_opt(p, "reach_threshold", q.reach_threshold);
      read_opt(p, "sim_max_time", q.sim_max_time);
      read_opt(p, "mission_max_time", q.mission_max_time);
      read_opt(p, "branching_limit", q.branching_limit);
      if (p.contains("precedence_semantics"))
        q.precedence_semantics = detail::semantics_from_string(p.at("precedence_semantics").get<std::string>());
      read_opt(p, "sample_smoothness", q.sample_smoothness);
      read_opt(p, "convergence_window", q.convergence_window);
      read_opt(p, "eta_step", q.eta_step);
      read_opt(p, "seeds", q.seeds);
      read_opt(p, "seed_base", q.seed_base);
    }
    if (j.contains("prediction")) {
      const auto& p = j.at("prediction");
      auto& q = s.prediction;
      if (p.contains("predictor")) q.predictor = PredictorKind::parse(p.at("predictor").get<std::string>());
      read_opt(p, "dt", q.dt);
      read_opt(p, "calibration_size", q.calibration_size);
      read_opt(p, "training_size", q.training_size);
      read_opt(p, "history_steps", q.history_steps);
      if (p.contains("cp_correction")) q.correction = cp_correction_from_string(p.at("cp_correction").get<std::string>());
      read_opt(p, "horizon", q.horizon);
      read_opt(p, "horizon_margin", q.horizon_margin);
      read_opt(p, "min_horizon_steps", q.min_horizon_steps);
      read_opt(p, "data_seed", q.data_seed);
      read_opt(p, "dataset", q.dataset);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

inline nlohmann::json to_json(const Scenario& s) {
  nlohmann::json robots = nlohmann::json::array();
  for (const auto& r : s.team.robots)
    robots.push_back({{"id", r.id}, {"capabilities", r.capabilities}, {"vmax", r.vmax},
                      {"position", detail::vec_to_json(r.position)}});
  nlohmann::json collabs = nlohmann::json::array();
  for (const auto& c : s.team.collaborations)
    collabs.push_back({{"id", c.id}, {"actions", c.actions}, {"duration", c.duration}});
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& t : s.targets) {
    nlohmann::json jt{{"id", t.id}, {"motion", detail::motion_to_json(t.motion)}};
    if (t.truth) jt["truth"] = detail::motion_to_json(*t.truth);
    targets.push_back(std::move(jt));
  }
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : s.tasks) {
    nlohmann::json jt{{"id", t.id}, {"formula", t.formula}};
    if (t.priority) jt["priority"] = *t.priority;
    tasks.push_back(std::move(jt));
  }
  nlohmann::json reactive = nlohmann::json::array();
  for (const auto& r : s.reactive) {
    nlohmann::json tr;
    if (r.trigger.kind == Trigger::Kind::Time) {
      tr = {{"type", "time"}, {"t", r.trigger.t}};
    } else {
      tr = {{"type", "proximity"}, {"target", r.trigger.target}, {"radius", r.trigger.radius}};
      if (r.trigger.robot) tr["robot"] = *r.trigger.robot;
    }
    nlohmann::json jr{{"id", r.id}, {"trigger", tr}, {"response", r.response}};
    if (r.priority) jr["priority"] = *r.priority;
    reactive.push_back(std::move(jr));
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : s.failures) failures.push_back({{"robot", f.robot}, {"t", f.t}});
  const auto& p = s.params;
  const auto& q = s.prediction;
  return {{"name", s.name},
          {"workspace", {{"xmin", s.workspace.xmin}, {"ymin", s.workspace.ymin}, {"xmax", s.workspace.xmax},
                         {"ymax", s.workspace.ymax}}},
          {"robots", robots},
          {"collaborations", collabs},
          {"targets", targets},
          {"tasks", tasks},
          {"reactive", reactive},
          {"failures", failures},
          {"parameters",
           {{"delta", p.delta}, {"alpha", p.alpha}, {"z", p.z}, {"Q", p.Q}, {"epsilon", p.epsilon}, {"t_b", p.t_b},
            {"iterations", p.iterations}, {"gamma", p.gamma}, {"dt", p.dt}, {"reach_threshold", p.reach_threshold},
            {"sim_max_time", p.sim_max_time}, {"mission_max_time", p.mission_max_time},
            {"branching_limit", p.branching_limit},
            {"precedence_semantics", detail::semantics_to_string(p.precedence_semantics)},
            {"sample_smoothness", p.sample_smoothness}, {"convergence_window", p.convergence_window},
            {"eta_step", p.eta_step}, {"seeds", p.seeds}, {"seed_base", p.seed_base}}},
          {"prediction",
           {{"predictor", q.predictor.to_string()}, {"dt", q.dt}, {"calibration_size", q.calibration_size},
            {"training_size", q.training_size}, {"history_steps", q.history_steps},
            {"cp_correction", to_string(q.correction)}, {"horizon", q.horizon},
            {"horizon_margin", q.horizon_margin}, {"min_horizon_steps", q.min_horizon_steps},
            {"data_seed", q.data_seed}, {"dataset", q.dataset}}}};
}

inline void Scenario::validate() const {
  team.validate();
  const Declarations decl = declarations();
  std::set<std::string> ids;
  for (const auto& r : team.robots)
    if (!ids.insert("robot:" + r.id).second) throw ScenarioError("duplicate robot '" + r.id + "'");
  for (const auto& t : targets)
    if (!ids.insert("target:" + t.id).second) throw ScenarioError("duplicate target '" + t.id + "'");
  bool any_priority = false;
  bool all_priority = true;
  for (const auto& t : tasks) {
    if (!ids.insert("task:" + t.id).second) throw ScenarioError("duplicate task '" + t.id + "'");
    check_declared(parse_scltl(t.formula), decl);
    any_priority |= t.priority.has_value();
    all_priority &= t.priority.has_value();
  }
  for (const auto& r : reactive) {
    if (!ids.insert("task:" + r.id).second) throw ScenarioError("duplicate task or rule '" + r.id + "'");
    check_declared(parse_scltl(r.response), decl);
    if (r.trigger.kind == Trigger::Kind::Proximity) {
      if (!decl.targets.contains(r.trigger.target)) throw ScenarioError("trigger of '" + r.id + "' names unknown target");
      if (r.trigger.robot && !decl.robots.contains(*r.trigger.robot))
        throw ScenarioError("trigger of '" + r.id + "' names unknown robot");
    }
    any_priority |= r.priority.has_value();
    all_priority &= r.priority.has_value();
  }
  if (any_priority && !all_priority) throw ScenarioError("priorities must be given for every task or none");
  for (const auto& f : failures)
    if (!decl.robots.contains(f.robot)) throw ScenarioError("failure names unknown robot '" + f.robot + "'");
  const auto& p = params;
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw ScenarioError("delta must lie in (0, 1)");
  if (!(p.gamma > 0.0)) throw ScenarioError("gamma must be positive");
  if (!(p.dt > 0.0)) throw ScenarioError("dt must be positive");
  if (p.reach_threshold < 0.0) throw ScenarioError("reach_threshold must be nonnegative");
  if (p.seeds < 1) throw ScenarioError("seeds must be at least 1");
  if (!(prediction.dt > 0.0)) throw ScenarioError("prediction dt must be positive");
  if (prediction.history_steps < 1) throw ScenarioError("history_steps must be at least 1");
  if (prediction.calibration_size < 1) throw ScenarioError("calibration_size must be positive");
  risk_config().validate();
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("cannot parse scenario '" + path + "': " + e.what());
  }
  return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Methods
// ---------------------------------------------------------------------------

enum class Method { Ours, NTP, NU, CS };

inline Method method_from_string(const std::string& s) {
  if (s == "ours") return Method::Ours;
  if (s == "ntp") return Method::NTP;
  if (s == "nu") return Method::NU;
  if (s == "cs") return Method::CS;
  throw ScenarioError("unknown method '" + s + "'");
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::Ours: return "ours";
    case Method::NTP: return "ntp";
    case Method::NU: return "nu";
    case Method::CS: return "cs";
  }
  return "?";
}

/// The knobs a method changes relative to the full method.
struct MethodSettings {
  bool freeze_targets = false;    // forecast = last observed position
  bool zero_radii = false;        // regions collapsed to points
  bool uncertainty_term = true;   // zeta's uncertainty adjustment
  bool ground_truth = false;      // forecast = true future positions
};

inline MethodSettings method_settings(Method m) {
  switch (m) {
    case Method::Ours: return {};
    case Method::NTP: return {true, true, false, false};
    case Method::NU: return {false, true, false, false};
    case Method::CS: return {false, true, false, true};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Data: ground truth, training and calibration trajectories
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kTruthStream = 0x7254;
inline constexpr std::uint64_t kCalibrationStream = 0xca1;
inline constexpr std::uint64_t kTrainingStream = 0x7a1;
inline constexpr std::uint64_t kTestStream = 0x7e57;

/// Number of data steps needed to cover the history, the mission and a forecast horizon.
inline int data_length(const Scenario& s) {
  const auto mission = static_cast<int>(std::ceil(s.params.mission_max_time / s.prediction.dt));
  const int hmax = max_calibrated_horizon(static_cast<std::size_t>(s.prediction.calibration_size), s.params.delta,
                                          s.prediction.correction);
  const int horizon = std::min(hmax, static_cast<int>(std::ceil(s.params.mission_max_time / s.prediction.dt)));
  return s.prediction.history_steps + mission + horizon + 2;
}

/// Ground-truth paths for one seed. Data index history_steps is mission time 0.
inline TargetPaths ground_truth(const Scenario& s, std::uint64_t seed) {
  const int len = data_length(s);
  TargetPaths out{-static_cast<double>(s.prediction.history_steps) * s.prediction.dt, s.prediction.dt, {}};
  for (std::size_t m = 0; m < s.targets.size(); ++m) {
    Rng rng(derive_seed(seed, kTruthStream, m));
    const auto& t = s.targets[m];
    out.paths.push_back(generate_trajectory(t.truth ? *t.truth : t.motion, s.prediction.dt, len, rng));
  }
  return out;
}

/// `count` trajectories of target `m` drawn from its motion model on a given stream.
inline std::vector<Trajectory> generate_set(const Scenario& s, std::size_t m, int count, std::uint64_t stream,
                                            int len = -1) {
  if (len < 0) len = data_length(s);
  std::vector<Trajectory> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(s.prediction.data_seed, stream, m, static_cast<std::uint64_t>(i)));
    out.push_back(generate_trajectory(s.targets[m].motion, s.prediction.dt, len, rng));
  }
  return out;
}

/// Per-target predictors and calibration sets, plus the radii computed from them.
struct TargetData {
  std::vector<TargetModel> models;
  std::vector<std::string> notes;  // e.g. predictor fallbacks
  std::map<std::tuple<std::size_t, int, int>, std::vector<double>> radii_cache;

  const std::vector<double>& radii(std::size_t m, int k, int horizon, double delta, CpCorrection c) {
    auto key = std::make_tuple(m, k, horizon);
    auto it = radii_cache.find(key);
    if (it == radii_cache.end())
      it = radii_cache.emplace(key, calibrate(*models[m].predictor, models[m].calibration, k, horizon, delta, c)).first;
    return it->second;
  }
};

/// Fits predictors and gathers calibration sets (from the dataset file when configured).
inline std::shared_ptr<TargetData> build_target_data(const Scenario& s) {
  std::optional<TrajectoryDataset> ds;
  if (!s.prediction.dataset.empty()) ds = read_dataset(s.prediction.dataset);
  auto data = std::make_shared<TargetData>();
  for (std::size_t m = 0; m < s.targets.size(); ++m) {
    std::vector<Trajectory> train;
    std::vector<Trajectory> cal;
    if (ds) {
      auto all = ds->for_target(s.targets[m].id);
      const std::size_t half = all.size() / 2;
      train.assign(all.begin(), all.begin() + half);
      cal.assign(all.begin() + half, all.end());
    } else {
      cal = generate_set(s, m, s.prediction.calibration_size, kCalibrationStream);
      if (s.prediction.predictor.kind != PredictorKind::Kind::ConstantVelocity)
        train = generate_set(s, m, s.prediction.training_size, kTrainingStream);
    }
    std::shared_ptr<const Predictor> pred;
    try {
      pred = fit_predictor(train, s.prediction.predictor);
    } catch (const DegenerateFitError& e) {
      data->notes.push_back("target " + s.targets[m].id + ": " + e.what() + "; using constant velocity");
      pred = std::make_shared<ConstantVelocityPredictor>();
    }
    data->models.push_back({std::move(pred), std::move(cal)});
  }
  return data;
}

/// Forecast provider for one mission: observations come from the ground truth.
class Forecaster {
 public:
  Forecaster(const Scenario& s, std::shared_ptr<TargetData> data, TargetPaths truth, Method method)
      : s_(s), data_(std::move(data)), truth_(std::move(truth)), settings_(method_settings(method)) {
    const std::size_t ncal = data_->models.empty() ? 0 : data_->models.front().calibration.size();
    hmax_ = std::max(1, max_calibrated_horizon(ncal, s_.params.delta, s_.prediction.correction));
    hmax_ = std::min<int>(hmax_, static_cast<int>(std::ceil(s_.params.mission_max_time / s_.prediction.dt)));
  }

  const MethodSettings& settings() const noexcept { return settings_; }
  const TargetPaths& truth() const noexcept { return truth_; }
  int max_horizon_steps() const noexcept { return hmax_; }

  /// Data index of the latest observation at mission time t.
  int observation_index(double t) const {
    const int k = s_.prediction.history_steps + static_cast<int>(std::floor(t / s_.prediction.dt + 1e-9));
    return std::min<int>(k, static_cast<int>(truth_.paths.front().size()) - 1);
  }

  int horizon_steps(double seconds) const {
    const int h = static_cast<int>(std::ceil(seconds / s_.prediction.dt - 1e-9));
    return std::clamp(h, std::min(s_.prediction.min_horizon_steps, hmax_), hmax_);
  }

  /// Bundle from the observations available at mission time t.
  PredictionBundle bundle(double t, int horizon) {
    const int k = observation_index(t);
    auto key = std::make_pair(k, horizon);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const double t0 = static_cast<double>(k - s_.prediction.history_steps) * s_.prediction.dt;
    const auto names = s_.target_names();
    std::vector<std::span<const Vec2>> hist;
    for (const auto& p : truth_.paths) hist.emplace_back(p.data(), k + 1);
    PredictionBundle b;
    if (settings_.freeze_targets || settings_.ground_truth) {
      b = PredictionBundle{t0, s_.prediction.dt, s_.params.delta, names, {}};
      for (std::size_t m = 0; m < names.size(); ++m) {
        TargetForecast f;
        f.current = hist[m].back();
        for (int h = 0; h <= horizon; ++h) {
          const auto idx = std::min<std::size_t>(k + h, truth_.paths[m].size() - 1);
          f.mean.push_back(settings_.ground_truth ? truth_.paths[m][idx] : f.current);
          f.radius.push_back(0.0);
        }
        f.vmax = settings_.freeze_targets ? 0.0 : max_observed_speed(hist[m], s_.prediction.dt);
        b.forecasts.push_back(std::move(f));
      }
    } else {
      std::vector<std::vector<double>> radii;
      std::vector<std::shared_ptr<const Predictor>> preds;
      for (std::size_t m = 0; m < names.size(); ++m) {
        preds.push_back(data_->models[m].predictor);
        if (settings_.zero_radii) {
          radii.emplace_back(horizon, 0.0);
        } else {
          radii.push_back(data_->radii(m, k, horizon, s_.params.delta, s_.prediction.correction));
        }
      }
      b = make_bundle(t0, s_.prediction.dt, s_.params.delta, names, preds, hist, radii, horizon);
    }
    if (cache_.size() > 64) cache_.clear();
    cache_.emplace(key, b);
    return b;
  }

 private:
  const Scenario& s_;
  std::shared_ptr<TargetData> data_;
  TargetPaths truth_;
  MethodSettings settings_;
  int hmax_ = 1;
  std::map<std::pair<int, int>, PredictionBundle> cache_;
};

}  // namespace umbrella
