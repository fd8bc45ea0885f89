#pragma once

// Trajectory predictors, split conformal calibration and prediction bundles.

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "umbrella/common.hpp"

namespace umbrella {

using Trajectory = std::vector<Vec2>;

struct LabeledTrajectory {
  std::string target;
  Trajectory points;
};

/// Trajectories sampled at a common time step, tagged by target.
struct TrajectoryDataset {
  double dt = 1.0;
  std::vector<LabeledTrajectory> trajectories;

  std::vector<Trajectory> for_target(const std::string& target) const {
    std::vector<Trajectory> out;
    for (const auto& t : trajectories)
      if (t.target == target) out.push_back(t.points);
    return out;
  }

  std::vector<std::string> targets() const {
    std::vector<std::string> out;
    for (const auto& t : trajectories)
      if (std::find(out.begin(), out.end(), t.target) == out.end()) out.push_back(t.target);
    return out;
  }
};

/// One JSON object per line: {"target":"a","dt":1.0,"points":[[x,y],...]}.
inline TrajectoryDataset read_dataset(std::istream& in) {
  TrajectoryDataset ds;
  std::string line;
  bool first = true;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ScenarioError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    const double dt = j.at("dt").get<double>();
    if (first) {
      ds.dt = dt;
      first = false;
    } else if (std::abs(dt - ds.dt) > 1e-12) {
      throw ScenarioError("dataset line " + std::to_string(lineno) + ": mixed time steps");
    }
    LabeledTrajectory t{j.at("target").get<std::string>(), {}};
    for (const auto& p : j.at("points")) t.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

inline TrajectoryDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open dataset '" + path + "'");
  return read_dataset(in);
}

inline void write_dataset(std::ostream& out, const TrajectoryDataset& ds) {
  for (const auto& t : ds.trajectories) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : t.points) pts.push_back({p.x, p.y});
    out << nlohmann::json{{"target", t.target}, {"dt", ds.dt}, {"points", pts}}.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Predictors
// ---------------------------------------------------------------------------

class Predictor {
 public:
  virtual ~Predictor() = default;
  /// Predicts the `horizon` positions following the last point of `history`.
  virtual Trajectory predict(std::span<const Vec2> history, int horizon) const = 0;
  virtual std::string name() const = 0;
};

class ConstantVelocityPredictor final : public Predictor {
 public:
  Trajectory predict(std::span<const Vec2> history, int horizon) const override {
    if (history.empty()) throw std::invalid_argument("predict: empty history");
    const Vec2 last = history.back();
    const Vec2 vel = history.size() >= 2 ? last - history[history.size() - 2] : Vec2{};
    Trajectory out;
    out.reserve(horizon);
    for (int h = 1; h <= horizon; ++h) out.push_back(last + static_cast<double>(h) * vel);
    return out;
  }
  std::string name() const override { return "cv"; }
};

/// Per-coordinate autoregression without intercept: y_k = sum_i a_i * y_{k-i}.
class LinearAutoregressivePredictor final : public Predictor {
 public:
  LinearAutoregressivePredictor(Eigen::VectorXd ax, Eigen::VectorXd ay) : ax_(std::move(ax)), ay_(std::move(ay)) {}

  int order() const noexcept { return static_cast<int>(ax_.size()); }
  const Eigen::VectorXd& coefficients_x() const noexcept { return ax_; }
  const Eigen::VectorXd& coefficients_y() const noexcept { return ay_; }

  Trajectory predict(std::span<const Vec2> history, int horizon) const override {
    if (history.empty()) throw std::invalid_argument("predict: empty history");
    const int p = order();
    std::vector<Vec2> buf;
    for (int i = 0; i < p - static_cast<int>(history.size()); ++i) buf.push_back(history.front());
    const std::size_t from = history.size() > static_cast<std::size_t>(p) ? history.size() - p : 0;
    buf.insert(buf.end(), history.begin() + from, history.end());
    Trajectory out;
    out.reserve(horizon);
    for (int h = 0; h < horizon; ++h) {
      Vec2 next;
      for (int i = 0; i < p; ++i) {
        const Vec2& prev = buf[buf.size() - 1 - i];
        next.x += ax_[i] * prev.x;
        next.y += ay_[i] * prev.y;
      }
      buf.push_back(next);
      out.push_back(next);
    }
    return out;
  }
  std::string name() const override { return "ar" + std::to_string(order()); }

 private:
  Eigen::VectorXd ax_;
  Eigen::VectorXd ay_;
};

struct PredictorKind {
  enum class Kind { ConstantVelocity, LinearAutoregressive };
  Kind kind = Kind::ConstantVelocity;
  int order = 2;

  static PredictorKind parse(const std::string& s) {
    if (s == "cv" || s == "constant_velocity") return {};
    if (s.rfind("ar", 0) == 0) {
      const int order = s.size() > 2 ? std::stoi(s.substr(2)) : 2;
      if (order < 1) throw ScenarioError("autoregressive order must be positive");
      return {Kind::LinearAutoregressive, order};
    }
    throw ScenarioError("unknown predictor '" + s + "'");
  }
  std::string to_string() const {
    return kind == Kind::ConstantVelocity ? "cv" : "ar" + std::to_string(order);
  }
};

/// Least-squares AR fit on the training trajectories (mean squared one-step error).
inline std::shared_ptr<const LinearAutoregressivePredictor> fit_autoregressive(const std::vector<Trajectory>& train,
                                                                                int order) {
  if (order < 1) throw std::invalid_argument("fit_autoregressive: order must be positive");
  auto solve = [&](auto coord) {
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(order, order);
    Eigen::VectorXd atb = Eigen::VectorXd::Zero(order);
    std::size_t rows = 0;
    Eigen::VectorXd row(order);
    for (const auto& tr : train) {
      for (std::size_t k = order; k < tr.size(); ++k) {
        for (int i = 0; i < order; ++i) row[i] = coord(tr[k - 1 - i]);
        ata.noalias() += row * row.transpose();
        atb += row * coord(tr[k]);
        ++rows;
      }
    }
    if (rows < static_cast<std::size_t>(order)) throw DegenerateFitError("not enough training samples for AR fit");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ata);
    lu.setThreshold(1e-10);
    if (lu.rank() < order) throw DegenerateFitError("AR normal equations are singular");
    return Eigen::VectorXd(lu.solve(atb));
  };
  auto ax = solve([](const Vec2& v) { return v.x; });
  auto ay = solve([](const Vec2& v) { return v.y; });
  return std::make_shared<LinearAutoregressivePredictor>(std::move(ax), std::move(ay));
}

inline std::shared_ptr<const Predictor> fit_predictor(const std::vector<Trajectory>& train, PredictorKind kind) {
  if (kind.kind == PredictorKind::Kind::ConstantVelocity) return std::make_shared<ConstantVelocityPredictor>();
  if (train.empty()) throw DegenerateFitError("autoregressive predictor needs training trajectories");
  return fit_autoregressive(train, kind.order);
}

// ---------------------------------------------------------------------------
// Conformal calibration
// ---------------------------------------------------------------------------

enum class CpCorrection { Bonferroni, None };

inline CpCorrection cp_correction_from_string(const std::string& s) {
  if (s == "bonferroni") return CpCorrection::Bonferroni;
  if (s == "none") return CpCorrection::None;
  throw ScenarioError("unknown cp_correction '" + s + "'");
}

inline std::string to_string(CpCorrection c) { return c == CpCorrection::Bonferroni ? "bonferroni" : "none"; }

/// Per-step miscoverage level used in the quantile index.
inline double per_step_delta(double delta, int horizon, CpCorrection c) {
  return c == CpCorrection::Bonferroni ? delta / horizon : delta;
}

/// Rank p = ceil((n + 1)(1 - delta_bar)) of the conformal quantile among n scores plus +inf.
inline long long conformal_rank(std::size_t n, double delta_bar) {
  return robust_ceil((static_cast<double>(n) + 1.0) * (1.0 - delta_bar));
}

/// Returns the p-th smallest of `scores` with +inf appended as the (n+1)-th score.
/// Throws InsufficientCalibrationError when that score would be the +inf sentinel.
inline double conformal_quantile(std::vector<double> scores, double delta_bar) {
  if (!(delta_bar > 0.0 && delta_bar < 1.0)) throw std::invalid_argument("delta_bar must lie in (0, 1)");
  const long long p = conformal_rank(scores.size(), delta_bar);
  if (p > static_cast<long long>(scores.size())) {
    throw InsufficientCalibrationError("conformal rank " + std::to_string(p) + " exceeds " +
                                       std::to_string(scores.size()) + " calibration scores");
  }
  const auto k = static_cast<std::size_t>(std::max<long long>(p, 1) - 1);
  std::nth_element(scores.begin(), scores.begin() + k, scores.end());
  return scores[k];
}

/// Largest horizon for which `n` calibration scores give finite radii.
inline int max_calibrated_horizon(std::size_t n, double delta, CpCorrection c) {
  if (c == CpCorrection::None) return std::numeric_limits<int>::max();
  int h = static_cast<int>(std::floor(delta * (static_cast<double>(n) + 1.0) + 1e-9));
  while (h > 0 && conformal_rank(n, delta / h) > static_cast<long long>(n)) --h;
  return h;
}

/// Per-step radii G_h, h = 1..horizon, from calibration trajectories observed up to index `t`.
inline std::vector<double> calibrate(const Predictor& pred, const std::vector<Trajectory>& cal, int t, int horizon,
                                     double delta, CpCorrection correction = CpCorrection::Bonferroni) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (horizon < 1) throw std::invalid_argument("horizon must be positive");
  const double delta_bar = per_step_delta(delta, horizon, correction);
  std::vector<std::vector<double>> scores(horizon);
  for (auto& s : scores) s.reserve(cal.size());
  for (const auto& tr : cal) {
    if (static_cast<int>(tr.size()) < t + 1 + horizon) {
      throw InsufficientCalibrationError("calibration trajectory shorter than t + horizon");
    }
    const auto yhat = pred.predict(std::span<const Vec2>(tr.data(), t + 1), horizon);
    for (int h = 0; h < horizon; ++h) scores[h].push_back(distance(tr[t + 1 + h], yhat[h]));
  }
  std::vector<double> radii(horizon);
  for (int h = 0; h < horizon; ++h) radii[h] = conformal_quantile(std::move(scores[h]), delta_bar);
  return radii;
}

/// Fraction of `test` trajectories whose every step lies inside the region around the prediction.
inline double empirical_joint_coverage(const Predictor& pred, const std::vector<Trajectory>& test, int t,
                                       const std::vector<double>& radii) {
  if (test.empty()) return 1.0;
  const int horizon = static_cast<int>(radii.size());
  std::size_t covered = 0;
  for (const auto& tr : test) {
    const auto yhat = pred.predict(std::span<const Vec2>(tr.data(), t + 1), horizon);
    bool ok = true;
    for (int h = 0; h < horizon && ok; ++h) ok = distance(tr[t + 1 + h], yhat[h]) <= radii[h];
    covered += ok;
  }
  return static_cast<double>(covered) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------
// Prediction bundles and target paths
// ---------------------------------------------------------------------------

/// Positions of each target at t0 + k * dt, k = 0..; linear in between, held after the end.
struct TargetPaths {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<Trajectory> paths;

  Vec2 at(std::size_t m, double t) const {
    const Trajectory& p = paths[m];
    const double u = (t - t0) / dt;
    if (u <= 0.0) return p.front();
    const double last = static_cast<double>(p.size() - 1);
    if (u >= last) return p.back();
    const auto k = static_cast<std::size_t>(u);
    return lerp(p[k], p[k + 1], u - static_cast<double>(k));
  }
  std::size_t size() const noexcept { return paths.size(); }
};

struct TargetForecast {
  Vec2 current;
  std::vector<Vec2> mean;      // mean[h] at t0 + h * dt, mean[0] == current
  std::vector<double> radius;  // radius[0] == 0
  double vmax = 0.0;           // largest observed speed so far, m/s
};

struct PredictionBundle {
  double t0 = 0.0;
  double dt = 1.0;
  double delta = 0.15;
  std::vector<std::string> targets;
  std::vector<TargetForecast> forecasts;

  int horizon() const noexcept { return forecasts.empty() ? 0 : static_cast<int>(forecasts.front().mean.size()) - 1; }

  std::size_t index(const std::string& target) const {
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (targets[i] == target) return i;
    throw ScenarioError("bundle has no target '" + target + "'");
  }

  /// Region radius at absolute time t (linear between steps, held beyond the horizon).
  double radius_at(std::size_t m, double t) const {
    const auto& r = forecasts[m].radius;
    const double u = (t - t0) / dt;
    if (u <= 0.0) return r.front();
    const double last = static_cast<double>(r.size() - 1);
    if (u >= last) return r.back();
    const auto k = static_cast<std::size_t>(u);
    return r[k] + (u - static_cast<double>(k)) * (r[k + 1] - r[k]);
  }

  TargetPaths mean_paths() const {
    TargetPaths p{t0, dt, {}};
    for (const auto& f : forecasts) p.paths.push_back(f.mean);
    return p;
  }

  PredictionBundle with_zero_radii() const {
    PredictionBundle b = *this;
    for (auto& f : b.forecasts) std::fill(f.radius.begin(), f.radius.end(), 0.0);
    return b;
  }
};

/// Largest speed between consecutive observations.
inline double max_observed_speed(std::span<const Vec2> history, double dt) {
  double v = 0.0;
  for (std::size_t k = 1; k < history.size(); ++k) v = std::max(v, distance(history[k], history[k - 1]) / dt);
  return v;
}

struct TargetModel {
  std::shared_ptr<const Predictor> predictor;
  std::vector<Trajectory> calibration;
};

/// Stacks per-target forecasts and radii. `histories[m]` holds observations up to
/// the current index; `radii[m]` are the calibrated radii for steps 1..horizon.
inline PredictionBundle make_bundle(double t0, double dt, double delta, const std::vector<std::string>& names,
                                    const std::vector<std::shared_ptr<const Predictor>>& preds,
                                    const std::vector<std::span<const Vec2>>& histories,
                                    const std::vector<std::vector<double>>& radii, int horizon) {
  PredictionBundle b{t0, dt, delta, names, {}};
  for (std::size_t m = 0; m < names.size(); ++m) {
    const auto& hist = histories[m];
    if (hist.empty()) throw std::invalid_argument("make_bundle: empty history for " + names[m]);
    TargetForecast f;
    f.current = hist.back();
    f.mean.push_back(f.current);
    const auto yhat = preds[m]->predict(hist, horizon);
    f.mean.insert(f.mean.end(), yhat.begin(), yhat.end());
    f.radius.push_back(0.0);
    f.radius.insert(f.radius.end(), radii[m].begin(), radii[m].end());
    if (static_cast<int>(f.radius.size()) != horizon + 1) throw std::invalid_argument("make_bundle: radius length");
    f.vmax = max_observed_speed(hist, dt);
    b.forecasts.push_back(std::move(f));
  }
  return b;
}

/// Forecasts every target at observation index `t` and calibrates each one on its own data.
inline PredictionBundle predict_bundle(double t0, double dt, const std::vector<std::string>& names,
                                       const std::vector<TargetModel>& models,
                                       const std::vector<std::span<const Vec2>>& histories, int t, int horizon,
                                       double delta, CpCorrection correction = CpCorrection::Bonferroni) {
  std::vector<std::shared_ptr<const Predictor>> preds;
  std::vector<std::vector<double>> radii;
  for (const auto& m : models) {
    preds.push_back(m.predictor);
    radii.push_back(calibrate(*m.predictor, m.calibration, t, horizon, delta, correction));
  }
  return make_bundle(t0, dt, delta, names, preds, histories, radii, horizon);
}

/// Draws one joint sample of target paths from the prediction regions.
///
/// Each target carries a latent planar Gaussian z_h with lag-one correlation
/// `smoothness`; the offset is G_h (1 - exp(-|z_h|^2 / 2)) along z_h, which is
/// uniform in radius and direction inside the ball for every step.
inline TargetPaths sample_paths(const PredictionBundle& b, Rng& rng, double smoothness = 0.0) {
  TargetPaths out{b.t0, b.dt, {}};
  const double s = std::clamp(smoothness, 0.0, 1.0);
  const double innov = std::sqrt(1.0 - s * s);
  for (const auto& f : b.forecasts) {
    Trajectory p;
    p.reserve(f.mean.size());
    p.push_back(f.mean.front());
    double zx = rng.normal();
    double zy = rng.normal();
    for (std::size_t h = 1; h < f.mean.size(); ++h) {
      if (h > 1) {
        zx = s * zx + innov * rng.normal();
        zy = s * zy + innov * rng.normal();
      }
      const double r2 = zx * zx + zy * zy;
      const double len = std::sqrt(r2);
      Vec2 pos = f.mean[h];
      if (len > 0.0 && f.radius[h] > 0.0) {
        const double r = f.radius[h] * -std::expm1(-0.5 * r2);
        pos += (r / len) * Vec2{zx, zy};
      }
      p.push_back(pos);
    }
    out.paths.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// External predictions: {t, horizon, targets:{id:{yhat:[[x,y],...], g:[r,...]}}}
// ---------------------------------------------------------------------------

inline PredictionBundle bundle_from_json(const nlohmann::json& j, double dt, double delta,
                                         const std::map<std::string, Trajectory>& histories = {}) {
  PredictionBundle b;
  b.t0 = j.at("t").get<double>() * dt;
  b.dt = dt;
  b.delta = delta;
  const int horizon = j.at("horizon").get<int>();
  for (const auto& [name, jt] : j.at("targets").items()) {
    TargetForecast f;
    std::vector<Vec2> yhat;
    for (const auto& p : jt.at("yhat")) yhat.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    auto g = jt.at("g").get<std::vector<double>>();
    if (static_cast<int>(yhat.size()) != horizon || static_cast<int>(g.size()) != horizon) {
      throw ScenarioError("external prediction for '" + name + "' does not match horizon");
    }
    if (std::any_of(g.begin(), g.end(), [](double r) { return !(r >= 0.0); })) {
      throw ScenarioError("external prediction for '" + name + "' has a negative radius");
    }
    auto it = histories.find(name);
    f.current = it != histories.end() && !it->second.empty() ? it->second.back() : yhat.front();
    if (it != histories.end()) f.vmax = max_observed_speed(it->second, dt);
    if (jt.contains("vmax")) f.vmax = jt.at("vmax").get<double>();
    f.mean.push_back(f.current);
    f.mean.insert(f.mean.end(), yhat.begin(), yhat.end());
    f.radius.push_back(0.0);
    f.radius.insert(f.radius.end(), g.begin(), g.end());
    b.targets.push_back(name);
    b.forecasts.push_back(std::move(f));
  }
  return b;
}

inline nlohmann::json to_json(const PredictionBundle& b) {
  nlohmann::json targets = nlohmann::json::object();
  for (std::size_t m = 0; m < b.targets.size(); ++m) {
    const auto& f = b.forecasts[m];
    nlohmann::json yhat = nlohmann::json::array();
    for (std::size_t h = 1; h < f.mean.size(); ++h) yhat.push_back({f.mean[h].x, f.mean[h].y});
    targets[b.targets[m]] = {{"yhat", yhat},
                             {"g", std::vector<double>(f.radius.begin() + 1, f.radius.end())},
                             {"vmax", f.vmax}};
  }
  return {{"t", b.t0 / b.dt}, {"horizon", b.horizon()}, {"targets", targets}};
}

}  // namespace umbrella
