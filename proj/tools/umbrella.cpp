// umbrella calibrate|plan|run|report

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "umbrella/umbrella.hpp"

namespace fs = std::filesystem;
using namespace umbrella;

namespace {

struct Common {
  std::string scenario;
  std::vector<std::string> methods{"ours"};
  int seeds = -1;
  std::uint64_t seed_base = 0;
  bool seed_base_set = false;
  std::string out = "out";
  long iters = -1;
  double budget = -1.0;
};

Scenario load(const Common& c) {
  Scenario s = load_scenario(c.scenario);
  if (c.iters >= 0) s.params.iterations = c.iters;
  if (c.budget > 0.0) {
    s.params.iterations = 0;
    s.params.t_b = c.budget;
  }
  if (c.seeds > 0) s.params.seeds = c.seeds;
  if (c.seed_base_set) s.params.seed_base = c.seed_base;
  return s;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& n : names) {
    std::stringstream ss(n);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(method_from_string(item));
  }
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw ScenarioError("cannot write '" + p.string() + "'");
  f << text;
}

int cmd_calibrate(const Common& c, const std::string& dataset, const std::string& predictor, double delta,
                  int horizon, int n_test) {
  nlohmann::json reports = nlohmann::json::array();
  if (!dataset.empty()) {
    const auto ds = read_dataset(dataset);
    const auto kind = PredictorKind::parse(predictor.empty() ? "cv" : predictor);
    for (const auto& r : calibrate_dataset(ds, kind, delta, 5, horizon, CpCorrection::Bonferroni))
      reports.push_back(to_json(r));
  } else {
    Scenario s = load(c);
    if (!predictor.empty()) s.prediction.predictor = PredictorKind::parse(predictor);
    for (const auto& r : calibrate_scenario(s, n_test, delta, horizon)) reports.push_back(to_json(r));
  }
  const std::string text = reports.dump(2) + "\n";
  write_file(fs::path(c.out) / "calibration.json", text);
  for (const auto& r : reports)
    std::cout << r.at("target").get<std::string>() << ": coverage " << fmt6(r.at("coverage").get<double>())
              << " (delta " << delta << ", horizon " << r.at("horizon").get<int>() << ")\n";
  return 0;
}

int cmd_plan(const Common& c) {
  const Scenario s = load(c);
  auto data = build_target_data(s);
  for (const auto& n : data->notes) std::cerr << "note: " << n << "\n";
  nlohmann::json all = nlohmann::json::object();
  for (Method m : parse_methods(c.methods)) {
    const PlanOutcome o = plan_at_start(s, data, m, s.params.seed_base);
    all[to_string(m)] = plan_report(s, m, o);
    std::cout << to_string(m) << ": cvar " << fmt6(o.search.cvar) << ", nodes " << o.search.stats.nodes << "\n";
  }
  write_file(fs::path(c.out) / "plan.json", all.dump(2) + "\n");
  return 0;
}

int cmd_run(const Common& c) {
  const Scenario s = load(c);
  auto data = build_target_data(s);
  for (const auto& n : data->notes) std::cerr << "note: " << n << "\n";
  const auto seeds = seed_list(s.params.seeds, s.params.seed_base);
  std::vector<BatchResult> batches;
  for (Method m : parse_methods(c.methods)) batches.push_back(run_batch(s, data, m, seeds));
  std::ostringstream csv;
  write_batch_csv(csv, batches);
  std::string missions;
  for (const auto& b : batches)
    for (const auto& r : b.runs)
      if (r.ok) missions += to_json(r.report).dump() + "\n";
  const auto summary = summary_json(s, batches);
  const fs::path out(c.out);
  write_file(out / "results.csv", csv.str());
  write_file(out / "missions.jsonl", missions);
  write_file(out / "summary.json", summary.dump(2) + "\n");
  for (const auto& [name, m] : summary.at("methods").items())
    std::cout << name << ": M " << fmt6(m.at("mean").get<double>()) << ", V " << fmt6(m.at("variance").get<double>())
              << ", failures " << m.at("failures").get<int>() << "\n";
  return 0;
}

int cmd_report(const std::string& results, const std::string& out) {
  const fs::path dir(results);
  std::ifstream in(dir / "missions.jsonl");
  if (!in) throw ScenarioError("cannot open '" + (dir / "missions.jsonl").string() + "'");
  std::vector<MissionReport> missions;
  std::string line;
  try {
    while (std::getline(in, line))
      if (!line.empty()) missions.push_back(mission_from_json(nlohmann::json::parse(line)));
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("cannot parse mission report: ") + e.what());
  }
  std::ifstream sin(dir / "summary.json");
  if (!sin) throw ScenarioError("cannot open '" + (dir / "summary.json").string() + "'");
  nlohmann::json summary;
  try {
    sin >> summary;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("cannot parse summary: ") + e.what());
  }
  std::ostringstream gantt, metrics;
  write_gantt_csv(gantt, missions);
  write_metrics_csv(metrics, summary);
  const fs::path o(out.empty() ? results : out);
  write_file(o / "gantt.csv", gantt.str());
  write_file(o / "metrics.csv", metrics.str());
  std::cout << metrics.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-aware multi-robot task allocation under target motion uncertainty"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub, bool methods) {
    sub->add_option("--scenario", c.scenario, "scenario JSON")->check(CLI::ExistingFile);
    if (methods) sub->add_option("--method", c.methods, "ours, ntp, nu (comma separated or repeated)");
    sub->add_option("--seeds", c.seeds, "number of seeds");
    sub->add_option_function<std::uint64_t>(
        "--seed-base", [&](std::uint64_t v) { c.seed_base = v, c.seed_base_set = true; }, "first seed");
    sub->add_option("--out", c.out, "output directory");
    auto* it = sub->add_option("--iters", c.iters, "iteration budget per planning call");
    auto* bu = sub->add_option("--budget", c.budget, "wall-clock budget per planning call, s");
    it->excludes(bu);
  };

  auto* cal = app.add_subcommand("calibrate", "check conformal coverage");
  add_common(cal, false);
  std::string dataset, predictor;
  double delta = 0.15;
  int horizon = 20, n_test = 500;
  cal->add_option("--dataset", dataset, "JSON-lines trajectory file")->check(CLI::ExistingFile);
  cal->add_option("--predictor", predictor, "cv or arN");
  cal->add_option("--delta", delta, "failure probability");
  cal->add_option("--horizon", horizon, "horizon in prediction steps");
  cal->add_option("--test", n_test, "held-out trajectories (scenario mode)");

  auto* plan = app.add_subcommand("plan", "plan once at t = 0");
  add_common(plan, true);
  auto* run = app.add_subcommand("run", "run online missions over seeds");
  add_common(run, true);
  auto* rep = app.add_subcommand("report", "gantt and metrics tables from a run directory");
  std::string results, rep_out;
  rep->add_option("--results", results, "directory written by run")->required();
  rep->add_option("--out", rep_out, "output directory (default: the results directory)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (cal->parsed()) {
      if (dataset.empty() && c.scenario.empty()) throw ScenarioError("calibrate needs --dataset or --scenario");
      return cmd_calibrate(c, dataset, predictor, delta, horizon, n_test);
    }
    if (rep->parsed()) return cmd_report(results, rep_out);
    if (c.scenario.empty()) throw ScenarioError("--scenario is required");
    if (plan->parsed()) return cmd_plan(c);
    if (run->parsed()) return cmd_run(c);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
