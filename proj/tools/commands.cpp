#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "pvmppt/pvmppt.hpp"

namespace fs = std::filesystem;

namespace pvmppt::cli {
namespace {

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

double predict(const Network& net, double g, double t) {
  return net.norm.p.denormalize(forward(net, {net.norm.g.normalize(g), net.norm.t.normalize(t)}));
}

std::string history_path(const std::string& model_path) {
  fs::path p(model_path);
  p.replace_extension(".history.csv");
  return p.string();
}

}  // namespace

int cmd_generate(const GenerateOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    opt.spec.validate();
    const PvArrayConfig& array = default_array();
    const Dataset ds = generate(opt.spec, array);
    std::vector<MppSample> rows = ds.train;
    rows.insert(rows.end(), ds.validation.begin(), ds.validation.end());
    ensure_parent(opt.out);
    write_text_file(opt.out, dataset_csv(rows));

    // Re-read the file and check every row against a fresh oracle call.
    std::istringstream in(read_text_file(opt.out));
    const auto back = parse_dataset_csv(in);
    std::size_t mismatches = 0;
    for (const MppSample& s : back) {
      const MppSample ref = mpp_sample(s.g, s.t, array);
      if (std::abs(s.p_mpp - ref.p_mpp) > 5e-4 * std::abs(ref.p_mpp)) ++mismatches;
    }
    out << "wrote " << back.size() << " samples to " << opt.out << " (" << ds.train.size() << " training, "
        << ds.validation.size() << " held out at the end)\n";
    out << "oracle re-check: " << mismatches << " mismatches above 0.05%\n";
    return mismatches == 0 ? kSuccess : kUsage;
  } catch (const Error& e) {
    err << "generate: " << e.what() << "\n";
    return kUsage;
  }
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  Network net;
  TrainResult result;
  std::vector<MppSample> validation;
  bool converged = true;
  try {
    if (!(opt.holdout >= 0.0 && opt.holdout < 1.0)) throw ConfigError("--holdout must be in [0, 1)");
    if (opt.max_epochs < 0) throw ConfigError("--max-epochs must be >= 0");
    std::istringstream in(read_text_file(opt.data));
    auto samples = parse_dataset_csv(in);
    if (samples.empty()) throw ConfigError("dataset '" + opt.data + "' has no rows");
    const Dataset ds = split_dataset(std::move(samples), opt.holdout);
    validation = ds.validation;

    const NormBounds bounds = NormBounds::for_array(default_array().p_max);
    const auto train_set = normalize_set(ds.train, bounds);
    TrainConfig tc;
    tc.epsilon = opt.eps;
    tc.max_epochs = opt.max_epochs;
    tc.rng_seed = opt.seed;
    tc.validate();
    net = Network::mppt_default(opt.seed, bounds);
    try {
      result = train(net, train_set, tc);
    } catch (const DidNotConverge& e) {
      result.history = e.history();
      result.converged = false;
      converged = false;
    }
  } catch (const Error& e) {
    err << "train: " << e.what() << "\n";
    return kUsage;
  }

  try {
    const TrainingInfo info{opt.seed, result.history.size() - 1, result.history.back(), converged};
    ensure_parent(opt.out);
    save_model(opt.out, net, &info);
    std::string hist = "epoch,loss\n";
    for (std::size_t k = 0; k < result.history.size(); ++k) {
      hist += std::to_string(k) + "," + format_double(result.history[k]) + "\n";
    }
    write_text_file(history_path(opt.out), hist);
  } catch (const Error& e) {
    err << "train: " << e.what() << "\n";
    return kUsage;
  }

  const double p_max = default_array().p_max;
  double worst = 0.0;
  for (const MppSample& s : validation) worst = std::max(worst, std::abs(predict(net, s.g, s.t) - s.p_mpp));
  out << "epochs " << result.history.size() - 1 << ", final E " << format_double(result.history.back()) << "\n";
  if (!validation.empty()) {
    out << "validation max error " << std::fixed << std::setprecision(4) << worst << " W ("
        << 100.0 * worst / p_max << "% of p_max) over " << validation.size() << " points\n";
    out.unsetf(std::ios::fixed);
  }
  out << "model written to " << opt.out << "\n";
  if (!converged) {
    err << "train: E did not reach " << format_double(opt.eps) << " within " << opt.max_epochs
        << " epochs; model written and flagged\n";
    return kNotConverged;
  }
  return kSuccess;
}

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  PvArrayConfig array;
  EnvProfile profile;
  std::unique_ptr<Controller> controller;
  fs::path dir;
  try {
    if (opt.config.empty()) throw ConfigError("--config is required");
    rc = load_run_config(opt.config);
    array = rc.array.build();
    profile = build_scenario(rc.scenario, array.n_substrings);
    controller = build_controller(rc, array);
    if (!opt.out.empty()) {
      dir = opt.out;
    } else if (const char* env = std::getenv("PVMPPT_OUTPUT_DIR"); env && *env) {
      dir = env;
    } else {
      dir = rc.output_dir;
    }
  } catch (const Error& e) {
    err << "simulate: " << e.what() << "\n";
    return kUsage;
  }

  SimTrace trace;
  try {
    trace = run(profile, rc.plant, *controller, array);
  } catch (const SimulationError& e) {
    err << "simulate: simulation failed at " << e.what() << "\n";
    return kSimulationFailed;
  } catch (const Error& e) {
    err << "simulate: " << e.what() << "\n";
    return kSimulationFailed;
  }

  try {
    fs::create_directories(dir);
    write_text_file((dir / "trace.csv").string(), trace_csv(trace));
    write_text_file((dir / "metrics.json").string(), metrics_json(trace.metrics, run_config_to_json(rc)));
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << "\n";
    return kUsage;
  }
  const Metrics& m = trace.metrics;
  out << "efficiency " << format_double(m.tracking_efficiency) << " ripple " << format_double(m.steady_state_ripple)
      << " settle_time " << format_double(m.settle_time) << " rows " << trace.rows.size() << " -> "
      << dir.string() << "\n";
  return kSuccess;
}

int cmd_compare(const CompareOptions& opt, std::ostream& out, std::ostream& err) {
  const PvArrayConfig& array = default_array();
  const PlantConfig plant;
  std::shared_ptr<const Network> net;
  try {
    if (!fs::exists(opt.model)) throw ConfigError("model file not found: " + opt.model);
    net = std::make_shared<const Network>(load_model(opt.model));
    fs::create_directories(opt.out);
  } catch (const std::exception& e) {
    err << "compare: " << e.what() << "\n";
    return kUsage;
  }

  struct Scenario {
    std::string name;
    EnvProfile profile;
    double lead_in;  // s, excluded from the reversal count
  };
  std::vector<Scenario> scenarios = {
      {"ramp_2s", scenario_ramp(300.0, 1000.0, 2.0, kStcTemperature, array.n_substrings), 1.0},
      {"ramp_10s", scenario_ramp(300.0, 1000.0, 10.0, kStcTemperature, array.n_substrings), 1.0},
  };
  if (opt.with_ripple_test) {
    scenarios.push_back({"stc", scenario_constant(kStcIrradiance, kStcTemperature, 3.0, array.n_substrings), 0.0});
  }
  const std::vector<std::string> names = {"po", "inc-cond", "rprop-nn"};
  const auto make = [&](const std::string& name) -> std::unique_ptr<Controller> {
    if (name == "po") return std::make_unique<PerturbObserveController>();
    if (name == "inc-cond") return std::make_unique<IncCondController>(IncCondConfig::for_array(array));
    return std::make_unique<RpropNnController>(net, array);
  };

  struct Row {
    std::string scenario, controller;
    bool ok = false;
    Metrics m;
    int reversals = 0;
  };
  std::vector<Row> rows;
  int failures = 0;
  for (const Scenario& sc : scenarios) {
    const auto oracle = oracle_series(sc.profile, array, plant.dt);
    for (const std::string& name : names) {
      Row row{sc.name, name, false, {}, 0};
      try {
        auto ctl = make(name);
        const SimTrace trace = run(sc.profile, plant, *ctl, array, &oracle);
        const std::string stem = (fs::path(opt.out) / (sc.name + "_" + name)).string();
        write_text_file(stem + "_trace.csv", trace_csv(trace));
        write_text_file(stem + "_locus.csv", locus_csv(operating_locus(trace)));
        row.ok = true;
        row.m = trace.metrics;
        row.reversals = voltage_reversals(operating_locus(trace, sc.lead_in));
      } catch (const std::exception& e) {
        ++failures;
        err << "compare: " << sc.name << " / " << name << " failed: " << e.what() << "\n";
      }
      rows.push_back(row);
    }
  }

  std::string summary = "scenario,controller,status,tracking_efficiency,steady_state_ripple,settle_time,voltage_reversals\n";
  for (const Row& r : rows) {
    summary += r.scenario + "," + r.controller + "," + (r.ok ? "ok" : "failed") + ",";
    if (r.ok) {
      summary += format_double(r.m.tracking_efficiency) + "," + format_double(r.m.steady_state_ripple) + "," +
                 format_double(r.m.settle_time) + "," + std::to_string(r.reversals);
    } else {
      summary += ",,,";
    }
    summary += "\n";
  }
  try {
    write_text_file((fs::path(opt.out) / "summary.csv").string(), summary);
  } catch (const Error& e) {
    err << "compare: " << e.what() << "\n";
    return kUsage;
  }

  out << std::left << std::setw(10) << "scenario" << std::setw(10) << "controller" << std::right << std::setw(12)
      << "efficiency" << std::setw(12) << "ripple" << std::setw(10) << "settle" << std::setw(11) << "reversals"
      << "\n";
  for (const Row& r : rows) {
    out << std::left << std::setw(10) << r.scenario << std::setw(10) << r.controller << std::right;
    if (r.ok) {
      out << std::fixed << std::setprecision(4) << std::setw(12) << r.m.tracking_efficiency << std::scientific
          << std::setprecision(2) << std::setw(12) << r.m.steady_state_ripple << std::fixed << std::setprecision(3)
          << std::setw(10) << r.m.settle_time << std::setw(11) << r.reversals << "\n";
      out.unsetf(std::ios::floatfield);
    } else {
      out << std::setw(12) << "failed" << "\n";
    }
  }
  const auto find = [&](const std::string& s, const std::string& c) -> const Row* {
    for (const Row& r : rows) {
      if (r.scenario == s && r.controller == c && r.ok) return &r;
    }
    return nullptr;
  };
  if (const Row *nn = find("ramp_2s", "rprop-nn"), *po = find("ramp_2s", "po"), *ic = find("ramp_2s", "inc-cond");
      nn && po && ic) {
    const bool best = nn->m.tracking_efficiency >= po->m.tracking_efficiency &&
                      nn->m.tracking_efficiency >= ic->m.tracking_efficiency;
    out << "ramp_2s: rprop-nn efficiency " << (best ? ">=" : "<") << " both baselines\n";
  }
  if (const Row *nn = find("stc", "rprop-nn"), *po = find("stc", "po"); nn && po) {
    const double ratio = nn->m.steady_state_ripple > 0.0 ? po->m.steady_state_ripple / nn->m.steady_state_ripple
                                                          : std::numeric_limits<double>::infinity();
    out << "stc: po ripple / rprop-nn ripple = " << format_double(ratio) << "\n";
  }
  out << "summary written to " << (fs::path(opt.out) / "summary.csv").string() << "\n";
  return failures == 0 ? kSuccess : kPartialBenchmark;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"PV maximum power point tracking toolkit"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Sweep the oracle over a (G, T) grid and write the dataset CSV");
  g->add_option("--g-min", gen.spec.g_min, "Lowest irradiance, W/m^2")->capture_default_str();
  g->add_option("--g-max", gen.spec.g_max, "Highest irradiance, W/m^2")->capture_default_str();
  g->add_option("--g-step", gen.spec.g_step, "Irradiance step, W/m^2")->capture_default_str();
  g->add_option("--t-min", gen.spec.t_min, "Lowest temperature, K")->capture_default_str();
  g->add_option("--t-max", gen.spec.t_max, "Highest temperature, K")->capture_default_str();
  g->add_option("--t-step", gen.spec.t_step, "Temperature step, K")->capture_default_str();
  g->add_option("--holdout", gen.spec.holdout_fraction, "Fraction held out for validation")->capture_default_str();
  g->add_option("--seed", gen.spec.rng_seed, "Shuffle seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output CSV path")->capture_default_str();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train the MPP-power network on a dataset CSV");
  t->add_option("--data", tr.data, "Dataset CSV")->capture_default_str();
  t->add_option("--eps", tr.eps, "Loss threshold")->capture_default_str();
  t->add_option("--max-epochs", tr.max_epochs, "Epoch limit")->capture_default_str();
  t->add_option("--seed", tr.seed, "Weight initialisation seed")->capture_default_str();
  t->add_option("--holdout", tr.holdout, "Tail fraction of the file used for validation")->capture_default_str();
  t->add_option("--out", tr.out, "Model JSON path")->capture_default_str();

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Run one closed-loop simulation from a run config");
  s->add_option("--config", sim.config, "Run config JSON")->required();
  s->add_option("--out", sim.out, "Output directory (overrides the config)");

  CompareOptions cmp;
  auto* c = app.add_subcommand("compare", "Benchmark po, inc-cond and rprop-nn on 2 s and 10 s ramps");
  c->add_option("--model", cmp.model, "Model JSON")->capture_default_str();
  c->add_option("--out", cmp.out, "Output directory")->capture_default_str();
  c->add_flag("--with-ripple-test", cmp.with_ripple_test, "Also run a constant-STC ripple comparison");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kUsage;
  }

  if (g->parsed()) return cmd_generate(gen, out, err);
  if (t->parsed()) return cmd_train(tr, out, err);
  if (s->parsed()) return cmd_simulate(sim, out, err);
  return cmd_compare(cmp, out, err);
}

}  // namespace pvmppt::cli
