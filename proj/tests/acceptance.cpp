// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "pvmppt/pvmppt.hpp"

using namespace pvmppt;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << x;
  return s.str();
}

int cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "pvmppt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

double tail_mean(const SimTrace& tr, double from) {
  double s = 0.0;
  int n = 0;
  for (const TraceRow& r : tr.rows) {
    if (r.t >= from) {
      s += r.p_actual;
      ++n;
    }
  }
  return n ? s / n : 0.0;
}

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  const PvArrayConfig cfg = calibrate(PvArrayConfig{});
  const double secs = seconds_since(t0);
  const EnvSample stc = EnvSample::uniform(1000.0, 298.15, cfg.n_substrings);
  const double i0 = array_current(0.0, stc, cfg);
  const double i10 = array_current(10.0, stc, cfg);
  const MppPoint mpp = find_mpp_oracle(stc, cfg);
  const bool ok = std::abs(i0 - 15.0) <= 0.075 && std::abs(i10) <= 0.075 && std::abs(mpp.v - 8.25) <= 0.0825 &&
                  std::abs(mpp.p - 115.5) <= 1.155 && secs < 1.0;
  report(1, ok,
         "I(0)=" + fmt(i0, 6) + " A, I(10)=" + fmt(i10, 3) + " A, MPP=(" + fmt(mpp.v, 5) + " V, " + fmt(mpp.p, 6) +
             " W), " + fmt(secs * 1e3, 3) + " ms");
}

void criterion2() {
  bool ok = compute_isc_real({1000.0, 300.0}, 15.0) == 15.0;
  for (int k = 0; k < 100; ++k) {
    const double g = 10.0 + 11.9 * k, t = 253.0 + 0.95 * k;
    ok = ok && compute_isc_real({g, 300.0}, 15.0) < compute_isc_real({g + 11.9, 300.0}, 15.0);
    ok = ok && compute_isc_real({800.0, t}, 15.0) < compute_isc_real({800.0, t + 0.95}, 15.0);
  }
  report(2, ok, "I_sc_real(1000, 300) = " + fmt(compute_isc_real({1000.0, 300.0}, 15.0), 17) +
                    " A, monotone in G and T on 100 points");
}

void criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(314);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  bool ok = true;
  for (int trial = 0; trial < 20; ++trial) {
    Network net = Network::mppt_default(500 + trial);
    std::vector<Sample> batch;
    for (int k = 0; k < 10; ++k) batch.push_back({{u(rng), u(rng)}, u(rng)});
    const auto grad = backward(net, batch);
    for (std::size_t k = 0; k < grad.size(); ++k) {
      const double saved = net.params()[k];
      const double h = 1e-5;
      net.params()[k] = saved + h;
      const double ep = loss(net, batch);
      net.params()[k] = saved - h;
      const double em = loss(net, batch);
      net.params()[k] = saved;
      const double fd = (ep - em) / (2.0 * h);
      const double scale = std::max(std::abs(fd), std::abs(grad[k]));
      if (scale < 1e-8) continue;  // both vanish
      const double rel = std::abs(fd - grad[k]) / scale;
      worst = std::max(worst, rel);
      ok = ok && rel <= 1e-4;
    }
  }
  const double secs = seconds_since(t0);
  report(3, ok && secs < 10.0, "max relative error " + fmt(worst, 3) + " over 20 nets, " + fmt(secs, 3) + " s");
}

void criterion4() {
  const TrainConfig cfg;
  std::mt19937_64 rng(271);
  std::normal_distribution<double> n(0.0, 1.0);
  std::bernoulli_distribution zero(0.1);
  Network net = Network::mppt_default(3);
  std::vector<double> g(net.params().size());
  bool ok = true;
  long checked = 0;
  for (int it = 0; it < 500; ++it) {
    for (double& x : g) x = zero(rng) ? 0.0 : n(rng);
    const std::vector<double> before =
        net.step_sizes.empty() ? std::vector<double>(g.size(), cfg.mu_init) : net.step_sizes;
    rprop_update(net, g, cfg);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double after = net.step_sizes[k];
      bool matched = false;
      for (double f : {1.2, 0.5, 1.0}) matched = matched || after == std::clamp(before[k] * f, cfg.mu_min, cfg.mu_max);
      ok = ok && matched && after >= cfg.mu_min && after <= cfg.mu_max;
      ++checked;
    }
  }
  report(4, ok, std::to_string(checked) + " step-size updates, ratios in {1.2, 0.5, 1}, bounded in [1e-6, 1]");
}

std::shared_ptr<const Network> criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const PvArrayConfig& cfg = default_array();
  const Dataset ds = generate(DatasetSpec{}, cfg);
  const NormBounds bounds = NormBounds::for_array(cfg.p_max);
  auto net = std::make_shared<Network>(Network::mppt_default(42, bounds));
  std::string note = "converged";
  try {
    const auto res = train(*net, normalize_set(ds.train, bounds), TrainConfig{});
    note = "converged after " + std::to_string(res.history.size() - 1) + " epochs";
  } catch (const DidNotConverge& e) {
    note = "stopped at max_epochs with E=" + fmt(e.final_loss(), 3);
  }
  const double secs = seconds_since(t0);
  double worst = 0.0;
  for (const MppSample& s : ds.validation) {
    const double y = nn_reference(*net, {s.g, s.t}, cfg.p_max);
    worst = std::max(worst, std::abs(y - s.p_mpp) / cfg.p_max);
  }
  report(5, ds.all().size() == 209 && worst <= 0.02 && secs < 60.0,
         std::to_string(ds.validation.size()) + " held-out points, max error " + fmt(100.0 * worst, 3) +
             "% of p_max, " + note + ", " + fmt(secs, 3) + " s");
  return net;
}

void criterion6(const std::shared_ptr<const Network>& net) {
  const PvArrayConfig& cfg = default_array();
  RpropNnController c(net, cfg);
  const SimTrace tr = run(scenario_case1(cfg.n_substrings), PlantConfig{}, c, cfg);
  std::vector<double> actual, ref;
  for (const TraceRow& r : tr.rows) {
    if (r.t >= 1.0 && r.t < 2.0) {
      actual.push_back(r.p_actual);
      ref.push_back(r.p_ref);
    }
  }
  const double ra = ripple(actual), rr = ripple(ref);
  const double eff = tr.metrics.tracking_efficiency;
  report(6, eff >= 0.97 && ra < rr,
         "efficiency " + fmt(eff) + " (>= 0.97), fast-window ripple p_actual " + fmt(ra) + " vs p_ref " + fmt(rr));
}

void criterion7(const std::shared_ptr<const Network>& net) {
  const PvArrayConfig& cfg = default_array();
  const EnvProfile env = scenario_partial_shade(1000.0, 500.0, 298.15, 5.0, cfg.n_substrings);
  const PlantConfig plant;
  const double target = find_mpp_oracle(env.at(0.0), cfg).p * (1.0 - plant.loss_fraction);
  const double thr = 0.94 * compute_isc_real({env.at(0.0).aggregate_g(), 298.15}, cfg.i_sc_stc);

  RpropNnConfig sup;
  sup.supervision.gamma = 0.479;
  RpropNnController c(net, cfg, sup);
  const SimTrace tr = run(env, plant, c, cfg);
  const double steady = tail_mean(tr, 4.0);
  const double final_i = tr.rows.back().i;

  RpropNnConfig raw = sup;
  raw.supervision_enabled = false;
  RpropNnController u(net, cfg, raw);
  const SimTrace tu = run(env, plant, u, cfg);
  double above = 0.0;
  for (const TraceRow& r : tu.rows) {
    if (r.i > thr) above += tu.dt;
  }
  const bool power_ok = std::abs(steady - target) <= 0.05 * target;
  report(7, power_ok && final_i < thr && above > 0.2,
         "steady power " + fmt(steady) + " W vs target " + fmt(target) + " W (" + (power_ok ? "within" : "outside") +
             " 5%), final current " + fmt(final_i) + " A < " + fmt(thr) + " A, unsupervised above threshold for " +
             fmt(above) + " s");
}

void criterion8(const std::shared_ptr<const Network>& net) {
  const PvArrayConfig& cfg = default_array();
  bool ok = true;
  std::string detail;
  for (double ramp : {2.0, 10.0}) {
    const EnvProfile env = scenario_ramp(300.0, 1000.0, ramp, 298.15, cfg.n_substrings);
    const auto oracle = oracle_series(env, cfg, PlantConfig{}.dt);
    IncCondController ic(IncCondConfig::for_array(cfg));
    RpropNnController nn(net, cfg);
    const SimTrace ti = run(env, PlantConfig{}, ic, cfg, &oracle);
    const SimTrace tn = run(env, PlantConfig{}, nn, cfg, &oracle);
    const int ic_rev = voltage_reversals(operating_locus(ti));
    const int nn_rev = voltage_reversals(operating_locus(tn, 1.0));
    ok = ok && tn.metrics.tracking_efficiency > ti.metrics.tracking_efficiency && nn_rev == 0;
    if (ramp == 2.0) ok = ok && ic_rev >= 1;
    detail += fmt(ramp, 3) + " s ramp: nn " + fmt(tn.metrics.tracking_efficiency) + " vs inc-cond " +
              fmt(ti.metrics.tracking_efficiency) + ", reversals inc-cond " + std::to_string(ic_rev) + " nn " +
              std::to_string(nn_rev) + "; ";
  }
  detail.resize(detail.size() - 2);
  report(8, ok, detail);
}

void criterion9(const std::shared_ptr<const Network>& net) {
  const PvArrayConfig& cfg = default_array();
  const EnvProfile env = scenario_constant(1000.0, 298.15, 3.0, cfg.n_substrings);

  // Record the P&O command stream alongside the run.
  struct Recorder : PerturbObserveController {
    std::vector<double> refs;
    ControllerCommand step(const Measurement& m) override {
      const auto c = PerturbObserveController::step(m);
      refs.push_back(c.value);
      return c;
    }
  } po;
  const SimTrace tp = run(env, PlantConfig{}, po, cfg);
  RpropNnController nn(net, cfg);
  const SimTrace tn = run(env, PlantConfig{}, nn, cfg);
  bool repeats = false;
  for (std::size_t k = 2; k < po.refs.size(); ++k) {
    repeats = repeats || (po.refs[k] == po.refs[k - 1] && po.refs[k - 1] == po.refs[k - 2]);
  }
  const double rp = tp.metrics.steady_state_ripple, rn = tn.metrics.steady_state_ripple;
  report(9, rp >= 10.0 * rn && !repeats,
         "ripple po " + fmt(rp) + " vs rprop-nn " + fmt(rn) + ", " + std::to_string(po.refs.size()) +
             " P&O commands, " + (repeats ? "a reference repeated three times" : "no triple repeats"));
}

void criterion10(const std::shared_ptr<const Network>& net) {
  const fs::path dir = fs::temp_directory_path() / "pvmppt_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto p = [&](const std::string& name) { return (dir / name).string(); };
  bool ok = true;
  std::vector<std::string> compared;
  const auto same = [&](const std::string& a, const std::string& b) {
    const bool eq = read_text_file(a) == read_text_file(b);
    ok = ok && eq;
    compared.push_back(fs::path(a).filename().string());
  };

  cli_run({"generate", "--out", p("d1.csv")});
  cli_run({"generate", "--out", p("d2.csv")});
  same(p("d1.csv"), p("d2.csv"));

  cli_run({"train", "--data", p("d1.csv"), "--out", p("m1.json")});
  cli_run({"train", "--data", p("d1.csv"), "--out", p("m2.json")});
  same(p("m1.json"), p("m2.json"));
  same(p("m1.history.csv"), p("m2.history.csv"));

  save_model(p("net.json"), *net);
  write_text_file(p("run.json"),
                  R"({"controller": {"type": "rprop-nn", "model_path": "net.json"}, "scenario": {"type": "case1"}})");
  cli_run({"simulate", "--config", p("run.json"), "--out", p("s1")});
  cli_run({"simulate", "--config", p("run.json"), "--out", p("s2")});
  same(p("s1/trace.csv"), p("s2/trace.csv"));
  same(p("s1/metrics.json"), p("s2/metrics.json"));

  cli_run({"compare", "--model", p("net.json"), "--out", p("c1"), "--with-ripple-test"});
  cli_run({"compare", "--model", p("net.json"), "--out", p("c2"), "--with-ripple-test"});
  for (const auto& e : fs::directory_iterator(p("c1"))) {
    same(e.path().string(), (fs::path(p("c2")) / e.path().filename()).string());
  }
  report(10, ok, std::to_string(compared.size()) + " output files compared byte for byte across repeated runs");
}

}  // namespace

int main() {
  try {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    const auto net = criterion5();
    criterion6(net);
    criterion7(net);
    criterion8(net);
    criterion9(net);
    criterion10(net);
  } catch (const std::exception& e) {
    std::printf("FAIL aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
