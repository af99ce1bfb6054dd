#pragma once

// Run configuration document: array, plant, controller, scenario, output
// directory. See docs/formats.md for the schema.

#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pvmppt/controllers.hpp"
#include "pvmppt/errors.hpp"
#include "pvmppt/io.hpp"
#include "pvmppt/model_io.hpp"
#include "pvmppt/pv_model.hpp"
#include "pvmppt/sim.hpp"

namespace pvmppt {

struct ArraySettings {
  PvArrayConfig datasheet;            // uncalibrated fields only
  double series_resistance_scale = 1.0;  // > 1 models an aged array

  /// Calibrates the datasheet, then scales the fitted series resistance.
  PvArrayConfig build() const {
    PvArrayConfig cfg = calibrate(datasheet);
    cfg.series_resistance *= series_resistance_scale;
    return cfg;
  }
};

struct ControllerSettings {
  std::string type = "rprop-nn";  // po | inc-cond | rprop-nn
  PoConfig po;
  IncCondConfig inc_cond;
  bool inc_cond_delta_set = false;
  RpropNnConfig nn;
  std::string model_path;
};

struct ScenarioSettings {
  std::string type = "constant";  // constant | ramp | partial_shade | case1 | profile
  nlohmann::json params = nlohmann::json::object();
};

struct RunConfig {
  ArraySettings array;
  PlantConfig plant;
  ControllerSettings controller;
  ScenarioSettings scenario;
  std::string output_dir = "out";
  std::filesystem::path base_dir;  // directory of the config file
};

namespace detail {

class Fields {
 public:
  Fields(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void opt(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  void allow(const char* key) { seen_.insert(key); }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown key " + where_ + "." + key);
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j, std::filesystem::path base_dir = {}) {
  RunConfig rc;
  rc.base_dir = std::move(base_dir);
  detail::Fields top(j, "config");

  nlohmann::json empty = nlohmann::json::object();
  const auto section = [&](const char* key) -> const nlohmann::json& { return j.contains(key) ? j.at(key) : empty; };
  top.opt("output_dir", rc.output_dir);
  for (const char* key : {"array", "plant", "controller", "scenario"}) top.allow(key);
  top.finish();

  {
    detail::Fields f(section("array"), "array");
    auto& d = rc.array.datasheet;
    f.opt("v_oc", d.v_oc);
    f.opt("i_sc", d.i_sc);
    f.opt("v_mpp", d.v_mpp);
    f.opt("p_max", d.p_max);
    f.opt("i_sc_stc", d.i_sc_stc);
    f.opt("n_substrings", d.n_substrings);
    f.opt("cells_per_substring", d.cells_per_substring);
    f.opt("temp_coeff_isc", d.temp_coeff_isc);
    f.opt("temp_coeff_voc", d.temp_coeff_voc);
    f.opt("series_resistance_scale", rc.array.series_resistance_scale);
    f.finish();
    if (!(rc.array.series_resistance_scale > 0.0)) throw ConfigError("array.series_resistance_scale must be > 0");
  }
  {
    detail::Fields f(section("plant"), "plant");
    f.opt("dt", rc.plant.dt);
    f.opt("pi_kp", rc.plant.pi_kp);
    f.opt("pi_ki", rc.plant.pi_ki);
    f.opt("v_slew_max", rc.plant.v_slew_max);
    f.opt("loss_fraction", rc.plant.loss_fraction);
    f.opt("v_start_fraction", rc.plant.v_start_fraction);
    f.finish();
    rc.plant.validate();
  }
  {
    detail::Fields f(section("controller"), "controller");
    auto& c = rc.controller;
    f.opt("type", c.type);
    if (c.type == "po") {
      f.opt("v_step", c.po.v_step);
      f.opt("period", c.po.period);
    } else if (c.type == "inc-cond") {
      f.opt("v_step", c.inc_cond.v_step);
      f.opt("period", c.inc_cond.period);
      c.inc_cond_delta_set = f.has("delta");
      f.opt("delta", c.inc_cond.delta);
    } else if (c.type == "rprop-nn") {
      f.opt("model_path", c.model_path);
      f.opt("gamma", c.nn.supervision.gamma);
      f.opt("threshold_frac", c.nn.supervision.threshold_frac);
      f.opt("supervision", c.nn.supervision_enabled);
      f.opt("tick_period", c.nn.supervision.tick_period);
      f.opt("deadband_g", c.nn.supervision.deadband_g);
      f.opt("deadband_t", c.nn.supervision.deadband_t);
      f.opt("reference_derating", c.nn.reference_derating);
      if (c.model_path.empty()) throw ConfigError("controller.model_path is required for rprop-nn");
      c.nn.supervision.validate();
    } else {
      throw ConfigError("unknown controller type '" + c.type + "' (expected po, inc-cond or rprop-nn)");
    }
    f.finish();
  }
  {
    const auto& s = section("scenario");
    if (!s.is_object()) throw ConfigError("scenario must be an object");
    rc.scenario.type = s.value("type", std::string("constant"));
    rc.scenario.params = s;
    rc.scenario.params.erase("type");
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j, std::filesystem::path(path).parent_path());
}

/// Builds the environment profile named by the scenario section.
inline EnvProfile build_scenario(const ScenarioSettings& s, int n_substrings) {
  detail::Fields f(s.params, "scenario");
  EnvProfile p;
  if (s.type == "constant") {
    double g = kStcIrradiance, t_k = kStcTemperature, duration = 3.0;
    f.opt("g", g);
    f.opt("t_k", t_k);
    f.opt("duration", duration);
    f.finish();
    p = scenario_constant(g, t_k, duration, n_substrings);
  } else if (s.type == "ramp") {
    double g_from = 300.0, g_to = 1000.0, ramp_seconds = 2.0, t_k = kStcTemperature;
    f.opt("g_from", g_from);
    f.opt("g_to", g_to);
    f.opt("ramp_seconds", ramp_seconds);
    f.opt("t_k", t_k);
    f.finish();
    p = scenario_ramp(g_from, g_to, ramp_seconds, t_k, n_substrings);
  } else if (s.type == "partial_shade") {
    double g_full = 1000.0, g_shaded = 500.0, t_k = kStcTemperature, duration = 5.0;
    f.opt("g_full", g_full);
    f.opt("g_shaded", g_shaded);
    f.opt("t_k", t_k);
    f.opt("duration", duration);
    f.finish();
    p = scenario_partial_shade(g_full, g_shaded, t_k, duration, n_substrings);
  } else if (s.type == "case1") {
    f.finish();
    p = scenario_case1(n_substrings);
  } else if (s.type == "profile") {
    std::string interp = "linear";
    nlohmann::json points = nlohmann::json::array();
    f.opt("duration", p.duration);
    f.opt("interpolation", interp);
    f.opt("breakpoints", points);
    f.finish();
    if (interp == "linear") {
      p.interpolation = Interpolation::linear;
    } else if (interp == "step") {
      p.interpolation = Interpolation::step;
    } else {
      throw ConfigError("scenario.interpolation must be 'step' or 'linear'");
    }
    for (const auto& bp : points) {
      detail::Fields pf(bp, "scenario.breakpoints[]");
      Breakpoint b;
      nlohmann::json g;
      pf.opt("t", b.time);
      pf.opt("g", g);
      pf.opt("t_k", b.env.t);
      pf.finish();
      if (g.is_number()) {
        b.env = EnvSample::uniform(g.get<double>(), b.env.t, n_substrings);
      } else if (g.is_array()) {
        b.env.g = g.get<std::vector<double>>();
      } else {
        throw ConfigError("scenario.breakpoints[].g must be a number or an array");
      }
      p.breakpoints.push_back(std::move(b));
    }
    p.validate();
  } else {
    throw ConfigError("unknown scenario type '" + s.type + "'");
  }
  return p;
}

/// Resolves a path from the config relative to the config file's directory.
inline std::string resolve_path(const RunConfig& rc, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || rc.base_dir.empty()) return p.string();
  return (rc.base_dir / p).string();
}

inline std::unique_ptr<Controller> build_controller(const RunConfig& rc, const PvArrayConfig& array) {
  const auto& c = rc.controller;
  if (c.type == "po") return std::make_unique<PerturbObserveController>(c.po);
  if (c.type == "inc-cond") {
    IncCondConfig ic = c.inc_cond;
    if (!c.inc_cond_delta_set) ic.delta = IncCondConfig::for_array(array).delta;
    return std::make_unique<IncCondController>(ic);
  }
  const std::string path = resolve_path(rc, c.model_path);
  if (!std::filesystem::exists(path)) throw ConfigError("model file not found: " + path);
  auto net = std::make_shared<const Network>(load_model(path));
  return std::make_unique<RpropNnController>(std::move(net), array, c.nn);
}

/// Echo of the effective configuration, written into the metrics file.
inline nlohmann::json run_config_to_json(const RunConfig& rc) {
  const auto& d = rc.array.datasheet;
  nlohmann::json j;
  j["array"] = {{"v_oc", d.v_oc},
                {"i_sc", d.i_sc},
                {"v_mpp", d.v_mpp},
                {"p_max", d.p_max},
                {"i_sc_stc", d.i_sc_stc},
                {"n_substrings", d.n_substrings},
                {"cells_per_substring", d.cells_per_substring},
                {"temp_coeff_isc", d.temp_coeff_isc},
                {"temp_coeff_voc", d.temp_coeff_voc},
                {"series_resistance_scale", rc.array.series_resistance_scale}};
  j["plant"] = {{"dt", rc.plant.dt},
                {"pi_kp", rc.plant.pi_kp},
                {"pi_ki", rc.plant.pi_ki},
                {"v_slew_max", rc.plant.v_slew_max},
                {"loss_fraction", rc.plant.loss_fraction},
                {"v_start_fraction", rc.plant.v_start_fraction}};
  const auto& c = rc.controller;
  nlohmann::json cj = {{"type", c.type}};
  if (c.type == "po") {
    cj["v_step"] = c.po.v_step;
    cj["period"] = c.po.period;
  } else if (c.type == "inc-cond") {
    cj["v_step"] = c.inc_cond.v_step;
    cj["period"] = c.inc_cond.period;
    if (c.inc_cond_delta_set) cj["delta"] = c.inc_cond.delta;
  } else {
    cj["model_path"] = c.model_path;
    cj["gamma"] = c.nn.supervision.gamma;
    cj["threshold_frac"] = c.nn.supervision.threshold_frac;
    cj["supervision"] = c.nn.supervision_enabled;
    cj["tick_period"] = c.nn.supervision.tick_period;
    cj["deadband_g"] = c.nn.supervision.deadband_g;
    cj["deadband_t"] = c.nn.supervision.deadband_t;
    cj["reference_derating"] = c.nn.reference_derating;
  }
  j["controller"] = cj;
  nlohmann::json sj = rc.scenario.params;
  sj["type"] = rc.scenario.type;
  j["scenario"] = sj;
  j["output_dir"] = rc.output_dir;
  return j;
}

inline std::string metrics_json(const Metrics& m, const nlohmann::json& config_echo) {
  nlohmann::json j;
  j["tracking_efficiency"] = m.tracking_efficiency;
  j["steady_state_ripple"] = m.steady_state_ripple;
  j["settle_time"] = m.settle_time;
  j["config"] = config_echo;
  return j.dump(2) + "\n";
}

}  // namespace pvmppt
