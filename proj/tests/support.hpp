#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "pvmppt/pvmppt.hpp"

namespace pvmppt::fixtures {

/// Network trained once per process on the default grid with default
/// settings. Training may stop at max_epochs; the net is used either way.
inline std::shared_ptr<const Network> trained_network() {
  static const std::shared_ptr<const Network> net = [] {
    const PvArrayConfig& cfg = default_array();
    const NormBounds bounds = NormBounds::for_array(cfg.p_max);
    const Dataset ds = generate(DatasetSpec{}, cfg);
    auto n = std::make_shared<Network>(Network::mppt_default(42, bounds));
    try {
      train(*n, normalize_set(ds.train, bounds), TrainConfig{});
    } catch (const DidNotConverge&) {
    }
    return std::shared_ptr<const Network>(n);
  }();
  return net;
}

inline const Dataset& default_dataset() {
  static const Dataset ds = generate(DatasetSpec{}, default_array());
  return ds;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("pvmppt_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Maximum power over a 1 mV voltage sweep, independent of the golden
/// section refinement.
inline MppPoint dense_sweep_mpp(const EnvSample& env, const PvArrayConfig& cfg, double step = 1e-3) {
  const ArrayModel model(env, cfg);
  MppPoint best;
  double seed = model.isc();
  for (double v = 0.0; v <= model.voc(); v += step) {
    const double i = model.current(v, seed);
    seed = i;
    if (v * i > best.p) best = {v, v * i};
  }
  return best;
}

}  // namespace pvmppt::fixtures
