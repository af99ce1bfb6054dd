#pragma once

// Offline training data: oracle MPPs over an irradiance/temperature grid.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "pvmppt/errors.hpp"
#include "pvmppt/io.hpp"
#include "pvmppt/nn.hpp"
#include "pvmppt/normalization.hpp"
#include "pvmppt/pv_model.hpp"

namespace pvmppt {

struct MppSample {
  double g = 0.0;      // W/m^2
  double t = 0.0;      // K
  double v_mpp = 0.0;  // V
  double p_mpp = 0.0;  // W

  bool operator==(const MppSample&) const = default;
};

struct DatasetSpec {
  double g_min = 100.0, g_max = 1000.0, g_step = 50.0;
  double t_min = 273.0, t_max = 323.0, t_step = 5.0;
  double holdout_fraction = 0.2;
  std::uint64_t rng_seed = 42;

  void validate() const {
    if (!(g_step > 0.0) || !(t_step > 0.0)) throw ConfigError("grid steps must be > 0");
    if (!(g_min >= 0.0) || !(g_max >= g_min)) throw ConfigError("irradiance range must satisfy 0 <= g_min <= g_max");
    if (!(t_min > 0.0) || !(t_max >= t_min)) throw ConfigError("temperature range must satisfy 0 < t_min <= t_max");
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout fraction must be in [0, 1)");
  }
};

/// Inclusive arithmetic grid lo, lo + step, ... <= hi.
inline std::vector<double> grid_axis(double lo, double hi, double step) {
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(lo + static_cast<double>(k) * step);
  return out;
}

inline MppSample mpp_sample(double g, double t, const PvArrayConfig& cfg) {
  const MppPoint m = find_mpp_oracle(EnvSample::uniform(g, t, cfg.n_substrings), cfg);
  return {g, t, m.v, m.p};
}

struct Dataset {
  std::vector<MppSample> train;
  std::vector<MppSample> validation;

  std::vector<MppSample> all() const {
    std::vector<MppSample> out = train;
    out.insert(out.end(), validation.begin(), validation.end());
    return out;
  }
};

/// Number of samples held out for validation from a set of n.
inline std::size_t holdout_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

/// Splits a shuffled sample list: the tail is the validation set.
inline Dataset split_dataset(std::vector<MppSample> samples, double holdout_fraction) {
  const std::size_t n_val = holdout_count(samples.size(), holdout_fraction);
  Dataset ds;
  ds.validation.assign(samples.end() - static_cast<std::ptrdiff_t>(n_val), samples.end());
  samples.resize(samples.size() - n_val);
  ds.train = std::move(samples);
  return ds;
}

/// One oracle MPP per grid point (uniform irradiance), seeded shuffle, split.
inline Dataset generate(const DatasetSpec& spec, const PvArrayConfig& cfg) {
  spec.validate();
  std::vector<MppSample> samples;
  for (double g : grid_axis(spec.g_min, spec.g_max, spec.g_step)) {
    for (double t : grid_axis(spec.t_min, spec.t_max, spec.t_step)) samples.push_back(mpp_sample(g, t, cfg));
  }
  Rng rng(spec.rng_seed);
  for (std::size_t k = samples.size(); k > 1; --k) {
    std::swap(samples[k - 1], samples[rng.below(k)]);
  }
  return split_dataset(std::move(samples), spec.holdout_fraction);
}

/// Min-max maps (G, T) -> inputs and P_mpp -> target.
inline std::vector<Sample> normalize_set(const std::vector<MppSample>& samples, const NormBounds& bounds) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const MppSample& s : samples) {
    bounds.check_inputs(s.g, s.t);
    if (!bounds.p.contains(s.p_mpp)) {
      throw BoundsViolation("MPP power " + std::to_string(s.p_mpp) + " W outside the output bounds");
    }
    out.push_back({{bounds.g.normalize(s.g), bounds.t.normalize(s.t)}, bounds.p.normalize(s.p_mpp)});
  }
  return out;
}

inline constexpr const char* kDatasetHeader = "g_wpm2,t_k,v_mpp_v,p_mpp_w";

inline std::string dataset_csv(const std::vector<MppSample>& samples) {
  std::ostringstream out;
  out << kDatasetHeader << '\n';
  for (const MppSample& s : samples) {
    out << format_double(s.g) << ',' << format_double(s.t) << ',' << format_double(s.v_mpp) << ','
        << format_double(s.p_mpp) << '\n';
  }
  return out.str();
}

inline std::vector<MppSample> parse_dataset_csv(std::istream& in) {
  std::vector<MppSample> out;
  for (const auto& row : read_numeric_csv(in, kDatasetHeader)) out.push_back({row[0], row[1], row[2], row[3]});
  return out;
}

}  // namespace pvmppt
