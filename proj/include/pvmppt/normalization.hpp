#pragma once

#include <string>

#include "pvmppt/errors.hpp"

namespace pvmppt {

/// Closed interval used for min-max scaling onto [0, 1].
struct MinMax {
  double lo = 0.0;
  double hi = 1.0;

  double normalize(double x) const { return (x - lo) / (hi - lo); }
  double denormalize(double u) const { return lo + u * (hi - lo); }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool operator==(const MinMax&) const = default;
};

/// Fixed scaling of the network's inputs (irradiance, temperature) and
/// output (MPP power).
struct NormBounds {
  MinMax g{0.0, 1200.0};    // W/m^2
  MinMax t{253.0, 348.0};   // K
  MinMax p{0.0, 127.05};    // W, 1.1 * p_max of the default array

  static NormBounds for_array(double p_max) {
    NormBounds b;
    b.p = {0.0, 1.1 * p_max};
    return b;
  }

  void check_inputs(double g_wpm2, double t_k) const {
    if (!g.contains(g_wpm2) || !t.contains(t_k)) {
      throw BoundsViolation("(G = " + std::to_string(g_wpm2) + " W/m^2, T = " +
                            std::to_string(t_k) + " K) lies outside the normalization envelope");
    }
  }

  bool operator==(const NormBounds&) const = default;
};

}  // namespace pvmppt
