#pragma once

#include <cstdint>

#include "xsection/month.hpp"
#include "xsection/panel.hpp"

namespace xs {

struct SynthConfig {
  int n_stocks = 200;
  int n_months = 84;
  MonthId start{2000, 1};
  double signal_strength = 0.3;  // s in [0, 1]
  int signal_factor = 1;         // 1-based factor column carrying the signal
  double signal_sigma = 0.09;    // return spread of the planted rank signal at s = 1
  double noise_sigma = 0.06;     // iid normal return noise
  double factor_rho = 0.9;       // AR(1) persistence of every factor
  double missing_rate = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Factor columns follow stationary AR(1) paths; the return over t -> t+1 is
//   s * (2 * rank_t(signal) / n - 1) * signal_sigma + noise_sigma * N(0, 1)
// and is stored on every month, including the last one.
FactorPanel generate_panel(const SynthConfig& config);

}  // namespace xs
