#include "xsection/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "xsection/error.hpp"
#include "xsection/preprocess.hpp"

namespace xs {

void SynthConfig::validate() const {
  if (n_stocks < 10) throw Error(ErrorKind::ConfigTooSmall, "n_stocks must be >= 10");
  if (n_months < kMaxLag + 2) throw Error(ErrorKind::ConfigTooSmall, "n_months must be >= 14");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "signal_strength must lie in [0, 1]");
  }
  if (signal_factor < 1 || signal_factor > static_cast<int>(kFactorCount)) {
    throw Error(ErrorKind::InvalidConfig, "signal_factor must lie in [1, 25]");
  }
  if (!(noise_sigma >= 0.0 && signal_sigma >= 0.0)) throw Error(ErrorKind::InvalidConfig, "sigmas must be >= 0");
  if (!(factor_rho > -1.0 && factor_rho < 1.0)) throw Error(ErrorKind::InvalidConfig, "factor_rho must lie in (-1, 1)");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw Error(ErrorKind::InvalidConfig, "missing_rate must lie in [0, 1)");
}

FactorPanel generate_panel(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto n = static_cast<std::size_t>(config.n_stocks);
  const auto sig = static_cast<std::size_t>(config.signal_factor - 1);
  const double innovation = std::sqrt(1.0 - config.factor_rho * config.factor_rho);

  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%04zu", i + 1);
    ids[i] = buf;
  }

  std::vector<std::array<double, kFactorCount>> state(n);
  for (auto& s : state) {
    for (auto& v : s) v = normal(rng);
  }

  std::vector<FactorRecord> records;
  records.reserve(n * static_cast<std::size_t>(config.n_months));
  std::vector<double> signal_values;
  std::vector<std::size_t> signal_members;
  for (int k = 0; k < config.n_months; ++k) {
    const MonthId month = config.start.plus_months(k);
    if (k > 0) {
      for (auto& s : state) {
        for (auto& v : s) v = config.factor_rho * v + innovation * normal(rng);
      }
    }
    const std::size_t first = records.size();
    for (std::size_t i = 0; i < n; ++i) {
      FactorRecord r;
      r.stock_id = ids[i];
      r.month = month;
      r.factors = state[i];
      if (config.missing_rate > 0.0) {
        for (std::size_t j = 0; j < kFactorCount; ++j) r.missing[j] = unit(rng) < config.missing_rate;
      }
      records.push_back(std::move(r));
    }

    signal_values.clear();
    signal_members.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = records[first + i];
      if (r.missing[sig]) continue;
      signal_values.push_back(r.factors[sig]);
      signal_members.push_back(i);
    }
    std::vector<double> planted(n, 0.0);
    if (!signal_values.empty()) {
      const auto ranks = average_ranks(signal_values);
      const double count = static_cast<double>(signal_values.size());
      for (std::size_t k2 = 0; k2 < ranks.size(); ++k2) {
        planted[signal_members[k2]] =
            config.signal_strength * (2.0 * ranks[k2] / count - 1.0) * config.signal_sigma;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double noise = config.noise_sigma > 0.0 ? config.noise_sigma * normal(rng) : 0.0;
      records[first + i].fwd_return = planted[i] + noise;
    }
  }
  return FactorPanel::from_records(std::move(records));
}

}  // namespace xs
