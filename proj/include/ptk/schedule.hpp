// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "ptk/error.hpp"

namespace ptk::sched {

struct ScheduleConfig {
  double max_lr = 1.5e-4;
  double min_lr = 1e-5;
  std::uint64_t warmup_tokens = 10'000'000'000ULL;
  std::uint64_t decay_end_tokens = 1'000'000'000'000ULL;

  void validate() const {
    require(max_lr > 0 && min_lr > 0 && min_lr < max_lr,
            "schedule: need 0 < min_lr < max_lr");
    require(warmup_tokens > 0 && warmup_tokens < decay_end_tokens,
            "schedule: need 0 < warmup_tokens < decay_end_tokens");
  }
};

/// Linear warmup from zero to max_lr, half-cosine decay to min_lr at
/// decay_end_tokens, constant min_lr afterwards. Continuous everywhere.
inline double lr_at(const ScheduleConfig& config, std::uint64_t tokens) {
  config.validate();
  if (tokens <= config.warmup_tokens) {
    return config.max_lr * (static_cast<double>(tokens) /
                            static_cast<double>(config.warmup_tokens));
  }
  if (tokens >= config.decay_end_tokens) return config.min_lr;
  double progress = static_cast<double>(tokens - config.warmup_tokens) /
                    static_cast<double>(config.decay_end_tokens - config.warmup_tokens);
  return config.min_lr +
         (config.max_lr - config.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

struct EnergyModel {
  std::uint64_t device_count = 0;
  double device_power_watts = 0;
  double pue = 1.04;
  double carbon_intensity_kg_per_kwh = 0;
  double throughput_tokens_per_sec = 0;

  void validate() const {
    require(device_count > 0 && device_power_watts > 0 && pue > 0 &&
                throughput_tokens_per_sec > 0,
            "energy model: device count, power, PUE and throughput must be positive");
    require(carbon_intensity_kg_per_kwh >= 0, "energy model: carbon intensity must be >= 0");
  }
};

struct EnergyEstimate {
  double runtime_hours = 0;
  double energy_mwh = 0;
  double emissions_tco2eq = 0;
};

/// tCO2eq from megawatt-hours: 1 MWh = 1000 kWh, 1 t = 1000 kg, so the
/// factors cancel and tonnes = MWh x kg/kWh.
inline double emissions_tco2eq(double energy_mwh, double carbon_intensity_kg_per_kwh) {
  return energy_mwh * carbon_intensity_kg_per_kwh;
}

/// Upper-bound estimate: devices at full power for the whole run, scaled by
/// PUE, times the grid's carbon intensity.
inline EnergyEstimate estimate_energy(const EnergyModel& model, std::uint64_t total_tokens) {
  model.validate();
  require(total_tokens > 0, "estimate_energy: total_tokens must be positive");
  EnergyEstimate e;
  double runtime_s = static_cast<double>(total_tokens) / model.throughput_tokens_per_sec;
  e.runtime_hours = runtime_s / 3600.0;
  double watts = static_cast<double>(model.device_count) * model.device_power_watts * model.pue;
  e.energy_mwh = watts * e.runtime_hours / 1e6;
  e.emissions_tco2eq = emissions_tco2eq(e.energy_mwh, model.carbon_intensity_kg_per_kwh);
  return e;
}

/// Forward+backward FLOPs approximation: 6 x parameters x tokens. Ignores
/// activation recomputation, so framework-reported figures will run higher.
inline double estimate_flops(double params, double tokens) {
  require(params > 0 && tokens > 0, "estimate_flops: inputs must be positive");
  return 6.0 * params * tokens;
}

}  // namespace ptk::sched
