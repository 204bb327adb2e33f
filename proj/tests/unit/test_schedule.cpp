// SPDX-License-Identifier: Apache-2.0
#include "ptk/schedule.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

namespace sched = ptk::sched;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

sched::ScheduleConfig default_config() { return {}; }

}  // namespace

TEST_CASE("warmup is linear from zero") {
  auto cfg = default_config();
  CHECK(sched::lr_at(cfg, 0) == 0.0);
  CHECK(sched::lr_at(cfg, cfg.warmup_tokens / 2) == cfg.max_lr / 2);
  CHECK(sched::lr_at(cfg, 10'000'000'000ULL) == 1.5e-4);
}

TEST_CASE("decay reaches the floor and stays there") {
  auto cfg = default_config();
  CHECK(sched::lr_at(cfg, cfg.decay_end_tokens) == 1e-5);
  CHECK(sched::lr_at(cfg, cfg.decay_end_tokens + 12345) == 1e-5);
}

TEST_CASE("decay midpoint is the arithmetic mean of max and min") {
  auto cfg = default_config();
  std::uint64_t mid = cfg.warmup_tokens + (cfg.decay_end_tokens - cfg.warmup_tokens) / 2;
  CHECK_THAT(sched::lr_at(cfg, mid), WithinRel(8e-5, 1e-12));
}

TEST_CASE("continuity at the warmup boundary") {
  auto cfg = default_config();
  double left = sched::lr_at(cfg, cfg.warmup_tokens);
  double right = sched::lr_at(cfg, cfg.warmup_tokens + 1);
  CHECK(left == cfg.max_lr);
  CHECK_THAT(right, WithinRel(left, 1e-9));  // one-token step moves ~1e-22 of the range
}

TEST_CASE("lr is non-increasing and bounded after warmup") {
  auto cfg = default_config();
  double prev = sched::lr_at(cfg, cfg.warmup_tokens);
  for (int i = 1; i <= 10000; ++i) {
    std::uint64_t t = cfg.warmup_tokens +
                      (cfg.decay_end_tokens - cfg.warmup_tokens) / 10000 * static_cast<std::uint64_t>(i);
    double lr = sched::lr_at(cfg, t);
    CHECK(lr <= prev);
    CHECK(lr >= cfg.min_lr);
    CHECK(lr <= cfg.max_lr);
    prev = lr;
  }
}

TEST_CASE("schedule config validation") {
  auto cfg = default_config();
  cfg.min_lr = cfg.max_lr;
  CHECK_THROWS_AS(sched::lr_at(cfg, 0), ptk::Error);
  cfg = default_config();
  cfg.warmup_tokens = cfg.decay_end_tokens;
  CHECK_THROWS_AS(sched::lr_at(cfg, 0), ptk::Error);
}

TEST_CASE("emissions from energy") {
  CHECK(sched::emissions_tco2eq(448.0, 0.0) == 0.0);
  CHECK_THAT(sched::emissions_tco2eq(448.0, 0.024), WithinRel(10.752, 1e-9));
}

TEST_CASE("energy estimate composes runtime, power and intensity") {
  sched::EnergyModel m;
  m.device_count = 1000;
  m.device_power_watts = 400.0;
  m.pue = 1.04;
  m.carbon_intensity_kg_per_kwh = 0.1;
  m.throughput_tokens_per_sec = 100000.0;
  auto e = sched::estimate_energy(m, 360'000'000'0ULL);  // 3.6e9 tokens -> 36000 s -> 10 h
  CHECK_THAT(e.runtime_hours, WithinRel(10.0, 1e-12));
  CHECK_THAT(e.energy_mwh, WithinRel(1000 * 400.0 * 1.04 * 10.0 / 1e6, 1e-12));
  CHECK_THAT(e.emissions_tco2eq, WithinRel(e.energy_mwh * 0.1, 1e-12));
}

TEST_CASE("energy estimate is linear in tokens and in intensity") {
  sched::EnergyModel m;
  m.device_count = 512;
  m.device_power_watts = 500.0;
  m.carbon_intensity_kg_per_kwh = 0.05;
  m.throughput_tokens_per_sec = 174378.0;
  auto e1 = sched::estimate_energy(m, 1'000'000'000ULL);
  auto e3 = sched::estimate_energy(m, 3'000'000'000ULL);
  CHECK_THAT(e3.energy_mwh, WithinRel(3 * e1.energy_mwh, 1e-9));
  CHECK_THAT(e3.runtime_hours, WithinRel(3 * e1.runtime_hours, 1e-9));
  m.carbon_intensity_kg_per_kwh *= 2;
  auto e1b = sched::estimate_energy(m, 1'000'000'000ULL);
  CHECK_THAT(e1b.emissions_tco2eq, WithinRel(2 * e1.emissions_tco2eq, 1e-9));
}

TEST_CASE("flops approximation") {
  CHECK(sched::estimate_flops(1, 1) == 6.0);
  CHECK_THAT(sched::estimate_flops(34e9, 1e12), WithinRel(2.04e23, 1e-12));
  CHECK_THROWS_AS(sched::estimate_flops(0, 1), ptk::Error);
}
