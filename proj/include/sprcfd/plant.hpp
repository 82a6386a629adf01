#pragma once

// Rotor-blade load surrogate: maps the three physical pitch angles to three
// blade-root out-of-plane moments under a once-per-revolution disturbance.
//
// Per blade l (0-based):
//   s_l[k+1] = a s_l[k] + (1 - a) g0 (sat(pitch_l[k]) - collective)
//   y_l[k]   = s_l[k] + coupling * sum_{m != l} s_m[k] cos(psi_m[k])
//              + A sin(psi_l[k]) + e_l[k]
// with psi_l = 2 pi (k mod P) / P + 2 pi l / 3 and a = exp(-Ts / tau).
// The coupling term is the fixed-frame tilt moment of the other blades'
// pitch-induced load deviations, seen by every blade root. A blade held away
// from the collective therefore puts a 1P load on the other two.

#include "sprcfd/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sprcfd::plant {

enum class LoadCaseId { LC1 = 1, LC2 = 2, LC3 = 3 };

struct LoadCase {
  LoadCaseId id = LoadCaseId::LC1;
  double wind_speed = 0.0;             // U_hub, m/s
  double disturbance_amplitude = 0.0;  // kN m
  double collective_setpoint = 0.0;    // deg
  double stuck_angle = 0.0;            // deg, paired PAS scenario on blade 3
};

inline std::string to_string(LoadCaseId id) { return "LC" + std::to_string(static_cast<int>(id)); }

inline LoadCaseId parse_load_case(std::string_view name) {
  if (name == "LC1") return LoadCaseId::LC1;
  if (name == "LC2") return LoadCaseId::LC2;
  if (name == "LC3") return LoadCaseId::LC3;
  throw std::invalid_argument("unknown load case '" + std::string(name) + "'");
}

inline LoadCase load_case_params(LoadCaseId id) {
  switch (id) {
    case LoadCaseId::LC1: return {LoadCaseId::LC1, 12.0, 400.0, 8.0, 20.0};
    case LoadCaseId::LC2: return {LoadCaseId::LC2, 16.0, 550.0, 14.0, 0.0};
    case LoadCaseId::LC3: return {LoadCaseId::LC3, 20.0, 700.0, 19.0, 10.0};
  }
  throw std::invalid_argument("unknown load case id");
}

struct PlantParams {
  int rotor_period_samples = 625;  // 9.6 rpm at Ts = 0.01 s
  double Ts = 0.01;
  double time_constant = 0.5;  // s
  double dc_gain = -300.0;     // kN m / deg
  double coupling = 0.3;
  double noise_fraction = 0.02;  // load noise std relative to disturbance amplitude
  bool noise_enabled = true;
  bool disturbance_enabled = true;
  double pitch_min = -5.0;
  double pitch_max = 90.0;
  double initial_azimuth = 0.0;  // rad

  void validate() const {
    if (rotor_period_samples < 4) throw std::invalid_argument("plant: rotor period must be >= 4 samples");
    if (!(Ts > 0.0)) throw std::invalid_argument("plant: Ts must be positive");
    if (!(time_constant > 0.0)) throw std::invalid_argument("plant: time constant must be positive");
    if (!(noise_fraction >= 0.0)) throw std::invalid_argument("plant: noise fraction must be >= 0");
    if (!(pitch_min < pitch_max)) throw std::invalid_argument("plant: empty pitch range");
  }
};

// Periodic load component on blade `blade` (0-based) at rotor azimuth `azimuth`.
inline double periodic_disturbance(double azimuth, int blade, const LoadCase& lc) {
  return lc.disturbance_amplitude * std::sin(azimuth + kTwoPi * blade / kBlades);
}

struct PlantState {
  long sample = 0;
  Triple filter{0.0, 0.0, 0.0};
};

class Plant {
 public:
  Plant(const PlantParams& params, const LoadCase& lc, std::uint64_t seed)
      : params_(params), lc_(lc), rng_(derive_seed(seed, streams::kPlantNoise)) {
    params_.validate();
    pole_ = std::exp(-params_.Ts / params_.time_constant);
    noise_std_ = params_.noise_fraction * lc_.disturbance_amplitude;
  }

  const PlantState& state() const { return state_; }
  const LoadCase& load_case() const { return lc_; }
  const PlantParams& params() const { return params_; }
  double pole() const { return pole_; }

  double azimuth() const { return azimuth_at(state_.sample); }

  double azimuth_at(long k) const {
    const long P = params_.rotor_period_samples;
    return params_.initial_azimuth + kTwoPi * static_cast<double>(k % P) / static_cast<double>(P);
  }

  long saturation_count(int blade) const { return saturated_[blade]; }

  // Emits the loads of the current sample, then advances the pitch-to-load
  // filters with the (range-limited) pitch angles.
  Triple step(const Triple& pitch) {
    const double psi = azimuth();
    Triple y{};
    Triple tilt{};
    for (int m = 0; m < kBlades; ++m) tilt[m] = state_.filter[m] * std::cos(psi + kTwoPi * m / kBlades);
    for (int l = 0; l < kBlades; ++l) {
      double v = state_.filter[l];
      for (int m = 0; m < kBlades; ++m)
        if (m != l) v += params_.coupling * tilt[m];
      if (params_.disturbance_enabled) v += periodic_disturbance(psi, l, lc_);
      if (params_.noise_enabled && noise_std_ > 0.0) v += noise_std_ * normal_(rng_);
      y[l] = v;
    }
    for (int l = 0; l < kBlades; ++l) {
      double angle = pitch[l];
      if (angle < params_.pitch_min || angle > params_.pitch_max) {
        ++saturated_[l];
        angle = std::clamp(angle, params_.pitch_min, params_.pitch_max);
      }
      const double target = params_.dc_gain * (angle - lc_.collective_setpoint);
      state_.filter[l] = pole_ * state_.filter[l] + (1.0 - pole_) * target;
    }
    ++state_.sample;
    return y;
  }

 private:
  PlantParams params_;
  LoadCase lc_;
  PlantState state_;
  double pole_ = 0.0;
  double noise_std_ = 0.0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::array<long, kBlades> saturated_{0, 0, 0};
};

}  // namespace sprcfd::plant
