#pragma once

// Subspace predictive repetitive control, one decoupled pipeline per blade.
//
// Every sample the periodic difference dx_k = x_k - x_{k-P} of the pitch and
// load signals feeds a QR-RLS estimate of the predictor Markov row
//   dy_k = Xi [dU_{k-p..k-1}; dY_{k-p..k-1}] + de_k.
// Once per rotor period the row is lifted to a period-to-period model of the
// 1P-projected load, an LQR gain is synthesised on it, and the sine/cosine
// coefficients theta of the repetitive pitch waveform phi * theta are updated.

#include "sprcfd/common.hpp"
#include "sprcfd/numerics.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sprcfd::sprc {

using Vector2 = Eigen::Vector2d;

inline constexpr int kLiftedStates = 6;
inline constexpr int kBasis = 2;

struct SprcParams {
  int period = 625;      // P, samples per rotor revolution
  int past_window = 100;  // p
  double forgetting = 0.99999;
  double rls_init_scale = 1e-4;
  Matrix Q = Matrix::Identity(kLiftedStates, kLiftedStates);
  Matrix R = 0.1 * Matrix::Identity(kBasis, kBasis);
  double sigma = 1.0;
  double beta = 0.1;
  int control_start_periods = 4;  // first theta update at the end of this period index
  double dare_tol = 1e-9;
  int dare_max_iter = 10000;
  double reseed_factor_scale = 0.1;  // warm start keeps 1e-2 of the information

  void validate() const {
    if (period < 4) throw std::invalid_argument("sprc: period must be >= 4");
    if (past_window < 1 || past_window >= period) throw std::invalid_argument("sprc: need 1 <= p < P");
    if (!(forgetting > 0.0 && forgetting <= 1.0)) throw std::invalid_argument("sprc: forgetting must lie in (0, 1]");
    if (Q.rows() != kLiftedStates || Q.cols() != kLiftedStates) throw std::invalid_argument("sprc: Q must be 6x6");
    if (R.rows() != kBasis || R.cols() != kBasis) throw std::invalid_argument("sprc: R must be 2x2");
    if (sigma < 0.0 || sigma > 1.0 || beta < 0.0 || beta > 1.0)
      throw std::invalid_argument("sprc: sigma and beta must lie in [0, 1]");
    if (!(reseed_factor_scale > 0.0)) throw std::invalid_argument("sprc: reseed scale must be positive");
  }
};

// P x 2 basis with columns sin(2 pi k / P) and cos(2 pi k / P).
inline Matrix build_basis(int P) {
  if (P < 4) throw std::invalid_argument("build_basis: P must be >= 4");
  Matrix phi(P, kBasis);
  for (int k = 0; k < P; ++k) {
    const double a = kTwoPi * static_cast<double>(k) / static_cast<double>(P);
    phi(k, 0) = std::sin(a);
    phi(k, 1) = std::cos(a);
  }
  return phi;
}

// Periodic-difference history for the three blades.
class DeltaBuffers {
 public:
  DeltaBuffers(int P, int p) : P_(P), p_(p) {
    if (P < 1 || p < 1) throw std::invalid_argument("DeltaBuffers: P and p must be positive");
    for (int l = 0; l < kBlades; ++l) {
      u_raw_[l].assign(P, 0.0);
      y_raw_[l].assign(P, 0.0);
      du_[l].assign(p, 0.0);
      dy_[l].assign(p, 0.0);
      regressor_[l].assign(2 * static_cast<std::size_t>(p), 0.0);
    }
  }

  int period() const { return P_; }
  int past_window() const { return p_; }
  long samples() const { return count_; }
  bool warm() const { return count_ > static_cast<long>(P_) + p_; }

  // Pushes sample k = samples(). Returns true when a regressor/target pair is
  // available for this sample (k >= P + p).
  bool push(const Triple& u, const Triple& y) {
    const long k = count_;
    const auto slot = static_cast<std::size_t>(k % P_);
    bool ready = false;
    if (k >= P_) {
      const long m = k - P_;  // index of this delta
      for (int l = 0; l < kBlades; ++l) {
        const double du = u[l] - u_raw_[l][slot];
        const double dy = y[l] - y_raw_[l][slot];
        last_du_[l] = du;
        last_dy_[l] = dy;
        if (m >= p_) {
          // The ring holds deltas m-p .. m-1; write them out oldest first.
          auto& reg = regressor_[l];
          const auto head = static_cast<std::size_t>(m % p_);
          std::size_t j = 0;
          for (std::size_t i = head; i < static_cast<std::size_t>(p_); ++i, ++j) {
            reg[j] = du_[l][i];
            reg[p_ + j] = dy_[l][i];
          }
          for (std::size_t i = 0; i < head; ++i, ++j) {
            reg[j] = du_[l][i];
            reg[p_ + j] = dy_[l][i];
          }
          target_[l] = dy;
          ready = true;
        }
        du_[l][static_cast<std::size_t>(m % p_)] = du;
        dy_[l][static_cast<std::size_t>(m % p_)] = dy;
      }
    }
    for (int l = 0; l < kBlades; ++l) {
      u_raw_[l][slot] = u[l];
      y_raw_[l][slot] = y[l];
    }
    ++count_;
    return ready;
  }

  std::span<const double> regressor(int blade) const { return regressor_[blade]; }
  double target(int blade) const { return target_[blade]; }
  double last_du(int blade) const { return last_du_[blade]; }
  double last_dy(int blade) const { return last_dy_[blade]; }

 private:
  int P_;
  int p_;
  long count_ = 0;
  std::array<std::vector<double>, kBlades> u_raw_, y_raw_;
  std::array<std::vector<double>, kBlades> du_, dy_;
  std::array<std::vector<double>, kBlades> regressor_;
  Triple target_{};
  Triple last_du_{};
  Triple last_dy_{};
};

// Per-blade Markov row estimates, regressor layout [dU; dY] oldest first.
class MarkovEstimate {
 public:
  MarkovEstimate(int p, double forgetting, double init_scale) : p_(p) {
    for (auto& r : rls_) r = numerics::RlsEstimator(2 * p, forgetting, init_scale);
  }

  int past_window() const { return p_; }

  // Returns false when the blade's factor is flagged degenerate.
  bool identify_step(int blade, std::span<const double> regressor, double dy) {
    if (frozen_[blade]) return true;
    const bool ok = rls_[blade].update(regressor, dy);
    if (!ok) ++degenerate_events_;
    return ok;
  }

  Vector row(int blade) const { return rls_[blade].estimate(); }
  numerics::RlsEstimator& rls(int blade) { return rls_[blade]; }
  const numerics::RlsEstimator& rls(int blade) const { return rls_[blade]; }

  void freeze(int blade) { frozen_[blade] = true; }
  bool frozen(int blade) const { return frozen_[blade]; }
  long degenerate_events() const { return degenerate_events_; }

 private:
  int p_;
  std::array<numerics::RlsEstimator, kBlades> rls_;
  std::array<bool, kBlades> frozen_{false, false, false};
  long degenerate_events_ = 0;
};

// Iterates the identified predictor over one future period.
//   out[i] = Xi_u . U[i .. i+p) + Xi_y . Y[i .. i+p)
// where U = [past_du; future_du] and Y = [past_dy; out] (predicted outputs
// are fed back in place of the unknown future measurements).
inline Vector predict_period(const Vector& xi, int P, int p, const Vector& past_du, const Vector& past_dy,
                             const Vector& future_du) {
  std::vector<double> U(static_cast<std::size_t>(p + P), 0.0);
  std::vector<double> Y(static_cast<std::size_t>(p + P), 0.0);
  for (int q = 0; q < p; ++q) {
    U[q] = past_du[q];
    Y[q] = past_dy[q];
  }
  for (int i = 0; i < P; ++i) U[p + i] = future_du[i];
  const double* xu = xi.data();
  const double* xy = xi.data() + p;
  Vector out(P);
  for (int i = 0; i < P; ++i) {
    double acc = 0.0;
    const double* u = &U[i];
    const double* y = &Y[i];
    for (int q = 0; q < p; ++q) acc += xu[q] * u[q] + xy[q] * y[q];
    out[i] = acc;
    Y[p + i] = acc;
  }
  return out;
}

struct LiftedModel {
  Matrix Abar;  // 6 x 6 on [Ybar; dtheta; dYbar]
  Matrix Bbar;  // 6 x 2
  Matrix Mu;    // carry-over of last period's input change
  Matrix My;    // carry-over of last period's output change
  Matrix N;     // in-period response to this period's input change
};

// Period-to-period model of the projected load
//   Ybar_{j+1} = Ybar_j + Mu dtheta_j + My dYbar_j + N dtheta_{j+1}
// from one blade's Markov row. The past window is the last p samples of the
// previous period, so its input and output changes are phi_tail * (.)
inline LiftedModel build_lifted(const Vector& xi, int P, int p, const Matrix& phi, const Matrix& phi_pinv) {
  if (xi.size() != 2 * p) throw std::invalid_argument("build_lifted: Markov row must have 2p entries");
  if (phi.rows() != P || phi.cols() != kBasis) throw std::invalid_argument("build_lifted: basis must be P x 2");
  const Matrix tail = phi.bottomRows(p);
  const Vector zp = Vector::Zero(p);
  const Vector zP = Vector::Zero(P);

  LiftedModel m;
  m.Mu.resize(kBasis, kBasis);
  m.My.resize(kBasis, kBasis);
  m.N.resize(kBasis, kBasis);
  for (int c = 0; c < kBasis; ++c) {
    const Vector tc = tail.col(c);
    const Vector fc = phi.col(c);
    m.Mu.col(c) = phi_pinv * predict_period(xi, P, p, tc, zp, zP);
    m.My.col(c) = phi_pinv * predict_period(xi, P, p, zp, tc, zP);
    m.N.col(c) = phi_pinv * predict_period(xi, P, p, zp, zp, fc);
  }

  m.Abar = Matrix::Zero(kLiftedStates, kLiftedStates);
  m.Abar.block<2, 2>(0, 0).setIdentity();
  m.Abar.block<2, 2>(0, 2) = m.Mu;
  m.Abar.block<2, 2>(0, 4) = m.My;
  m.Abar.block<2, 2>(4, 2) = m.Mu;
  m.Abar.block<2, 2>(4, 4) = m.My;
  m.Bbar = Matrix::Zero(kLiftedStates, kBasis);
  m.Bbar.block<2, 2>(0, 0) = m.N;
  m.Bbar.block<2, 2>(2, 0).setIdentity();
  m.Bbar.block<2, 2>(4, 0) = m.N;
  return m;
}

struct GainUpdate {
  Matrix K;
  bool ok = false;
  double closed_loop_radius = 0.0;
  std::string error;
};

// LQR gain for one lifted model; on failure the previous gain is kept.
inline GainUpdate update_gain(const LiftedModel& lifted, const Matrix& Q, const Matrix& R, const Matrix& previous,
                              double tol = 1e-9, int max_iter = 10000) {
  GainUpdate g;
  try {
    const auto sol = numerics::solve_dare(lifted.Abar, lifted.Bbar, Q, R, tol, max_iter);
    g.K = sol.K;
    g.ok = true;
    g.closed_loop_radius = numerics::spectral_radius(lifted.Abar - lifted.Bbar * sol.K);
  } catch (const std::exception& e) {
    g.K = previous;
    g.error = e.what();
  }
  return g;
}

// Repetitive law of one blade.
struct BladeLaw {
  Vector2 theta = Vector2::Zero();
  Vector2 theta_prev = Vector2::Zero();
  std::optional<Vector2> ybar_prev;
  Matrix K;  // 2 x 6, empty until the first successful synthesis

  bool has_gain() const { return K.size() != 0; }

  Eigen::Matrix<double, 6, 1> lifted_state(const Vector2& ybar) const {
    Eigen::Matrix<double, 6, 1> x;
    x << ybar, theta - theta_prev, ybar_prev ? Vector2(ybar - *ybar_prev) : Vector2::Zero();
    return x;
  }
};

// theta_{j+1} = sigma theta_j - beta K [Ybar_j; dtheta_j; dYbar_j]
inline void theta_update(BladeLaw& law, const Vector2& ybar, const Matrix& K, double sigma, double beta) {
  const auto x = law.lifted_state(ybar);
  const Vector2 next = sigma * law.theta - beta * (K * x);
  law.theta_prev = law.theta;
  law.theta = next;
  law.ybar_prev = ybar;
}

// phi[k mod P] * theta for every blade.
inline Triple control_output(const std::array<BladeLaw, kBlades>& laws, const Matrix& phi, int k_mod_P) {
  Triple u{};
  for (int l = 0; l < kBlades; ++l) u[l] = phi(k_mod_P, 0) * laws[l].theta(0) + phi(k_mod_P, 1) * laws[l].theta(1);
  return u;
}

// Per-blade random binary level (+-amplitude, redrawn every `hold` samples)
// through a first-order low-pass with unit DC gain.
class Prbs {
 public:
  Prbs(double amplitude, double cutoff_hz, double Ts, int hold, std::uint64_t seed)
      : amplitude_(amplitude), hold_(hold), rng_(derive_seed(seed, streams::kPrbs)) {
    if (amplitude < 0.0) throw std::invalid_argument("prbs: amplitude must be >= 0");
    if (!(cutoff_hz > 0.0) || !(Ts > 0.0)) throw std::invalid_argument("prbs: cutoff and Ts must be positive");
    if (hold < 1) throw std::invalid_argument("prbs: hold must be >= 1");
    pole_ = std::exp(-kTwoPi * cutoff_hz * Ts);
  }

  double pole() const { return pole_; }

  Triple next() {
    if (counter_ % hold_ == 0)
      for (auto& b : level_) b = (rng_() >> 63) ? amplitude_ : -amplitude_;
    ++counter_;
    for (int l = 0; l < kBlades; ++l) state_[l] = pole_ * state_[l] + (1.0 - pole_) * level_[l];
    return state_;
  }

 private:
  double amplitude_;
  int hold_;
  double pole_ = 0.0;
  long counter_ = 0;
  std::mt19937_64 rng_;
  Triple level_{};
  Triple state_{};
};

struct PeriodRecord {
  long period = 0;  // j
  std::array<Vector2, kBlades> theta;  // theta_j, in force during period j
};

// The per-blade pipelines wired together and clocked by the sample index.
class SprcController {
 public:
  explicit SprcController(const SprcParams& params)
      : params_(params),
        phi_(build_basis(params.period)),
        phi_pinv_(numerics::pseudo_inverse(phi_)),
        buffers_(params.period, params.past_window),
        markov_(params.past_window, params.forgetting, params.rls_init_scale) {
    params_.validate();
    history_.push_back(snapshot(0));
  }

  const SprcParams& params() const { return params_; }
  const Matrix& basis() const { return phi_; }
  const Matrix& basis_pinv() const { return phi_pinv_; }
  const DeltaBuffers& buffers() const { return buffers_; }
  const MarkovEstimate& markov() const { return markov_; }
  MarkovEstimate& markov() { return markov_; }
  const BladeLaw& law(int blade) const { return laws_[blade]; }
  BladeLaw& law(int blade) { return laws_[blade]; }
  const std::array<BladeLaw, kBlades>& laws() const { return laws_; }
  const std::vector<PeriodRecord>& history() const { return history_; }
  const Triple& identification_residual() const { return id_residual_; }
  long dare_failures() const { return dare_failures_; }
  long gain_updates() const { return gain_updates_; }
  // largest rho(Abar - Bbar K) over all accepted gains
  double max_closed_loop_radius() const { return max_radius_; }
  bool frozen(int blade) const { return frozen_[blade]; }

  Triple output(long k) const { return control_output(laws_, phi_, static_cast<int>(k % params_.period)); }

  // Feeds the physical pitch and measured load of sample k.
  void observe(long k, const Triple& u, const Triple& y) {
    if (buffers_.push(u, y)) {
      for (int l = 0; l < kBlades; ++l) {
        if (frozen_[l]) continue;
        markov_.identify_step(l, buffers_.regressor(l), buffers_.target(l));
        id_residual_[l] = markov_.rls(l).last_prior_error();
      }
    }
    const int slot = static_cast<int>(k % params_.period);
    for (int l = 0; l < kBlades; ++l) ybar_acc_[l] += phi_pinv_.col(slot) * y[l];
    if (slot == params_.period - 1) end_of_period(k / params_.period);
  }

  // Pre-tuned values take over at sample k. The RLS factors keep their
  // information directions but are scaled down and recentred on `xi`; the
  // lifted memory restarts so the partial period is not used.
  void warm_start(const std::array<Vector, kBlades>& xi, const std::array<Vector2, kBlades>& theta) {
    for (int l = 0; l < kBlades; ++l) {
      auto& rls = markov_.rls(l);
      rls.reseed(params_.reseed_factor_scale * rls.factor(), xi[l]);
      laws_[l].theta = theta[l];
      laws_[l].theta_prev = theta[l];
      laws_[l].ybar_prev.reset();
      if (!frozen_[l]) synthesize(l);
    }
    discard_next_period_ = true;
  }

  // Stops adaptation of blade `blade` (0-based); its waveform is held.
  void freeze(int blade) {
    frozen_[blade] = true;
    markov_.freeze(blade);
  }

 private:
  PeriodRecord snapshot(long j) const {
    PeriodRecord r;
    r.period = j;
    for (int l = 0; l < kBlades; ++l) r.theta[l] = laws_[l].theta;
    return r;
  }

  bool synthesize(int l) {
    const auto lifted = build_lifted(markov_.row(l), params_.period, params_.past_window, phi_, phi_pinv_);
    const auto g = update_gain(lifted, params_.Q, params_.R, laws_[l].K, params_.dare_tol, params_.dare_max_iter);
    if (!g.ok) {
      ++dare_failures_;
    } else {
      ++gain_updates_;
      max_radius_ = std::max(max_radius_, g.closed_loop_radius);
    }
    laws_[l].K = g.K;
    return g.ok;
  }

  void end_of_period(long j) {
    const bool identified = buffers_.samples() > static_cast<long>(params_.period) + 2L * params_.past_window;
    const bool active = identified && j + 1 >= params_.control_start_periods;
    for (int l = 0; l < kBlades; ++l) {
      const Vector2 ybar = ybar_acc_[l];
      ybar_acc_[l].setZero();
      if (frozen_[l]) continue;
      if (discard_next_period_) continue;
      if (!active) {
        laws_[l].ybar_prev = ybar;
        laws_[l].theta_prev = laws_[l].theta;
        continue;
      }
      synthesize(l);
      if (!laws_[l].has_gain()) {
        laws_[l].ybar_prev = ybar;
        laws_[l].theta_prev = laws_[l].theta;
        continue;
      }
      theta_update(laws_[l], ybar, laws_[l].K, params_.sigma, params_.beta);
    }
    discard_next_period_ = false;
    history_.push_back(snapshot(j + 1));
  }

  SprcParams params_;
  Matrix phi_;
  Matrix phi_pinv_;
  DeltaBuffers buffers_;
  MarkovEstimate markov_;
  std::array<BladeLaw, kBlades> laws_;
  std::array<Vector2, kBlades> ybar_acc_{Vector2::Zero(), Vector2::Zero(), Vector2::Zero()};
  std::array<bool, kBlades> frozen_{false, false, false};
  bool discard_next_period_ = false;
  Triple id_residual_{};
  long dare_failures_ = 0;
  long gain_updates_ = 0;
  double max_radius_ = 0.0;
  std::vector<PeriodRecord> history_;
};

}  // namespace sprcfd::sprc
