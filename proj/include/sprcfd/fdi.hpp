#pragma once

// Observer-based fault detection and isolation for the pitch actuators.
//
// One estimator per actuator runs the healthy actuator model driven by the
// pitch reference and corrected by the measured pitch angle. Its residual
//   r_k = u_meas_k - u_hat_k
// is compared against the adaptive bound
//   rbar_k = sum_{h<k} alpha delta^(k-1-h) (drho_h + eta_x_h) + alpha delta^k eps_x0 + eta_y_k
// where |C A0^k| <= alpha delta^k and A0 = A - L C.

#include "sprcfd/common.hpp"
#include "sprcfd/numerics.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace sprcfd::fdi {

struct ThresholdBounds {
  double eta_x = 0.0;      // state uncertainty bound
  double eta_y = 0.0;      // measurement noise bound
  double eps_x0 = 0.0;     // initial estimation error bound
  double delta_rho = 0.0;  // nonlinearity mismatch bound

  void validate() const {
    if (eta_x < 0.0 || eta_y < 0.0 || eps_x0 < 0.0 || delta_rho < 0.0)
      throw std::invalid_argument("threshold bounds must be nonnegative");
  }
};

struct AlphaDelta {
  double alpha = 0.0;
  double delta = 0.0;
  int scan_length = 0;  // K such that |A0^K| <= delta^K closes the bound
};

inline double spectral_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

// delta = rho(A0) + margin and the smallest alpha with |C A0^k| <= alpha delta^k
// for every k. The scan stops at the first K with |A0^K| <= delta^K; any k then
// splits as qK + s and the bound follows from submultiplicativity.
inline AlphaDelta compute_alpha_delta(const Matrix& A0, const Matrix& C, double margin, int max_scan = 1000000) {
  const double rho = numerics::spectral_radius(A0);
  if (!(rho < 1.0)) throw std::invalid_argument("compute_alpha_delta: A0 is not Schur stable");
  if (margin < 0.0) throw std::invalid_argument("compute_alpha_delta: margin must be >= 0");
  AlphaDelta out;
  out.delta = rho + margin;
  if (!(out.delta < 1.0)) throw std::invalid_argument("compute_alpha_delta: rho(A0) + margin must be < 1");
  if (!(out.delta > 0.0)) throw std::invalid_argument("compute_alpha_delta: delta must be positive");

  Matrix power = Matrix::Identity(A0.rows(), A0.cols());
  double delta_pow = 1.0;
  double alpha = 0.0;
  for (int k = 0; k < max_scan; ++k) {
    alpha = std::max(alpha, spectral_norm(C * power) / delta_pow);
    power = power * A0;
    delta_pow *= out.delta;
    if (spectral_norm(power) <= delta_pow * (1.0 + 1e-12)) {
      out.alpha = alpha;
      out.scan_length = k + 1;
      return out;
    }
  }
  throw std::runtime_error("compute_alpha_delta: no contraction found within scan limit");
}

// Ackermann observer gain placing every eigenvalue of A - L C at pole_radius.
inline Matrix observer_gain(const Matrix& A, const Matrix& C, double pole_radius) {
  const auto n = A.rows();
  if (C.rows() != 1) throw std::invalid_argument("observer_gain: single-output models only");
  if (pole_radius < 0.0 || pole_radius >= 1.0) throw std::invalid_argument("observer_gain: radius must lie in [0, 1)");
  Matrix O(n, n);
  Matrix row = C;
  for (Eigen::Index i = 0; i < n; ++i) {
    O.row(i) = row;
    row = row * A;
  }
  Eigen::FullPivLU<Matrix> lu(O);
  lu.setThreshold(1e-10);
  if (lu.rank() < n) throw std::invalid_argument("observer_gain: (A, C) is not observable");

  // (A - r I)^n
  const Matrix shifted = A - pole_radius * Matrix::Identity(n, n);
  Matrix poly = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) poly = poly * shifted;
  Vector en = Vector::Zero(n);
  en(n - 1) = 1.0;
  return poly * lu.solve(en);
}

struct Fdie {
  StateSpaceModel model;
  Matrix L;
  Vector xhat;
  double z = 0.0;  // threshold recursion state
  double alpha = 1.0;
  double delta = 0.0;
  ThresholdBounds bounds;
  long steps = 0;

  Matrix closed_loop() const { return model.A - L * model.C; }
};

inline Fdie design_fdie(const StateSpaceModel& actuator_model, double pole_radius, const ThresholdBounds& bounds = {},
                        double delta_margin = 0.02) {
  actuator_model.validate();
  bounds.validate();
  Fdie f;
  f.model = actuator_model;
  f.L = observer_gain(actuator_model.A, actuator_model.C, pole_radius);
  const Matrix A0 = f.closed_loop();
  if (!(numerics::spectral_radius(A0) < 1.0)) throw std::runtime_error("design_fdie: observer is not stable");
  const auto ad = compute_alpha_delta(A0, actuator_model.C, pole_radius == 0.0 ? std::max(delta_margin, 1e-3) : delta_margin);
  f.alpha = ad.alpha;
  f.delta = ad.delta;
  f.bounds = bounds;
  f.xhat = Vector::Zero(actuator_model.states());
  f.z = f.alpha * bounds.eps_x0;
  return f;
}

// Start the estimate at the steady state of a constant reference.
inline void initialize_at(Fdie& f, double u_ref) {
  const Matrix I = Matrix::Identity(f.model.states(), f.model.states());
  f.xhat = (I - f.model.A).partialPivLu().solve(f.model.B * u_ref);
}

// Residual of one sample; advances the estimate.
inline double step_fdie(Fdie& f, double u_ref, double u_meas) {
  const double u_hat = (f.model.C * f.xhat)(0) + f.model.D(0, 0) * u_ref;
  const double r = u_meas - u_hat;
  f.xhat = f.model.A * f.xhat + f.model.B * u_ref + f.L * r;
  ++f.steps;
  return r;
}

// Threshold of the current sample with per-sample bounds; advances the recursion.
inline double threshold_step(Fdie& f, double delta_rho, double eta_x, double eta_y) {
  const double rbar = f.z + eta_y;
  f.z = f.delta * f.z + f.alpha * (delta_rho + eta_x);
  return rbar;
}

inline double threshold_step(Fdie& f) {
  return threshold_step(f, f.bounds.delta_rho, f.bounds.eta_x, f.bounds.eta_y);
}

struct FdDecision {
  int d_fd = 0;  // 0 healthy, l = isolated faulty actuator (1-based)
  std::optional<long> k_d;
  bool ambiguous = false;
  std::array<int, kBlades> consecutive{0, 0, 0};  // samples above threshold in a row
};

// Latched fusion of the three residual tests. A blade counts as crossing once
// its residual has exceeded the threshold for `confirm` consecutive samples.
inline FdDecision fuse_decision(const Triple& residuals, const Triple& thresholds, long k, const FdDecision& prev,
                                int confirm = 1) {
  FdDecision next = prev;
  int crossing = 0;
  int which = 0;
  for (int l = 0; l < kBlades; ++l) {
    next.consecutive[l] = std::abs(residuals[l]) > thresholds[l] ? prev.consecutive[l] + 1 : 0;
    if (next.consecutive[l] >= confirm) {
      ++crossing;
      which = l + 1;
    }
  }
  if (prev.d_fd != 0) return next;
  if (crossing == 1) {
    next.d_fd = which;
    next.k_d = k;
  } else if (crossing >= 2) {
    next.ambiguous = true;
  }
  return next;
}

struct FdiParams {
  double pole_radius = 0.95;
  double delta_margin = 0.02;
  double noise_std = 1.224744871391589;  // sqrt(1.5)
  double eta_y_sigmas = 4.0;
  double eps_x0 = 0.1;
  int confirm_samples = 10;
};

// The three estimators plus the fused decision.
class FdiBank {
 public:
  FdiBank(const StateSpaceModel& actuator_model, const FdiParams& params, double initial_reference)
      : params_(params) {
    ThresholdBounds b;
    b.eta_y = params.eta_y_sigmas * params.noise_std;
    b.eps_x0 = params.eps_x0;
    for (auto& f : estimators_) {
      f = design_fdie(actuator_model, params.pole_radius, b, params.delta_margin);
      initialize_at(f, initial_reference);
    }
  }

  struct Sample {
    Triple residual{};
    Triple threshold{};
    int raw_crossings = 0;
  };

  Sample step(const Triple& u_ref, const Triple& u_meas, long k) {
    Sample s;
    for (int l = 0; l < kBlades; ++l) {
      s.threshold[l] = threshold_step(estimators_[l]);
      s.residual[l] = step_fdie(estimators_[l], u_ref[l], u_meas[l]);
      if (std::abs(s.residual[l]) > s.threshold[l]) ++s.raw_crossings;
    }
    const bool was_ambiguous = decision_.ambiguous;
    decision_ = fuse_decision(s.residual, s.threshold, k, decision_, params_.confirm_samples);
    if (decision_.ambiguous && !was_ambiguous) ambiguous_at_ = k;
    return s;
  }

  const FdDecision& decision() const { return decision_; }
  std::optional<long> ambiguous_at() const { return ambiguous_at_; }
  const Fdie& estimator(int blade) const { return estimators_[blade]; }
  const FdiParams& params() const { return params_; }

 private:
  FdiParams params_;
  std::array<Fdie, kBlades> estimators_;
  FdDecision decision_;
  std::optional<long> ambiguous_at_;
};

}  // namespace sprcfd::fdi
