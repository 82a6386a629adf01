#pragma once

// Small dense numerical kernels shared by the controller, the diagnoser and
// the simulation harness: square-root (QR) recursive least squares, a
// fixed-point discrete Riccati solver, a full-column-rank pseudo-inverse,
// zero-order-hold discretization of the pitch actuator and a Welch PSD.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sprcfd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Raised when an iterative kernel fails to reach its tolerance. Carries the
// last residual so callers can log it.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Discrete-time LTI model x+ = A x + B u, y = C x + D u sampled at Ts.
struct StateSpaceModel {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;
  double Ts = 0.0;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }

  void validate() const {
    const auto n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() ||
        D.cols() != B.cols()) {
      throw std::invalid_argument("StateSpaceModel: inconsistent dimensions");
    }
    if (!(Ts > 0.0)) throw std::invalid_argument("StateSpaceModel: Ts must be positive");
  }

  // Steady-state gain C (I - A)^-1 B + D.
  Matrix dc_gain() const {
    const Matrix I = Matrix::Identity(states(), states());
    return C * (I - A).partialPivLu().solve(B) + D;
  }
};

namespace numerics {

inline double spectral_radius(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Exponentially weighted least squares in square-root information form.
//
// The state is an upper-triangular factor R and a transformed right-hand side
// z such that the current estimate w solves R w = z. Each update scales the
// prior array by sqrt(lambda) and annihilates the new regressor row with a
// sweep of Givens rotations, so the estimate minimises
//   sum_i lambda^(k-i) (y_i - x_i' w)^2 + lambda^k eps^2 |w|^2
// with eps the initial diagonal of R.
class RlsEstimator {
 public:
  RlsEstimator() = default;

  RlsEstimator(int regressor_dim, double forgetting, double init_scale = 1e-4)
      : n_(regressor_dim), lambda_(forgetting) {
    if (regressor_dim <= 0) throw std::invalid_argument("RlsEstimator: dimension must be positive");
    if (!(forgetting > 0.0 && forgetting <= 1.0))
      throw std::invalid_argument("RlsEstimator: forgetting factor must lie in (0, 1]");
    if (!(init_scale > 0.0)) throw std::invalid_argument("RlsEstimator: init_scale must be positive");
    sqrt_lambda_ = std::sqrt(lambda_);
    r_.assign(static_cast<std::size_t>(n_) * n_, 0.0);
    z_.assign(n_, 0.0);
    work_.assign(n_, 0.0);
    for (int i = 0; i < n_; ++i) at(i, i) = init_scale;
  }

  int dim() const { return n_; }
  double forgetting() const { return lambda_; }
  long updates() const { return updates_; }

  // One rank-1 step. Returns false when the factor has become ill-conditioned
  // (smallest diagonal below 1e-12 of the largest); the update is still applied.
  bool update(std::span<const double> regressor, double observation) {
    if (static_cast<int>(regressor.size()) != n_)
      throw std::invalid_argument("RlsEstimator::update: regressor length mismatch");
    std::copy(regressor.begin(), regressor.end(), work_.begin());
    double y = observation;
    double* x = work_.data();
    const double sl = sqrt_lambda_;
    double gamma_sqrt = 1.0;  // product of rotation cosines
    for (int i = 0; i < n_; ++i) {
      double* row = &r_[static_cast<std::size_t>(i) * n_];
      const double a = sl * row[i];
      const double b = x[i];
      if (b == 0.0) {
        // Nothing to rotate in: only apply the forgetting scale.
        for (int j = i; j < n_; ++j) row[j] *= sl;
        z_[i] *= sl;
        continue;
      }
      const double h = std::hypot(a, b);
      const double c = a / h;
      const double s = b / h;
      row[i] = h;
      gamma_sqrt *= c;
      for (int j = i + 1; j < n_; ++j) {
        const double rj = sl * row[j];
        const double xj = x[j];
        row[j] = c * rj + s * xj;
        x[j] = c * xj - s * rj;
      }
      const double zi = sl * z_[i];
      z_[i] = c * zi + s * y;
      y = c * y - s * zi;
    }
    // The leftover of the sweep is the a-priori error scaled by gamma^(1/2).
    prior_error_ = gamma_sqrt > 0.0 ? y / gamma_sqrt : y;
    ++updates_;
    degenerate_ = check_degenerate();
    return !degenerate_;
  }

  // Prediction error of the last observation against the estimate before it.
  double last_prior_error() const { return prior_error_; }

  bool degenerate() const { return degenerate_; }

  Vector estimate() const {
    Vector w(n_);
    for (int i = n_ - 1; i >= 0; --i) {
      double acc = z_[i];
      const double* row = &r_[static_cast<std::size_t>(i) * n_];
      for (int j = i + 1; j < n_; ++j) acc -= row[j] * w[j];
      w[i] = acc / row[i];
    }
    return w;
  }

  Matrix factor() const {
    Matrix R = Matrix::Zero(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) R(i, j) = r_[static_cast<std::size_t>(i) * n_ + j];
    return R;
  }

  Vector transformed_rhs() const { return Eigen::Map<const Vector>(z_.data(), n_); }

  // Replace the factor and set the right-hand side so that the estimate equals
  // `estimate` exactly.
  void reseed(const Matrix& factor, const Vector& estimate) {
    if (factor.rows() != n_ || factor.cols() != n_ || estimate.size() != n_)
      throw std::invalid_argument("RlsEstimator::reseed: dimension mismatch");
    for (int i = 0; i < n_; ++i) {
      if (!(factor(i, i) > 0.0))
        throw std::invalid_argument("RlsEstimator::reseed: factor diagonal must be positive");
      for (int j = 0; j < n_; ++j)
        r_[static_cast<std::size_t>(i) * n_ + j] = j >= i ? factor(i, j) : 0.0;
    }
    const Matrix R = this->factor();
    const Vector z = R * estimate;
    for (int i = 0; i < n_; ++i) z_[i] = z[i];
    degenerate_ = check_degenerate();
  }

 private:
  double& at(int i, int j) { return r_[static_cast<std::size_t>(i) * n_ + j]; }

  bool check_degenerate() const {
    double lo = std::abs(r_[0]);
    double hi = lo;
    for (int i = 1; i < n_; ++i) {
      const double d = std::abs(r_[static_cast<std::size_t>(i) * n_ + i]);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    return lo < 1e-12 * hi;
  }

  int n_ = 0;
  double lambda_ = 1.0;
  double sqrt_lambda_ = 1.0;
  long updates_ = 0;
  bool degenerate_ = false;
  double prior_error_ = 0.0;
  std::vector<double> r_;  // row-major, upper triangle used
  std::vector<double> z_;
  std::vector<double> work_;
};

struct DareSolution {
  Matrix P;
  Matrix K;
  int iterations = 0;
  double residual = 0.0;
};

// Riccati map  A'PA - A'PB (R + B'PB)^-1 B'PA + Q.
inline Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                          const Matrix& P) {
  const Matrix BtP = B.transpose() * P;
  const Matrix S = R + BtP * B;
  const Matrix G = S.ldlt().solve(BtP * A);
  Matrix next = A.transpose() * P * A - (A.transpose() * P * B) * G + Q;
  return 0.5 * (next + next.transpose());
}

// Stabilising solution of the discrete algebraic Riccati equation by
// fixed-point iteration from P0 = Q. Converged when the Riccati residual
// |Ric(P)|_F drops below tol * max(1, |P|_F).
inline DareSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                               double tol = 1e-9, int max_iter = 10000) {
  const auto n = A.rows();
  const auto m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m ||
      R.cols() != m) {
    throw std::invalid_argument("solve_dare: inconsistent dimensions");
  }
  if ((Q - Q.transpose()).norm() > 1e-10 * std::max(1.0, Q.norm()))
    throw std::invalid_argument("solve_dare: Q must be symmetric");
  if ((R - R.transpose()).norm() > 1e-10 * std::max(1.0, R.norm()))
    throw std::invalid_argument("solve_dare: R must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> qes(Q, Eigen::EigenvaluesOnly);
  if (qes.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, Q.norm()))
    throw std::invalid_argument("solve_dare: Q must be positive semidefinite");
  Eigen::LLT<Matrix> rllt(R);
  if (rllt.info() != Eigen::Success) throw std::invalid_argument("solve_dare: R must be positive definite");

  Matrix P = Q;
  double residual = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    Matrix next = riccati_map(A, B, Q, R, P);
    residual = (next - P).norm();
    P = std::move(next);
    if (!std::isfinite(residual)) break;
    if (residual < tol * std::max(1.0, P.norm())) {
      DareSolution sol;
      sol.K = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
      sol.residual = (riccati_map(A, B, Q, R, P) - P).norm();
      sol.iterations = it;
      sol.P = std::move(P);
      if (!(spectral_radius(A - B * sol.K) < 1.0))
        throw NumericalError("solve_dare: solution is not stabilising", sol.residual);
      return sol;
    }
  }
  throw NumericalError("solve_dare: no convergence within max_iter", residual);
}

// Moore-Penrose inverse (M'M)^-1 M' for a full-column-rank M.
inline Matrix pseudo_inverse(const Matrix& M) {
  if (M.rows() < M.cols()) throw std::invalid_argument("pseudo_inverse: matrix has more columns than rows");
  Eigen::ColPivHouseholderQR<Matrix> qr(M);
  qr.setThreshold(1e-12);
  if (qr.rank() < M.cols()) throw std::invalid_argument("pseudo_inverse: matrix is rank deficient");
  const Matrix gram = M.transpose() * M;
  return gram.llt().solve(M.transpose());
}

// Zero-order-hold model of u = (b s + 1) / (a^2 s^2 + b s + 1) u_ref with
// a = 1/omega and b = 2 damping / omega.
inline StateSpaceModel discretize_second_order(double omega, double damping, double Ts) {
  if (!(omega > 0.0)) throw std::invalid_argument("discretize_second_order: omega must be positive");
  if (!(damping > 0.0 && damping < 1.0))
    throw std::invalid_argument("discretize_second_order: damping must lie in (0, 1)");
  if (!(Ts > 0.0)) throw std::invalid_argument("discretize_second_order: Ts must be positive");

  // Controllable canonical form of (2 zeta w s + w^2) / (s^2 + 2 zeta w s + w^2).
  Eigen::Matrix3d aug = Eigen::Matrix3d::Zero();
  aug(0, 1) = 1.0;
  aug(1, 0) = -omega * omega;
  aug(1, 1) = -2.0 * damping * omega;
  aug(1, 2) = 1.0;
  const Eigen::Matrix3d phi = (aug * Ts).exp();

  StateSpaceModel m;
  m.A = phi.topLeftCorner<2, 2>();
  m.B = phi.topRightCorner<2, 1>();
  m.C.resize(1, 2);
  m.C << omega * omega, 2.0 * damping * omega;
  m.D = Matrix::Zero(1, 1);
  m.Ts = Ts;
  return m;
}

struct PsdEstimate {
  std::vector<double> freqs;  // Hz
  std::vector<double> power;  // one-sided density, signal units^2 / Hz

  double resolution() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }

  // Index of the bin closest to f.
  std::size_t bin(double f) const {
    const double df = resolution();
    const auto i = static_cast<std::size_t>(std::llround(f / df));
    return std::min(i, freqs.size() - 1);
  }

  double integral() const {
    double s = 0.0;
    for (double p : power) s += p;
    return s * resolution();
  }
};

// Averaged periodogram: Hann-tapered segments with 50% overlap, segment mean
// removed, one-sided density normalised so the integral equals the variance.
inline PsdEstimate psd_estimate(std::span<const double> signal, double fs, std::size_t segment_length) {
  if (!(fs > 0.0)) throw std::invalid_argument("psd_estimate: fs must be positive");
  if (segment_length < 4) throw std::invalid_argument("psd_estimate: segment too short");
  if (signal.size() < 2 * segment_length)
    throw std::invalid_argument("psd_estimate: signal shorter than two segments");

  const std::size_t L = segment_length;
  const std::size_t hop = L / 2;
  std::vector<double> window(L);
  double wpow = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(L));
    wpow += window[i] * window[i];
  }

  const std::size_t nbins = L / 2 + 1;
  std::vector<double> acc(nbins, 0.0);
  std::vector<double> seg(L);
  std::vector<std::complex<double>> spec;
  Eigen::FFT<double> fft;
  std::size_t nseg = 0;
  for (std::size_t start = 0; start + L <= signal.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < L; ++i) mean += signal[start + i];
    mean /= static_cast<double>(L);
    for (std::size_t i = 0; i < L; ++i) seg[i] = (signal[start + i] - mean) * window[i];
    fft.fwd(spec, seg);
    for (std::size_t b = 0; b < nbins; ++b) acc[b] += std::norm(spec[b]);
    ++nseg;
  }

  PsdEstimate out;
  out.freqs.resize(nbins);
  out.power.resize(nbins);
  const double scale = 1.0 / (fs * wpow * static_cast<double>(nseg));
  for (std::size_t b = 0; b < nbins; ++b) {
    out.freqs[b] = fs * static_cast<double>(b) / static_cast<double>(L);
    const bool edge = b == 0 || (L % 2 == 0 && b == nbins - 1);
    out.power[b] = acc[b] * scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

}  // namespace numerics
}  // namespace sprcfd
