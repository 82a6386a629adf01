#pragma once

// Second-order pitch actuators with pitch-actuator-stuck (PAS) fault injection.

#include "sprcfd/common.hpp"
#include "sprcfd/numerics.hpp"

#include <array>
#include <optional>
#include <stdexcept>

namespace sprcfd::actuator {

// Blade `blade` (1-based) freezes at `stuck_angle` from sample `onset` on.
struct FaultDescriptor {
  int blade = 3;
  double stuck_angle = 0.0;  // deg
  long onset = 0;            // k0

  void validate() const {
    if (blade < 1 || blade > kBlades) throw std::invalid_argument("fault: blade index must be 1, 2 or 3");
    if (onset < 0) throw std::invalid_argument("fault: onset must be >= 0");
  }
};

// u + step(k - k0) (-u_f + stuck) e_f
inline Triple apply_pas_fault(const Triple& u, const FaultDescriptor& fault, long k) {
  Triple out = u;
  if (k >= fault.onset) {
    const int f = fault.blade - 1;
    out[f] = fault.stuck_angle;
  }
  return out;
}

class ActuatorBank {
 public:
  ActuatorBank(const StateSpaceModel& model, double initial_angle, std::optional<FaultDescriptor> fault = {})
      : model_(model), fault_(fault) {
    model_.validate();
    if (model_.inputs() != 1 || model_.outputs() != 1)
      throw std::invalid_argument("ActuatorBank: expects a SISO actuator model");
    if (fault_) fault_->validate();
    const Matrix I = Matrix::Identity(model_.states(), model_.states());
    const Vector x0 = (I - model_.A).partialPivLu().solve(model_.B * initial_angle);
    states_.fill(x0);
  }

  const StateSpaceModel& model() const { return model_; }
  const std::optional<FaultDescriptor>& fault() const { return fault_; }
  const Vector& state(int blade) const { return states_[blade]; }

  // Healthy response u_k of every blade to the reference history up to k-1.
  Triple healthy_output(const Triple& u_ref) const {
    Triple u{};
    for (int l = 0; l < kBlades; ++l) u[l] = (model_.C * states_[l])(0) + model_.D(0, 0) * u_ref[l];
    return u;
  }

  // Physical pitch angles at sample k; the internal dynamics keep integrating
  // the reference even on a stuck blade.
  Triple step(const Triple& u_ref, long k) {
    const Triple u = healthy_output(u_ref);
    for (int l = 0; l < kBlades; ++l) states_[l] = model_.A * states_[l] + model_.B * u_ref[l];
    return fault_ ? apply_pas_fault(u, *fault_, k) : u;
  }

 private:
  StateSpaceModel model_;
  std::optional<FaultDescriptor> fault_;
  std::array<Vector, kBlades> states_;
};

}  // namespace sprcfd::actuator
