#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "irt/errors.hpp"

namespace irt {

/// Exponentially decaying step size with a floor:
/// step(t) = max(floor, initial * rate^(t / interval)).
struct StepSchedule {
  double initial = 1e-3;
  double decay_rate = 0.5;
  double decay_interval = 2000.0;
  double floor = 1e-4;

  double at(long iteration) const {
    const double decayed = initial * std::pow(decay_rate, static_cast<double>(iteration) / decay_interval);
    return std::max(floor, decayed);
  }
  void validate() const {
    if (!(initial > 0.0) || !(decay_rate > 0.0) || decay_rate > 1.0 || !(decay_interval > 0.0) ||
        floor < 0.0) {
      throw ContractError("invalid step-size schedule");
    }
  }
};

/// Adam with bias correction. `descend` moves against the supplied gradient.
class Adam {
 public:
  explicit Adam(Eigen::Index n, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void descend(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad, double step) {
    if (grad.size() != m_.size() || params.size() != m_.size()) {
      throw ContractError("Adam state and gradient lengths differ");
    }
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= step * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  long steps() const { return t_; }

 private:
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

}  // namespace irt
