#include "hiret/optim.hpp"

#include <cmath>

#include "hiret/errors.hpp"

namespace hiret {

double Adam::lr_for(const std::string& name) const {
  double lr = options_.lr;
  std::size_t best = 0;
  for (const auto& [prefix, group_lr] : options_.group_lr) {
    if (name.starts_with(prefix) && prefix.size() >= best) {
      best = prefix.size();
      lr = group_lr;
    }
  }
  return lr * lr_factor_;
}

double Adam::clip_and_step(ParameterStore& store) {
  double sq = 0.0;
  for (auto& [name, t] : store) {
    if (!t.requires_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + name + "'");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double factor = options_.clip > 0.0 && norm > options_.clip ? options_.clip / norm : 1.0;

  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (auto& [name, t] : store) {
    if (!t.requires_grad()) continue;
    auto grad = t.grad();
    if (factor != 1.0) {
      for (double& g : grad) g *= factor;
    }
    Moments& mom = moments_[name];
    if (mom.m.size() != t.numel()) {
      mom.m.assign(t.numel(), 0.0);
      mom.v.assign(t.numel(), 0.0);
    }
    const double lr = lr_for(name);
    auto theta = t.values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      mom.m[i] = options_.beta1 * mom.m[i] + (1.0 - options_.beta1) * grad[i];
      mom.v[i] = options_.beta2 * mom.v[i] + (1.0 - options_.beta2) * grad[i] * grad[i];
      const double m_hat = mom.m[i] / c1;
      const double v_hat = mom.v[i] / c2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.eps);
      theta[i] -= lr * options_.weight_decay * theta[i];
    }
  }
  return norm;
}

void Adam::restore(std::size_t steps, std::map<std::string, Moments> moments) {
  t_ = steps;
  moments_ = std::move(moments);
}

double lr_schedule(int epoch, double base_lr, const LrSchedule& schedule) {
  if (epoch < 0) throw ValidationError("lr_schedule: negative epoch " + std::to_string(epoch));
  int decays = 0;
  if (schedule.every > 0) {
    decays = epoch / schedule.every;
  } else {
    for (int m : schedule.milestones) {
      if (epoch >= m) ++decays;
    }
  }
  return base_lr * std::pow(schedule.gamma, decays);
}

}  // namespace hiret
