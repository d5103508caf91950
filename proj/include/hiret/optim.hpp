#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hiret/params.hpp"

namespace hiret {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip = 5.0;  // global 2-norm; <= 0 disables clipping
  // Base learning rate overrides for parameters under a name prefix; the
  // longest matching prefix wins.
  std::vector<std::pair<std::string, double>> group_lr;
};

struct Moments {
  std::vector<double> m;
  std::vector<double> v;
};

class Adam {
 public:
  explicit Adam(AdamOptions options) : options_(std::move(options)) {}

  // Clips the global gradient norm of all trainable parameters to
  // options.clip, then applies one bias-corrected Adam update followed by
  // decoupled weight decay (theta -= lr * wd * theta). Returns the norm
  // before clipping. A non-finite gradient throws NumericError naming the
  // parameter, before anything is modified.
  double clip_and_step(ParameterStore& store);

  // Multiplier from the learning-rate schedule, applied to every group.
  void set_lr_factor(double factor) { lr_factor_ = factor; }
  double lr_for(const std::string& name) const;

  const AdamOptions& options() const noexcept { return options_; }
  std::size_t steps() const noexcept { return t_; }
  const std::map<std::string, Moments>& moments() const noexcept { return moments_; }
  void restore(std::size_t steps, std::map<std::string, Moments> moments);

 private:
  AdamOptions options_;
  double lr_factor_ = 1.0;
  std::size_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

// Piecewise-constant multiplicative schedule. With `every` > 0 the rate is
// multiplied by gamma at every multiple of `every`; otherwise once at each
// listed milestone.
struct LrSchedule {
  std::vector<int> milestones;
  int every = 0;
  double gamma = 1.0;
};

double lr_schedule(int epoch, double base_lr, const LrSchedule& schedule);

}  // namespace hiret
