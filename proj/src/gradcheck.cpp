#include "hiret/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace hiret {

std::vector<double> finite_diff_gradient(const std::function<double()>& f, std::span<double> theta, double eps) {
  std::vector<double> out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + eps;
    const double up = f();
    theta[i] = saved - eps;
    const double down = f();
    theta[i] = saved;
    out[i] = (up - down) / (2.0 * eps);
  }
  return out;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

GradCheckReport check_gradients(ParameterStore& store, const std::function<Var(Graph&)>& loss,
                                std::vector<std::string> names, double eps) {
  if (names.empty()) names = store.trainable_names();
  store.zero_grad();
  {
    Graph g(store);
    g.backward(loss(g));
  }
  auto evaluate = [&] {
    Graph g(store, false);
    return loss(g).item();
  };
  GradCheckReport report;
  for (const auto& name : names) {
    Tensor& t = store.at(name);
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    const std::vector<double> numeric = finite_diff_gradient(evaluate, t.values(), eps);
    const double err = relative_error(analytic, numeric);
    report.per_param.emplace_back(name, err);
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst = name;
    }
  }
  store.zero_grad();
  return report;
}

}  // namespace hiret
