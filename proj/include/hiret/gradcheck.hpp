#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hiret/graph.hpp"
#include "hiret/params.hpp"

namespace hiret {

// Central differences (f(θ+ε) - f(θ-ε)) / 2ε per coordinate of theta. theta
// is restored exactly after each probe.
std::vector<double> finite_diff_gradient(const std::function<double()>& f, std::span<double> theta,
                                         double eps = 1e-5);

// ||a - b|| / max(||a||, ||b||, floor). The floor keeps all-zero gradients from
// dividing by zero; 1e-8 is far below any gradient the checks care about.
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // parameter with the largest error
  std::vector<std::pair<std::string, double>> per_param;
};

// Builds the loss once on a recording graph, back-propagates, then compares
// every selected trainable parameter against finite differences of a fresh
// non-recording evaluation. Empty `names` means all trainable parameters.
GradCheckReport check_gradients(ParameterStore& store, const std::function<Var(Graph&)>& loss,
                                std::vector<std::string> names = {}, double eps = 1e-5);

}  // namespace hiret
