#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "eegtl/graph.hpp"
#include "eegtl/ops.hpp"
#include "eegtl/rng.hpp"

namespace eegtl::testing {

template <class T = float>
BasicTensor<T> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Relative error with a floor on the denominator so that gradients that
/// are (near) zero are judged on absolute error instead.
inline double relative_error(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

using LossBuilder = std::function<Var(Graph<double>&, std::vector<Var>&)>;

/// Central finite-difference oracle. `build` receives one parameter leaf per
/// entry of `inputs` and returns a scalar loss. Returns the worst relative
/// error between the reverse-mode gradient and the numeric one.
inline double max_gradient_error(std::vector<BasicTensor<double>>& inputs, const LossBuilder& build,
                                 double eps = 1e-3) {
  auto evaluate = [&]() {
    Graph<double> g;
    std::vector<Var> leaves;
    for (auto& t : inputs) leaves.push_back(g.constant(t));
    return g.value(build(g, leaves))[0];
  };

  Graph<double> g;
  std::vector<Var> leaves;
  for (auto& t : inputs) leaves.push_back(g.parameter(t));
  g.backward(build(g, leaves));
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double saved = inputs[i][j];
      inputs[i][j] = saved + eps;
      const double up = evaluate();
      inputs[i][j] = saved - eps;
      const double down = evaluate();
      inputs[i][j] = saved;
      worst = std::max(worst, relative_error(analytic[i][j], (up - down) / (2 * eps)));
    }
  }
  return worst;
}

/// sum(y * R) for a fixed random R; gives every output element a distinct weight.
inline Var random_projection(Graph<double>& g, Var y, std::uint64_t seed) {
  Rng rng(seed);
  Var weights = g.constant(random_tensor<double>(g.value(y).shape(), rng));
  return sum(g, mul(g, y, weights));
}

}  // namespace eegtl::testing
