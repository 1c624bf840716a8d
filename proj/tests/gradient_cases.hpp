#pragma once

#include <functional>
#include <string>
#include <vector>

#include "eegtl/ops.hpp"
#include "test_support.hpp"

namespace eegtl::testing {

/// One differentiable op with a generator of random small instances.
/// `instance` draws shapes and values from `rng` and returns the worst
/// relative gradient error of that instance.
struct OpGradientCase {
  std::string name;
  double tolerance;
  std::function<double(Rng&)> instance;
};

inline std::vector<OpGradientCase> op_gradient_cases() {
  std::vector<OpGradientCase> cases;
  cases.push_back({"conv2d", 1e-3, [](Rng& rng) {
    const std::size_t groups = 1 + rng.below(2);
    const std::size_t cin = groups * (1 + rng.below(2)), cout = groups * (1 + rng.below(2));
    std::vector<BasicTensor<double>> in{
        random_tensor<double>({2, cin, 2 + rng.below(2), 4 + rng.below(4)}, rng),
        random_tensor<double>({cout, cin / groups, 1 + rng.below(2), 1 + rng.below(4)}, rng)};
    const Padding pad{rng.below(2), rng.below(2), rng.below(3), rng.below(3)};
    const auto seed = rng.next_u64();
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      return random_projection(g, conv2d(g, v[0], v[1], groups, pad), seed);
    });
  }});
  cases.push_back({"depthwise_conv", 1e-3, [](Rng& rng) {
    const std::size_t c = 1 + rng.below(3), d = 1 + rng.below(2);
    std::vector<BasicTensor<double>> in{random_tensor<double>({2, c, 1 + rng.below(3), 6}, rng),
                                        random_tensor<double>({c * d, 1, 1, 1 + rng.below(4)}, rng)};
    const Padding pad = Padding::same(1, in[1].dim(3));
    const auto seed = rng.next_u64();
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      return random_projection(g, depthwise_conv(g, v[0], v[1], d, pad), seed);
    });
  }});
  cases.push_back({"elu", 1e-4, [](Rng& rng) {
    std::vector<BasicTensor<double>> in{random_tensor<double>({3, 7}, rng, -2.0, 2.0)};
    const auto seed = rng.next_u64();
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      return random_projection(g, elu(g, v[0]), seed);
    });
  }});
  cases.push_back({"avg_pool", 1e-4, [](Rng& rng) {
    const std::size_t ph = 1 + rng.below(2), pw = 1 + rng.below(4);
    std::vector<BasicTensor<double>> in{random_tensor<double>({2, 2, ph * 2, pw * 3}, rng)};
    const auto seed = rng.next_u64();
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      return random_projection(g, avg_pool(g, v[0], ph, pw), seed);
    });
  }});
  cases.push_back({"crop_width", 1e-4, [](Rng& rng) {
    const std::size_t w = 2 + rng.below(5), keep = 1 + rng.below(w - 1);
    std::vector<BasicTensor<double>> in{random_tensor<double>({2, 2, 2, w}, rng)};
    const auto seed = rng.next_u64();
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      return random_projection(g, crop_width(g, v[0], keep), seed);
    });
  }});
  for (const Mode mode : {Mode::train, Mode::eval}) {
    cases.push_back({mode == Mode::train ? "batch_norm(train)" : "batch_norm(eval)", 1e-3, [mode](Rng& rng) {
      const std::size_t c = 1 + rng.below(3);
      std::vector<BasicTensor<double>> in{random_tensor<double>({3, c, 2, 3}, rng, -2.0, 2.0),
                                          random_tensor<double>({c}, rng, 0.5, 1.5), random_tensor<double>({c}, rng)};
      BasicTensor<double> mean = random_tensor<double>({c}, rng);
      BasicTensor<double> var = random_tensor<double>({c}, rng, 0.5, 2.0);
      const auto seed = rng.next_u64();
      return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
        BatchNormOptions options;
        options.mode = mode;
        options.update_running = false;
        return random_projection(
            g, batch_norm(g, v[0], v[1], v[2], BatchNormState<double>{&mean, &var}, options), seed);
      });
    }});
  }
  cases.push_back({"dropout", 1e-4, [](Rng& rng) {
    std::vector<BasicTensor<double>> in{random_tensor<double>({4, 6}, rng)};
    const double rate = rng.uniform(0.1, 0.7);
    const auto mask_seed = rng.next_u64();
    const auto seed = rng.next_u64();
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      Rng mask_rng(mask_seed);  // same mask on every evaluation
      return random_projection(g, dropout(g, v[0], rate, Mode::train, mask_rng), seed);
    });
  }});
  cases.push_back({"dense", 1e-3, [](Rng& rng) {
    const std::size_t n = 1 + rng.below(3), f = 1 + rng.below(5), k = 1 + rng.below(4);
    std::vector<BasicTensor<double>> in{random_tensor<double>({n, f}, rng), random_tensor<double>({f, k}, rng),
                                        random_tensor<double>({k}, rng)};
    const auto seed = rng.next_u64();
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      return random_projection(g, dense(g, v[0], v[1], v[2]), seed);
    });
  }});
  cases.push_back({"flatten", 1e-4, [](Rng& rng) {
    std::vector<BasicTensor<double>> in{random_tensor<double>({2, 1 + rng.below(3), 2, 1 + rng.below(4)}, rng)};
    const auto seed = rng.next_u64();
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      return random_projection(g, flatten(g, v[0]), seed);
    });
  }});
  cases.push_back({"softmax_cross_entropy", 1e-4, [](Rng& rng) {
    const std::size_t n = 1 + rng.below(4), k = 2 + rng.below(3);
    std::vector<BasicTensor<double>> in{random_tensor<double>({n, k}, rng, -3.0, 3.0)};
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(k));
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      return softmax_cross_entropy(g, v[0], labels);
    });
  }});
  cases.push_back({"mul", 1e-4, [](Rng& rng) {
    const Shape shape{1 + rng.below(3), 1 + rng.below(5)};
    std::vector<BasicTensor<double>> in{random_tensor<double>(shape, rng), random_tensor<double>(shape, rng)};
    return max_gradient_error(in, [&](Graph<double>& g, std::vector<Var>& v) {
      return sum(g, mul(g, v[0], v[1]));
    });
  }});
  return cases;
}

}  // namespace eegtl::testing
