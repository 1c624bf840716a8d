#include <gtest/gtest.h>

#include "eegtl/ops.hpp"
#include "gradient_cases.hpp"

namespace eegtl {
namespace {

using testing::random_tensor;

constexpr int kInstances = 20;

TEST(Gradient, EveryOpOnRandomInstances) {
  Rng rng(101);
  for (const auto& c : testing::op_gradient_cases()) {
    for (int i = 0; i < kInstances; ++i) EXPECT_LE(c.instance(rng), c.tolerance) << c.name << " instance " << i;
  }
}

TEST(Gradient, FloatPathAgreesWithDoublePath) {
  Rng rng(109);
  BasicTensor<double> xd = random_tensor<double>({2, 2, 3, 8}, rng);
  BasicTensor<double> kd = random_tensor<double>({3, 2, 2, 3}, rng);
  Tensor xf = xd.cast<float>(), kf = kd.cast<float>();
  xd = xf.cast<double>();
  kd = kf.cast<double>();
  {
    Graph<double> g;
    Var y = conv2d(g, g.parameter(xd), g.parameter(kd), 1, Padding::same(2, 3));
    g.backward(sum(g, elu(g, y)));
  }
  {
    Graph<float> g;
    Var y = conv2d(g, g.parameter(xf), g.parameter(kf), 1, Padding::same(2, 3));
    g.backward(sum(g, elu(g, y)));
  }
  for (std::size_t i = 0; i < kd.size(); ++i) EXPECT_NEAR(kf.grad()[i], kd.grad()[i], 1e-5);
  for (std::size_t i = 0; i < xd.size(); ++i) EXPECT_NEAR(xf.grad()[i], xd.grad()[i], 1e-5);
}

}  // namespace
}  // namespace eegtl
