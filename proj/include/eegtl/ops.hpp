#pragma once

#include <span>

#include "eegtl/graph.hpp"
#include "eegtl/rng.hpp"

namespace eegtl {

enum class Mode { train, eval };

/// Zero padding per side; `same()` reproduces the input extent for odd and
/// even kernels (the extra column goes after the signal for even lengths).
struct Padding {
  std::size_t top = 0, bottom = 0, left = 0, right = 0;

  static Padding symmetric(std::size_t h, std::size_t w) { return {h, h, w, w}; }
  static Padding same(std::size_t kh, std::size_t kw) {
    return {(kh - 1) / 2, kh / 2, (kw - 1) / 2, kw / 2};
  }
};

/// Grouped 2-D cross-correlation. input [N,Cin,H,W], kernel [Cout,Cin/groups,kH,kW].
template <class T>
Var conv2d(Graph<T>& g, Var input, Var kernel, std::size_t groups, Padding pad);

/// Per-channel convolution with `depth_multiplier` filters per input channel.
/// kernel [C*D,1,kH,kW]. Numerically identical to conv2d with groups = C.
template <class T>
Var depthwise_conv(Graph<T>& g, Var input, Var kernel, std::size_t depth_multiplier, Padding pad);

template <class T>
Var elu(Graph<T>& g, Var x);

/// Non-overlapping mean pooling over [N,C,H,W].
template <class T>
Var avg_pool(Graph<T>& g, Var x, std::size_t pool_h, std::size_t pool_w);

/// Keeps the leading `width` columns of the last axis.
template <class T>
Var crop_width(Graph<T>& g, Var x, std::size_t width);

template <class T>
struct BatchNormState {
  BasicTensor<T>* running_mean = nullptr;
  BasicTensor<T>* running_var = nullptr;
};

struct BatchNormOptions {
  Mode mode = Mode::train;
  double momentum = 0.1;
  double epsilon = 1e-5;
  /// When false, train mode normalises with batch statistics but leaves the running stats alone.
  bool update_running = true;
};

/// Per-channel normalisation over N,H,W. Train mode uses biased batch
/// variance for normalisation and folds the unbiased variance into the
/// running estimate.
template <class T>
Var batch_norm(Graph<T>& g, Var x, Var gamma, Var beta, BatchNormState<T> state,
               const BatchNormOptions& options);

/// Inverted dropout: survivors scaled by 1/(1-rate); identity in eval mode.
template <class T>
Var dropout(Graph<T>& g, Var x, double rate, Mode mode, Rng& rng);

/// x [N,F] times weight [F,K] plus bias [K].
template <class T>
Var dense(Graph<T>& g, Var x, Var weight, Var bias);

/// [N, ...] -> [N, prod(...)]
template <class T>
Var flatten(Graph<T>& g, Var x);

/// Mean over the batch of -log softmax(logits)[label].
template <class T>
Var softmax_cross_entropy(Graph<T>& g, Var logits, std::span<const int> labels);

template <class T>
Var sum(Graph<T>& g, Var x);

/// Elementwise product of equal shapes.
template <class T>
Var mul(Graph<T>& g, Var a, Var b);

/// Row-wise softmax of a [N,K] tensor, max-subtracted.
template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

}  // namespace eegtl
