#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "eegtl/graph.hpp"
#include "eegtl/ops.hpp"
#include "eegtl/param_store.hpp"
#include "eegtl/rng.hpp"

namespace eegtl {

/// Hyperparameters of the compact EEGNet-style classifier.
struct ArchitectureSpec {
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;
  std::size_t temporal_filters = 8;   // F1
  std::size_t depth_multiplier = 2;   // D
  std::size_t separable_filters = 16; // F2, F1*D unless overridden
  std::size_t temporal_kernel_len = 0;
  std::size_t separable_kernel_len = 16;
  std::size_t pool1 = 4;
  std::size_t pool2 = 8;
  double dropout_rate = 0.1;
  double sample_rate_hz = 0.0;

  /// Throws ValidationError naming the first violated constraint.
  void validate() const;

  std::size_t spatial_filters() const { return temporal_filters * depth_multiplier; }
  /// Time steps left after both pooling stages.
  std::size_t pooled_samples() const { return (n_samples / pool1) / pool2; }
  std::size_t head_features() const { return separable_filters * pooled_samples(); }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Defaults for a data shape: temporal kernel of half a second.
ArchitectureSpec default_architecture(std::size_t n_channels, std::size_t n_samples, std::size_t n_classes,
                                      double sample_rate_hz);

enum class Block { block1, block2, head };
std::string_view to_string(Block block);
Block parse_block(std::string_view text);

/// Parameter (or buffer) name -> block it belongs to.
using BlockIndex = std::map<std::string, Block>;

/// How many lower blocks are excluded from retraining.
enum class FreezeDepth { none, block1, block1_2 };
std::string_view to_string(FreezeDepth depth);
FreezeDepth parse_freeze_depth(std::string_view text);

/// Block1: temporal conv -> BN -> depthwise spatial conv -> BN -> ELU -> pool -> dropout.
/// Block2: depthwise temporal conv -> pointwise conv -> BN -> ELU -> pool -> dropout.
/// Head:   flatten -> dense(n_classes).
/// Input layout is [N, 1, n_channels, n_samples]. Batch-norm layers whose
/// running statistics are frozen run in eval mode even during training.
class EEGNet {
 public:
  explicit EEGNet(ArchitectureSpec spec);

  const ArchitectureSpec& spec() const { return spec_; }
  BlockIndex block_index() const;

  template <class T>
  Var forward(Graph<T>& g, BasicParamStore<T>& params, const BasicTensor<T>& batch, Mode mode, Rng& rng) const;

  /// Eval-mode logits [N, n_classes] without recording gradients.
  Tensor logits(ParamStore& params, const Tensor& batch) const;
  /// Eval-mode class probabilities (softmax of logits).
  Tensor predict_proba(ParamStore& params, const Tensor& batch) const;

 private:
  ArchitectureSpec spec_;
};

struct BuiltModel {
  EEGNet net;
  ParamStore params;
};

/// Glorot-uniform weights, zero biases, identity batch-norm.
BuiltModel build_model(const ArchitectureSpec& spec, Rng& rng);

/// Adds (or re-creates) the head parameters for `spec.n_classes`.
void init_head(ParamStore& params, const ArchitectureSpec& spec, Rng& rng);

/// Marks every entry of the selected blocks frozen (running statistics
/// included). Throws ValidationError when the index misses a name.
void apply_freeze(ParamStore& params, FreezeDepth depth, const BlockIndex& blocks);

namespace param_names {
inline constexpr std::string_view head_weight = "head.dense.weight";
inline constexpr std::string_view head_bias = "head.dense.bias";
}  // namespace param_names

}  // namespace eegtl
