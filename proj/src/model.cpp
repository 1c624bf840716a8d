#include "eegtl/model.hpp"

#include <cmath>
#include <string>

#include "eegtl/format.hpp"

namespace eegtl {
namespace {

std::string bn(std::string_view prefix, std::string_view field) {
  return std::string(prefix) + "." + std::string(field);
}

void add_batch_norm(ParamStore& params, std::string_view prefix, std::size_t channels) {
  params.add(bn(prefix, "gamma"), Tensor({channels}, 1.0f));
  params.add(bn(prefix, "beta"), Tensor({channels}, 0.0f));
  params.add(bn(prefix, "running_mean"), Tensor({channels}, 0.0f), EntryKind::buffer);
  params.add(bn(prefix, "running_var"), Tensor({channels}, 1.0f), EntryKind::buffer);
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-limit, limit));
  return t;
}

constexpr std::string_view kTemporalConv = "block1.temporal_conv.weight";
constexpr std::string_view kTemporalBn = "block1.temporal_bn";
constexpr std::string_view kSpatialConv = "block1.spatial_conv.weight";
constexpr std::string_view kSpatialBn = "block1.spatial_bn";
constexpr std::string_view kDepthwiseConv = "block2.depthwise_conv.weight";
constexpr std::string_view kPointwiseConv = "block2.pointwise_conv.weight";
constexpr std::string_view kBlock2Bn = "block2.bn";

template <class T>
Var bound(Graph<T>& g, BasicParamStore<T>& params, std::string_view name) {
  const std::string key(name);
  if (params.is_frozen(key)) return g.constant(params.at(key));
  return g.parameter(params.at(key));
}

template <class T>
Var apply_batch_norm(Graph<T>& g, BasicParamStore<T>& params, std::string_view prefix, Var x, Mode mode) {
  const std::string mean = bn(prefix, "running_mean");
  const std::string var = bn(prefix, "running_var");
  BatchNormOptions options;
  options.mode = params.is_frozen(mean) || params.is_frozen(var) ? Mode::eval : mode;
  return batch_norm(g, x, bound(g, params, bn(prefix, "gamma")), bound(g, params, bn(prefix, "beta")),
                    BatchNormState<T>{&params.at(mean), &params.at(var)}, options);
}

}  // namespace

void ArchitectureSpec::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string("architecture: ") + name + " must be positive");
  };
  positive(n_channels, "n_channels");
  positive(n_samples, "n_samples");
  positive(temporal_filters, "temporal_filters (F1)");
  positive(depth_multiplier, "depth_multiplier (D)");
  positive(separable_filters, "separable_filters (F2)");
  positive(temporal_kernel_len, "temporal_kernel_len");
  positive(separable_kernel_len, "separable_kernel_len");
  positive(pool1, "pool1");
  positive(pool2, "pool2");
  if (n_classes < 2) throw ValidationError("architecture: n_classes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("architecture: dropout_rate must lie in [0, 1), got " + format_number(dropout_rate));
  }
  if (!(sample_rate_hz > 0.0)) throw ValidationError("architecture: sample_rate_hz must be positive");
  if (pooled_samples() == 0) {
    throw ValidationError("architecture: " + std::to_string(n_samples) + " samples cannot be pooled by " +
                          std::to_string(pool1) + " then " + std::to_string(pool2) + " (after pool1: " +
                          std::to_string(n_samples / pool1) + " samples, after pool2: " +
                          std::to_string(pooled_samples()) + ")");
  }
}

ArchitectureSpec default_architecture(std::size_t n_channels, std::size_t n_samples, std::size_t n_classes,
                                      double sample_rate_hz) {
  ArchitectureSpec spec;
  spec.n_channels = n_channels;
  spec.n_samples = n_samples;
  spec.n_classes = n_classes;
  spec.sample_rate_hz = sample_rate_hz;
  spec.temporal_kernel_len = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(sample_rate_hz / 2.0)));
  return spec;
}

std::string_view to_string(Block block) {
  switch (block) {
    case Block::block1: return "block1";
    case Block::block2: return "block2";
    case Block::head: return "head";
  }
  return "?";
}

Block parse_block(std::string_view text) {
  if (text == "block1") return Block::block1;
  if (text == "block2") return Block::block2;
  if (text == "head") return Block::head;
  throw ValidationError("unknown block id '" + std::string(text) + "' (expected block1, block2 or head)");
}

std::string_view to_string(FreezeDepth depth) {
  switch (depth) {
    case FreezeDepth::none: return "none";
    case FreezeDepth::block1: return "block1";
    case FreezeDepth::block1_2: return "block1+2";
  }
  return "?";
}

FreezeDepth parse_freeze_depth(std::string_view text) {
  if (text == "none") return FreezeDepth::none;
  if (text == "block1") return FreezeDepth::block1;
  if (text == "block1+2") return FreezeDepth::block1_2;
  throw ValidationError("unknown freeze depth '" + std::string(text) + "' (expected none, block1 or block1+2)");
}

EEGNet::EEGNet(ArchitectureSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

BlockIndex EEGNet::block_index() const {
  BlockIndex index;
  index[std::string(kTemporalConv)] = Block::block1;
  index[std::string(kSpatialConv)] = Block::block1;
  for (auto prefix : {kTemporalBn, kSpatialBn}) {
    for (auto field : {"gamma", "beta", "running_mean", "running_var"}) index[bn(prefix, field)] = Block::block1;
  }
  index[std::string(kDepthwiseConv)] = Block::block2;
  index[std::string(kPointwiseConv)] = Block::block2;
  for (auto field : {"gamma", "beta", "running_mean", "running_var"}) index[bn(kBlock2Bn, field)] = Block::block2;
  index[std::string(param_names::head_weight)] = Block::head;
  index[std::string(param_names::head_bias)] = Block::head;
  return index;
}

template <class T>
Var EEGNet::forward(Graph<T>& g, BasicParamStore<T>& params, const BasicTensor<T>& batch, Mode mode,
                    Rng& rng) const {
  const Shape expected{batch.rank() > 0 ? batch.dim(0) : 0, 1, spec_.n_channels, spec_.n_samples};
  if (batch.shape() != expected) {
    throw ShapeError("model input must be [N,1," + std::to_string(spec_.n_channels) + "," +
                     std::to_string(spec_.n_samples) + "], got " + shape_to_string(batch.shape()));
  }
  const std::size_t d = spec_.depth_multiplier;

  Var h = g.constant(batch);
  h = conv2d(g, h, bound(g, params, kTemporalConv), 1, Padding::same(1, spec_.temporal_kernel_len));
  h = apply_batch_norm(g, params, kTemporalBn, h, mode);
  h = depthwise_conv(g, h, bound(g, params, kSpatialConv), d, Padding{});
  h = apply_batch_norm(g, params, kSpatialBn, h, mode);
  h = elu(g, h);
  h = avg_pool(g, crop_width(g, h, (spec_.n_samples / spec_.pool1) * spec_.pool1), 1, spec_.pool1);
  h = dropout(g, h, spec_.dropout_rate, mode, rng);

  h = depthwise_conv(g, h, bound(g, params, kDepthwiseConv), 1, Padding::same(1, spec_.separable_kernel_len));
  h = conv2d(g, h, bound(g, params, kPointwiseConv), 1, Padding{});
  h = apply_batch_norm(g, params, kBlock2Bn, h, mode);
  h = elu(g, h);
  h = avg_pool(g, crop_width(g, h, spec_.pooled_samples() * spec_.pool2), 1, spec_.pool2);
  h = dropout(g, h, spec_.dropout_rate, mode, rng);

  h = flatten(g, h);
  return dense(g, h, bound(g, params, param_names::head_weight), bound(g, params, param_names::head_bias));
}

Tensor EEGNet::logits(ParamStore& params, const Tensor& batch) const {
  Graph<float> g;
  Rng unused(0);
  return g.value(forward(g, params, batch, Mode::eval, unused));
}

Tensor EEGNet::predict_proba(ParamStore& params, const Tensor& batch) const {
  return softmax(logits(params, batch));
}

template Var EEGNet::forward<float>(Graph<float>&, BasicParamStore<float>&, const BasicTensor<float>&, Mode,
                                    Rng&) const;
template Var EEGNet::forward<double>(Graph<double>&, BasicParamStore<double>&, const BasicTensor<double>&, Mode,
                                     Rng&) const;

void init_head(ParamStore& params, const ArchitectureSpec& spec, Rng& rng) {
  params.erase(std::string(param_names::head_weight));
  params.erase(std::string(param_names::head_bias));
  const std::size_t features = spec.head_features();
  params.add(std::string(param_names::head_weight),
             glorot_uniform({features, spec.n_classes}, features, spec.n_classes, rng));
  params.add(std::string(param_names::head_bias), Tensor({spec.n_classes}, 0.0f));
}

BuiltModel build_model(const ArchitectureSpec& spec, Rng& rng) {
  EEGNet net(spec);
  const std::size_t f1 = spec.temporal_filters, fd = spec.spatial_filters(), f2 = spec.separable_filters;
  const std::size_t lt = spec.temporal_kernel_len, ls = spec.separable_kernel_len, c = spec.n_channels;
  ParamStore params;
  params.add(std::string(kTemporalConv), glorot_uniform({f1, 1, 1, lt}, lt, f1 * lt, rng));
  add_batch_norm(params, kTemporalBn, f1);
  params.add(std::string(kSpatialConv), glorot_uniform({fd, 1, c, 1}, c, spec.depth_multiplier * c, rng));
  add_batch_norm(params, kSpatialBn, fd);
  params.add(std::string(kDepthwiseConv), glorot_uniform({fd, 1, 1, ls}, ls, ls, rng));
  params.add(std::string(kPointwiseConv), glorot_uniform({f2, fd, 1, 1}, fd, f2, rng));
  add_batch_norm(params, kBlock2Bn, f2);
  init_head(params, spec, rng);
  return BuiltModel{std::move(net), std::move(params)};
}

void apply_freeze(ParamStore& params, FreezeDepth depth, const BlockIndex& blocks) {
  std::set<std::string> frozen;
  for (const auto& name : params.names()) {
    auto it = blocks.find(name);
    if (it == blocks.end()) throw ValidationError("apply_freeze: parameter '" + name + "' has no block id");
    const Block block = it->second;
    const bool freeze = (depth == FreezeDepth::block1 && block == Block::block1) ||
                        (depth == FreezeDepth::block1_2 && (block == Block::block1 || block == Block::block2));
    if (freeze) frozen.insert(name);
  }
  params.set_frozen(frozen);
}

}  // namespace eegtl
