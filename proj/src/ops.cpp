#include "eegtl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eegtl/format.hpp"

namespace eegtl {
namespace {

void require_rank(const Shape& shape, std::size_t rank, const char* op, const char* what) {
  if (shape.size() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_to_string(shape));
  }
}

[[noreturn]] void axis_mismatch(const char* op, const std::string& axis, std::size_t got,
                                std::size_t expected) {
  throw ShapeError(std::string(op) + ": axis " + axis + " has extent " + std::to_string(got) +
                   ", expected " + std::to_string(expected));
}

struct ConvGeometry {
  std::size_t n, cin, h, w;
  std::size_t cout, cin_per_group, kh, kw;
  std::size_t groups, cout_per_group;
  std::size_t out_h, out_w;
  Padding pad;
};

ConvGeometry conv_geometry(const Shape& in, const Shape& k, std::size_t groups, Padding pad,
                           const char* op) {
  require_rank(in, 4, op, "input");
  require_rank(k, 4, op, "kernel");
  if (groups == 0) throw ShapeError(std::string(op) + ": groups must be positive");
  ConvGeometry geo{};
  geo.n = in[0];
  geo.cin = in[1];
  geo.h = in[2];
  geo.w = in[3];
  geo.cout = k[0];
  geo.cin_per_group = k[1];
  geo.kh = k[2];
  geo.kw = k[3];
  geo.groups = groups;
  geo.pad = pad;
  if (geo.cin % groups != 0) axis_mismatch(op, "input channels (not divisible by groups)", geo.cin, groups);
  if (geo.cout % groups != 0) axis_mismatch(op, "kernel out-channels (not divisible by groups)", geo.cout, groups);
  if (geo.cin_per_group != geo.cin / groups) axis_mismatch(op, "kernel in-channels", geo.cin_per_group, geo.cin / groups);
  const std::size_t padded_h = geo.h + pad.top + pad.bottom;
  const std::size_t padded_w = geo.w + pad.left + pad.right;
  if (geo.kh > padded_h) axis_mismatch(op, "kernel height (exceeds padded input)", geo.kh, padded_h);
  if (geo.kw > padded_w) axis_mismatch(op, "kernel width (exceeds padded input)", geo.kw, padded_w);
  geo.out_h = padded_h - geo.kh + 1;
  geo.out_w = padded_w - geo.kw + 1;
  geo.cout_per_group = geo.cout / groups;
  return geo;
}

// Output columns ow for which iw = ow + kw - left lies inside [0, w).
struct ColumnRange {
  std::size_t begin, end;
};

ColumnRange valid_columns(const ConvGeometry& g, std::size_t kw) {
  const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kw) - static_cast<std::ptrdiff_t>(g.pad.left);
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(g.out_w),
                                                     static_cast<std::ptrdiff_t>(g.w) - shift);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Input row for output row oh and kernel row kh, or -1 when it falls in the padding.
std::ptrdiff_t input_row(const ConvGeometry& g, std::size_t oh, std::size_t kh) {
  const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) - static_cast<std::ptrdiff_t>(g.pad.top);
  if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) return -1;
  return ih;
}

// Shared backward for conv2d and depthwise_conv: `in_channel(co, ci)` maps an
// output channel and a within-group index to the absolute input channel.
template <class T, class InChannel>
void conv_backward(Graph<T>& g, Var input, Var kernel, Var out, const ConvGeometry& geo,
                   InChannel in_channel) {
  const auto& x = g.value(input).values();
  const auto& k = g.value(kernel).values();
  const std::vector<T>& dy = g.grad(out);
  const std::size_t in_plane = geo.h * geo.w;
  const std::size_t out_plane = geo.out_h * geo.out_w;

  if (g.requires_grad(input)) {
    auto& dx = g.grad(input);
    for (std::size_t n = 0; n < geo.n; ++n) {
      for (std::size_t co = 0; co < geo.cout; ++co) {
        const T* dy_plane = dy.data() + (n * geo.cout + co) * out_plane;
        for (std::size_t ci = 0; ci < geo.cin_per_group; ++ci) {
          T* dx_plane = dx.data() + (n * geo.cin + in_channel(co, ci)) * in_plane;
          for (std::size_t kh = 0; kh < geo.kh; ++kh) {
            for (std::size_t oh = 0; oh < geo.out_h; ++oh) {
              const std::ptrdiff_t ih = input_row(geo, oh, kh);
              if (ih < 0) continue;
              T* dx_row = dx_plane + static_cast<std::size_t>(ih) * geo.w;
              const T* dy_row = dy_plane + oh * geo.out_w;
              for (std::size_t kw = 0; kw < geo.kw; ++kw) {
                const T weight = k[((co * geo.cin_per_group + ci) * geo.kh + kh) * geo.kw + kw];
                const ColumnRange cols = valid_columns(geo, kw);
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kw) - static_cast<std::ptrdiff_t>(geo.pad.left);
                T* dst = dx_row + shift;
                for (std::size_t ow = cols.begin; ow < cols.end; ++ow) dst[ow] += weight * dy_row[ow];
              }
            }
          }
        }
      }
    }
  }

  if (g.requires_grad(kernel)) {
    auto& dk = g.grad(kernel);
    for (std::size_t co = 0; co < geo.cout; ++co) {
      for (std::size_t ci = 0; ci < geo.cin_per_group; ++ci) {
        for (std::size_t kh = 0; kh < geo.kh; ++kh) {
          for (std::size_t kw = 0; kw < geo.kw; ++kw) {
            const ColumnRange cols = valid_columns(geo, kw);
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kw) - static_cast<std::ptrdiff_t>(geo.pad.left);
            T acc{0};
            for (std::size_t n = 0; n < geo.n; ++n) {
              const T* x_plane = x.data() + (n * geo.cin + in_channel(co, ci)) * in_plane;
              const T* dy_plane = dy.data() + (n * geo.cout + co) * out_plane;
              for (std::size_t oh = 0; oh < geo.out_h; ++oh) {
                const std::ptrdiff_t ih = input_row(geo, oh, kh);
                if (ih < 0) continue;
                const T* src = x_plane + static_cast<std::size_t>(ih) * geo.w + shift;
                const T* dy_row = dy_plane + oh * geo.out_w;
                for (std::size_t ow = cols.begin; ow < cols.end; ++ow) acc += src[ow] * dy_row[ow];
              }
            }
            dk[((co * geo.cin_per_group + ci) * geo.kh + kh) * geo.kw + kw] += acc;
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Var conv2d(Graph<T>& g, Var input, Var kernel, std::size_t groups, Padding pad) {
  const ConvGeometry geo = conv_geometry(g.value(input).shape(), g.value(kernel).shape(), groups, pad, "conv2d");
  const auto& x = g.value(input).values();
  const auto& k = g.value(kernel).values();
  BasicTensor<T> out({geo.n, geo.cout, geo.out_h, geo.out_w});
  auto& y = out.values();
  const std::size_t in_plane = geo.h * geo.w;
  const std::size_t out_plane = geo.out_h * geo.out_w;

  for (std::size_t n = 0; n < geo.n; ++n) {
    for (std::size_t co = 0; co < geo.cout; ++co) {
      const std::size_t group = co / geo.cout_per_group;
      T* y_plane = y.data() + (n * geo.cout + co) * out_plane;
      for (std::size_t ci = 0; ci < geo.cin_per_group; ++ci) {
        const T* x_plane = x.data() + (n * geo.cin + group * geo.cin_per_group + ci) * in_plane;
        for (std::size_t kh = 0; kh < geo.kh; ++kh) {
          for (std::size_t oh = 0; oh < geo.out_h; ++oh) {
            const std::ptrdiff_t ih = input_row(geo, oh, kh);
            if (ih < 0) continue;
            const T* x_row = x_plane + static_cast<std::size_t>(ih) * geo.w;
            T* y_row = y_plane + oh * geo.out_w;
            for (std::size_t kw = 0; kw < geo.kw; ++kw) {
              const T weight = k[((co * geo.cin_per_group + ci) * geo.kh + kh) * geo.kw + kw];
              const ColumnRange cols = valid_columns(geo, kw);
              const T* src = x_row + (static_cast<std::ptrdiff_t>(kw) - static_cast<std::ptrdiff_t>(geo.pad.left));
              for (std::size_t ow = cols.begin; ow < cols.end; ++ow) y_row[ow] += weight * src[ow];
            }
          }
        }
      }
    }
  }

  Var out_var{g.size()};
  return g.record(std::move(out), {input, kernel}, [=](Graph<T>& graph) {
    conv_backward(graph, input, kernel, out_var, geo, [&geo](std::size_t co, std::size_t ci) {
      return (co / geo.cout_per_group) * geo.cin_per_group + ci;
    });
  });
}

template <class T>
Var depthwise_conv(Graph<T>& g, Var input, Var kernel, std::size_t depth_multiplier, Padding pad) {
  const Shape& in_shape = g.value(input).shape();
  const Shape& k_shape = g.value(kernel).shape();
  require_rank(in_shape, 4, "depthwise_conv", "input");
  require_rank(k_shape, 4, "depthwise_conv", "kernel");
  if (depth_multiplier == 0) throw ShapeError("depthwise_conv: depth multiplier must be positive");
  const std::size_t channels = in_shape[1];
  if (k_shape[0] != channels * depth_multiplier) {
    axis_mismatch("depthwise_conv", "kernel out-channels", k_shape[0], channels * depth_multiplier);
  }
  if (k_shape[1] != 1) axis_mismatch("depthwise_conv", "kernel in-channels", k_shape[1], 1);
  const ConvGeometry geo = conv_geometry(in_shape, k_shape, channels, pad, "depthwise_conv");

  const auto& x = g.value(input).values();
  const auto& k = g.value(kernel).values();
  BasicTensor<T> out({geo.n, geo.cout, geo.out_h, geo.out_w});
  auto& y = out.values();
  const std::size_t in_plane = geo.h * geo.w;
  const std::size_t out_plane = geo.out_h * geo.out_w;

  for (std::size_t n = 0; n < geo.n; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const T* x_plane = x.data() + (n * channels + c) * in_plane;
      for (std::size_t d = 0; d < depth_multiplier; ++d) {
        const std::size_t co = c * depth_multiplier + d;
        const T* taps = k.data() + co * geo.kh * geo.kw;
        T* y_plane = y.data() + (n * geo.cout + co) * out_plane;
        for (std::size_t kh = 0; kh < geo.kh; ++kh) {
          for (std::size_t oh = 0; oh < geo.out_h; ++oh) {
            const std::ptrdiff_t ih = input_row(geo, oh, kh);
            if (ih < 0) continue;
            const T* x_row = x_plane + static_cast<std::size_t>(ih) * geo.w;
            T* y_row = y_plane + oh * geo.out_w;
            for (std::size_t kw = 0; kw < geo.kw; ++kw) {
              const T weight = taps[kh * geo.kw + kw];
              const ColumnRange cols = valid_columns(geo, kw);
              const T* src = x_row + (static_cast<std::ptrdiff_t>(kw) - static_cast<std::ptrdiff_t>(geo.pad.left));
              for (std::size_t ow = cols.begin; ow < cols.end; ++ow) y_row[ow] += weight * src[ow];
            }
          }
        }
      }
    }
  }

  Var out_var{g.size()};
  return g.record(std::move(out), {input, kernel}, [=](Graph<T>& graph) {
    conv_backward(graph, input, kernel, out_var, geo,
                  [depth_multiplier](std::size_t co, std::size_t) { return co / depth_multiplier; });
  });
}

template <class T>
Var elu(Graph<T>& g, Var x) {
  BasicTensor<T> out = g.value(x);
  for (T& v : out.values()) v = v > T{0} ? v : std::expm1(v);
  Var out_var{g.size()};
  return g.record(std::move(out), {x}, [=](Graph<T>& graph) {
    const auto& y = graph.value(out_var).values();
    const auto& dy = graph.grad(out_var);
    const auto& in = graph.value(x).values();
    auto& dx = graph.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * (in[i] > T{0} ? T{1} : y[i] + T{1});
  });
}

template <class T>
Var avg_pool(Graph<T>& g, Var x, std::size_t pool_h, std::size_t pool_w) {
  const Shape& s = g.value(x).shape();
  require_rank(s, 4, "avg_pool", "input");
  if (pool_h == 0 || pool_w == 0) throw ShapeError("avg_pool: pool extents must be positive");
  if (s[2] % pool_h != 0) axis_mismatch("avg_pool", "H (not divisible by pool height)", s[2], pool_h);
  if (s[3] % pool_w != 0) axis_mismatch("avg_pool", "W (not divisible by pool width)", s[3], pool_w);
  const std::size_t planes = s[0] * s[1];
  const std::size_t h = s[2], w = s[3], oh_n = h / pool_h, ow_n = w / pool_w;
  const T scale = T{1} / static_cast<T>(pool_h * pool_w);
  const auto& in = g.value(x).values();
  BasicTensor<T> out({s[0], s[1], oh_n, ow_n});
  auto& y = out.values();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oh = 0; oh < oh_n; ++oh) {
      for (std::size_t ow = 0; ow < ow_n; ++ow) {
        T acc{0};
        for (std::size_t i = 0; i < pool_h; ++i) {
          const T* row = in.data() + (p * h + oh * pool_h + i) * w + ow * pool_w;
          for (std::size_t j = 0; j < pool_w; ++j) acc += row[j];
        }
        y[(p * oh_n + oh) * ow_n + ow] = acc * scale;
      }
    }
  }
  Var out_var{g.size()};
  return g.record(std::move(out), {x}, [=](Graph<T>& graph) {
    const auto& dy = graph.grad(out_var);
    auto& dx = graph.grad(x);
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t ih = 0; ih < h; ++ih) {
        for (std::size_t iw = 0; iw < w; ++iw) {
          dx[(p * h + ih) * w + iw] += dy[(p * oh_n + ih / pool_h) * ow_n + iw / pool_w] * scale;
        }
      }
    }
  });
}

template <class T>
Var crop_width(Graph<T>& g, Var x, std::size_t width) {
  const Shape& s = g.value(x).shape();
  require_rank(s, 4, "crop_width", "input");
  if (width == 0 || width > s[3]) axis_mismatch("crop_width", "W (crop exceeds input)", s[3], width);
  if (width == s[3]) return x;
  const std::size_t rows = s[0] * s[1] * s[2], w = s[3];
  const auto& in = g.value(x).values();
  BasicTensor<T> out({s[0], s[1], s[2], width});
  auto& y = out.values();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(in.data() + r * w, width, y.data() + r * width);
  Var out_var{g.size()};
  return g.record(std::move(out), {x}, [=](Graph<T>& graph) {
    const auto& dy = graph.grad(out_var);
    auto& dx = graph.grad(x);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < width; ++j) dx[r * w + j] += dy[r * width + j];
    }
  });
}

template <class T>
Var batch_norm(Graph<T>& g, Var x, Var gamma, Var beta, BatchNormState<T> state,
               const BatchNormOptions& options) {
  const Shape& s = g.value(x).shape();
  require_rank(s, 4, "batch_norm", "input");
  const std::size_t n = s[0], channels = s[1], plane = s[2] * s[3];
  const std::size_t count = n * plane;
  if (g.value(gamma).shape() != Shape{channels}) axis_mismatch("batch_norm", "gamma", g.value(gamma).size(), channels);
  if (g.value(beta).shape() != Shape{channels}) axis_mismatch("batch_norm", "beta", g.value(beta).size(), channels);
  const bool train = options.mode == Mode::train;
  if (train && count < 2) {
    throw ValidationError("batch_norm: train mode needs at least 2 values per channel (N*H*W = " +
                          std::to_string(count) + ")");
  }
  if (!train && (!state.running_mean || !state.running_var)) {
    throw ValidationError("batch_norm: eval mode needs running statistics");
  }
  for (BasicTensor<T>* stat : {state.running_mean, state.running_var}) {
    if (stat && stat->shape() != Shape{channels}) axis_mismatch("batch_norm", "running statistics", stat->size(), channels);
  }

  const auto& in = g.value(x).values();
  const auto& gm = g.value(gamma).values();
  const auto& bt = g.value(beta).values();
  std::vector<T> inv_std(channels);
  BasicTensor<T> normalized(s);
  auto& xhat = normalized.values();

  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0, var = 0.0;
    if (train) {
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = in.data() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) mean += p[i];
      }
      mean /= static_cast<double>(count);
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = in.data() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      if (options.update_running && state.running_mean && state.running_var) {
        const double m = options.momentum;
        const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
        T& rm = (*state.running_mean)[c];
        T& rv = (*state.running_var)[c];
        rm = static_cast<T>((1.0 - m) * rm + m * mean);
        rv = static_cast<T>((1.0 - m) * rv + m * unbiased);
      }
    } else {
      mean = (*state.running_mean)[c];
      var = (*state.running_var)[c];
    }
    const double istd = 1.0 / std::sqrt(var + options.epsilon);
    inv_std[c] = static_cast<T>(istd);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) xhat[base + i] = static_cast<T>((in[base + i] - mean) * istd);
    }
  }

  BasicTensor<T> out(s);
  auto& y = out.values();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) y[base + i] = gm[c] * xhat[base + i] + bt[c];
    }
  }

  Var out_var{g.size()};
  return g.record(std::move(out), {x, gamma, beta},
                  [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph<T>& graph) {
    const auto& dy = graph.grad(out_var);
    const auto& gm_v = graph.value(gamma).values();
    std::vector<double> sum_dy(channels, 0.0), sum_dy_xhat(channels, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t base = (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy[c] += dy[base + i];
          sum_dy_xhat[c] += static_cast<double>(dy[base + i]) * xhat[base + i];
        }
      }
    }
    if (graph.requires_grad(gamma)) {
      auto& dg = graph.grad(gamma);
      for (std::size_t c = 0; c < channels; ++c) dg[c] += static_cast<T>(sum_dy_xhat[c]);
    }
    if (graph.requires_grad(beta)) {
      auto& db = graph.grad(beta);
      for (std::size_t c = 0; c < channels; ++c) db[c] += static_cast<T>(sum_dy[c]);
    }
    if (!graph.requires_grad(x)) return;
    auto& dx = graph.grad(x);
    const double m = static_cast<double>(count);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t base = (b * channels + c) * plane;
        const double scale = static_cast<double>(gm_v[c]) * inv_std[c];
        for (std::size_t i = 0; i < plane; ++i) {
          if (train) {
            dx[base + i] += static_cast<T>(scale / m *
                                           (m * dy[base + i] - sum_dy[c] - xhat[base + i] * sum_dy_xhat[c]));
          } else {
            dx[base + i] += static_cast<T>(scale * dy[base + i]);
          }
        }
      }
    }
  });
}

template <class T>
Var dropout(Graph<T>& g, Var x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValidationError("dropout: rate must lie in [0, 1), got " + format_number(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(g.value(x).size());
  for (T& m : mask) m = rng.uniform() < rate ? T{0} : keep_scale;
  BasicTensor<T> out = g.value(x);
  auto& y = out.values();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  Var out_var{g.size()};
  return g.record(std::move(out), {x}, [=, mask = std::move(mask)](Graph<T>& graph) {
    const auto& dy = graph.grad(out_var);
    auto& dx = graph.grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * mask[i];
  });
}

template <class T>
Var dense(Graph<T>& g, Var x, Var weight, Var bias) {
  const Shape& xs = g.value(x).shape();
  const Shape& ws = g.value(weight).shape();
  require_rank(xs, 2, "dense", "input");
  require_rank(ws, 2, "dense", "weight");
  const std::size_t n = xs[0], f = xs[1], k = ws[1];
  if (ws[0] != f) axis_mismatch("dense", "weight rows (input features)", ws[0], f);
  if (g.value(bias).shape() != Shape{k}) axis_mismatch("dense", "bias", g.value(bias).size(), k);
  const auto& in = g.value(x).values();
  const auto& w = g.value(weight).values();
  const auto& b = g.value(bias).values();
  BasicTensor<T> out({n, k});
  auto& y = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    T* row = y.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) row[j] = b[j];
    for (std::size_t p = 0; p < f; ++p) {
      const T v = in[i * f + p];
      const T* w_row = w.data() + p * k;
      for (std::size_t j = 0; j < k; ++j) row[j] += v * w_row[j];
    }
  }
  Var out_var{g.size()};
  return g.record(std::move(out), {x, weight, bias}, [=](Graph<T>& graph) {
    const auto& dy = graph.grad(out_var);
    const auto& xin = graph.value(x).values();
    const auto& wv = graph.value(weight).values();
    if (graph.requires_grad(x)) {
      auto& dx = graph.grad(x);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < f; ++p) {
          T acc{0};
          for (std::size_t j = 0; j < k; ++j) acc += dy[i * k + j] * wv[p * k + j];
          dx[i * f + p] += acc;
        }
      }
    }
    if (graph.requires_grad(weight)) {
      auto& dw = graph.grad(weight);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < f; ++p) {
          const T v = xin[i * f + p];
          for (std::size_t j = 0; j < k; ++j) dw[p * k + j] += v * dy[i * k + j];
        }
      }
    }
    if (graph.requires_grad(bias)) {
      auto& db = graph.grad(bias);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) db[j] += dy[i * k + j];
      }
    }
  });
}

template <class T>
Var flatten(Graph<T>& g, Var x) {
  const Shape& s = g.value(x).shape();
  if (s.empty()) throw ShapeError("flatten: input must have a batch axis");
  const std::size_t n = s[0];
  BasicTensor<T> out = g.value(x).reshaped({n, g.value(x).size() / n});
  Var out_var{g.size()};
  return g.record(std::move(out), {x}, [=](Graph<T>& graph) {
    const auto& dy = graph.grad(out_var);
    auto& dx = graph.grad(x);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
  });
}

template <class T>
Var softmax_cross_entropy(Graph<T>& g, Var logits, std::span<const int> labels) {
  const Shape& s = g.value(logits).shape();
  require_rank(s, 2, "softmax_cross_entropy", "logits");
  const std::size_t n = s[0], k = s[1];
  if (labels.size() != n) axis_mismatch("softmax_cross_entropy", "labels (batch)", labels.size(), n);
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(k) + ")");
    }
  }
  BasicTensor<T> probs = softmax(g.value(logits));
  const auto& z = g.value(logits).values();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = z.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(static_cast<double>(row[j]) - mx);
    loss += mx + std::log(total) - row[labels[i]];
  }
  loss /= static_cast<double>(n);
  std::vector<int> targets(labels.begin(), labels.end());
  Var out_var{g.size()};
  return g.record(BasicTensor<T>({1}, {static_cast<T>(loss)}), {logits},
                  [=, probs = std::move(probs), targets = std::move(targets)](Graph<T>& graph) {
    const T scale = graph.grad(out_var)[0] / static_cast<T>(n);
    auto& dz = graph.grad(logits);
    const auto& p = probs.values();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const T onehot = static_cast<int>(j) == targets[i] ? T{1} : T{0};
        dz[i * k + j] += (p[i * k + j] - onehot) * scale;
      }
    }
  });
}

template <class T>
Var sum(Graph<T>& g, Var x) {
  double total = 0.0;
  for (T v : g.value(x).values()) total += v;
  Var out_var{g.size()};
  return g.record(BasicTensor<T>({1}, {static_cast<T>(total)}), {x}, [=](Graph<T>& graph) {
    const T upstream = graph.grad(out_var)[0];
    for (T& d : graph.grad(x)) d += upstream;
  });
}

template <class T>
Var mul(Graph<T>& g, Var a, Var b) {
  if (g.value(a).shape() != g.value(b).shape()) {
    throw ShapeError("mul: shapes differ, " + shape_to_string(g.value(a).shape()) + " vs " +
                     shape_to_string(g.value(b).shape()));
  }
  BasicTensor<T> out = g.value(a);
  const auto& bv = g.value(b).values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Var out_var{g.size()};
  return g.record(std::move(out), {a, b}, [=](Graph<T>& graph) {
    const auto& dy = graph.grad(out_var);
    const auto& av = graph.value(a).values();
    const auto& bvals = graph.value(b).values();
    if (graph.requires_grad(a)) {
      auto& da = graph.grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bvals[i];
    }
    if (graph.requires_grad(b)) {
      auto& db = graph.grad(b);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av[i];
    }
  });
}

template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  BasicTensor<T> out(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data().data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(static_cast<double>(row[j]) - mx);
    for (std::size_t j = 0; j < k; ++j) {
      out[i * k + j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - mx) / total);
    }
  }
  return out;
}

#define EEGTL_INSTANTIATE_OPS(T)                                                                 \
  template Var conv2d<T>(Graph<T>&, Var, Var, std::size_t, Padding);                             \
  template Var depthwise_conv<T>(Graph<T>&, Var, Var, std::size_t, Padding);                     \
  template Var elu<T>(Graph<T>&, Var);                                                           \
  template Var avg_pool<T>(Graph<T>&, Var, std::size_t, std::size_t);                            \
  template Var crop_width<T>(Graph<T>&, Var, std::size_t);                                         \
  template Var batch_norm<T>(Graph<T>&, Var, Var, Var, BatchNormState<T>, const BatchNormOptions&); \
  template Var dropout<T>(Graph<T>&, Var, double, Mode, Rng&);                                   \
  template Var dense<T>(Graph<T>&, Var, Var, Var);                                               \
  template Var flatten<T>(Graph<T>&, Var);                                                       \
  template Var softmax_cross_entropy<T>(Graph<T>&, Var, std::span<const int>);                   \
  template Var sum<T>(Graph<T>&, Var);                                                           \
  template Var mul<T>(Graph<T>&, Var, Var);                                                      \
  template BasicTensor<T> softmax<T>(const BasicTensor<T>&);

EEGTL_INSTANTIATE_OPS(float)
EEGTL_INSTANTIATE_OPS(double)

#undef EEGTL_INSTANTIATE_OPS

}  // namespace eegtl
