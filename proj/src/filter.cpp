#include "eegtl/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "eegtl/format.hpp"

namespace eegtl {

void FilterSpec::validate(double sample_rate_hz) const {
  if (order < 1) throw ValidationError("filter: order must be at least 1, got " + std::to_string(order));
  const double nyquist = sample_rate_hz / 2.0;
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < nyquist)) {
    throw ValidationError("filter: cutoff " + format_number(cutoff_hz) + " Hz must lie in (0, " +
                          format_number(nyquist) + ") Hz for " + format_number(sample_rate_hz) + " Hz sampling");
  }
}

std::vector<SosSection> butterworth_highpass(int order, double cutoff_hz, double sample_rate_hz) {
  FilterSpec{cutoff_hz, order}.validate(sample_rate_hz);
  using std::numbers::pi;
  const double fs2 = 2.0 * sample_rate_hz;
  const double warped = fs2 * std::tan(pi * cutoff_hz / sample_rate_hz);
  std::vector<SosSection> sos;
  // Upper-half-plane prototype poles; each one stands for a conjugate pair.
  for (int k = 0; k < order / 2; ++k) {
    const std::complex<double> proto = std::polar(1.0, pi * (2.0 * k + order + 1) / (2.0 * order));
    const std::complex<double> s = warped / proto;
    const std::complex<double> z = (fs2 + s) / (fs2 - s);
    const double a1 = -2.0 * z.real();
    const double a2 = std::norm(z);
    const double gain = (1.0 - a1 + a2) / 4.0;  // unity at Nyquist
    sos.push_back({gain, -2.0 * gain, gain, a1, a2});
  }
  if (order % 2 == 1) {
    const double z = (fs2 - warped) / (fs2 + warped);
    const double gain = (1.0 + z) / 2.0;
    sos.push_back({gain, -gain, 0.0, -z, 0.0});
  }
  return sos;
}

void sos_filter(std::span<const SosSection> sos, std::span<double> signal, std::span<const double> initial_scale) {
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const SosSection& f = sos[k];
    double z1 = 0.0, z2 = 0.0;
    if (k < initial_scale.size()) {
      // Steady state of this section for a constant input of initial_scale[k].
      const double dc = (f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2);
      z1 = (f.b1 + f.b2 - (f.a1 + f.a2) * dc) * initial_scale[k];
      z2 = (f.b2 - f.a2 * dc) * initial_scale[k];
    }
    for (double& x : signal) {
      const double y = f.b0 * x + z1;
      z1 = f.b1 * x - f.a1 * y + z2;
      z2 = f.b2 * x - f.a2 * y;
      x = y;
    }
  }
}

namespace {

std::vector<double> steady_state_scales(std::span<const SosSection> sos, double x0) {
  std::vector<double> scales;
  double level = x0;
  for (const auto& f : sos) {
    scales.push_back(level);
    level *= (f.b0 + f.b1 + f.b2) / (1.0 + f.a1 + f.a2);
  }
  return scales;
}

}  // namespace

std::vector<double> sos_filtfilt(std::span<const SosSection> sos, std::span<const double> signal,
                                 std::size_t pad_length) {
  const std::size_t n = signal.size();
  if (n <= pad_length) {
    throw ValidationError("filter: signal of " + std::to_string(n) + " samples is too short for padding of " +
                          std::to_string(pad_length));
  }
  std::vector<double> ext(n + 2 * pad_length);
  const double first = signal.front(), last = signal.back();
  for (std::size_t i = 0; i < pad_length; ++i) {
    ext[i] = 2.0 * first - signal[pad_length - i];
    ext[pad_length + n + i] = 2.0 * last - signal[n - 2 - i];
  }
  std::copy(signal.begin(), signal.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad_length));

  sos_filter(sos, ext, steady_state_scales(sos, ext.front()));
  std::reverse(ext.begin(), ext.end());
  sos_filter(sos, ext, steady_state_scales(sos, ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad_length),
          ext.begin() + static_cast<std::ptrdiff_t>(pad_length + n)};
}

EpochSet highpass_filter(const EpochSet& set, const FilterSpec& spec) {
  const auto sos = butterworth_highpass(spec.order, spec.cutoff_hz, set.sample_rate_hz);
  EpochSet out = set;
  std::vector<double> row(set.n_samples);
  for (std::size_t t = 0; t < out.n_trials(); ++t) {
    auto trial = out.trial(t);
    for (std::size_t c = 0; c < out.n_channels(); ++c) {
      auto samples = trial.subspan(c * out.n_samples, out.n_samples);
      std::copy(samples.begin(), samples.end(), row.begin());
      const auto filtered = sos_filtfilt(sos, row, spec.pad_length());
      std::transform(filtered.begin(), filtered.end(), samples.begin(),
                     [](double v) { return static_cast<float>(v); });
    }
  }
  return out;
}

}  // namespace eegtl
