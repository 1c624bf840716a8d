#pragma once

#include <span>
#include <vector>

#include "eegtl/data.hpp"

namespace eegtl {

/// Zero-phase Butterworth high-pass.
struct FilterSpec {
  double cutoff_hz = 4.0;
  int order = 4;

  void validate(double sample_rate_hz) const;
  /// Edge padding used by the forward-backward pass.
  std::size_t pad_length() const { return 3 * static_cast<std::size_t>(order + 1); }
};

/// One biquad, a0 normalised to 1.
struct SosSection {
  double b0, b1, b2, a1, a2;
};

/// Digital Butterworth high-pass designed by the prewarped bilinear transform.
std::vector<SosSection> butterworth_highpass(int order, double cutoff_hz, double sample_rate_hz);

/// Single causal pass with direct-form II transposed sections.
void sos_filter(std::span<const SosSection> sos, std::span<double> signal, std::span<const double> initial_scale);

/// Forward-backward filtering with odd-extension padding and steady-state initial conditions.
std::vector<double> sos_filtfilt(std::span<const SosSection> sos, std::span<const double> signal,
                                 std::size_t pad_length);

/// Applies the filter to every trial and channel independently.
EpochSet highpass_filter(const EpochSet& set, const FilterSpec& spec);

}  // namespace eegtl
