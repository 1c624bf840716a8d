#include "eegtl/synth.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>

#include "eegtl/error.hpp"
#include "eegtl/format.hpp"
#include "eegtl/rng.hpp"

namespace eegtl {
namespace {

constexpr double kBaseAmplitude = 0.4;
constexpr double kActiveAmplitude = 3.0;
constexpr double kBandLowHz = 8.0;
constexpr double kBandHighHz = 30.0;
constexpr double kJitterHz = 1.0;
constexpr double kSubjectShiftHz = 6.0;
constexpr int kPinkRows = 12;

/// Voss-McCartney pink noise with unit variance.
void pink_noise(Rng& rng, std::span<double> out) {
  std::array<double, kPinkRows> rows{};
  double total = 0.0;
  for (double& r : rows) total += (r = rng.normal());
  const double scale = 1.0 / std::sqrt(static_cast<double>(kPinkRows + 1));
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Row k is redrawn every 2^k samples.
    const std::size_t counter = i + 1;
    const int k = std::min(kPinkRows - 1, std::countr_zero(counter));
    total -= rows[k];
    total += (rows[k] = rng.normal());
    out[i] = (total + rng.normal()) * scale;
  }
}

std::vector<std::vector<std::size_t>> class_channel_map(const SynthConfig& c) {
  if (!c.class_channels.empty()) return c.class_channels;
  std::vector<std::vector<std::size_t>> map(c.n_classes);
  for (std::size_t ch = 0; ch < c.n_channels; ++ch) map[ch % c.n_classes].push_back(ch);
  return map;
}

EpochSet generate_session(const SynthConfig& c, int subject, int session, const std::vector<double>& mixing,
                          const std::vector<double>& rhythm_hz, const std::vector<std::vector<std::size_t>>& active) {
  Rng rng(derive_seed(c.seed, "synth.session", static_cast<std::uint64_t>(subject) * 2 + session));
  EpochSet set;
  set.subject_id = subject;
  set.session_id = session;
  set.sample_rate_hz = c.sample_rate_hz;
  set.n_samples = c.n_samples;
  set.channel_names = c.channel_names.empty() ? default_channel_names(c.n_channels) : c.channel_names;
  set.class_names = default_class_names(c.n_classes);
  for (std::size_t i = 0; i < c.n_trials; ++i) set.labels.push_back(static_cast<int>(i % c.n_classes));
  rng.shuffle(std::span<int>(set.labels));

  const std::size_t nc = c.n_channels, ns = c.n_samples;
  set.data.resize(c.n_trials * nc * ns);
  std::vector<double> source(nc * ns);
  std::vector<bool> is_active(nc);
  for (std::size_t t = 0; t < c.n_trials; ++t) {
    std::fill(is_active.begin(), is_active.end(), false);
    for (std::size_t ch : active[static_cast<std::size_t>(set.labels[t])]) is_active[ch] = true;
    for (std::size_t ch = 0; ch < nc; ++ch) {
      auto row = std::span<double>(source).subspan(ch * ns, ns);
      pink_noise(rng, row);
      const double amplitude = (is_active[ch] ? kActiveAmplitude : kBaseAmplitude) * rng.uniform(0.8, 1.2);
      const double freq = rhythm_hz[ch] + rng.uniform(-kJitterHz, kJitterHz);
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t s = 0; s < ns; ++s) {
        row[s] += amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(s) / c.sample_rate_hz + phase);
      }
    }
    auto trial = set.trial(t);
    for (std::size_t out = 0; out < nc; ++out) {
      for (std::size_t s = 0; s < ns; ++s) {
        double acc = 0.0;
        for (std::size_t in = 0; in < nc; ++in) acc += mixing[out * nc + in] * source[in * ns + s];
        trial[out * ns + s] = static_cast<float>(acc);
      }
    }
  }
  set.validate();
  return set;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_subjects == 0 || n_trials == 0 || n_channels == 0 || n_samples == 0 || n_classes == 0) {
    throw ValidationError("synth: n_subjects, n_trials, n_channels, n_samples and n_classes must be positive");
  }
  if (n_classes < 2) throw ValidationError("synth: n_classes must be at least 2");
  if (n_trials % n_classes != 0) {
    throw ValidationError("synth: n_trials " + std::to_string(n_trials) + " is not divisible by n_classes " +
                          std::to_string(n_classes));
  }
  if (!(sample_rate_hz > 2.0 * kBandHighHz)) {
    throw ValidationError("synth: sample_rate_hz must exceed " + format_number(2.0 * kBandHighHz));
  }
  if (!(difficulty >= 0.0 && difficulty <= 1.0)) {
    throw ValidationError("synth: difficulty must lie in [0, 1], got " + format_number(difficulty));
  }
  if (!class_channels.empty()) {
    if (class_channels.size() != n_classes) throw ValidationError("synth: class_channels needs one entry per class");
    for (const auto& chans : class_channels) {
      for (std::size_t ch : chans) {
        if (ch >= n_channels) throw ValidationError("synth: class channel " + std::to_string(ch) + " out of range");
      }
    }
  }
  if (!channel_names.empty() && channel_names.size() != n_channels) {
    throw ValidationError("synth: channel_names must list n_channels names");
  }
}

Datasets synth_generate(const SynthConfig& config) {
  config.validate();
  const auto active = class_channel_map(config);
  const std::size_t nc = config.n_channels;
  Rng shared(derive_seed(config.seed, "synth.rhythm"));
  std::vector<double> base_hz(nc);
  for (double& f : base_hz) f = shared.uniform(kBandLowHz + kJitterHz, kBandHighHz - kJitterHz);
  Datasets sets;
  for (std::size_t u = 1; u <= config.n_subjects; ++u) {
    Rng mix_rng(derive_seed(config.seed, "synth.subject", u));
    std::vector<double> mixing(nc * nc);
    const double scale = config.difficulty / std::sqrt(static_cast<double>(nc));
    for (std::size_t i = 0; i < nc; ++i) {
      for (std::size_t j = 0; j < nc; ++j) mixing[i * nc + j] = (i == j ? 1.0 : 0.0) + scale * mix_rng.normal();
    }
    std::vector<double> rhythm_hz(base_hz);
    for (double& f : rhythm_hz) {
      f = std::clamp(f + config.difficulty * mix_rng.uniform(-kSubjectShiftHz, kSubjectShiftHz),
                     kBandLowHz + kJitterHz, kBandHighHz - kJitterHz);
    }
    for (int session = 1; session <= 2; ++session) {
      const int subject = static_cast<int>(u);
      sets.emplace(SessionKey{subject, session}, generate_session(config, subject, session, mixing, rhythm_hz, active));
    }
  }
  return sets;
}

std::vector<std::string> default_channel_names(std::size_t n_channels) {
  if (n_channels == 25) {
    return {"Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C5",  "C3",  "C1",   "Cz",   "C2",   "C4",  "C6",
            "CP3", "CP1", "CPz", "CP2", "CP4", "P1", "Pz", "P2", "POz", "EOG1", "EOG2", "EOG3"};
  }
  if (n_channels == 6) return {"C3", "Cz", "C4", "EOG1", "EOG2", "EOG3"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_channels; ++i) names.push_back("ch" + std::to_string(i));
  return names;
}

std::vector<std::string> default_class_names(std::size_t n_classes) {
  if (n_classes == 4) return {"left_hand", "right_hand", "feet", "tongue"};
  if (n_classes == 2) return {"left_hand", "right_hand"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_classes; ++i) names.push_back("class" + std::to_string(i));
  return names;
}

}  // namespace eegtl
