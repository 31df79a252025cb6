#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "emg_affect/rng.hpp"
#include "emg_affect/types.hpp"

namespace emg {

inline constexpr int kAdcMin = 0;
inline constexpr int kAdcMax = 999;

/// One recording: integer ADC counts in [0, 999] at a fixed rate.
class SampleSeries {
 public:
  SampleSeries() = default;
  /// Throws ValueOutOfRange for samples outside [0, 999] and InvalidConfig
  /// for a zero rate.
  SampleSeries(std::uint32_t sample_rate_hz, std::vector<int> samples,
               std::int64_t start_offset_ms = 0);

  std::uint32_t sample_rate_hz() const { return sample_rate_hz_; }
  std::int64_t start_offset_ms() const { return start_offset_ms_; }
  const std::vector<int>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double duration_s() const {
    return static_cast<double>(samples_.size()) / sample_rate_hz_;
  }

  friend bool operator==(const SampleSeries&, const SampleSeries&) = default;

 private:
  std::uint32_t sample_rate_hz_ = 1;
  std::vector<int> samples_;
  std::int64_t start_offset_ms_ = 0;
};

/// Half-open index range [begin, end).
struct SlotRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const SlotRange&, const SlotRange&) = default;
};

/// Contiguous split of a series into equal slots; the last slot takes the
/// remainder.
struct SlotPartition {
  std::vector<SlotRange> slots;
  std::size_t slot_count() const { return slots.size(); }
  std::size_t covered() const { return slots.empty() ? 0 : slots.back().end; }
};

/// Drops the leading and trailing rest windows (seconds). Throws
/// DurationTooShort when the recording is not longer than head + tail.
SampleSeries trim_rest_windows(const SampleSeries& series, double head_s = 10.0,
                               double tail_s = 5.0);

/// Throws TooFewSamples when the series is shorter than slot_count.
SlotPartition partition_slots(const SampleSeries& series,
                              std::size_t slot_count = 10);
SlotPartition partition_slots(std::size_t sample_count,
                              std::size_t slot_count = 10);

/// Parameters of the two-state synthetic EMG generator.
///
/// Signal model: baseline + N(0, noise_sd) + a train of spikes whose onsets
/// follow a Poisson process of spike_rate_hz. Each spike jumps by an
/// amplitude drawn around spike_amplitude_mean and decays exponentially with
/// time constant spike_duration_ms.
struct SynthProfile {
  Label label = Label::Relaxed;
  double baseline = 300.0;
  double noise_sd = 6.0;
  double spike_rate_hz = 0.3;
  double spike_amplitude_mean = 60.0;
  double spike_duration_ms = 120.0;
  std::uint64_t seed = 0;

  static SynthProfile relaxed(std::uint64_t seed = 0);
  static SynthProfile angry(std::uint64_t seed = 0);
  static SynthProfile defaults_for(Label label, std::uint64_t seed = 0);
};

/// Deterministic in (profile, duration_s, sample_rate_hz). Output is rounded
/// to the nearest integer and clamped to [0, 999].
SampleSeries generate_synthetic(const SynthProfile& profile, double duration_s,
                                std::uint32_t sample_rate_hz);

/// Streaming form of the generator, used by the live simulator source.
/// next() yields exactly the sequence generate_synthetic would produce.
class SynthStream {
 public:
  SynthStream(const SynthProfile& profile, std::uint32_t sample_rate_hz);
  int next();

 private:
  SynthProfile profile_;
  double dt_s_;
  double decay_;
  double spike_level_ = 0.0;
  double next_spike_s_ = 0.0;
  double t_s_ = 0.0;
  Rng noise_rng_;
  Rng spike_rng_;
};

}  // namespace emg
