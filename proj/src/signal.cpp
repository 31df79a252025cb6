#include "emg_affect/signal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "emg_affect/error.hpp"

namespace emg {

SampleSeries::SampleSeries(std::uint32_t sample_rate_hz, std::vector<int> samples,
                           std::int64_t start_offset_ms)
    : sample_rate_hz_(sample_rate_hz),
      samples_(std::move(samples)),
      start_offset_ms_(start_offset_ms) {
  if (sample_rate_hz_ == 0) {
    throw Error(ErrorCode::InvalidConfig, "sample rate must be >= 1 Hz");
  }
  if (start_offset_ms_ < 0) {
    throw Error(ErrorCode::InvalidConfig, "start offset must be >= 0");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i] < kAdcMin || samples_[i] > kAdcMax) {
      throw Error(ErrorCode::ValueOutOfRange,
                  "sample " + std::to_string(i) + " = " +
                      std::to_string(samples_[i]) + " outside [0, 999]");
    }
  }
}

SampleSeries trim_rest_windows(const SampleSeries& series, double head_s,
                               double tail_s) {
  if (!(head_s >= 0.0) || !(tail_s >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "rest windows must be non-negative");
  }
  const double rate = series.sample_rate_hz();
  if (series.duration_s() <= head_s + tail_s) {
    throw Error(ErrorCode::DurationTooShort,
                std::to_string(series.duration_s()) + " s recording, need > " +
                    std::to_string(head_s + tail_s) + " s");
  }
  const auto n = series.size();
  const auto head = static_cast<std::size_t>(std::llround(head_s * rate));
  const auto tail = static_cast<std::size_t>(std::llround(tail_s * rate));
  if (head + tail >= n) {
    throw Error(ErrorCode::DurationTooShort, "nothing left after trimming");
  }
  const auto& all = series.samples();
  std::vector<int> kept(all.begin() + static_cast<std::ptrdiff_t>(head),
                        all.begin() + static_cast<std::ptrdiff_t>(n - tail));
  const auto offset_ms = series.start_offset_ms() +
                         std::llround(static_cast<double>(head) * 1000.0 / rate);
  return SampleSeries(series.sample_rate_hz(), std::move(kept), offset_ms);
}

SlotPartition partition_slots(std::size_t sample_count, std::size_t slot_count) {
  if (slot_count == 0) {
    throw Error(ErrorCode::InvalidConfig, "slot count must be positive");
  }
  if (sample_count < slot_count) {
    throw Error(ErrorCode::TooFewSamples,
                std::to_string(sample_count) + " samples for " +
                    std::to_string(slot_count) + " slots");
  }
  const std::size_t width = sample_count / slot_count;
  SlotPartition partition;
  partition.slots.reserve(slot_count);
  for (std::size_t s = 0; s < slot_count; ++s) {
    const std::size_t begin = s * width;
    const std::size_t end = (s + 1 == slot_count) ? sample_count : begin + width;
    partition.slots.push_back({begin, end});
  }
  return partition;
}

SlotPartition partition_slots(const SampleSeries& series, std::size_t slot_count) {
  return partition_slots(series.size(), slot_count);
}

SynthProfile SynthProfile::relaxed(std::uint64_t seed) {
  SynthProfile p;
  p.label = Label::Relaxed;
  p.baseline = 300.0;
  p.noise_sd = 6.0;
  p.spike_rate_hz = 0.3;
  p.spike_amplitude_mean = 60.0;
  p.spike_duration_ms = 120.0;
  p.seed = seed;
  return p;
}

SynthProfile SynthProfile::angry(std::uint64_t seed) {
  SynthProfile p;
  p.label = Label::Angry;
  p.baseline = 300.0;
  p.noise_sd = 14.0;
  p.spike_rate_hz = 1.5;
  p.spike_amplitude_mean = 180.0;
  p.spike_duration_ms = 150.0;
  p.seed = seed;
  return p;
}

SynthProfile SynthProfile::defaults_for(Label label, std::uint64_t seed) {
  return label == Label::Angry ? angry(seed) : relaxed(seed);
}

namespace {
// Independent streams for noise and spike timing so that changing one knob
// does not reshuffle the other.
constexpr std::uint64_t kNoiseStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kSpikeStream = 0xD1B54A32D192ED03ULL;
}  // namespace

SynthStream::SynthStream(const SynthProfile& profile, std::uint32_t sample_rate_hz)
    : profile_(profile),
      dt_s_(1.0 / std::max<std::uint32_t>(sample_rate_hz, 1)),
      decay_(profile.spike_duration_ms > 0.0
                 ? std::exp(-dt_s_ * 1000.0 / profile.spike_duration_ms)
                 : 0.0),
      noise_rng_(profile.seed ^ kNoiseStream),
      spike_rng_(profile.seed ^ kSpikeStream) {
  if (profile_.spike_rate_hz > 0.0) {
    next_spike_s_ = spike_rng_.exponential(profile_.spike_rate_hz);
  }
}

int SynthStream::next() {
  spike_level_ *= decay_;
  if (profile_.spike_rate_hz > 0.0) {
    while (next_spike_s_ <= t_s_) {
      // Amplitude uniform on [0.5, 1.5] x mean.
      spike_level_ += profile_.spike_amplitude_mean * (0.5 + spike_rng_.uniform());
      next_spike_s_ += spike_rng_.exponential(profile_.spike_rate_hz);
    }
  }
  double value = profile_.baseline + spike_level_;
  if (profile_.noise_sd > 0.0) value += profile_.noise_sd * noise_rng_.normal();
  t_s_ += dt_s_;
  if (std::isnan(value)) value = kAdcMin;
  const double clamped = std::clamp(std::round(value), double(kAdcMin), double(kAdcMax));
  return static_cast<int>(clamped);
}

SampleSeries generate_synthetic(const SynthProfile& profile, double duration_s,
                                std::uint32_t sample_rate_hz) {
  if (!(duration_s > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "duration must be positive");
  }
  if (sample_rate_hz == 0) {
    throw Error(ErrorCode::InvalidConfig, "sample rate must be >= 1 Hz");
  }
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  SynthStream stream(profile, sample_rate_hz);
  std::vector<int> samples(n);
  for (auto& v : samples) v = stream.next();
  return SampleSeries(sample_rate_hz, std::move(samples));
}

}  // namespace emg
