#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emg_affect/signal.hpp"

namespace emg {

/// Parses one serial line: ASCII decimal digits, optionally followed by a
/// carriage return, valued in [0, 999]. Throws FrameError otherwise.
int parse_serial_frame(std::string_view line);

/// A frame is a parsed sample or, for a corrupt line, nullopt.
using Frame = std::optional<int>;

/// Pull-based sample producer driven by the session clock.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::uint32_t sample_rate_hz() const = 0;
  /// Frames that became available by `elapsed_ms` after the session start.
  /// Throws Error{SourceLost} when the device goes away.
  virtual std::vector<Frame> pull(std::int64_t elapsed_ms) = 0;
  virtual std::string describe() const = 0;
};

/// Synthetic EMG at a fixed rate: sample k is due at round(k * 1000 / rate)
/// ms and is released once that time is strictly in the past.
class SimulatorSource final : public SampleSource {
 public:
  SimulatorSource(const SynthProfile& profile, std::uint32_t sample_rate_hz);
  std::uint32_t sample_rate_hz() const override { return rate_; }
  std::vector<Frame> pull(std::int64_t elapsed_ms) override;
  std::string describe() const override;

 private:
  SynthStream stream_;
  std::uint32_t rate_;
  std::uint64_t emitted_ = 0;
};

/// Line-delimited ASCII integers from a serial device (or any readable
/// path such as a FIFO). End of stream or a read error means the device is
/// gone. The baud rate is applied only when the path is a terminal.
class SerialSource final : public SampleSource {
 public:
  /// Throws Error{SourceUnavailable} when the port cannot be opened.
  SerialSource(std::string port, std::uint32_t baud, std::uint32_t sample_rate_hz);
  ~SerialSource() override;
  SerialSource(const SerialSource&) = delete;
  SerialSource& operator=(const SerialSource&) = delete;

  std::uint32_t sample_rate_hz() const override { return rate_; }
  std::vector<Frame> pull(std::int64_t elapsed_ms) override;
  std::string describe() const override;

 private:
  std::string port_;
  std::uint32_t baud_;
  std::uint32_t rate_;
  int fd_ = -1;
  std::string pending_;
};

struct SourceSpec {
  enum class Kind { Simulator, Serial };
  Kind kind = Kind::Simulator;
  std::uint32_t sample_rate_hz = 200;
  SynthProfile profile;  // simulator
  std::string port;      // serial
  std::uint32_t baud = 115200;
};

std::unique_ptr<SampleSource> make_source(const SourceSpec& spec);

}  // namespace emg
