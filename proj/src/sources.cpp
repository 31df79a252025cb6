#include "emg_affect/sources.hpp"

#include <cerrno>
#include <cmath>
#include <cstring>

#include <fcntl.h>
#include <termios.h>
#include <unistd.h>

#include "emg_affect/error.hpp"

namespace emg {

int parse_serial_frame(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.empty() || line.size() > 9) {
    throw Error(ErrorCode::FrameError, "bad frame '" + std::string(line) + "'");
  }
  int value = 0;
  for (char c : line) {
    if (c < '0' || c > '9') throw Error(ErrorCode::FrameError, "bad frame '" + std::string(line) + "'");
    value = value * 10 + (c - '0');
  }
  if (value > kAdcMax) {
    throw Error(ErrorCode::FrameError, std::to_string(value) + " outside [0, 999]");
  }
  return value;
}

SimulatorSource::SimulatorSource(const SynthProfile& profile, std::uint32_t sample_rate_hz)
    : stream_(profile, sample_rate_hz), rate_(sample_rate_hz) {
  if (rate_ == 0 || rate_ > 1000) {
    throw Error(ErrorCode::InvalidConfig, "simulator rate must be in [1, 1000] Hz");
  }
}

std::vector<Frame> SimulatorSource::pull(std::int64_t elapsed_ms) {
  std::vector<Frame> frames;
  for (;;) {
    const auto due = std::llround(static_cast<double>(emitted_) * 1000.0 / rate_);
    if (due >= elapsed_ms) break;
    frames.emplace_back(stream_.next());
    ++emitted_;
  }
  return frames;
}

std::string SimulatorSource::describe() const {
  return "simulator@" + std::to_string(rate_) + "Hz";
}

namespace {

speed_t baud_constant(std::uint32_t baud) {
  switch (baud) {
    case 9600: return B9600;
    case 19200: return B19200;
    case 38400: return B38400;
    case 57600: return B57600;
    case 115200: return B115200;
    case 230400: return B230400;
    default: return 0;
  }
}

}  // namespace

SerialSource::SerialSource(std::string port, std::uint32_t baud, std::uint32_t sample_rate_hz)
    : port_(std::move(port)), baud_(baud), rate_(sample_rate_hz) {
  if (rate_ == 0) throw Error(ErrorCode::InvalidConfig, "sample rate must be >= 1 Hz");
  fd_ = ::open(port_.c_str(), O_RDONLY | O_NOCTTY | O_NONBLOCK);
  if (fd_ < 0) {
    throw Error(ErrorCode::SourceUnavailable, "cannot open '" + port_ + "': " + std::strerror(errno));
  }
  if (::isatty(fd_)) {
    termios tio{};
    if (::tcgetattr(fd_, &tio) == 0) {
      ::cfmakeraw(&tio);
      if (const speed_t speed = baud_constant(baud_)) {
        ::cfsetispeed(&tio, speed);
        ::cfsetospeed(&tio, speed);
      }
      ::tcsetattr(fd_, TCSANOW, &tio);
    }
  }
}

SerialSource::~SerialSource() {
  if (fd_ >= 0) ::close(fd_);
}

std::vector<Frame> SerialSource::pull(std::int64_t) {
  std::vector<Frame> frames;
  char buf[4096];
  for (;;) {
    const ssize_t n = ::read(fd_, buf, sizeof(buf));
    if (n > 0) {
      pending_.append(buf, static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) break;
    throw Error(ErrorCode::SourceLost, "'" + port_ + "' " +
                                           (n == 0 ? std::string("closed") : std::strerror(errno)));
  }
  std::size_t start = 0;
  for (;;) {
    const auto nl = pending_.find('\n', start);
    if (nl == std::string::npos) break;
    try {
      frames.emplace_back(parse_serial_frame(std::string_view(pending_).substr(start, nl - start)));
    } catch (const Error&) {
      frames.emplace_back(std::nullopt);
    }
    start = nl + 1;
  }
  pending_.erase(0, start);
  return frames;
}

std::string SerialSource::describe() const {
  return "serial:" + port_ + "@" + std::to_string(baud_);
}

std::unique_ptr<SampleSource> make_source(const SourceSpec& spec) {
  if (spec.kind == SourceSpec::Kind::Serial) {
    return std::make_unique<SerialSource>(spec.port, spec.baud, spec.sample_rate_hz);
  }
  return std::make_unique<SimulatorSource>(spec.profile, spec.sample_rate_hz);
}

}  // namespace emg
