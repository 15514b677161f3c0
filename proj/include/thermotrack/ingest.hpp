// ingest.hpp -- streaming frame ingestion: per-sensor demultiplexing with a
// small reorder window, line sources (stream or TCP socket) and a bounded
// blocking queue between the reader and the per-sensor pipelines.
#pragma once

#include "thermotrack/codec.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

namespace thermotrack {

struct IngestCounters {
  std::uint64_t accepted{0};
  std::uint64_t malformed{0};
  std::uint64_t duplicates{0};
  std::uint64_t late{0};  ///< older than the reorder window
};

/// Routes frames per sensor_id in timestamp order. Each sensor keeps up to
/// `window` pending frames; when a newer frame arrives and the buffer is full,
/// the oldest pending frame is released. A frame with a timestamp already
/// pending or released is a duplicate; one older than the last released frame
/// is late. Both are dropped and counted.
class StreamDemux {
 public:
  explicit StreamDemux(std::size_t window = 2, std::size_t expected_m = 64)
      : window_(window), expected_m_(expected_m) {}

  /// Feeds one raw line; returns frames released in order.
  std::vector<ThermalFrame> push_line(const std::string& line) {
    ThermalFrame frame;
    try {
      frame = decode_frame_line(line, expected_m_);
    } catch (const Error&) {
      ++counters_.malformed;
      return {};
    }
    return push(std::move(frame));
  }

  std::vector<ThermalFrame> push(ThermalFrame frame) {
    auto& lane = lanes_[frame.sensor_id];
    if (lane.released && frame.ts_ms <= *lane.released) {
      (frame.ts_ms == *lane.released ? counters_.duplicates : counters_.late)++;
      return {};
    }
    if (lane.pending.count(frame.ts_ms)) {
      ++counters_.duplicates;
      return {};
    }
    ++counters_.accepted;
    lane.pending.emplace(frame.ts_ms, std::move(frame));
    std::vector<ThermalFrame> out;
    while (lane.pending.size() > window_) out.push_back(release(lane));
    return out;
  }

  /// Releases everything still pending (end of input).
  std::vector<ThermalFrame> flush() {
    std::vector<ThermalFrame> out;
    for (auto& [id, lane] : lanes_) {
      while (!lane.pending.empty()) out.push_back(release(lane));
    }
    return out;
  }

  const IngestCounters& counters() const { return counters_; }

 private:
  struct Lane {
    std::map<std::int64_t, ThermalFrame> pending;
    std::optional<std::int64_t> released;
  };

  static ThermalFrame release(Lane& lane) {
    auto it = lane.pending.begin();
    ThermalFrame f = std::move(it->second);
    lane.pending.erase(it);
    lane.released = f.ts_ms;
    return f;
  }

  std::size_t window_;
  std::size_t expected_m_;
  std::map<std::uint64_t, Lane> lanes_;
  IngestCounters counters_;
};

/// Adapter point for any newline-delimited transport (file, socket, broker).
class LineSource {
 public:
  virtual ~LineSource() = default;
  /// Next line, or nullopt at end of stream.
  virtual std::optional<std::string> next_line() = 0;
};

class StreamLineSource : public LineSource {
 public:
  explicit StreamLineSource(std::istream& in) : in_(in) {}
  std::optional<std::string> next_line() override {
    std::string line;
    if (!std::getline(in_, line)) return std::nullopt;
    return line;
  }

 private:
  std::istream& in_;
};

struct ReconnectPolicy {
  int max_attempts{6};
  std::chrono::milliseconds initial_delay{100};
  std::chrono::milliseconds max_delay{5'000};
};

/// Newline-delimited JSON over a plain TCP connection. On disconnect it
/// reconnects with exponential backoff; after `max_attempts` consecutive
/// failures the stream ends.
class SocketLineSource : public LineSource {
 public:
  SocketLineSource(std::string host, std::string port, ReconnectPolicy policy = {})
      : host_(std::move(host)), port_(std::move(port)), policy_(policy) {}
  ~SocketLineSource() override { close_fd(); }
  SocketLineSource(const SocketLineSource&) = delete;
  SocketLineSource& operator=(const SocketLineSource&) = delete;

  /// Parses "tcp://host:port".
  static SocketLineSource from_endpoint(const std::string& endpoint, ReconnectPolicy policy = {}) {
    const std::string prefix = "tcp://";
    if (endpoint.rfind(prefix, 0) != 0) throw UsageError("endpoint must look like tcp://host:port");
    const std::string rest = endpoint.substr(prefix.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
      throw UsageError("endpoint must look like tcp://host:port");
    }
    return SocketLineSource(rest.substr(0, colon), rest.substr(colon + 1), policy);
  }

  std::optional<std::string> next_line() override {
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      if (fd_ < 0 && !reconnect()) {
        if (buffer_.empty()) return std::nullopt;
        return std::exchange(buffer_, std::string());
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n > 0) {
        buffer_.append(chunk, static_cast<std::size_t>(n));
      } else {
        close_fd();
        ever_connected_ = true;
      }
    }
  }

  std::uint64_t reconnects() const { return reconnects_; }

 private:
  bool reconnect() {
    auto delay = policy_.initial_delay;
    for (int attempt = 0; attempt < policy_.max_attempts; ++attempt) {
      if (attempt > 0 || ever_connected_) {
        std::this_thread::sleep_for(delay);
        delay = std::min(delay * 2, policy_.max_delay);
      }
      if (connect_once()) {
        if (ever_connected_) ++reconnects_;
        return true;
      }
    }
    return false;
  }

  bool connect_once() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host_.c_str(), port_.c_str(), &hints, &res) != 0) return false;
    for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
      const int fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) {
        fd_ = fd;
        break;
      }
      ::close(fd);
    }
    ::freeaddrinfo(res);
    return fd_ >= 0;
  }

  void close_fd() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::string host_;
  std::string port_;
  ReconnectPolicy policy_;
  int fd_{-1};
  bool ever_connected_{false};
  std::uint64_t reconnects_{0};
  std::string buffer_;
};

/// Bounded FIFO; push blocks while full (back-pressure on the producer).
template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw UsageError("queue capacity must be positive");
  }

  void push(T value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) throw UsageError("push on a closed queue");
    items_.push_back(std::move(value));
    not_empty_.notify_one();
  }

  /// Blocks until an item is available; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_{false};
};

/// Drains a line source through a demux, calling `sink` for each released
/// frame in per-sensor timestamp order.
template <class Sink>
IngestCounters ingest_stream(LineSource& source, Sink&& sink, std::size_t expected_m = 64,
                             std::size_t window = 2) {
  StreamDemux demux(window, expected_m);
  while (auto line = source.next_line()) {
    if (line->find_first_not_of(" \t\r") == std::string::npos) continue;
    for (auto& f : demux.push_line(*line)) sink(std::move(f));
  }
  for (auto& f : demux.flush()) sink(std::move(f));
  return demux.counters();
}

}  // namespace thermotrack
