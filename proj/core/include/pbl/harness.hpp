#pragma once

// In-process network used to run the services as independent providers:
// every request is a length-prefixed frame delivered through Network::send,
// which applies the target's fault program and the time-to-live.

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "pbl/bytes.hpp"
#include "pbl/crypto.hpp"

namespace pbl::harness {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now() const = 0;
  /// Lets `ms` pass: advances a virtual clock, sleeps on a real one.
  virtual void wait(std::int64_t ms) = 0;
};

/// Monotone clock driven explicitly by tests.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(std::int64_t start = 0) : now_(start) {}
  std::int64_t now() const override { return now_.load(); }
  void wait(std::int64_t ms) override { advance(ms); }
  void advance(std::int64_t ms);
  /// Moves to `t`; moving backwards throws std::invalid_argument.
  void set(std::int64_t t);

 private:
  std::atomic<std::int64_t> now_;
};

/// Wall-clock milliseconds since construction.
class SystemClock final : public Clock {
 public:
  SystemClock();
  std::int64_t now() const override;
  void wait(std::int64_t ms) override;

 private:
  std::int64_t origin_;
};

enum class ServiceKind : std::uint8_t { gba, esp, osp, vsp, storage };

std::string_view kind_name(ServiceKind kind);
std::optional<ServiceKind> parse_kind(std::string_view text);

struct ProviderRecord {
  std::string provider_id;
  ServiceKind kind = ServiceKind::esp;
  PublicKey public_key;
  std::string endpoint;

  friend bool operator==(const ProviderRecord&, const ProviderRecord&) = default;
};

enum class FaultMode : std::uint8_t { healthy, silent, delayed, corrupt_signature };

std::string_view mode_name(FaultMode mode);

struct FaultProgram {
  FaultMode mode = FaultMode::healthy;
  std::int64_t delay_ms = 0;
  /// Half-open [start, end) in clock time; outside it the provider is healthy.
  std::optional<std::pair<std::int64_t, std::int64_t>> window;

  static FaultProgram healthy() { return {}; }
  static FaultProgram silent() { return {FaultMode::silent, 0, std::nullopt}; }
  static FaultProgram delayed(std::int64_t ms) { return {FaultMode::delayed, ms, std::nullopt}; }
  static FaultProgram corrupt() { return {FaultMode::corrupt_signature, 0, std::nullopt}; }

  FaultMode effective_mode(std::int64_t now) const;
};

inline constexpr std::int64_t kDefaultTtlMs = 500;

/// Either a response frame or a fault (no response within the TTL).
class Delivery {
 public:
  static Delivery response(Bytes frame) { return Delivery(std::move(frame), {}); }
  static Delivery fault(std::string reason) { return Delivery({}, std::move(reason)); }

  bool ok() const { return !fault_; }
  bool faulted() const { return fault_.has_value(); }
  const Bytes& frame() const { return frame_; }
  const std::string& fault_reason() const { return *fault_; }

 private:
  Delivery(Bytes frame, std::optional<std::string> fault)
      : frame_(std::move(frame)), fault_(std::move(fault)) {}
  Bytes frame_;
  std::optional<std::string> fault_;
};

/// Handles one request frame from `from` and returns the response frame.
using Handler = std::function<Bytes(std::string_view from, ByteView frame)>;
/// Rewrites a frame emitted by a provider in corrupt-signature mode.
using FrameCorrupter = std::function<Bytes(ByteView frame)>;

class HarnessError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Flips the lowest bit of the last byte.
Bytes flip_last_byte(ByteView frame);

class Network {
 public:
  explicit Network(Clock& clock, FrameCorrupter corrupter = flip_last_byte);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  /// Throws HarnessError on a duplicate provider id.
  const ProviderRecord& register_provider(ProviderRecord record, Handler handler);
  void deregister(std::string_view provider_id);

  /// Throws HarnessError for unknown providers.
  void inject(std::string_view provider_id, FaultProgram program);
  void heal(std::string_view provider_id);
  FaultProgram program(std::string_view provider_id) const;

  /// Delivers `frame` to `to`. Healthy targets answer immediately; silent,
  /// unknown or too-slow targets cost `ttl_ms` of clock time and fault. Frames
  /// sent or returned by a corrupt-signature provider pass through the
  /// corrupter. Throws HarnessError if ttl_ms <= 0.
  Delivery send(std::string_view from, std::string_view to, ByteView frame,
                std::int64_t ttl_ms = kDefaultTtlMs);

  bool is_registered(std::string_view provider_id) const;
  std::vector<ProviderRecord> providers() const;
  std::uint64_t delivered(std::string_view provider_id) const;
  Clock& clock() { return clock_; }

 private:
  struct Slot {
    ProviderRecord record;
    std::shared_ptr<const Handler> handler;
    FaultProgram program;
    std::uint64_t delivered = 0;
  };

  Slot* find(std::string_view id);
  const Slot* find(std::string_view id) const;

  Clock& clock_;
  FrameCorrupter corrupter_;
  mutable std::mutex mutex_;
  std::map<std::string, Slot, std::less<>> slots_;
};

}  // namespace pbl::harness
