#include "pbl/harness.hpp"

#include <chrono>
#include <thread>

namespace pbl::harness {

void VirtualClock::advance(std::int64_t ms) {
  if (ms < 0) throw std::invalid_argument("virtual clock cannot run backwards");
  now_ += ms;
}

void VirtualClock::set(std::int64_t t) {
  auto current = now_.load();
  if (t < current) throw std::invalid_argument("virtual clock cannot run backwards");
  now_ = t;
}

namespace {

std::int64_t steady_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

SystemClock::SystemClock() : origin_(steady_ms()) {}

std::int64_t SystemClock::now() const { return steady_ms() - origin_; }

void SystemClock::wait(std::int64_t ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

std::string_view kind_name(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::gba: return "gba";
    case ServiceKind::esp: return "esp";
    case ServiceKind::osp: return "osp";
    case ServiceKind::vsp: return "vsp";
    case ServiceKind::storage: return "storage";
  }
  return "?";
}

std::optional<ServiceKind> parse_kind(std::string_view text) {
  for (auto k : {ServiceKind::gba, ServiceKind::esp, ServiceKind::osp, ServiceKind::vsp,
                 ServiceKind::storage}) {
    if (kind_name(k) == text) return k;
  }
  return std::nullopt;
}

std::string_view mode_name(FaultMode mode) {
  switch (mode) {
    case FaultMode::healthy: return "healthy";
    case FaultMode::silent: return "silent";
    case FaultMode::delayed: return "delayed";
    case FaultMode::corrupt_signature: return "corrupt";
  }
  return "?";
}

FaultMode FaultProgram::effective_mode(std::int64_t now) const {
  if (window && (now < window->first || now >= window->second)) return FaultMode::healthy;
  return mode;
}

Bytes flip_last_byte(ByteView frame) {
  Bytes out(frame.begin(), frame.end());
  if (!out.empty()) out.back() ^= 0x01;
  return out;
}

Network::Network(Clock& clock, FrameCorrupter corrupter)
    : clock_(clock), corrupter_(std::move(corrupter)) {}

Network::Slot* Network::find(std::string_view id) {
  auto it = slots_.find(id);
  return it == slots_.end() ? nullptr : &it->second;
}

const Network::Slot* Network::find(std::string_view id) const {
  auto it = slots_.find(id);
  return it == slots_.end() ? nullptr : &it->second;
}

const ProviderRecord& Network::register_provider(ProviderRecord record, Handler handler) {
  std::lock_guard lock(mutex_);
  if (slots_.contains(record.provider_id)) {
    throw HarnessError("provider id already registered: " + record.provider_id);
  }
  auto id = record.provider_id;
  auto [it, inserted] = slots_.emplace(
      id, Slot{std::move(record), std::make_shared<const Handler>(std::move(handler)), {}, 0});
  return it->second.record;
}

void Network::deregister(std::string_view provider_id) {
  std::lock_guard lock(mutex_);
  auto it = slots_.find(provider_id);
  if (it == slots_.end()) throw HarnessError("unknown provider: " + std::string(provider_id));
  slots_.erase(it);
}

void Network::inject(std::string_view provider_id, FaultProgram program) {
  std::lock_guard lock(mutex_);
  auto* slot = find(provider_id);
  if (slot == nullptr) throw HarnessError("unknown provider: " + std::string(provider_id));
  slot->program = program;
}

void Network::heal(std::string_view provider_id) { inject(provider_id, FaultProgram::healthy()); }

FaultProgram Network::program(std::string_view provider_id) const {
  std::lock_guard lock(mutex_);
  const auto* slot = find(provider_id);
  if (slot == nullptr) throw HarnessError("unknown provider: " + std::string(provider_id));
  return slot->program;
}

bool Network::is_registered(std::string_view provider_id) const {
  std::lock_guard lock(mutex_);
  return find(provider_id) != nullptr;
}

std::vector<ProviderRecord> Network::providers() const {
  std::lock_guard lock(mutex_);
  std::vector<ProviderRecord> out;
  for (const auto& [id, slot] : slots_) out.push_back(slot.record);
  return out;
}

std::uint64_t Network::delivered(std::string_view provider_id) const {
  std::lock_guard lock(mutex_);
  const auto* slot = find(provider_id);
  return slot == nullptr ? 0 : slot->delivered;
}

Delivery Network::send(std::string_view from, std::string_view to, ByteView frame,
                       std::int64_t ttl_ms) {
  if (ttl_ms <= 0) throw HarnessError("ttl must be positive");

  std::shared_ptr<const Handler> handler;
  FaultMode target_mode = FaultMode::silent;
  std::int64_t delay = 0;
  bool sender_corrupt = false;
  {
    std::lock_guard lock(mutex_);
    const auto now = clock_.now();
    if (const auto* sender = find(from)) {
      sender_corrupt = sender->program.effective_mode(now) == FaultMode::corrupt_signature;
    }
    if (auto* slot = find(to)) {
      handler = slot->handler;
      target_mode = slot->program.effective_mode(now);
      delay = slot->program.delay_ms;
      if (target_mode != FaultMode::silent &&
          !(target_mode == FaultMode::delayed && delay > ttl_ms)) {
        ++slot->delivered;
      }
    }
  }

  if (!handler) {
    clock_.wait(ttl_ms);
    return Delivery::fault("unknown provider " + std::string(to));
  }
  switch (target_mode) {
    case FaultMode::silent:
      clock_.wait(ttl_ms);
      return Delivery::fault(std::string(to) + " did not respond within " +
                             std::to_string(ttl_ms) + " ms");
    case FaultMode::delayed:
      if (delay > ttl_ms) {
        clock_.wait(ttl_ms);
        return Delivery::fault(std::string(to) + " exceeded ttl (" + std::to_string(delay) +
                               " ms > " + std::to_string(ttl_ms) + " ms)");
      }
      clock_.wait(delay);
      break;
    case FaultMode::healthy:
    case FaultMode::corrupt_signature:
      break;
  }

  Bytes request = sender_corrupt ? corrupter_(frame) : Bytes(frame.begin(), frame.end());
  Bytes reply = (*handler)(from, request);
  if (target_mode == FaultMode::corrupt_signature) reply = corrupter_(reply);
  return Delivery::response(std::move(reply));
}

}  // namespace pbl::harness
