#pragma once

#include "pbl/ledger.hpp"

namespace pbl {

/// Payload wrapper that lets a transaction declare which earlier outputs it
/// consumes. Wire form: "PBLE" || encode(list of input ids) || encode(body).
/// Any payload not starting with the magic is a bare body with no inputs.
struct PayloadEnvelope {
  std::vector<Digest> inputs;
  Bytes body;

  friend bool operator==(const PayloadEnvelope&, const PayloadEnvelope&) = default;
};

inline constexpr std::string_view kEnvelopeMagic = "PBLE";

Bytes encode_envelope(const PayloadEnvelope& env);
/// Throws DecodeError when the magic is present but the rest is malformed.
PayloadEnvelope parse_envelope(ByteView payload);

/// Position of the first transaction that consumes an output id which neither
/// appears earlier in `txs` nor in `history`, together with whether the id
/// appears later in `txs` (an ordering problem) or nowhere (unknown).
struct DependencyViolation {
  std::size_t tx_index = 0;
  Digest input;
  bool appears_later = false;
};

std::optional<DependencyViolation> find_dependency_violation(
    std::span<const CompleteTransaction> txs, const std::vector<Digest>& history);

/// Stable topological sort by declared inputs; transactions whose inputs are
/// not produced inside `txs` keep their relative order.
std::vector<CompleteTransaction> dependency_sort(std::vector<CompleteTransaction> txs);

}  // namespace pbl
