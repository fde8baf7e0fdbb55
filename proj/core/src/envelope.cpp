#include "pbl/envelope.hpp"

#include <map>
#include <set>

namespace pbl {

Bytes encode_envelope(const PayloadEnvelope& env) {
  Encoder enc;
  enc.raw(to_bytes(kEnvelopeMagic));
  encode(enc, env.inputs);
  enc.field(ByteView(env.body));
  return std::move(enc).bytes();
}

PayloadEnvelope parse_envelope(ByteView payload) {
  const auto magic = to_bytes(kEnvelopeMagic);
  if (payload.size() < magic.size() || !std::equal(magic.begin(), magic.end(), payload.begin())) {
    return PayloadEnvelope{{}, Bytes(payload.begin(), payload.end())};
  }
  Decoder dec(payload.subspan(magic.size()));
  PayloadEnvelope env;
  decode(dec, env.inputs);
  env.body = dec.field();
  dec.expect_done();
  return env;
}

namespace {

std::vector<Digest> inputs_of(const CompleteTransaction& ct) {
  try {
    return parse_envelope(ct.inner.payload).inputs;
  } catch (const DecodeError&) {
    return {};
  }
}

}  // namespace

std::optional<DependencyViolation> find_dependency_violation(
    std::span<const CompleteTransaction> txs, const std::vector<Digest>& history) {
  std::set<Digest> seen(history.begin(), history.end());
  std::map<Digest, std::size_t> produced_at;
  for (std::size_t i = 0; i < txs.size(); ++i) produced_at.emplace(output_id(txs[i]), i);

  for (std::size_t i = 0; i < txs.size(); ++i) {
    for (const auto& in : inputs_of(txs[i])) {
      if (seen.contains(in)) continue;
      auto it = produced_at.find(in);
      return DependencyViolation{i, in, it != produced_at.end() && it->second >= i};
    }
    seen.insert(output_id(txs[i]));
  }
  return std::nullopt;
}

std::vector<CompleteTransaction> dependency_sort(std::vector<CompleteTransaction> txs) {
  const std::size_t n = txs.size();
  std::map<Digest, std::size_t> producer;
  for (std::size_t i = 0; i < n; ++i) producer.emplace(output_id(txs[i]), i);

  std::vector<std::vector<std::size_t>> deps(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& in : inputs_of(txs[i])) {
      auto it = producer.find(in);
      if (it != producer.end() && it->second != i) deps[i].push_back(it->second);
    }
  }

  // Repeatedly emit the lowest-index transaction whose producers are all out.
  std::vector<bool> emitted(n, false);
  std::vector<CompleteTransaction> out;
  out.reserve(n);
  while (out.size() < n) {
    bool progressed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (emitted[i]) continue;
      bool ready = std::all_of(deps[i].begin(), deps[i].end(),
                               [&](std::size_t d) { return emitted[d]; });
      if (!ready) continue;
      emitted[i] = true;
      out.push_back(txs[i]);
      progressed = true;
      break;
    }
    if (!progressed) {
      // Cycle: cannot be satisfied in any order; keep the remainder as-is.
      for (std::size_t i = 0; i < n; ++i) {
        if (!emitted[i]) out.push_back(txs[i]);
      }
      break;
    }
  }
  return out;
}

}  // namespace pbl
