#include "pbl/chaincode.hpp"

#include <charconv>

#include "pbl/envelope.hpp"

namespace pbl::chaincode {

StepResult NullChaincode::step(ByteView prior_state, ByteView) const {
  return {Bytes(prior_state.begin(), prior_state.end()), zero_output()};
}

std::int64_t BalanceChaincode::parse_amount(ByteView body) {
  std::string_view text(reinterpret_cast<const char*>(body.data()), body.size());
  bool negative = false;
  if (!text.empty() && (text.front() == '+' || text.front() == '-')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  if (text.empty() || text.size() > 18) {
    throw PayloadError("balance payload needs 1-18 decimal digits");
  }
  std::int64_t magnitude = 0;
  for (char c : text) {
    if (c < '0' || c > '9') throw PayloadError("balance payload has a non-digit character");
    magnitude = magnitude * 10 + (c - '0');
  }
  return negative ? -magnitude : magnitude;
}

namespace {

std::int64_t parse_state(ByteView state) {
  std::string_view text(reinterpret_cast<const char*>(state.data()), state.size());
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("balance state is not a decimal integer");
  }
  return value;
}

}  // namespace

StepResult BalanceChaincode::step(ByteView prior_state, ByteView body) const {
  const auto amount = parse_amount(body);
  const auto prior = prior_state.empty() ? std::int64_t{0} : parse_state(prior_state);
  std::int64_t next = 0;
  if (__builtin_add_overflow(prior, amount, &next)) {
    throw PayloadError("balance would overflow a signed 64-bit total");
  }
  auto text = to_bytes(std::to_string(next));
  return {text, text};
}

Registry Registry::with_builtins() {
  Registry r;
  r.add(std::make_shared<NullChaincode>());
  r.add(std::make_shared<BalanceChaincode>());
  return r;
}

void Registry::add(std::shared_ptr<const ChaincodeDef> def) {
  auto id = std::string(def->id());
  defs_[id] = std::move(def);
}

const ChaincodeDef* Registry::find(std::string_view id) const {
  auto it = defs_.find(id);
  return it == defs_.end() ? nullptr : it->second.get();
}

Bytes ExecutionContext::state_for(const ChaincodeDef& def) const {
  auto it = latest_state.find(std::string(def.id()));
  return it == latest_state.end() ? def.initial_state() : it->second;
}

Bytes execute(const ChaincodeDef& def, ExecutionContext& ctx, const Transaction& tx) {
  if (!tx.chaincode_id || *tx.chaincode_id != def.id()) {
    throw std::invalid_argument("transaction is not addressed to chaincode " + std::string(def.id()));
  }
  PayloadEnvelope env;
  try {
    env = parse_envelope(tx.payload);
  } catch (const DecodeError& e) {
    throw PayloadError(std::string("malformed payload envelope: ") + e.what());
  }
  auto result = def.step(ctx.state_for(def), env.body);
  ctx.latest_state[std::string(def.id())] = std::move(result.state);
  return std::move(result.output);
}

ReplayResult replay(const ChaincodeDef& def, const Ledger& l) {
  ExecutionContext ctx{l.ledger_address, {}};
  ReplayResult out;
  for (std::size_t b = 0; b < l.blocks.size(); ++b) {
    const auto& txs = l.blocks[b].transactions;
    for (std::size_t t = 0; t < txs.size(); ++t) {
      const auto& ct = txs[t];
      if (!ct.inner.chaincode_id || *ct.inner.chaincode_id != def.id()) continue;
      ++out.transactions;
      Bytes recomputed;
      try {
        recomputed = execute(def, ctx, ct.inner);
      } catch (const PayloadError&) {
        recomputed.clear();
      }
      if (recomputed != ct.output) out.mismatches.push_back({b + 1, t, ct.output, recomputed});
    }
  }
  out.final_state = ctx.state_for(def);
  return out;
}

}  // namespace pbl::chaincode
