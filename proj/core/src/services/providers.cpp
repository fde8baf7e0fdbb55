#include "pbl/services/providers.hpp"

#include "pbl/envelope.hpp"
#include "pbl/validation.hpp"

namespace pbl::services {

std::unique_lock<std::mutex> LedgerLocks::lock(const Address& ledger) {
  std::mutex* m = nullptr;
  {
    std::lock_guard g(guard_);
    auto& slot = locks_[ledger];
    if (!slot) slot = std::make_unique<std::mutex>();
    m = slot.get();
  }
  return std::unique_lock(*m);
}

void AuditLog::add(std::string entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

std::vector<std::string> AuditLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

Bytes Service::handle(std::string_view from, ByteView frame) {
  Message msg;
  try {
    msg = decode_message(frame);
  } catch (const DecodeError& e) {
    audit_.add("malformed frame from " + std::string(from) + ": " + e.what());
    return refuse(RefusalCode::malformed_message, e.what());
  }
  return dispatch(from, std::move(msg));
}

harness::Handler Service::handler() {
  return [this](std::string_view from, ByteView frame) { return handle(from, frame); };
}

// ---------------------------------------------------------------- GBA

std::variant<GenesisBlock, Refusal> issue_genesis(const GenesisRequest& request, const Signer& gba,
                                                  const KycPolicy& policy, std::int64_t now) {
  if (!policy.allows(request.kyc_blob)) {
    return Refusal{RefusalCode::kyc_denied, "kyc check failed"};
  }
  if (request.user_key.is_zero()) {
    return Refusal{RefusalCode::missing_user_key, "request carries no user public key"};
  }

  GenesisBlock g;
  g.config = request.config;
  bool has_user = false;
  for (const auto& e : g.config) {
    if (e.key != config_keys::kUserPublicKey) continue;
    if (has_user) return Refusal{RefusalCode::missing_user_key, "user_public_key appears twice"};
    if (e.value != request.user_key.to_vector()) {
      return Refusal{RefusalCode::missing_user_key,
                     "config user_public_key differs from the requesting key"};
    }
    has_user = true;
  }
  if (!has_user) {
    g.config.insert(g.config.begin(),
                    ConfigEntry{std::string(config_keys::kUserPublicKey), request.user_key.to_vector()});
  }
  g.core.data_hash = compute_config_hash(g.config);
  g.core.created_at = now;
  g.gba_signature = gba.sign(hash_header(g.core).view());
  return g;
}

GenesisBlock countersign_genesis(GenesisBlock genesis, const Signer& user) {
  genesis.user_signature = user.sign(block_user_signing_bytes(genesis.core, genesis.gba_signature));
  return genesis;
}

GenesisAuthority::GenesisAuthority(std::string id, KeyPair key, harness::Clock& clock,
                                   KycPolicy policy)
    : Service(std::move(id), std::move(key)), clock_(clock), policy_(std::move(policy)) {}

void GenesisAuthority::set_policy(KycPolicy policy) {
  std::lock_guard lock(mutex_);
  policy_ = std::move(policy);
}

Bytes GenesisAuthority::dispatch(std::string_view from, Message&& msg) {
  auto* req = std::get_if<GenesisRequest>(&msg);
  if (req == nullptr) return refuse(RefusalCode::unexpected_message, "GBA takes GenesisRequest");
  KycPolicy policy;
  {
    std::lock_guard lock(mutex_);
    policy = policy_;
  }
  auto result = issue_genesis(*req, key_, policy, clock_.now());
  if (auto* r = std::get_if<Refusal>(&result)) {
    audit_.add("refused genesis for " + std::string(from) + ": " + r->detail);
    return encode_message(*r);
  }
  return encode_message(GenesisResponse{std::get<GenesisBlock>(std::move(result))});
}

// ---------------------------------------------------------------- ESP

std::variant<Execution, Refusal> execute_and_sign(const Transaction& tx, const PublicKey& user_key,
                                                  ByteView prior_state,
                                                  const chaincode::Registry& registry,
                                                  const Signer& esp, std::size_t max_payload) {
  if (!tx.ledger_address.is(AddressKind::ledger) || !tx.ledger_address.matches_key(user_key)) {
    return Refusal{RefusalCode::wrong_ledger, "ledger address does not belong to the user key"};
  }
  if (tx.payload.size() > max_payload) {
    return Refusal{RefusalCode::payload_too_large,
                   std::to_string(tx.payload.size()) + " bytes > " + std::to_string(max_payload)};
  }
  if (tx.user_signature.empty() ||
      !verify(user_key, transaction_signing_bytes(tx), tx.user_signature)) {
    return Refusal{RefusalCode::bad_user_signature, "user signature does not verify"};
  }

  Execution out;
  out.ct.inner = tx;
  if (tx.chaincode_id) {
    const auto* def = registry.find(*tx.chaincode_id);
    if (def == nullptr) {
      return Refusal{RefusalCode::unknown_chaincode, "no chaincode named " + *tx.chaincode_id};
    }
    chaincode::ExecutionContext ctx{tx.ledger_address, {}};
    if (!prior_state.empty()) {
      ctx.latest_state[std::string(def->id())] = Bytes(prior_state.begin(), prior_state.end());
    }
    try {
      out.ct.output = chaincode::execute(*def, ctx, tx);
    } catch (const chaincode::PayloadError& e) {
      return Refusal{RefusalCode::malformed_payload, e.what()};
    } catch (const std::invalid_argument& e) {
      return Refusal{RefusalCode::malformed_payload, e.what()};
    }
    out.new_state = ctx.state_for(*def);
  } else {
    try {
      (void)parse_envelope(tx.payload);
    } catch (const DecodeError& e) {
      return Refusal{RefusalCode::malformed_payload, e.what()};
    }
    out.ct.output = zero_output();
  }
  out.ct.executing_signature = esp.sign(execution_signing_bytes(out.ct.inner, out.ct.output));
  return out;
}

ExecutingService::ExecutingService(std::string id, KeyPair key, harness::Network& net,
                                   chaincode::Registry registry, std::int64_t ttl_ms)
    : Service(std::move(id), std::move(key)),
      net_(net),
      registry_(std::move(registry)),
      ttl_ms_(ttl_ms) {}

Bytes ExecutingService::dispatch(std::string_view from, Message&& msg) {
  auto* req = std::get_if<SubmitTx>(&msg);
  if (req == nullptr) return refuse(RefusalCode::unexpected_message, "ESP takes SubmitTx");
  auto guard = locks_.lock(req->tx.ledger_address);

  auto result = execute_and_sign(req->tx, req->user_key, req->prior_state, registry_, key_);
  if (auto* r = std::get_if<Refusal>(&result)) {
    audit_.add("rejected transaction from " + std::string(from) + ": " +
               std::string(refusal_name(r->code)) + " " + r->detail);
    return encode_message(*r);
  }
  auto exec = std::get<Execution>(std::move(result));
  ++executed_;

  auto delivery = net_.send(id_, req->osp_id, encode_message(CompleteTx{exec.ct, {}, {}}), ttl_ms_);
  if (delivery.faulted()) {
    audit_.add("OSP " + req->osp_id + " unreachable: " + delivery.fault_reason());
    return refuse(RefusalCode::osp_unreachable, delivery.fault_reason());
  }
  Message reply;
  try {
    reply = decode_message(delivery.frame());
  } catch (const DecodeError& e) {
    return refuse(RefusalCode::osp_unreachable, std::string("garbled OSP reply: ") + e.what());
  }
  CompleteTx out{std::move(exec.ct), std::move(exec.new_state), std::nullopt};
  if (auto* v = std::get_if<ValidatedBlock>(&reply)) {
    out.validated = std::move(v->block);
  } else if (auto* r = std::get_if<Refusal>(&reply)) {
    return encode_message(*r);
  } else if (!std::holds_alternative<Ack>(reply)) {
    return refuse(RefusalCode::unexpected_message, "unexpected OSP reply");
  }
  return encode_message(out);
}

// ---------------------------------------------------------------- OSP

void CuttingCondition::validate() const {
  if (threshold == 0) throw std::invalid_argument("cutting threshold must be positive");
}

std::string_view cut_kind_name(CuttingCondition::Kind kind) {
  switch (kind) {
    case CuttingCondition::Kind::count: return "count";
    case CuttingCondition::Kind::interval: return "interval";
    case CuttingCondition::Kind::size: return "size";
  }
  return "?";
}

std::string CuttingCondition::to_string() const {
  return std::string(cut_kind_name(kind)) + " " + std::to_string(threshold);
}

DataBlock form_block(std::vector<CompleteTransaction> txs, const Signer& osp, std::int64_t now) {
  DataBlock b;
  b.transactions = std::move(txs);
  b.core.data_hash = compute_data_hash(b.transactions);
  b.core.exec_sig_root = compute_exec_sig_root(b.transactions);
  b.core.ordering_signature = osp.sign(b.core.exec_sig_root.view());
  b.core.created_at = now;
  return b;
}

OrderingService::OrderingService(std::string id, KeyPair key, harness::Network& net,
                                 CuttingCondition cut, std::int64_t ttl_ms)
    : Service(std::move(id), std::move(key)), net_(net), cut_(cut), ttl_ms_(ttl_ms) {
  cut_.validate();
}

std::size_t OrderingService::pending(const Address& ledger) const {
  std::lock_guard lock(rounds_mutex_);
  auto it = rounds_.find(ledger);
  return it == rounds_.end() ? 0 : it->second.mempool.size();
}

Bytes OrderingService::dispatch(std::string_view from, Message&& msg) {
  if (auto* open = std::get_if<RoundOpen>(&msg)) {
    auto guard = locks_.lock(open->ledger_address);
    Round r;
    r.keys = directory_from_grants(open->keys);
    r.open = std::move(*open);
    std::lock_guard lock(rounds_mutex_);
    rounds_.insert_or_assign(r.open.ledger_address, std::move(r));
    return encode_message(Ack{});
  }
  if (auto* ct = std::get_if<CompleteTx>(&msg)) return accept(from, std::move(*ct));
  if (auto* q = std::get_if<Query>(&msg)) return query(*q);
  return refuse(RefusalCode::unexpected_message, "OSP takes RoundOpen, CompleteTx or Query");
}

bool OrderingService::interval_expired(const Round& round) const {
  return cut_.kind == CuttingCondition::Kind::interval && !round.mempool.empty() &&
         net_.clock().now() - round.first_arrival >= static_cast<std::int64_t>(cut_.threshold);
}

Bytes OrderingService::accept(std::string_view from, CompleteTx&& msg) {
  const auto& ledger = msg.ct.inner.ledger_address;
  auto guard = locks_.lock(ledger);
  Round* round = nullptr;
  {
    std::lock_guard lock(rounds_mutex_);
    auto it = rounds_.find(ledger);
    if (it != rounds_.end() && it->second.active) round = &it->second;
  }
  if (round == nullptr) return refuse(RefusalCode::no_round, "no open round for this ledger");

  const auto& sig = msg.ct.executing_signature;
  auto esp = round->keys.resolve(sig.signer_id, Role::esp);
  if (esp.status != KeyDirectory::Lookup::found) {
    audit_.add("dropped transaction from " + std::string(from) + ": unregistered executing signer");
    return refuse(RefusalCode::unregistered_signer, "executing signer is not a registered ESP");
  }
  if (!verify(esp.key, execution_signing_bytes(msg.ct.inner, msg.ct.output), sig)) {
    audit_.add("dropped transaction from " + std::string(from) +
               ": executing signature does not verify");
    return refuse(RefusalCode::bad_executing_signature, "executing signature does not verify");
  }

  const auto size = canonical_encode(msg.ct).size();
  const auto now = net_.clock().now();
  if (cut_.kind == CuttingCondition::Kind::size && !round->mempool.empty() &&
      round->bytes + size > cut_.threshold) {
    // The newcomer would overflow: cut what is pending, it opens the next block.
    auto txs = std::move(round->mempool);
    round->mempool = {std::move(msg.ct)};
    round->bytes = size;
    round->first_arrival = now;
    return cut(*round, std::move(txs));
  }

  if (round->mempool.empty()) round->first_arrival = now;
  round->mempool.push_back(std::move(msg.ct));
  round->bytes += size;

  bool fire = false;
  switch (cut_.kind) {
    case CuttingCondition::Kind::count: fire = round->mempool.size() >= cut_.threshold; break;
    case CuttingCondition::Kind::size: fire = round->bytes >= cut_.threshold; break;
    case CuttingCondition::Kind::interval: fire = interval_expired(*round); break;
  }
  if (!fire) return encode_message(Ack{});
  auto txs = std::move(round->mempool);
  round->mempool.clear();
  round->bytes = 0;
  return cut(*round, std::move(txs));
}

Bytes OrderingService::query(const Query& q) {
  if (q.kind != QueryKind::poll_cut && q.kind != QueryKind::flush) {
    return refuse(RefusalCode::unexpected_message, "OSP answers poll and flush queries");
  }
  auto guard = locks_.lock(q.address);
  Round* round = nullptr;
  {
    std::lock_guard lock(rounds_mutex_);
    auto it = rounds_.find(q.address);
    if (it != rounds_.end() && it->second.active) round = &it->second;
  }
  if (round == nullptr) return refuse(RefusalCode::no_round, "no open round for this ledger");
  const bool fire = !round->mempool.empty() &&
                    (q.kind == QueryKind::flush || interval_expired(*round));
  if (!fire) return encode_message(QueryResponse{});
  auto txs = std::move(round->mempool);
  round->mempool.clear();
  round->bytes = 0;
  auto reply = cut(*round, std::move(txs));
  Message m = decode_message(reply);
  if (auto* v = std::get_if<ValidatedBlock>(&m)) {
    return encode_message(QueryResponse{{}, std::move(v->block)});
  }
  return reply;
}

Bytes OrderingService::cut(Round& round, std::vector<CompleteTransaction> txs) {
  const auto& vsp = round.open.vsp_id;
  bool resorted = false;
  for (;;) {
    auto block = form_block(txs, key_, net_.clock().now());
    block.core.previous_hash = round.open.tip_chain_hash;
    block.core.height = round.open.tip_height + 1;
    auto delivery = net_.send(
        id_, vsp, encode_message(BlockCandidate{round.open.ledger_address, std::move(block)}),
        ttl_ms_);
    if (delivery.faulted()) {
      audit_.add("VSP " + vsp + " unreachable: " + delivery.fault_reason());
      round.active = false;
      return refuse(RefusalCode::vsp_unreachable, delivery.fault_reason());
    }
    Message reply;
    try {
      reply = decode_message(delivery.frame());
    } catch (const DecodeError& e) {
      round.active = false;
      return refuse(RefusalCode::vsp_unreachable, std::string("garbled VSP reply: ") + e.what());
    }
    if (auto* r = std::get_if<Refusal>(&reply)) {
      if (r->code == RefusalCode::dependency_order && !resorted) {
        // Ignored block: put the transactions back in dependency order and retry.
        audit_.add("block ignored by " + vsp + " (" + r->detail + "); re-sorting mempool");
        txs = dependency_sort(std::move(txs));
        resorted = true;
        continue;
      }
      audit_.add("block refused by " + vsp + ": " + std::string(refusal_name(r->code)) + " " +
                 r->detail);
      round.active = false;
      return encode_message(*r);
    }
    if (!std::holds_alternative<ValidatedBlock>(reply)) {
      round.active = false;
      return refuse(RefusalCode::unexpected_message, "unexpected VSP reply");
    }
    // One block per round; the user opens the next round after committing.
    round.active = false;
    return delivery.frame();
  }
}

// ---------------------------------------------------------------- VSP

namespace {

RefusalCode refusal_for(const Check& failed) {
  switch (failed.condition) {
    case Condition::block_executing_signatures:
      return failed.reason.find("executing") != std::string::npos
                 ? RefusalCode::bad_executing_signature
                 : RefusalCode::bad_user_signature;
    case Condition::block_ordering_signature: return RefusalCode::bad_ordering_signature;
    default: return RefusalCode::bad_block;
  }
}

}  // namespace

std::variant<DataBlock, Refusal> validate_candidate(DataBlock candidate, const RoundOpen& round,
                                                    const Signer& vsp) {
  if (candidate.core.ordering_signature.empty()) {
    return Refusal{RefusalCode::bad_ordering_signature, "candidate has no ordering signature"};
  }
  for (const auto& ct : candidate.transactions) {
    if (ct.inner.ledger_address != round.ledger_address) {
      return Refusal{RefusalCode::wrong_ledger, "transaction addressed to another ledger"};
    }
  }
  const auto height = round.tip_height + 1;
  if (candidate.core.previous_hash != round.tip_chain_hash || candidate.core.height != height) {
    // The VSP owns the link to the tip.
    candidate.core.previous_hash = round.tip_chain_hash;
    candidate.core.height = height;
  }

  const auto keys = directory_from_grants(round.keys);
  auto report = validate_unsigned_block(candidate, keys, static_cast<std::size_t>(height));
  if (auto bad = report.first_failure()) {
    return Refusal{refusal_for(*bad),
                   std::string(condition_code(bad->condition)) + " " + bad->reason};
  }
  if (auto v = find_dependency_violation(candidate.transactions, round.history_output_ids)) {
    return Refusal{v->appears_later ? RefusalCode::dependency_order : RefusalCode::unknown_dependency,
                   "transaction " + std::to_string(v->tx_index) + " consumes " + v->input.hex() +
                       (v->appears_later ? " which is produced later in the block"
                                         : " which does not exist")};
  }
  candidate.validation_signature = vsp.sign(hash_header(candidate.core).view());
  return candidate;
}

ValidationService::ValidationService(std::string id, KeyPair key)
    : Service(std::move(id), std::move(key)) {}

Bytes ValidationService::dispatch(std::string_view from, Message&& msg) {
  if (auto* open = std::get_if<RoundOpen>(&msg)) {
    auto guard = locks_.lock(open->ledger_address);
    std::lock_guard lock(rounds_mutex_);
    rounds_.insert_or_assign(open->ledger_address, std::move(*open));
    return encode_message(Ack{});
  }
  auto* cand = std::get_if<BlockCandidate>(&msg);
  if (cand == nullptr) return refuse(RefusalCode::unexpected_message, "VSP takes BlockCandidate");
  auto guard = locks_.lock(cand->ledger_address);
  RoundOpen round;
  {
    std::lock_guard lock(rounds_mutex_);
    auto it = rounds_.find(cand->ledger_address);
    if (it == rounds_.end()) return refuse(RefusalCode::no_round, "no open round for this ledger");
    round = it->second;
  }
  auto result = validate_candidate(std::move(cand->block), round, key_);
  if (auto* r = std::get_if<Refusal>(&result)) {
    audit_.add("candidate from " + std::string(from) + " refused: " +
               std::string(refusal_name(r->code)) + " " + r->detail);
    return encode_message(*r);
  }
  ++signed_;
  return encode_message(ValidatedBlock{std::get<DataBlock>(std::move(result))});
}

}  // namespace pbl::services
