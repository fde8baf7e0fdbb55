#include "pbl/services/ledger_api.hpp"

#include <algorithm>

#include "pbl/envelope.hpp"
#include "pbl/validation.hpp"

namespace pbl::services {

std::string_view api_error_kind_name(ApiErrorKind kind) {
  switch (kind) {
    case ApiErrorKind::fault: return "fault";
    case ApiErrorKind::refused: return "refused";
    case ApiErrorKind::invalid: return "invalid";
    case ApiErrorKind::usage: return "usage";
  }
  return "?";
}

namespace {

std::optional<Role> role_of(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::gba: return Role::gba;
    case ServiceKind::esp: return Role::esp;
    case ServiceKind::osp: return Role::osp;
    case ServiceKind::vsp: return Role::vsp;
    case ServiceKind::storage: return std::nullopt;
  }
  return std::nullopt;
}

std::string_view config_key_for(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::gba: return config_keys::kGbaPublicKey;
    case ServiceKind::esp: return config_keys::kEspPublicKeys;
    case ServiceKind::osp: return config_keys::kOspPublicKeys;
    case ServiceKind::vsp: return config_keys::kVspPublicKeys;
    case ServiceKind::storage: return {};
  }
  return {};
}

Digest tip_hash(const Ledger& l) {
  return l.blocks.empty() ? chain_hash(l.genesis) : chain_hash(l.blocks.back());
}

}  // namespace

KeyDirectory pool_directory(const ProviderPool& pool) {
  KeyDirectory dir;
  for (auto kind : kAllKinds) {
    auto role = role_of(kind);
    if (!role) continue;
    for (const auto& r : pool.of(kind)) dir.add(*role, r.public_key);
  }
  return dir;
}

LedgerApi::LedgerApi(harness::Network& net, ProviderPool pool, KeyPair root, ApiOptions options)
    : net_(net),
      pool_(std::move(pool)),
      root_(std::move(root)),
      root_address_(pbl::root_address(root_.public_key())),
      options_(std::move(options)) {
  pool_.validate();
  if (options_.ttl_ms <= 0) throw std::invalid_argument("ttl must be positive");
  root_record_.root_address = root_address_;
}

LedgerApi LedgerApi::from_phrase(harness::Network& net, ProviderPool pool, const SeedPhrase& phrase,
                                 ApiOptions options) {
  return LedgerApi(net, std::move(pool), derive_root_keypair(phrase), std::move(options));
}

KeyPair LedgerApi::ledger_key(std::uint32_t index) const {
  return derive_ledger_keypair(root_, index);
}

Address LedgerApi::ledger_address_for(std::uint32_t index) const {
  return pbl::ledger_address(ledger_key(index).public_key());
}

LedgerApi::Reply LedgerApi::call(const std::string& to, const Message& m) {
  auto delivery = net_.send(options_.agent_id, to, encode_message(m), options_.ttl_ms);
  if (delivery.faulted()) return {std::nullopt, delivery.fault_reason()};
  try {
    return {decode_message(delivery.frame()), {}};
  } catch (const DecodeError& e) {
    return {std::nullopt, to + " sent a garbled reply: " + e.what()};
  }
}

LedgerApi::Blame LedgerApi::blame(RefusalCode code) {
  switch (code) {
    case RefusalCode::bad_executing_signature:
    case RefusalCode::unregistered_signer:
    case RefusalCode::malformed_message:
    case RefusalCode::unexpected_message:
      return Blame::esp;
    case RefusalCode::osp_unreachable:
    case RefusalCode::bad_ordering_signature:
    case RefusalCode::no_round:
      return Blame::osp;
    case RefusalCode::vsp_unreachable:
    case RefusalCode::bad_validation_signature:
      return Blame::vsp;
    default:
      return Blame::permanent;
  }
}

// ---------------------------------------------------------------- sessions

LedgerApi::Session& LedgerApi::session(const Address& ledger) {
  auto it = sessions_.find(ledger);
  if (it == sessions_.end()) {
    throw ApiError(ApiErrorKind::usage, "ledger not open in this agent: " + ledger.to_string());
  }
  return it->second;
}

const LedgerApi::Session& LedgerApi::session(const Address& ledger) const {
  auto it = sessions_.find(ledger);
  if (it == sessions_.end()) {
    throw ApiError(ApiErrorKind::usage, "ledger not open in this agent: " + ledger.to_string());
  }
  return it->second;
}

LedgerApi::Session LedgerApi::make_session(std::uint32_t index, KeyPair key, Ledger ledger) {
  Session s(std::move(key));
  s.index = index;
  s.keys = KeyDirectory::from_genesis(ledger.genesis);
  s.keys.merge(pool_directory(pool_));
  s.keys.merge(root_record_.provider_directory());
  for (const auto& b : ledger.blocks) {
    for (const auto& ct : b.transactions) s.history.push_back(output_id(ct));
  }
  for (std::string_view id : {"balance", "null"}) {
    const auto* def = registry_.find(id);
    auto r = chaincode::replay(*def, ledger);
    if (r.transactions > 0) s.state[std::string(id)] = r.final_state;
  }
  s.ledger = std::move(ledger);
  return s;
}

const Ledger& LedgerApi::local_ledger(const Address& ledger) const { return session(ledger).ledger; }

KeyDirectory LedgerApi::directory(const Address& ledger) const { return session(ledger).keys; }

std::optional<RoundState> LedgerApi::round(const Address& ledger) const {
  return session(ledger).round;
}

std::size_t LedgerApi::pending(const Address& ledger) const { return session(ledger).pending.size(); }

bool LedgerApi::holding(const Address& ledger) const { return session(ledger).held.has_value(); }

const std::vector<CommitEvent>& LedgerApi::commits(const Address& ledger) const {
  return session(ledger).commits;
}

Bytes LedgerApi::committed_state(const Address& ledger, std::string_view chaincode_id) const {
  const auto& s = session(ledger);
  auto it = s.state.find(std::string(chaincode_id));
  if (it != s.state.end()) return it->second;
  const auto* def = registry_.find(chaincode_id);
  return def == nullptr ? Bytes{} : def->initial_state();
}

// ---------------------------------------------------------------- root record

std::optional<RootRecord> LedgerApi::fetch_root_record() {
  std::set<std::string> tried;
  while (auto rec = pool_.draw(ServiceKind::storage, tried)) {
    tried.insert(rec->provider_id);
    auto reply = call(rec->provider_id, Query{QueryKind::get_root_record, root_address_});
    if (!reply.message) continue;
    if (auto* q = std::get_if<QueryResponse>(&*reply.message)) {
      try {
        return canonical_decode<RootRecord>(q->body);
      } catch (const DecodeError&) {
        continue;
      }
    }
    if (auto* r = std::get_if<Refusal>(&*reply.message); r && r->code == RefusalCode::not_found) {
      root_loaded_ = true;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

void LedgerApi::ensure_root() {
  if (root_loaded_) return;
  if (auto r = fetch_root_record()) {
    root_record_ = *r;
    root_loaded_ = true;
  }
}

void LedgerApi::store_root() {
  for (const auto& rec : pool_.of(ServiceKind::storage)) {
    auto reply = call(rec.provider_id, PutRootRecord{root_record_});
    if (!reply.message) audit_.push_back("root record not stored at " + rec.provider_id);
  }
}

std::vector<Address> LedgerApi::list_ledgers() {
  std::set<std::string> tried;
  bool missing = false;
  while (auto rec = pool_.draw(ServiceKind::storage, tried)) {
    tried.insert(rec->provider_id);
    auto reply = call(rec->provider_id, Query{QueryKind::list_ledgers, root_address_});
    if (!reply.message) continue;
    if (auto* q = std::get_if<QueryResponse>(&*reply.message)) {
      return canonical_decode<std::vector<Address>>(q->body);
    }
    if (auto* r = std::get_if<Refusal>(&*reply.message); r && r->code == RefusalCode::not_found) {
      missing = true;
    }
  }
  if (missing) return {};
  throw ApiError(ApiErrorKind::fault, "no storage provider answered");
}

// ---------------------------------------------------------------- reads

Ledger LedgerApi::read_ledger(const Address& ledger) {
  std::set<std::string> tried;
  bool missing = false;
  while (auto rec = pool_.draw(ServiceKind::storage, tried)) {
    tried.insert(rec->provider_id);
    auto reply = call(rec->provider_id, Query{QueryKind::get_ledger, ledger});
    if (!reply.message) {
      audit_.push_back("read: " + reply.fault);
      continue;
    }
    if (auto* q = std::get_if<QueryResponse>(&*reply.message)) {
      try {
        return canonical_decode<Ledger>(q->body);
      } catch (const DecodeError& e) {
        audit_.push_back("read: " + rec->provider_id + " returned an undecodable ledger: " + e.what());
        continue;
      }
    }
    if (auto* r = std::get_if<Refusal>(&*reply.message); r && r->code == RefusalCode::not_found) {
      missing = true;
    }
  }
  if (missing) {
    throw ApiError(ApiErrorKind::refused, "no storage provider holds " + ledger.to_string(),
                   RefusalCode::not_found);
  }
  throw ApiError(ApiErrorKind::fault, "no storage provider answered within the ttl");
}

// ---------------------------------------------------------------- create / open

CreateResult LedgerApi::create_ledger(std::uint32_t index, std::vector<ConfigEntry> config) {
  auto key = ledger_key(index);
  const auto address = pbl::ledger_address(key.public_key());
  ensure_root();
  if (sessions_.contains(address) || root_record_.find(address) != nullptr) {
    throw ApiError(ApiErrorKind::refused, "ledger " + std::to_string(index) + " already exists",
                   RefusalCode::duplicate);
  }

  if (options_.embed_provider_keys) {
    for (auto kind : kAllKinds) {
      auto name = config_key_for(kind);
      if (name.empty()) continue;
      auto present = std::any_of(config.begin(), config.end(),
                                 [&](const ConfigEntry& e) { return e.key == name; });
      if (present) continue;
      std::vector<PublicKey> keys;
      for (const auto& r : pool_.of(kind)) keys.push_back(r.public_key);
      config.push_back({std::string(name), pack_keys(keys)});
    }
  }

  const GenesisRequest request{key.public_key(), std::move(config), options_.kyc_blob};
  std::optional<GenesisBlock> genesis;
  std::string gba_id;
  std::set<std::string> tried;
  while (auto rec = pool_.draw(ServiceKind::gba, tried)) {
    tried.insert(rec->provider_id);
    auto reply = call(rec->provider_id, request);
    if (!reply.message) {
      audit_.push_back("create: " + reply.fault);
      continue;
    }
    if (auto* r = std::get_if<Refusal>(&*reply.message)) {
      if (r->code == RefusalCode::kyc_denied || r->code == RefusalCode::missing_user_key) {
        throw ApiError(ApiErrorKind::refused,
                       rec->provider_id + " refused the genesis: " + r->detail, r->code);
      }
      audit_.push_back("create: " + rec->provider_id + " refused: " + r->detail);
      continue;
    }
    auto* g = std::get_if<GenesisResponse>(&*reply.message);
    if (g == nullptr) continue;
    auto signed_genesis = countersign_genesis(g->genesis, key);
    auto report = validate_genesis_block(signed_genesis, rec->public_key, key.public_key());
    if (!report.ok()) {
      audit_.push_back("create: genesis from " + rec->provider_id + " rejected: " + report.summary());
      continue;
    }
    genesis = std::move(signed_genesis);
    gba_id = rec->provider_id;
    break;
  }
  if (!genesis) {
    throw ApiError(ApiErrorKind::fault, "no GBA issued a valid genesis block within the ttl");
  }

  CreateResult result;
  result.gba_id = gba_id;
  bool any = false;
  bool duplicate = false;
  for (const auto& rec : pool_.of(ServiceKind::storage)) {
    auto reply = call(rec.provider_id, CommitBlock{address, *genesis, std::nullopt});
    StorageOutcome out{rec.provider_id, false, {}};
    if (!reply.message) {
      out.detail = reply.fault;
    } else if (std::holds_alternative<Ack>(*reply.message)) {
      out.ok = true;
      any = true;
    } else if (auto* r = std::get_if<Refusal>(&*reply.message)) {
      out.detail = std::string(refusal_name(r->code)) + ": " + r->detail;
      duplicate = duplicate || r->code == RefusalCode::duplicate;
    }
    result.storage.push_back(std::move(out));
  }
  if (!any) {
    if (duplicate) {
      throw ApiError(ApiErrorKind::refused, "ledger already stored", RefusalCode::duplicate);
    }
    throw ApiError(ApiErrorKind::fault, "no storage provider accepted the genesis block");
  }

  root_record_.ledgers.push_back({index, address});
  for (auto kind : kAllKinds) {
    auto role = role_of(kind);
    if (!role) continue;
    for (const auto& r : pool_.of(kind)) {
      root_record_.service_provider_keys[r.provider_id] = ProviderKey{*role, r.public_key};
    }
  }
  store_root();

  Ledger ledger{*genesis, {}, address};
  result.ledger = ledger;
  sessions_.insert_or_assign(address, make_session(index, std::move(key), std::move(ledger)));
  return result;
}

const Ledger& LedgerApi::open_ledger(std::uint32_t index) {
  const auto address = ledger_address_for(index);
  if (auto it = sessions_.find(address); it != sessions_.end()) return it->second.ledger;
  ensure_root();
  auto ledger = read_ledger(address);
  auto s = make_session(index, ledger_key(index), ledger);
  auto report = validate_ledger(ledger, s.keys);
  if (!report.ok()) {
    throw ApiError(ApiErrorKind::invalid, "stored ledger fails validation: " + report.summary());
  }
  if (root_record_.find(address) == nullptr) root_record_.ledgers.push_back({index, address});
  return sessions_.insert_or_assign(address, std::move(s)).first->second.ledger;
}

// ---------------------------------------------------------------- rounds

RoundOpen LedgerApi::round_open(const Session& s, const std::string& vsp_id) const {
  RoundOpen m;
  m.ledger_address = s.ledger.ledger_address;
  m.user_key = s.key.public_key();
  m.vsp_id = vsp_id;
  m.tip_chain_hash = tip_hash(s.ledger);
  m.tip_height = s.ledger.tip_height();
  m.keys = grants_from_directory(s.keys);
  m.history_output_ids = s.history;
  return m;
}

void LedgerApi::open_round(Session& s) {
  auto open_one = [&](ServiceKind kind, const std::string& vsp) {
    for (;;) {
      auto rec = pool_.draw(kind, s.round_excluded);
      if (!rec) {
        s.round_excluded.clear();
        throw ApiError(ApiErrorKind::fault,
                       "no " + std::string(harness::kind_name(kind)) + " reachable for a new round");
      }
      const auto& id = rec->provider_id;
      auto reply = call(id, round_open(s, kind == ServiceKind::vsp ? id : vsp));
      if (reply.message && std::holds_alternative<Ack>(*reply.message)) return id;
      audit_.push_back("round: " + id + " did not join" +
                       (reply.message ? std::string() : ": " + reply.fault));
      s.round_excluded.insert(id);
    }
  };
  // Validation first, then ordering, so the OSP can be told its VSP.
  auto vsp = open_one(ServiceKind::vsp, {});
  auto osp = open_one(ServiceKind::osp, vsp);
  s.round = RoundState{vsp, osp, s.ledger.tip_height()};
  ++s.epoch;
}

void LedgerApi::reset_round(Session& s, std::optional<std::string> exclude) {
  if (exclude) s.round_excluded.insert(*exclude);
  s.round.reset();
  ++s.epoch;
}

void LedgerApi::drive(Session& s) {
  std::size_t providers = 0;
  for (auto kind : kAllKinds) providers += pool_.size(kind);
  const std::size_t limit = (s.pending.size() + 2) * (providers + 2) * 4;
  for (std::size_t step = 0;; ++step) {
    if (step > limit) throw ApiError(ApiErrorKind::fault, "round did not settle");
    if (!s.round) open_round(s);
    auto it = std::find_if(s.pending.begin(), s.pending.end(),
                           [&](const Pending& p) { return p.accepted_epoch != s.epoch; });
    if (it == s.pending.end()) return;
    push(s, *it);
  }
}

void LedgerApi::push(Session& s, Pending& p) {
  const auto round = *s.round;
  const auto seq = p.seq;
  std::set<std::string> tried;
  std::string last_fault = "no ESP in the pool";
  for (std::size_t attempt = 0; attempt < pool_.size(ServiceKind::esp); ++attempt) {
    auto rec = pool_.draw(ServiceKind::esp, tried);
    if (!rec) break;
    const auto esp = rec->provider_id;
    tried.insert(esp);
    ++p.attempts;
    auto reply = call(esp, SubmitTx{p.tx, s.key.public_key(), round.current_osp, p.prior_state});
    if (!reply.message) {
      audit_.push_back("submit: " + reply.fault);
      last_fault = reply.fault;
      continue;
    }
    if (auto* c = std::get_if<CompleteTx>(&*reply.message)) {
      p.ct = c->ct;
      p.new_state = c->new_state;
      p.esp_id = esp;
      p.accepted_epoch = s.epoch;
      if (seq == target_seq_) {
        target_receipt_.tx = p.tx;
        target_receipt_.output_id = output_id(c->ct);
        target_receipt_.output = c->ct.output;
        target_receipt_.esp_id = esp;
        target_receipt_.osp_id = round.current_osp;
        target_receipt_.vsp_id = round.current_vsp;
        target_receipt_.esp_attempts = p.attempts;
      }
      // p may be gone after this.
      if (c->validated) on_validated_block(s, std::move(*c->validated));
      return;
    }
    auto* r = std::get_if<Refusal>(&*reply.message);
    if (r == nullptr) {
      tried.insert(esp);
      continue;
    }
    const auto what = esp + ": " + std::string(refusal_name(r->code)) + " " + r->detail;
    switch (blame(r->code)) {
      case Blame::esp:
        audit_.push_back("submit: " + what);
        last_fault = what;
        continue;
      case Blame::osp:
        audit_.push_back("round: OSP " + round.current_osp + " failed (" + what + ")");
        reset_round(s, round.current_osp);
        return;
      case Blame::vsp:
        audit_.push_back("round: VSP " + round.current_vsp + " failed (" + what + ")");
        reset_round(s, round.current_vsp);
        return;
      case Blame::permanent: {
        const auto code = r->code;
        audit_.push_back("submit refused: " + what);
        std::erase_if(s.pending, [&](const Pending& q) { return q.seq == seq; });
        throw ApiError(ApiErrorKind::refused, "transaction refused: " + what, code);
      }
    }
  }
  throw ApiError(ApiErrorKind::fault, "no executing provider accepted the transaction after " +
                                          std::to_string(tried.size()) + " attempts (" +
                                          last_fault + ")");
}

// ---------------------------------------------------------------- commit

void LedgerApi::on_validated_block(Session& s, DataBlock block) {
  const auto round = *s.round;
  const auto* vsp = pool_.find(round.current_vsp);
  const auto header = hash_header(block.core);
  if (vsp == nullptr || block.validation_signature.signer_id != fingerprint(vsp->public_key) ||
      !verify(vsp->public_key, header.view(), block.validation_signature)) {
    audit_.push_back("block refused: validation signature from " + round.current_vsp +
                     " does not verify");
    reset_round(s, round.current_vsp);
    return;
  }
  if (block.core.previous_hash != tip_hash(s.ledger) ||
      block.core.height != s.ledger.tip_height() + 1) {
    audit_.push_back("block refused: does not extend the local tip");
    reset_round(s, round.current_osp);
    return;
  }
  const auto index = static_cast<std::size_t>(block.core.height);
  auto pre = validate_unsigned_block(block, s.keys, index);
  if (!pre.ok()) {
    audit_.push_back("block refused: " + pre.summary());
    reset_round(s, round.current_osp);
    return;
  }
  std::set<Digest> mine;
  for (const auto& p : s.pending) {
    if (p.ct && p.accepted_epoch == s.epoch) mine.insert(output_id(*p.ct));
  }
  for (const auto& ct : block.transactions) {
    if (!mine.contains(output_id(ct))) {
      audit_.push_back("block refused: carries a transaction not submitted in this round");
      reset_round(s, round.current_osp);
      return;
    }
  }

  block.user_signature = s.key.sign(block_user_signing_bytes(block.core, block.validation_signature));
  auto outcomes = commit_everywhere(s, block);
  const bool stored = std::any_of(outcomes.begin(), outcomes.end(),
                                  [](const StorageOutcome& o) { return o.ok; });
  if (!stored) {
    s.held = std::move(block);
    s.round.reset();
    ++s.epoch;
    audit_.push_back("commit: no storage provider reachable; block held client-side");
    throw ApiError(ApiErrorKind::fault, "no storage provider accepted block " +
                                            std::to_string(index) + "; held for retry");
  }
  apply_commit(s, block, std::move(outcomes));
}

std::vector<StorageOutcome> LedgerApi::commit_everywhere(Session& s, const DataBlock& block) {
  std::vector<StorageOutcome> out;
  const CommitBlock msg{s.ledger.ledger_address, std::nullopt, block};
  for (const auto& rec : pool_.of(ServiceKind::storage)) {
    out.push_back(commit_to(s, rec.provider_id, msg));
  }
  return out;
}

StorageOutcome LedgerApi::commit_to(Session& s, const std::string& storage_id,
                                    const CommitBlock& msg) {
  StorageOutcome out{storage_id, false, {}};
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = call(storage_id, msg);
    if (!reply.message) {
      out.detail = reply.fault;
      return out;
    }
    if (std::holds_alternative<Ack>(*reply.message)) {
      out.ok = true;
      out.detail.clear();
      return out;
    }
    auto* r = std::get_if<Refusal>(&*reply.message);
    out.detail = r ? std::string(refusal_name(r->code)) + ": " + r->detail : "unexpected reply";
    // A provider that missed earlier blocks gets them replayed once.
    if (attempt == 0 && r != nullptr &&
        (r->code == RefusalCode::not_extending || r->code == RefusalCode::not_found) &&
        resync(s, storage_id)) {
      continue;
    }
    return out;
  }
  return out;
}

bool LedgerApi::resync(Session& s, const std::string& storage_id) {
  const auto& l = s.ledger;
  auto reply = call(storage_id, Query{QueryKind::get_ledger, l.ledger_address});
  if (!reply.message) return false;
  std::size_t have = 0;
  if (auto* q = std::get_if<QueryResponse>(&*reply.message)) {
    Ledger stored;
    try {
      stored = canonical_decode<Ledger>(q->body);
    } catch (const DecodeError&) {
      return false;
    }
    if (stored.genesis != l.genesis || stored.blocks.size() > l.blocks.size() ||
        !std::equal(stored.blocks.begin(), stored.blocks.end(), l.blocks.begin())) {
      audit_.push_back("resync: " + storage_id + " holds a diverging copy");
      return false;
    }
    have = stored.blocks.size();
  } else {
    auto g = call(storage_id, CommitBlock{l.ledger_address, l.genesis, std::nullopt});
    if (!g.message || !std::holds_alternative<Ack>(*g.message)) return false;
  }
  for (std::size_t i = have; i < l.blocks.size(); ++i) {
    auto b = call(storage_id, CommitBlock{l.ledger_address, std::nullopt, l.blocks[i]});
    if (!b.message || !std::holds_alternative<Ack>(*b.message)) return false;
  }
  audit_.push_back("resync: replayed " + std::to_string(l.blocks.size() - have) + " block(s) to " +
                   storage_id);
  return true;
}

void LedgerApi::apply_commit(Session& s, const DataBlock& block,
                             std::vector<StorageOutcome> outcomes) {
  CommitEvent ev;
  ev.height = block.core.height;
  ev.transactions = block.transactions.size();
  ev.storage = std::move(outcomes);
  if (s.round) {
    ev.osp_id = s.round->current_osp;
    ev.vsp_id = s.round->current_vsp;
  } else {
    for (auto kind : {ServiceKind::osp, ServiceKind::vsp}) {
      const auto& signer = kind == ServiceKind::osp ? block.core.ordering_signature.signer_id
                                                    : block.validation_signature.signer_id;
      for (const auto& r : pool_.of(kind)) {
        if (fingerprint(r.public_key) == signer) {
          (kind == ServiceKind::osp ? ev.osp_id : ev.vsp_id) = r.provider_id;
        }
      }
    }
  }

  s.ledger.blocks.push_back(block);
  for (const auto& ct : block.transactions) {
    const auto id = output_id(ct);
    s.history.push_back(id);
    auto it = std::find_if(s.pending.begin(), s.pending.end(),
                           [&](const Pending& p) { return p.ct && output_id(*p.ct) == id; });
    if (it == s.pending.end()) continue;
    if (it->tx.chaincode_id) s.state[*it->tx.chaincode_id] = it->new_state;
    s.pending.erase(it);
  }
  s.commits.push_back(ev);
  s.held.reset();
  s.round.reset();
  s.round_excluded.clear();
  ++s.epoch;
}

void LedgerApi::check_held(Session& s) {
  if (!s.held) return;
  auto block = *s.held;
  auto outcomes = commit_everywhere(s, block);
  if (std::none_of(outcomes.begin(), outcomes.end(), [](const StorageOutcome& o) { return o.ok; })) {
    throw ApiError(ApiErrorKind::fault, "held block " + std::to_string(block.core.height) +
                                            " still has no storage provider");
  }
  apply_commit(s, block, std::move(outcomes));
}

bool LedgerApi::retry_held(const Address& ledger) {
  auto& s = session(ledger);
  try {
    check_held(s);
  } catch (const ApiError&) {
    return false;
  }
  return true;
}

// ---------------------------------------------------------------- submit / cut

SubmitReceipt LedgerApi::submit(const Address& ledger, Bytes payload,
                                std::optional<std::string> chaincode_id) {
  auto& s = session(ledger);
  check_held(s);

  PayloadEnvelope env;
  try {
    env = parse_envelope(payload);
  } catch (const DecodeError& e) {
    throw ApiError(ApiErrorKind::refused, std::string("malformed payload: ") + e.what(),
                   RefusalCode::malformed_payload);
  }
  for (const auto& input : env.inputs) {
    bool known = std::find(s.history.begin(), s.history.end(), input) != s.history.end() ||
                 std::any_of(s.pending.begin(), s.pending.end(), [&](const Pending& p) {
                   return p.ct && output_id(*p.ct) == input;
                 });
    if (!known) {
      throw ApiError(ApiErrorKind::refused, "payload consumes unknown output " + input.hex(),
                     RefusalCode::unknown_dependency);
    }
  }

  Pending p;
  p.seq = next_seq_++;
  p.tx.ledger_address = ledger;
  p.tx.payload = std::move(payload);
  p.tx.chaincode_id = std::move(chaincode_id);
  p.tx.submitted_at = net_.clock().now();
  p.tx.user_signature = s.key.sign(transaction_signing_bytes(p.tx));
  if (p.tx.chaincode_id) {
    auto last = std::find_if(s.pending.rbegin(), s.pending.rend(), [&](const Pending& q) {
      return q.ct && q.tx.chaincode_id == p.tx.chaincode_id;
    });
    if (last != s.pending.rend()) {
      p.prior_state = last->new_state;
    } else if (auto it = s.state.find(*p.tx.chaincode_id); it != s.state.end()) {
      p.prior_state = it->second;
    }
  }

  target_seq_ = p.seq;
  target_receipt_ = SubmitReceipt{};
  target_receipt_.ledger = ledger;
  const auto seq = p.seq;
  const auto before = s.commits.size();
  s.pending.push_back(std::move(p));
  try {
    drive(s);
  } catch (const ApiError&) {
    const bool in_held =
        s.held && std::any_of(s.held->transactions.begin(), s.held->transactions.end(),
                              [&](const CompleteTransaction& ct) {
                                return ct.inner == target_receipt_.tx;
                              });
    if (!in_held) std::erase_if(s.pending, [&](const Pending& q) { return q.seq == seq; });
    target_seq_ = 0;
    throw;
  }
  target_seq_ = 0;
  auto receipt = std::move(target_receipt_);
  receipt.commits.assign(s.commits.begin() + static_cast<std::ptrdiff_t>(before), s.commits.end());
  return receipt;
}

std::vector<CommitEvent> LedgerApi::cut(Session& s, QueryKind kind) {
  check_held(s);
  const auto before = s.commits.size();
  std::size_t providers = 0;
  for (auto k : kAllKinds) providers += pool_.size(k);
  const std::size_t limit = (s.pending.size() + 2) * (providers + 2) * 4;
  for (std::size_t step = 0; step <= limit; ++step) {
    drive(s);
    if (s.pending.empty() || !s.round) {
      if (s.pending.empty()) break;
      continue;
    }
    const auto round = *s.round;
    auto reply = call(round.current_osp, Query{kind, s.ledger.ledger_address});
    if (!reply.message) {
      audit_.push_back("cut: " + reply.fault);
      reset_round(s, round.current_osp);
      continue;
    }
    if (auto* q = std::get_if<QueryResponse>(&*reply.message)) {
      if (!q->validated) break;  // nothing due yet
      on_validated_block(s, std::move(*q->validated));
      if (kind == QueryKind::poll_cut) break;
      continue;
    }
    if (auto* r = std::get_if<Refusal>(&*reply.message)) {
      const auto what = round.current_osp + ": " + std::string(refusal_name(r->code)) + " " + r->detail;
      switch (blame(r->code)) {
        case Blame::vsp:
          audit_.push_back("round: VSP " + round.current_vsp + " failed (" + what + ")");
          reset_round(s, round.current_vsp);
          continue;
        case Blame::esp:
        case Blame::osp:
          audit_.push_back("round: OSP " + round.current_osp + " failed (" + what + ")");
          reset_round(s, round.current_osp);
          continue;
        case Blame::permanent:
          audit_.push_back("cut refused: " + what);
          throw ApiError(ApiErrorKind::refused, "block refused: " + what, r->code);
      }
    }
    break;
  }
  return {s.commits.begin() + static_cast<std::ptrdiff_t>(before), s.commits.end()};
}

std::vector<CommitEvent> LedgerApi::poll(const Address& ledger) {
  return cut(session(ledger), QueryKind::poll_cut);
}

std::vector<CommitEvent> LedgerApi::flush(const Address& ledger) {
  return cut(session(ledger), QueryKind::flush);
}

}  // namespace pbl::services
