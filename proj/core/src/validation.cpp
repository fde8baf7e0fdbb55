#include "pbl/validation.hpp"

#include <sstream>

namespace pbl {

std::string_view condition_code(Condition c) {
  switch (c) {
    case Condition::structural: return "L1";
    case Condition::single_genesis: return "L2";
    case Condition::genesis_fields: return "G1";
    case Condition::genesis_previous_hash: return "G2";
    case Condition::genesis_gba_signature: return "G3";
    case Condition::genesis_user_signature: return "G4";
    case Condition::block_fields: return "D1";
    case Condition::block_data_hash: return "D2";
    case Condition::block_executing_signatures: return "D3";
    case Condition::block_ordering_signature: return "D4";
    case Condition::block_validation_signature: return "D5";
    case Condition::block_user_signature: return "D6";
    case Condition::connection: return "C";
  }
  return "?";
}

std::string_view condition_name(Condition c) {
  switch (c) {
    case Condition::structural: return "ledger structure";
    case Condition::single_genesis: return "only one genesis block";
    case Condition::genesis_fields: return "genesis fields present";
    case Condition::genesis_previous_hash: return "genesis previous hash all zeros";
    case Condition::genesis_gba_signature: return "GBA signature";
    case Condition::genesis_user_signature: return "genesis user signature";
    case Condition::block_fields: return "block fields present";
    case Condition::block_data_hash: return "data hash";
    case Condition::block_executing_signatures: return "executing signatures";
    case Condition::block_ordering_signature: return "ordering signature";
    case Condition::block_validation_signature: return "validation signature";
    case Condition::block_user_signature: return "user signature";
    case Condition::connection: return "connection";
  }
  return "?";
}

std::string Check::location() const {
  if (condition == Condition::connection) {
    return "connection(" + std::to_string(index - 1) + "," + std::to_string(index) + ")";
  }
  return "block " + std::to_string(index);
}

void ValidationReport::record(std::size_t index, Condition c,
                              const std::vector<std::string>& problems) {
  if (problems.empty()) {
    pass(index, c);
    return;
  }
  std::string joined;
  for (const auto& p : problems) {
    if (!joined.empty()) joined += "; ";
    joined += p;
  }
  fail(index, c, std::move(joined));
}

void ValidationReport::append(const ValidationReport& other) {
  checks_.insert(checks_.end(), other.checks_.begin(), other.checks_.end());
}

bool ValidationReport::ok() const {
  return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.passed; });
}

bool ValidationReport::passed(Condition c) const {
  bool seen = false;
  for (const auto& check : checks_) {
    if (check.condition != c) continue;
    if (!check.passed) return false;
    seen = true;
  }
  return seen;
}

bool ValidationReport::failed(Condition c) const {
  return std::any_of(checks_.begin(), checks_.end(),
                     [c](const Check& check) { return check.condition == c && !check.passed; });
}

std::vector<Check> ValidationReport::failures() const {
  std::vector<Check> out;
  std::copy_if(checks_.begin(), checks_.end(), std::back_inserter(out),
               [](const Check& c) { return !c.passed; });
  return out;
}

std::optional<Check> ValidationReport::first_failure() const {
  for (const auto& c : checks_) {
    if (!c.passed) return c;
  }
  return std::nullopt;
}

std::string ValidationReport::summary() const {
  auto first = first_failure();
  if (!first) return "valid (" + std::to_string(checks_.size()) + " checks)";
  std::ostringstream out;
  out << "invalid at " << first->location() << ": " << condition_code(first->condition) << " "
      << condition_name(first->condition) << " (" << first->reason << ")";
  return out.str();
}

namespace {

std::optional<std::string> signature_problem(const KeyDirectory& keys, Role role,
                                             const Signature& sig, ByteView message,
                                             const std::string& what) {
  if (sig.empty()) return what + " signature missing";
  auto res = keys.resolve(sig.signer_id, role);
  if (res.status == KeyDirectory::Lookup::unregistered) return what + ": unregistered signer";
  if (res.status == KeyDirectory::Lookup::wrong_role) {
    return what + ": signer not registered as " + std::string(role_name(role));
  }
  if (!verify(res.key, message, sig)) return what + " signature invalid";
  return std::nullopt;
}

std::optional<std::string> signature_problem(const PublicKey& key, const Signature& sig,
                                             ByteView message, const std::string& what) {
  if (sig.empty()) return what + " signature missing";
  if (!verify(key, message, sig)) return what + " signature invalid";
  return std::nullopt;
}

void add_if(std::vector<std::string>& problems, std::optional<std::string> p) {
  if (p) problems.push_back(std::move(*p));
}

std::string tx_label(std::size_t i) { return "tx " + std::to_string(i); }

std::vector<std::string> block_field_problems(const DataBlock& b, bool require_final_signatures) {
  std::vector<std::string> problems;
  if (b.transactions.empty()) problems.emplace_back("block has no transactions");
  if (b.core.ordering_signature.empty()) problems.emplace_back("ordering signature missing");
  if (require_final_signatures) {
    if (b.validation_signature.empty()) problems.emplace_back("validation signature missing");
    if (b.user_signature.empty()) problems.emplace_back("user signature missing");
  }
  for (std::size_t i = 0; i < b.transactions.size(); ++i) {
    const auto& ct = b.transactions[i];
    if (ct.inner.user_signature.empty()) problems.push_back(tx_label(i) + ": user signature missing");
    if (ct.executing_signature.empty()) {
      problems.push_back(tx_label(i) + ": executing signature missing");
    }
    if (ct.output.empty()) problems.push_back(tx_label(i) + ": output missing");
    if (!ct.inner.chaincode_id && ct.output != zero_output()) {
      problems.push_back(tx_label(i) + ": output must be the zero sentinel when no chaincode ran");
    }
    for (const auto& extra : ct.inner.extra_signatures) {
      if (extra.signer_id.empty() || extra.value.size() != kSignatureSize) {
        problems.push_back(tx_label(i) + ": malformed extra signature");
        break;
      }
    }
  }
  return problems;
}

void check_d2_to_d4(ValidationReport& report, const DataBlock& b, const KeyDirectory& keys,
                    std::size_t index) {
  if (b.core.data_hash == compute_data_hash(b.transactions)) {
    report.pass(index, Condition::block_data_hash);
  } else {
    report.fail(index, Condition::block_data_hash, "data_hash does not match transactions");
  }

  std::vector<std::string> exec_problems;
  for (std::size_t i = 0; i < b.transactions.size(); ++i) {
    const auto& ct = b.transactions[i];
    add_if(exec_problems, signature_problem(keys, Role::user, ct.inner.user_signature,
                                            transaction_signing_bytes(ct.inner),
                                            tx_label(i) + " user"));
    add_if(exec_problems,
           signature_problem(keys, Role::esp, ct.executing_signature,
                             execution_signing_bytes(ct.inner, ct.output), tx_label(i) + " executing"));
  }
  report.record(index, Condition::block_executing_signatures, exec_problems);

  std::vector<std::string> order_problems;
  if (b.core.exec_sig_root != compute_exec_sig_root(b.transactions)) {
    order_problems.emplace_back("exec_sig_root does not match executing signatures");
  }
  add_if(order_problems, signature_problem(keys, Role::osp, b.core.ordering_signature,
                                           b.core.exec_sig_root.view(), "ordering"));
  report.record(index, Condition::block_ordering_signature, order_problems);
}

}  // namespace

ValidationReport validate_genesis_block(const GenesisBlock& g, const PublicKey& gba_key,
                                        const PublicKey& user_key) {
  ValidationReport report;
  std::vector<std::string> fields;
  auto user = g.user_public_key();
  if (!user) fields.emplace_back("config lacks a 32-byte user_public_key");
  if (g.core.height != 0) fields.emplace_back("genesis height must be 0");
  if (g.core.data_hash != compute_config_hash(g.config)) {
    fields.emplace_back("data_hash does not commit to the config entries");
  }
  if (!g.core.exec_sig_root.is_zero() || !g.core.ordering_signature.empty()) {
    fields.emplace_back("genesis carries ordering fields");
  }
  if (g.gba_signature.empty()) fields.emplace_back("GBA signature missing");
  if (g.user_signature.empty()) fields.emplace_back("user signature missing");
  report.record(0, Condition::genesis_fields, fields);

  if (g.core.previous_hash.is_zero()) {
    report.pass(0, Condition::genesis_previous_hash);
  } else {
    report.fail(0, Condition::genesis_previous_hash, "previous_hash is not all zeros");
  }

  std::vector<std::string> gba;
  add_if(gba, signature_problem(gba_key, g.gba_signature, hash_header(g.core).view(), "GBA"));
  report.record(0, Condition::genesis_gba_signature, gba);

  std::vector<std::string> usr;
  if (user && *user != user_key) usr.emplace_back("config user key differs from the owner key");
  add_if(usr, signature_problem(user_key, g.user_signature,
                                block_user_signing_bytes(g.core, g.gba_signature), "user"));
  report.record(0, Condition::genesis_user_signature, usr);
  return report;
}

ValidationReport validate_unsigned_block(const DataBlock& b, const KeyDirectory& keys,
                                         std::size_t index) {
  ValidationReport report;
  report.record(index, Condition::block_fields, block_field_problems(b, false));
  check_d2_to_d4(report, b, keys, index);
  return report;
}

ValidationReport validate_data_block(const DataBlock& b, const KeyDirectory& keys) {
  return validate_data_block(b, keys, static_cast<std::size_t>(b.core.height));
}

ValidationReport validate_data_block(const DataBlock& b, const KeyDirectory& keys,
                                     std::size_t index) {
  ValidationReport report;
  report.record(index, Condition::block_fields, block_field_problems(b, true));
  check_d2_to_d4(report, b, keys, index);

  auto header = hash_header(b.core);
  std::vector<std::string> vsp;
  add_if(vsp, signature_problem(keys, Role::vsp, b.validation_signature, header.view(),
                                "validation"));
  report.record(index, Condition::block_validation_signature, vsp);

  std::vector<std::string> usr;
  add_if(usr, signature_problem(keys, Role::user, b.user_signature,
                                block_user_signing_bytes(b.core, b.validation_signature), "user"));
  report.record(index, Condition::block_user_signature, usr);
  return report;
}

bool validate_connection(const GenesisBlock& prev, const DataBlock& next) {
  return next.core.previous_hash == chain_hash(prev) && next.core.height == prev.core.height + 1;
}

bool validate_connection(const DataBlock& prev, const DataBlock& next) {
  return next.core.previous_hash == chain_hash(prev) && next.core.height == prev.core.height + 1;
}

ValidationReport validate_ledger(const Ledger& l, const KeyDirectory& keys) {
  ValidationReport report;
  if (l.genesis.absent()) {
    report.fail(0, Condition::structural, "ledger has no genesis block");
    return report;
  }

  std::vector<std::string> shape;
  auto owner = l.genesis.user_public_key();
  if (!l.ledger_address.is(AddressKind::ledger)) shape.emplace_back("not a ledger address");
  if (!l.ledger_address.checksum_valid()) shape.emplace_back("ledger address checksum invalid");
  if (owner && !l.ledger_address.matches_key(*owner)) {
    shape.emplace_back("ledger address does not belong to the genesis user key");
  }
  report.record(0, Condition::structural, shape);

  // Genesis conditions, with keys resolved through the directory.
  auto gba = keys.resolve(l.genesis.gba_signature.signer_id, Role::gba);
  auto user = keys.resolve(l.genesis.user_signature.signer_id, Role::user);
  auto genesis = validate_genesis_block(l.genesis, gba.key, user.key);
  for (const auto& check : genesis.checks()) {
    if (check.condition == Condition::genesis_gba_signature &&
        gba.status != KeyDirectory::Lookup::found && !l.genesis.gba_signature.empty()) {
      report.fail(0, check.condition,
                  gba.status == KeyDirectory::Lookup::unregistered
                      ? "GBA: unregistered signer"
                      : "GBA: signer not registered as GBA");
    } else if (check.condition == Condition::genesis_user_signature &&
               user.status != KeyDirectory::Lookup::found && !l.genesis.user_signature.empty()) {
      report.fail(0, check.condition, "user: unregistered signer");
    } else {
      report.add(check);
    }
  }

  for (std::size_t i = 0; i < l.blocks.size(); ++i) {
    const auto& block = l.blocks[i];
    const std::size_t index = i + 1;
    if (block.core.previous_hash.is_zero()) {
      report.fail(index, Condition::single_genesis,
                  "block carries an all-zero previous hash: a second genesis block");
    } else {
      report.pass(index, Condition::single_genesis);
    }
    report.append(validate_data_block(block, keys, index));

    bool linked = i == 0 ? validate_connection(l.genesis, block)
                         : validate_connection(l.blocks[i - 1], block);
    if (linked) {
      report.pass(index, Condition::connection);
    } else {
      const auto prev_height = i == 0 ? l.genesis.core.height : l.blocks[i - 1].core.height;
      const auto prev_hash = i == 0 ? chain_hash(l.genesis) : chain_hash(l.blocks[i - 1]);
      report.fail(index, Condition::connection,
                  block.core.previous_hash != prev_hash
                      ? "previous_hash does not match the chain hash of the preceding block"
                      : "height " + std::to_string(block.core.height) + " does not follow " +
                            std::to_string(prev_height));
    }
  }
  return report;
}

Ledger append_block(const Ledger& l, DataBlock incomplete, const KeyDirectory& keys,
                    const Signer& vsp, const Signer& user) {
  auto current = validate_ledger(l, keys);
  if (auto bad = current.first_failure()) {
    throw AppendError(bad->condition, "cannot append to an invalid ledger: " + current.summary());
  }
  const std::size_t index = l.length();
  auto pre = validate_unsigned_block(incomplete, keys, index);
  if (auto bad = pre.first_failure()) {
    throw AppendError(bad->condition, "block rejected before signing: " +
                                          std::string(condition_code(bad->condition)) + " " +
                                          bad->reason);
  }

  const auto prev_hash = l.blocks.empty() ? chain_hash(l.genesis) : chain_hash(l.blocks.back());
  Ledger out = l;
  out.blocks.push_back(seal_block(std::move(incomplete), prev_hash, l.tip_height() + 1, vsp, user));
  return out;
}

DataBlock seal_block(DataBlock incomplete, const Digest& prev_chain_hash, std::uint64_t height,
                     const Signer& vsp, const Signer& user) {
  incomplete.core.previous_hash = prev_chain_hash;
  incomplete.core.height = height;
  incomplete.validation_signature = vsp.sign(hash_header(incomplete.core).view());
  incomplete.user_signature =
      user.sign(block_user_signing_bytes(incomplete.core, incomplete.validation_signature));
  return incomplete;
}

}  // namespace pbl
