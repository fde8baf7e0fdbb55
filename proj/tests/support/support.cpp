#include "support.hpp"

#include <openssl/sha.h>

#include "pbl/random.hpp"

namespace pbl::testing {

std::filesystem::path fixture_dir() { return PBL_FIXTURE_DIR; }
std::filesystem::path scenario_dir() { return PBL_SCENARIO_DIR; }

TempDir::TempDir(std::string_view tag) {
  SystemEntropy e;
  path_ = std::filesystem::temp_directory_path() /
          ("pbl-" + std::string(tag) + "-" + std::to_string(e() % 1000000000));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

KeyPair seeded_key(std::string_view label, std::uint64_t seed) {
  auto material = to_bytes("test-key:" + std::string(label) + ":" + std::to_string(seed));
  return KeyPair::from_seed(oracle_sha256(material).view());
}

Actors Actors::make(std::uint64_t seed, std::size_t esp_count) {
  Actors a{seeded_key("user", seed), seeded_key("gba", seed), seeded_key("osp", seed),
           seeded_key("vsp", seed), {}, {}};
  for (std::size_t i = 0; i < esp_count; ++i) {
    a.esps.push_back(seeded_key("esp" + std::to_string(i), seed));
  }
  a.address = ledger_address(a.user.public_key());
  return a;
}

KeyDirectory Actors::keys(const GenesisBlock& genesis) const { return KeyDirectory::from_genesis(genesis); }

Transaction signed_tx(const Actors& a, Bytes payload, std::optional<std::string> chaincode,
                      std::int64_t at) {
  Transaction t;
  t.ledger_address = a.address;
  t.payload = std::move(payload);
  t.chaincode_id = std::move(chaincode);
  t.submitted_at = at;
  t.user_signature = a.user.sign(transaction_signing_bytes(t));
  return t;
}

CompleteTransaction executed(const Actors& a, Transaction tx, Bytes output, std::size_t esp) {
  CompleteTransaction ct;
  ct.inner = std::move(tx);
  ct.output = std::move(output);
  ct.executing_signature = a.esps.at(esp).sign(execution_signing_bytes(ct.inner, ct.output));
  return ct;
}

DataBlock unsigned_block(const Actors& a, std::vector<CompleteTransaction> txs,
                         std::int64_t created_at) {
  DataBlock b;
  b.transactions = std::move(txs);
  b.core.data_hash = compute_data_hash(b.transactions);
  b.core.exec_sig_root = compute_exec_sig_root(b.transactions);
  b.core.ordering_signature = a.osp.sign(b.core.exec_sig_root.view());
  b.core.created_at = created_at;
  return b;
}

GenesisBlock make_genesis(const Actors& a, std::vector<ConfigEntry> extra, std::int64_t created_at) {
  GenesisBlock g;
  auto pk = [](const KeyPair& k) {
    return Bytes(k.public_key().view().begin(), k.public_key().view().end());
  };
  std::vector<PublicKey> esp_keys;
  for (const auto& e : a.esps) esp_keys.push_back(e.public_key());
  g.config.push_back({std::string(config_keys::kUserPublicKey), pk(a.user)});
  g.config.push_back({std::string(config_keys::kEspPublicKeys), pack_keys(esp_keys)});
  g.config.push_back({std::string(config_keys::kOspPublicKeys), pack_keys(std::vector{a.osp.public_key()})});
  g.config.push_back({std::string(config_keys::kVspPublicKeys), pack_keys(std::vector{a.vsp.public_key()})});
  g.config.push_back({std::string(config_keys::kGbaPublicKey), pk(a.gba)});
  for (auto& e : extra) g.config.push_back(std::move(e));
  g.core.data_hash = compute_config_hash(g.config);
  g.core.created_at = created_at;
  g.gba_signature = a.gba.sign(hash_header(g.core).view());
  g.user_signature = a.user.sign(block_user_signing_bytes(g.core, g.gba_signature));
  return g;
}

Ledger genesis_only(const Actors& a) {
  Ledger l;
  l.genesis = make_genesis(a);
  l.ledger_address = a.address;
  return l;
}

Ledger extend(const Ledger& l, const Actors& a, std::vector<CompleteTransaction> txs) {
  return append_block(l, unsigned_block(a, std::move(txs)), a.keys(l.genesis), a.vsp, a.user);
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

Ledger random_ledger(const Actors& a, std::size_t data_blocks, std::mt19937_64& rng,
                     std::size_t max_tx) {
  auto l = genesis_only(a);
  std::int64_t clock = 1000;
  for (std::size_t b = 0; b < data_blocks; ++b) {
    const auto count = 1 + uniform_below(rng, max_tx);
    std::vector<CompleteTransaction> txs;
    for (std::uint64_t i = 0; i < count; ++i) {
      auto payload = random_bytes(rng, 1 + uniform_below(rng, 24));
      txs.push_back(executed(a, signed_tx(a, payload, std::nullopt, ++clock), zero_output(),
                             uniform_below(rng, a.esps.size())));
    }
    l = extend(l, a, std::move(txs));
  }
  return l;
}

Ledger balance_ledger(const Actors& a, const std::vector<std::int64_t>& amounts,
                      std::size_t per_block) {
  auto l = genesis_only(a);
  std::int64_t total = 0;
  std::vector<CompleteTransaction> pending;
  for (std::size_t i = 0; i < amounts.size(); ++i) {
    total += amounts[i];
    auto payload = (amounts[i] >= 0 ? "+" : "") + std::to_string(amounts[i]);
    pending.push_back(executed(a, signed_tx(a, to_bytes(payload), std::string("balance"),
                                            static_cast<std::int64_t>(i)),
                               to_bytes(std::to_string(total)), i % a.esps.size()));
    if (pending.size() == per_block || i + 1 == amounts.size()) {
      l = extend(l, a, std::move(pending));
      pending.clear();
    }
  }
  return l;
}

Digest oracle_sha256(ByteView data) {
  Digest d;
  SHA256(data.data(), data.size(), d.bytes.data());
  return d;
}

namespace {

Digest parent(const Digest& l, const Digest& r) {
  Bytes joined(l.bytes.begin(), l.bytes.end());
  joined.insert(joined.end(), r.bytes.begin(), r.bytes.end());
  return oracle_sha256(joined);
}

Digest level_up(std::vector<Digest> level) {
  // One pairing round, then recurse until a single node is left.
  std::vector<Digest> next;
  for (std::size_t i = 0; i < level.size(); i += 2) {
    const auto& left = level[i];
    const auto& right = i + 1 < level.size() ? level[i + 1] : level[i];
    next.push_back(parent(left, right));
  }
  return next.size() == 1 ? next[0] : level_up(std::move(next));
}

}  // namespace

Digest oracle_merkle(const std::vector<Bytes>& leaves) {
  if (leaves.empty()) return Digest{};
  std::vector<Digest> hashed;
  for (const auto& leaf : leaves) hashed.push_back(oracle_sha256(leaf));
  return level_up(std::move(hashed));
}

std::vector<std::int64_t> oracle_running_totals(const std::vector<std::string>& payloads) {
  std::vector<std::int64_t> out;
  std::int64_t total = 0;
  for (const auto& p : payloads) {
    total += std::stoll(p);
    out.push_back(total);
  }
  return out;
}

}  // namespace pbl::testing
