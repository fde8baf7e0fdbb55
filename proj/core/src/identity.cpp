#include "pbl/identity.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pbl {

namespace detail {
extern const char kEnglishWordList[];
}

namespace {

std::vector<std::string_view> split_word_list() {
  std::vector<std::string_view> out;
  std::string_view all(detail::kEnglishWordList);
  while (!all.empty()) {
    auto nl = all.find('\n');
    auto word = all.substr(0, nl);
    if (!word.empty()) out.push_back(word);
    if (nl == std::string_view::npos) break;
    all.remove_prefix(nl + 1);
  }
  return out;
}

}  // namespace

std::span<const std::string_view> english_word_list() {
  static const std::vector<std::string_view> kWords = [] {
    auto words = split_word_list();
    if (words.size() != kWordListSize || !std::is_sorted(words.begin(), words.end())) {
      throw std::logic_error("bundled word list is corrupt");
    }
    return words;
  }();
  return kWords;
}

std::optional<std::uint16_t> word_index(std::string_view word) {
  const auto list = english_word_list();
  auto it = std::lower_bound(list.begin(), list.end(), word);
  if (it == list.end() || *it != word) return std::nullopt;
  return static_cast<std::uint16_t>(it - list.begin());
}

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word list " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw std::runtime_error("word list has an empty line");
    words.push_back(line);
  }
  if (words.size() != kWordListSize) {
    throw std::runtime_error("word list must have exactly 2048 lines, found " +
                             std::to_string(words.size()));
  }
  return words;
}

SeedPhrase SeedPhrase::parse(std::string_view text) {
  SeedPhrase phrase;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) phrase.words.push_back(word);
  phrase.validate();
  return phrase;
}

void SeedPhrase::validate() const {
  if (words.size() < kMinSeedWords) {
    throw IdentityError("a seed phrase needs at least " + std::to_string(kMinSeedWords) +
                        " words, got " + std::to_string(words.size()));
  }
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!word_index(words[i])) {
      throw IdentityError("word " + std::to_string(i) + " ('" + words[i] + "') is not in the list",
                          i);
    }
  }
}

std::string SeedPhrase::to_string() const {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

KeyPair derive_root_keypair(const SeedPhrase& phrase) {
  phrase.validate();
  const auto mac = hmac_sha512(to_bytes("PBL seed"), to_bytes(phrase.to_string()));
  return KeyPair::from_seed(ByteView(mac.data(), 32));
}

KeyPair derive_ledger_keypair(const KeyPair& root, std::uint64_t index) {
  if (index > kMaxLedgerIndex) throw IdentityError("ledger index must be below 2^31");
  Encoder msg;
  msg.raw(to_bytes("ledger"));
  msg.u64(index);
  const auto mac = hmac_sha512(root.secret(), msg.bytes());
  return KeyPair::from_seed(ByteView(mac.data(), 32));
}

const LedgerEntry* RootRecord::find(const Address& ledger) const {
  for (const auto& e : ledgers) {
    if (e.address == ledger) return &e;
  }
  return nullptr;
}

KeyDirectory RootRecord::provider_directory() const {
  KeyDirectory dir;
  for (const auto& [id, pk] : service_provider_keys) dir.add(pk.role, pk.key);
  return dir;
}

bool verify_root_record(const RootRecord& record, const KeyPair& root) {
  if (record.root_address != root_address(root.public_key())) return false;
  return std::all_of(record.ledgers.begin(), record.ledgers.end(), [&](const LedgerEntry& e) {
    return ledger_address(derive_ledger_keypair(root, e.index).public_key()) == e.address;
  });
}

void encode(Encoder& enc, const LedgerEntry& e) {
  enc.u64(e.index);
  encode(enc, e.address);
}

void decode(Decoder& dec, LedgerEntry& e) {
  auto index = dec.u64();
  if (index > kMaxLedgerIndex) throw DecodeError("ledger index out of range");
  e.index = static_cast<std::uint32_t>(index);
  decode(dec, e.address);
}

void encode(Encoder& enc, const RootRecord& r) {
  encode(enc, r.root_address);
  encode(enc, r.ledgers);
  enc.count(r.service_provider_keys.size());
  for (const auto& [id, pk] : r.service_provider_keys) {
    enc.field(std::string_view(id));
    enc.u64(static_cast<std::uint64_t>(pk.role));
    enc.field(pk.key);
  }
}

void decode(Decoder& dec, RootRecord& r) {
  decode(dec, r.root_address);
  decode(dec, r.ledgers);
  r.service_provider_keys.clear();
  const auto n = dec.count();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto id = dec.text();
    auto role = dec.u64();
    if (role > static_cast<std::uint64_t>(Role::vsp)) throw DecodeError("unknown provider role");
    auto key = PublicKey{dec.fixed<32>()};
    r.service_provider_keys.emplace(std::move(id), ProviderKey{static_cast<Role>(role), key});
  }
}

SystemEntropy::result_type SystemEntropy::operator()() {
  std::array<std::uint8_t, 8> buf{};
  secure_random(buf);
  result_type v = 0;
  for (auto b : buf) v = (v << 8) | b;
  return v;
}

}  // namespace pbl
