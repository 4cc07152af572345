#include "bsmd/ledger.hpp"

#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"

namespace bsmd {

namespace {

constexpr std::string_view kBlockDomain = "bsmd.block.v1";

void encode_tx(ByteWriter& w, const TxRecord& tx) {
  w.u32(tx.version);
  w.i64(tx.timestamp_ms);
  w.u8(static_cast<std::uint8_t>(tx.kind));
  w.str(tx.did_requester);
  w.str(tx.did_sender);
  w.u8(tx.broker_id ? 1 : 0);
  if (tx.broker_id) w.str(*tx.broker_id);
  w.u8(tx.payload ? 1 : 0);
  if (tx.payload) w.bytes(*tx.payload);
}

TxRecord decode_tx(ByteReader& r) {
  TxRecord tx;
  tx.version = r.u32();
  tx.timestamp_ms = r.i64();
  std::uint8_t kind = r.u8();
  if (kind > 1) throw Error(ErrorCode::kParse, "unknown transaction kind");
  tx.kind = static_cast<TxKind>(kind);
  tx.did_requester = r.str();
  tx.did_sender = r.str();
  if (r.u8()) tx.broker_id = r.str();
  if (r.u8()) tx.payload = r.bytes();
  return tx;
}

void encode_header(ByteWriter& w, const Block& block) {
  w.str(kBlockDomain);
  w.u64(block.height);
  w.raw(block.prev_hash);
  w.i64(block.timestamp_ms);
  w.u32(static_cast<std::uint32_t>(block.transactions.size()));
  for (const auto& tx : block.transactions) encode_tx(w, tx);
}

void check_shape(const Block& block) {
  if (block.transactions.empty()) throw Error(ErrorCode::kEmptyBatch, "block has no transactions");
  TxKind kind = block.transactions.front().kind;
  for (const auto& tx : block.transactions) {
    if (tx.kind != kind) throw Error(ErrorCode::kKindMismatch, "block mixes private and public");
    validate(tx);
  }
  if (kind == TxKind::kPrivate && block.transactions.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "private block must carry exactly one transaction");
  }
}

bool signatures_valid(const Block& block, const ValidatorSet& validators) {
  if (block.signatures.empty()) return false;
  const Digest digest = hash_block(block);
  std::set<std::string> seen;
  for (const auto& sig : block.signatures) {
    const PublicKey* key = validators.find(sig.node_id);
    if (key == nullptr || !seen.insert(sig.node_id).second) return false;
    if (!verify_signature(*key, digest, sig.signature)) return false;
  }
  return true;
}

Digest digest_from(const Bytes& bytes) {
  if (bytes.size() != 32) throw Error(ErrorCode::kParse, "digest must be 32 bytes");
  Digest d{};
  std::copy(bytes.begin(), bytes.end(), d.begin());
  return d;
}

}  // namespace

std::string_view to_string(TxKind kind) noexcept {
  return kind == TxKind::kPrivate ? "private" : "public";
}

void validate(const TxRecord& tx) {
  if (tx.payload.has_value() != (tx.kind == TxKind::kPublic)) {
    throw Error(ErrorCode::kInvalidArgument, "payload must be present iff the transaction is public");
  }
  if (tx.did_requester.empty() || tx.did_sender.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "transaction DIDs must be non-empty");
  }
  if (tx.did_requester == tx.did_sender) {
    throw Error(ErrorCode::kInvalidArgument, "requester and sender DIDs must differ");
  }
  if (tx.broker_id && (*tx.broker_id == tx.did_requester || *tx.broker_id == tx.did_sender)) {
    throw Error(ErrorCode::kInvalidArgument, "broker DID must differ from both parties");
  }
}

Bytes encode_unsigned(const Block& block) {
  ByteWriter w;
  encode_header(w, block);
  return w.take();
}

Bytes encode_block(const Block& block) {
  ByteWriter w;
  encode_header(w, block);
  w.u32(static_cast<std::uint32_t>(block.signatures.size()));
  for (const auto& sig : block.signatures) {
    w.str(sig.node_id);
    w.raw(sig.signature);
  }
  return w.take();
}

Block decode_block(ByteView bytes) {
  ByteReader r(bytes);
  if (r.str() != kBlockDomain) throw Error(ErrorCode::kParse, "not a block encoding");
  Block block;
  block.height = r.u64();
  block.prev_hash = digest_from(r.raw(32));
  block.timestamp_ms = r.i64();
  std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) block.transactions.push_back(decode_tx(r));
  std::uint32_t s = r.u32();
  for (std::uint32_t i = 0; i < s; ++i) {
    BlockSignature sig;
    sig.node_id = r.str();
    Bytes raw = r.raw(64);
    std::copy(raw.begin(), raw.end(), sig.signature.begin());
    block.signatures.push_back(std::move(sig));
  }
  if (!r.done()) throw Error(ErrorCode::kParse, "trailing bytes after block");
  return block;
}

Digest hash_block(const Block& block) { return sha256(encode_unsigned(block)); }

Block build_private_block(const TxRecord& tx, const Digest& prev, std::uint64_t height,
                          std::int64_t timestamp_ms) {
  if (tx.payload) throw Error(ErrorCode::kPayloadLeak, "private transaction carries a payload");
  if (tx.kind != TxKind::kPrivate) throw Error(ErrorCode::kKindMismatch, "expected a private transaction");
  validate(tx);
  Block block;
  block.height = height;
  block.prev_hash = prev;
  block.timestamp_ms = timestamp_ms;
  block.transactions.push_back(tx);
  return block;
}

Block build_public_block(const std::vector<TxRecord>& txs, const Digest& prev,
                         std::uint64_t height, std::int64_t timestamp_ms) {
  if (txs.empty()) throw Error(ErrorCode::kEmptyBatch, "no transactions to batch");
  for (const auto& tx : txs) {
    if (tx.kind != TxKind::kPublic) throw Error(ErrorCode::kKindMismatch, "public block given a private transaction");
    validate(tx);
  }
  Block block;
  block.height = height;
  block.prev_hash = prev;
  block.timestamp_ms = timestamp_ms;
  block.transactions = txs;
  return block;
}

void ValidatorSet::add(std::string node_id, const PublicKey& key) {
  keys_[std::move(node_id)] = key;
}

const PublicKey* ValidatorSet::find(const std::string& node_id) const {
  auto it = keys_.find(node_id);
  return it == keys_.end() ? nullptr : &it->second;
}

std::optional<std::uint64_t> Ledger::tip_height() const {
  if (blocks_.empty()) return std::nullopt;
  return blocks_.back()->height;
}

void Ledger::check_link(const Block& block) const {
  if (block.prev_hash != tip_hash_) throw Error(ErrorCode::kChainMismatch, "prev_hash does not match the tip");
  if (block.height != next_height()) throw Error(ErrorCode::kChainMismatch, "unexpected block height");
  if (block.signatures.empty()) throw Error(ErrorCode::kUnsigned, "block carries no signatures");
  check_shape(block);
}

void Ledger::append(Block block) {
  check_link(block);
  if (!signatures_valid(block, validators_)) {
    throw Error(ErrorCode::kUnsigned, "block signatures do not verify against the validator set");
  }
  append_certified(std::make_shared<const Block>(std::move(block)));
}

void Ledger::append_certified(std::shared_ptr<const Block> block) {
  check_link(*block);
  tip_hash_ = hash_block(*block);
  blocks_.push_back(std::move(block));
}

Block& Ledger::mutable_block_for_testing(std::size_t i) {
  auto copy = std::make_shared<Block>(*blocks_.at(i));
  Block& ref = *copy;
  blocks_[i] = std::move(copy);
  return ref;
}

bool verify_chain(const Ledger& ledger) {
  Digest prev{};
  std::uint64_t expected_height = 0;
  for (const auto& block : ledger.blocks()) {
    if (block->height != expected_height || block->prev_hash != prev) return false;
    try {
      check_shape(*block);
    } catch (const Error&) {
      return false;
    }
    if (!signatures_valid(*block, ledger.validators())) return false;
    prev = hash_block(*block);
    ++expected_height;
  }
  // The cached tip must also match so that edits to the last block surface.
  return prev == ledger.tip_hash();
}

void append_block(Ledger& ledger, Block block) { ledger.append(std::move(block)); }

namespace {

using nlohmann::json;

json tx_to_json(const TxRecord& tx) {
  json j;
  j["version"] = tx.version;
  j["timestamp"] = tx.timestamp_ms;
  j["tx_kind"] = to_string(tx.kind);
  j["did_requester"] = tx.did_requester;
  j["did_sender"] = tx.did_sender;
  j["broker_id"] = tx.broker_id ? json(*tx.broker_id) : json(nullptr);
  j["payload"] = tx.payload ? json(to_base64(*tx.payload)) : json(nullptr);
  return j;
}

TxRecord tx_from_json(const json& j) {
  TxRecord tx;
  tx.version = j.at("version").get<std::uint32_t>();
  tx.timestamp_ms = j.at("timestamp").get<std::int64_t>();
  const auto kind = j.at("tx_kind").get<std::string>();
  if (kind != "private" && kind != "public") throw Error(ErrorCode::kParse, "bad tx_kind " + kind);
  tx.kind = kind == "public" ? TxKind::kPublic : TxKind::kPrivate;
  tx.did_requester = j.at("did_requester").get<std::string>();
  tx.did_sender = j.at("did_sender").get<std::string>();
  if (!j.at("broker_id").is_null()) tx.broker_id = j.at("broker_id").get<std::string>();
  if (!j.at("payload").is_null()) tx.payload = from_base64(j.at("payload").get<std::string>());
  return tx;
}

}  // namespace

void export_ledger(const Ledger& ledger, std::ostream& out) {
  json header;
  header["format"] = "bsmd-ledger";
  header["version"] = 1;
  json validators = json::array();
  for (const auto& [id, key] : ledger.validators().keys()) {
    validators.push_back({{"node_id", id}, {"public_key", to_base64(key)}});
  }
  header["validators"] = validators;
  out << header.dump() << '\n';
  for (const auto& block : ledger.blocks()) {
    json j;
    j["height"] = block->height;
    j["prev_hash"] = to_base64(block->prev_hash);
    j["timestamp"] = block->timestamp_ms;
    j["kind"] = to_string(block->kind());
    json txs = json::array();
    for (const auto& tx : block->transactions) txs.push_back(tx_to_json(tx));
    j["transactions"] = txs;
    json sigs = json::array();
    for (const auto& sig : block->signatures) {
      sigs.push_back({{"node_id", sig.node_id}, {"signature", to_base64(sig.signature)}});
    }
    j["signatures"] = sigs;
    j["hash"] = to_base64(hash_block(*block));
    out << j.dump() << '\n';
  }
}

Ledger import_ledger(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParse, "empty ledger export");
  try {
    json header = json::parse(line);
    if (header.at("format") != "bsmd-ledger") throw Error(ErrorCode::kParse, "not a ledger export");
    ValidatorSet validators;
    for (const auto& v : header.at("validators")) {
      Bytes key = from_base64(v.at("public_key").get<std::string>());
      if (key.size() != 32) throw Error(ErrorCode::kParse, "bad validator key length");
      PublicKey pk{};
      std::copy(key.begin(), key.end(), pk.begin());
      validators.add(v.at("node_id").get<std::string>(), pk);
    }
    Ledger ledger(std::move(validators));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      Block block;
      block.height = j.at("height").get<std::uint64_t>();
      block.prev_hash = digest_from(from_base64(j.at("prev_hash").get<std::string>()));
      block.timestamp_ms = j.at("timestamp").get<std::int64_t>();
      for (const auto& t : j.at("transactions")) block.transactions.push_back(tx_from_json(t));
      for (const auto& s : j.at("signatures")) {
        BlockSignature sig;
        sig.node_id = s.at("node_id").get<std::string>();
        Bytes raw = from_base64(s.at("signature").get<std::string>());
        if (raw.size() != 64) throw Error(ErrorCode::kParse, "bad signature length");
        std::copy(raw.begin(), raw.end(), sig.signature.begin());
        block.signatures.push_back(std::move(sig));
      }
      if (digest_from(from_base64(j.at("hash").get<std::string>())) != hash_block(block)) {
        throw Error(ErrorCode::kChainMismatch, "stored hash does not match block contents");
      }
      ledger.append(std::move(block));
    }
    return ledger;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

}  // namespace bsmd
