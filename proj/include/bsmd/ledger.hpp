#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bsmd/crypto.hpp"

namespace bsmd {

enum class TxKind : std::uint8_t { kPrivate = 0, kPublic = 1 };

std::string_view to_string(TxKind kind) noexcept;

// One transaction entry of a block. For private transactions only the two
// pairwise DIDs (and optionally the broker) are recorded; the shared data
// travels off-ledger over the encrypted channel.
struct TxRecord {
  std::uint32_t version = 1;
  std::int64_t timestamp_ms = 0;
  std::string did_requester;
  std::string did_sender;
  std::optional<std::string> broker_id;
  std::optional<Bytes> payload;
  TxKind kind = TxKind::kPrivate;

  friend bool operator==(const TxRecord&, const TxRecord&) = default;
};

// Throws InvalidArgument when the record breaks its field invariants.
void validate(const TxRecord& tx);

struct BlockSignature {
  std::string node_id;
  SignatureBytes signature{};

  friend bool operator==(const BlockSignature&, const BlockSignature&) = default;
};

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash{};
  std::int64_t timestamp_ms = 0;
  std::vector<TxRecord> transactions;
  std::vector<BlockSignature> signatures;

  TxKind kind() const noexcept {
    return transactions.empty() ? TxKind::kPrivate : transactions.front().kind;
  }

  friend bool operator==(const Block&, const Block&) = default;
};

// Canonical encoding of every block field except the signatures.
Bytes encode_unsigned(const Block& block);
// Full encoding including signatures; used for storage comparisons.
Bytes encode_block(const Block& block);
Block decode_block(ByteView bytes);

Digest hash_block(const Block& block);

Block build_private_block(const TxRecord& tx, const Digest& prev, std::uint64_t height,
                          std::int64_t timestamp_ms);
Block build_public_block(const std::vector<TxRecord>& txs, const Digest& prev,
                         std::uint64_t height, std::int64_t timestamp_ms);

// Active nodes allowed to sign blocks, keyed by node id.
class ValidatorSet {
 public:
  void add(std::string node_id, const PublicKey& key);
  const PublicKey* find(const std::string& node_id) const;
  bool contains(const std::string& node_id) const { return find(node_id) != nullptr; }
  std::size_t size() const noexcept { return keys_.size(); }
  const std::map<std::string, PublicKey>& keys() const noexcept { return keys_; }

 private:
  std::map<std::string, PublicKey> keys_;
};

// Append-only hash chain. Blocks are held as shared immutable values so that
// snapshots are cheap and can be read concurrently with a single writer.
class Ledger {
 public:
  explicit Ledger(ValidatorSet validators = {}) : validators_(std::move(validators)) {}

  // Checks link, height, shape and every signature before appending.
  void append(Block block);
  // For blocks whose signatures the caller already verified (consensus
  // certificates); link, height and shape are still checked.
  void append_certified(std::shared_ptr<const Block> block);

  std::size_t size() const noexcept { return blocks_.size(); }
  bool empty() const noexcept { return blocks_.empty(); }
  std::optional<std::uint64_t> tip_height() const;
  std::uint64_t next_height() const noexcept { return blocks_.size(); }
  Digest tip_hash() const noexcept { return tip_hash_; }

  const Block& at(std::size_t i) const { return *blocks_.at(i); }
  const std::vector<std::shared_ptr<const Block>>& blocks() const noexcept { return blocks_; }
  const ValidatorSet& validators() const noexcept { return validators_; }

  // Unchecked access for tamper experiments in tests; breaks the append-only
  // contract on purpose.
  Block& mutable_block_for_testing(std::size_t i);

 private:
  void check_link(const Block& block) const;

  ValidatorSet validators_;
  std::vector<std::shared_ptr<const Block>> blocks_;
  Digest tip_hash_{};
};

bool verify_chain(const Ledger& ledger);

void append_block(Ledger& ledger, Block block);

// Line-oriented export: a header line carrying the validator keys followed by
// one JSON object per block with binary fields base64 encoded.
void export_ledger(const Ledger& ledger, std::ostream& out);
Ledger import_ledger(std::istream& in);

}  // namespace bsmd
