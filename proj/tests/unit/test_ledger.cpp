#include <sodium.h>

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>

#include "bsmd/error.hpp"
#include "bsmd/ledger.hpp"
#include "doctest.h"

using namespace bsmd;

namespace {

// Independent encoder for the documented block layout.
struct Enc {
  Bytes b;
  void u8(std::uint8_t v) { b.push_back(v); }
  void be(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void blob(const void* p, std::size_t n) {
    be(n, 4);
    auto* c = static_cast<const std::uint8_t*>(p);
    b.insert(b.end(), c, c + n);
  }
  void s(const std::string& x) { blob(x.data(), x.size()); }
};

Digest oracle_hash(const Block& blk) {
  Enc e;
  e.s("bsmd.block.v1");
  e.be(blk.height, 8);
  e.b.insert(e.b.end(), blk.prev_hash.begin(), blk.prev_hash.end());
  e.be(static_cast<std::uint64_t>(blk.timestamp_ms), 8);
  e.be(blk.transactions.size(), 4);
  for (const auto& tx : blk.transactions) {
    e.be(tx.version, 4);
    e.be(static_cast<std::uint64_t>(tx.timestamp_ms), 8);
    e.u8(static_cast<std::uint8_t>(tx.kind));
    e.s(tx.did_requester);
    e.s(tx.did_sender);
    e.u8(tx.broker_id ? 1 : 0);
    if (tx.broker_id) e.s(*tx.broker_id);
    e.u8(tx.payload ? 1 : 0);
    if (tx.payload) e.blob(tx.payload->data(), tx.payload->size());
  }
  Digest d{};
  crypto_hash_sha256(d.data(), e.b.data(), e.b.size());
  return d;
}

TxRecord priv(int i, bool broker = false) {
  TxRecord tx;
  tx.timestamp_ms = 1000 + i;
  tx.did_requester = "did:bsmd:n" + std::to_string(i);
  tx.did_sender = "did:bsmd:i" + std::to_string(i);
  if (broker) tx.broker_id = "did:bsmd:broker";
  return tx;
}

TxRecord pub(int i, Bytes payload) {
  TxRecord tx = priv(i);
  tx.kind = TxKind::kPublic;
  tx.payload = std::move(payload);
  return tx;
}

struct Signer {
  SigningKey key;
  ValidatorSet set;
  explicit Signer(std::uint64_t seed) : key(make(seed)) { set.add("v0", key.public_key()); }
  static SigningKey make(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return SigningKey::from_seed(seed_from(rng));
  }
  void sign(Block& b) const { b.signatures.push_back({"v0", key.sign(hash_block(b))}); }
};

Ledger chain(const Signer& s, int n) {
  Ledger l(s.set);
  for (int i = 0; i < n; ++i) {
    Block b = i % 3 == 2 ? build_public_block({pub(i, {1, 2, 3}), pub(i + 100, {4})}, l.tip_hash(), l.size(), i)
                         : build_private_block(priv(i, i % 2 == 0), l.tip_hash(), l.size(), i);
    s.sign(b);
    l.append(std::move(b));
  }
  return l;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

}  // namespace

TEST_SUITE("ledger") {
  TEST_CASE("hash_block matches the documented encoding") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
      Block b = build_private_block(priv(i, i % 2 == 0), Digest{}, 0, static_cast<std::int64_t>(rng() >> 1));
      CHECK(hash_block(b) == oracle_hash(b));
      Bytes payload(rng() % 50 + 1);
      for (auto& x : payload) x = static_cast<std::uint8_t>(rng());
      Block p = build_public_block({pub(i, payload), pub(i + 1, {7})}, hash_block(b), 1, 5);
      CHECK(hash_block(p) == oracle_hash(p));
    }
  }

  TEST_CASE("hash ignores signatures and reacts to payload bytes") {
    Block b = build_public_block({pub(1, {1, 2, 3})}, Digest{}, 0, 0);
    const Digest before = hash_block(b);
    CHECK(hash_block(b) == before);
    b.signatures.push_back({"x", SignatureBytes{}});
    CHECK(hash_block(b) == before);
    (*b.transactions[0].payload)[1] ^= 0x01;
    CHECK(hash_block(b) != before);
    CHECK(hash_block(b) == oracle_hash(b));
  }

  TEST_CASE("append preconditions") {
    Signer s(2);
    Ledger l(s.set);
    CHECK(verify_chain(l));
    Block g = build_private_block(priv(0), Digest{}, 0, 0);
    CHECK(code_of([&] { l.append(g); }) == ErrorCode::kUnsigned);
    s.sign(g);
    l.append(g);
    CHECK(l.size() == 1);
    CHECK(l.tip_height() == 0u);
    Block stale = build_private_block(priv(1), Digest{}, 1, 1);
    s.sign(stale);
    CHECK(code_of([&] { l.append(stale); }) == ErrorCode::kChainMismatch);
    Block wrong_height = build_private_block(priv(1), l.tip_hash(), 5, 1);
    s.sign(wrong_height);
    CHECK(code_of([&] { l.append(wrong_height); }) == ErrorCode::kChainMismatch);
    // Signature by a key outside the validator set.
    Block foreign = build_private_block(priv(1), l.tip_hash(), 1, 1);
    Signer other(99);
    other.sign(foreign);
    CHECK(code_of([&] { l.append(foreign); }) == ErrorCode::kUnsigned);
  }

  TEST_CASE("1000 sequential appends verify") {
    Signer s(3);
    Ledger l = chain(s, 1000);
    CHECK(l.size() == 1000);
    CHECK(verify_chain(l));
    for (std::size_t i = 1; i < l.size(); ++i) CHECK(l.at(i).prev_hash == oracle_hash(l.at(i - 1)));
  }

  TEST_CASE("tampering any committed field is detected") {
    Signer s(4);
    Ledger base = chain(s, 6);
    std::vector<std::function<void(Block&)>> edits = {
        [](Block& b) { b.height ^= 1; },
        [](Block& b) { b.prev_hash[3] ^= 0x10; },
        [](Block& b) { b.timestamp_ms ^= 4; },
        [](Block& b) { b.transactions[0].version ^= 2; },
        [](Block& b) { b.transactions[0].timestamp_ms ^= 1; },
        [](Block& b) { b.transactions[0].did_sender[2] ^= 1; },
        [](Block& b) { b.transactions[0].did_requester[0] ^= 0x20; },
        [](Block& b) { b.signatures[0].signature[10] ^= 1; },
        [](Block& b) { b.signatures[0].node_id[0] ^= 1; },
    };
    for (std::size_t h = 0; h < base.size(); ++h) {
      for (const auto& edit : edits) {
        Ledger copy = base;
        edit(copy.mutable_block_for_testing(h));
        CHECK_FALSE(verify_chain(copy));
      }
    }
    CHECK(verify_chain(base));
  }

  TEST_CASE("private and public block construction") {
    Block b = build_private_block(priv(1, true), Digest{}, 0, 9);
    CHECK(b.transactions.size() == 1);
    REQUIRE(b.transactions[0].broker_id.has_value());
    CHECK(code_of([] { build_private_block(pub(1, {1}), Digest{}, 0, 0); }) == ErrorCode::kPayloadLeak);
    CHECK(code_of([] { build_public_block({}, Digest{}, 0, 0); }) == ErrorCode::kEmptyBatch);
    CHECK(code_of([] { build_public_block({pub(1, {1}), priv(2)}, Digest{}, 0, 0); }) == ErrorCode::kKindMismatch);
    Block p = build_public_block({pub(1, {1}), pub(2, {2}), pub(3, {3})}, Digest{}, 0, 0);
    CHECK(p.transactions.size() == 3);
    CHECK(p.kind() == TxKind::kPublic);
  }

  TEST_CASE("transaction invariants") {
    TxRecord same = priv(1);
    same.did_sender = same.did_requester;
    CHECK(code_of([&] { validate(same); }) == ErrorCode::kInvalidArgument);
    TxRecord b = priv(1, true);
    b.broker_id = b.did_sender;
    CHECK(code_of([&] { validate(b); }) == ErrorCode::kInvalidArgument);
    TxRecord p = pub(1, {1});
    p.payload.reset();
    CHECK(code_of([&] { validate(p); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("private block encodings never contain channel payloads") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 200; ++i) {
      Bytes secret(24);
      for (auto& x : secret) x = static_cast<std::uint8_t>(rng());
      Block b = build_private_block(priv(i), Digest{}, 0, i);
      Bytes enc = encode_block(b);
      CHECK(std::search(enc.begin(), enc.end(), secret.begin(), secret.end()) == enc.end());
    }
  }

  TEST_CASE("encode and decode round trip") {
    Signer s(5);
    Ledger l = chain(s, 9);
    for (const auto& b : l.blocks()) CHECK(decode_block(encode_block(*b)) == *b);
  }

  TEST_CASE("appends never change history") {
    Signer s(6);
    Ledger l = chain(s, 5);
    std::vector<Bytes> before;
    for (const auto& b : l.blocks()) before.push_back(encode_block(*b));
    Ledger snapshot = l;
    for (int i = 5; i < 20; ++i) {
      Block b = build_private_block(priv(i), l.tip_hash(), l.size(), i);
      s.sign(b);
      l.append(std::move(b));
    }
    for (std::size_t i = 0; i < before.size(); ++i) {
      CHECK(encode_block(l.at(i)) == before[i]);
      CHECK(encode_block(snapshot.at(i)) == before[i]);
    }
    CHECK(snapshot.size() == 5);
  }

  TEST_CASE("export and import") {
    Signer s(7);
    Ledger l = chain(s, 12);
    std::stringstream ss;
    export_ledger(l, ss);
    const std::string text = ss.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 13);
    std::istringstream in(text);
    Ledger back = import_ledger(in);
    REQUIRE(back.size() == l.size());
    CHECK(verify_chain(back));
    for (std::size_t i = 0; i < l.size(); ++i) CHECK(back.at(i) == l.at(i));
    std::stringstream again;
    export_ledger(back, again);
    CHECK(again.str() == text);

    // Editing a DID in the text breaks the stored hash.
    std::string edited = text;
    auto pos = edited.find("did:bsmd:n0");
    REQUIRE(pos != std::string::npos);
    edited[pos + 9] = 'm';
    std::istringstream bad(edited);
    CHECK_THROWS_AS(import_ledger(bad), Error);
  }
}
