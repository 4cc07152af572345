#include <sodium.h>

#include <random>

#include "bsmd/codec.hpp"
#include "bsmd/crypto.hpp"
#include "bsmd/error.hpp"
#include "doctest.h"

using namespace bsmd;

TEST_SUITE("codec") {
  TEST_CASE("integers are big-endian") {
    ByteWriter w;
    w.u16(0x0102);
    w.u32(0x03040506);
    w.u64(0x0708090a0b0c0d0eULL);
    CHECK(w.data() == Bytes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14});
  }

  TEST_CASE("strings carry a u32 length prefix") {
    ByteWriter w;
    w.str("ab");
    CHECK(w.data() == Bytes{0, 0, 0, 2, 'a', 'b'});
  }

  TEST_CASE("round trip of mixed fields") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
      ByteWriter w;
      const auto a = static_cast<std::uint8_t>(rng());
      const auto b = static_cast<std::uint16_t>(rng());
      const auto c = static_cast<std::uint32_t>(rng());
      const auto d = rng();
      const auto e = static_cast<std::int64_t>(rng());
      std::string s(rng() % 40, 'x');
      for (auto& ch : s) ch = static_cast<char>('a' + rng() % 26);
      w.u8(a);
      w.u16(b);
      w.u32(c);
      w.u64(d);
      w.i64(e);
      w.str(s);
      ByteReader r(w.data());
      CHECK(r.u8() == a);
      CHECK(r.u16() == b);
      CHECK(r.u32() == c);
      CHECK(r.u64() == d);
      CHECK(r.i64() == e);
      CHECK(r.str() == s);
      CHECK(r.done());
    }
  }

  TEST_CASE("truncated input is a parse error") {
    ByteWriter w;
    w.str("hello");
    Bytes cut(w.data().begin(), w.data().end() - 1);
    ByteReader r(cut);
    try {
      r.str();
      FAIL("expected Parse");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParse);
    }
  }

  TEST_CASE("sha256 known vectors") {
    CHECK(to_hex(sha256(std::string_view("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(to_hex(sha256(std::string_view(""))) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }

  TEST_CASE("hex and base64 known vectors") {
    CHECK(to_base64(as_bytes("foobar")) == "Zm9vYmFy");
    CHECK(to_base64(as_bytes("fo")) == "Zm8=");
    CHECK(from_base64("Zm9vYg==") == Bytes{'f', 'o', 'o', 'b'});
    CHECK(to_hex(Bytes{0x00, 0xff, 0x10}) == "00ff10");
    CHECK(from_hex("00ff10") == Bytes{0x00, 0xff, 0x10});
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
      Bytes b(rng() % 70);
      for (auto& x : b) x = static_cast<std::uint8_t>(rng());
      CHECK(from_base64(to_base64(b)) == b);
      CHECK(from_hex(to_hex(b)) == b);
    }
  }

  TEST_CASE("ed25519 signatures verify and reject tampering") {
    std::mt19937_64 rng(3);
    auto key = SigningKey::from_seed(seed_from(rng));
    auto other = SigningKey::from_seed(seed_from(rng));
    Bytes msg{1, 2, 3, 4};
    auto sig = key.sign(msg);
    CHECK(verify_signature(key.public_key(), msg, sig));
    CHECK_FALSE(verify_signature(other.public_key(), msg, sig));
    msg[0] ^= 1;
    CHECK_FALSE(verify_signature(key.public_key(), msg, sig));
    // Same seed, same key.
    std::mt19937_64 again(3);
    CHECK(SigningKey::from_seed(seed_from(again)).public_key() == key.public_key());
    // Cross-check against libsodium directly.
    Bytes m2{9, 9};
    auto s2 = key.sign(m2);
    CHECK(crypto_sign_verify_detached(s2.data(), m2.data(), m2.size(), key.public_key().data()) == 0);
  }

  TEST_CASE("session keys agree across the two ends") {
    std::mt19937_64 rng(4);
    auto a = BoxKeyPair::from_seed(seed_from(rng));
    auto b = BoxKeyPair::from_seed(seed_from(rng));
    auto c = BoxKeyPair::from_seed(seed_from(rng));
    auto ab = SessionKey::derive(a, b.public_key());
    auto ba = SessionKey::derive(b, a.public_key());
    auto cb = SessionKey::derive(c, b.public_key());
    Bytes msg(100, 0x42);
    auto sealed = ab.seal(msg, 0, 0);
    CHECK(sealed.size() == SessionKey::kNonceSize + SessionKey::kMacSize + msg.size());
    REQUIRE(ba.open(sealed).has_value());
    CHECK(*ba.open(sealed) == msg);
    CHECK_FALSE(cb.open(sealed).has_value());
    sealed.back() ^= 1;
    CHECK_FALSE(ba.open(sealed).has_value());
    // Distinct counters or directions give distinct nonces.
    CHECK(ab.seal(msg, 1, 0) != ab.seal(msg, 0, 0));
    CHECK(ab.seal(msg, 0, 1) != ab.seal(msg, 0, 0));
  }

  TEST_CASE("erased secrets are gone") {
    std::mt19937_64 rng(6);
    auto a = BoxKeyPair::from_seed(seed_from(rng));
    auto b = BoxKeyPair::from_seed(seed_from(rng));
    auto k = SessionKey::derive(a, b.public_key());
    CHECK_FALSE(k.erased());
    k.erase();
    CHECK(k.erased());
    a.erase();
    CHECK(a.erased());
  }
}
