#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bsmd {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;
using Seed = std::array<std::uint8_t, 32>;
using PublicKey = std::array<std::uint8_t, 32>;
using SignatureBytes = std::array<std::uint8_t, 64>;

// Throws if libsodium cannot be initialised. Safe to call repeatedly.
void crypto_init();

Digest sha256(ByteView data);
Digest sha256(std::string_view text);

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);
std::string to_base64(ByteView data);
Bytes from_base64(std::string_view text);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Draws a key seed from a seeded generator so that simulations are replayable.
Seed seed_from(std::mt19937_64& rng);

// Secret key material that is wiped on destruction and on erase().
class SecretBytes {
 public:
  SecretBytes() = default;
  explicit SecretBytes(std::size_t n) : bytes_(n, 0) {}
  SecretBytes(const SecretBytes&) = default;
  SecretBytes& operator=(const SecretBytes&) = default;
  SecretBytes(SecretBytes&& other) noexcept;
  SecretBytes& operator=(SecretBytes&& other) noexcept;
  ~SecretBytes();

  void erase();
  bool empty() const noexcept { return bytes_.empty(); }
  std::uint8_t* data() noexcept { return bytes_.data(); }
  const std::uint8_t* data() const noexcept { return bytes_.data(); }
  std::size_t size() const noexcept { return bytes_.size(); }

 private:
  Bytes bytes_;
};

// Ed25519 signing identity.
class SigningKey {
 public:
  static SigningKey from_seed(const Seed& seed);

  const PublicKey& public_key() const noexcept { return public_; }
  SignatureBytes sign(ByteView message) const;

 private:
  PublicKey public_{};
  SecretBytes secret_;
};

bool verify_signature(const PublicKey& key, ByteView message, const SignatureBytes& sig);

// X25519 key-agreement pair used by pairwise channels.
class BoxKeyPair {
 public:
  static BoxKeyPair from_seed(const Seed& seed);

  const PublicKey& public_key() const noexcept { return public_; }
  bool erased() const noexcept { return secret_.empty(); }
  void erase() { secret_.erase(); }
  const SecretBytes& secret() const noexcept { return secret_; }

 private:
  PublicKey public_{};
  SecretBytes secret_;
};

// Shared symmetric key derived from one side's secret and the peer's public key.
class SessionKey {
 public:
  static constexpr std::size_t kNonceSize = 24;
  static constexpr std::size_t kMacSize = 16;

  static SessionKey derive(const BoxKeyPair& local, const PublicKey& remote);

  // Output layout: nonce (24) || authenticated ciphertext.
  Bytes seal(ByteView plaintext, std::uint64_t counter, std::uint8_t direction) const;
  std::optional<Bytes> open(ByteView sealed) const;

  void erase() { key_.erase(); }
  bool erased() const noexcept { return key_.empty(); }

 private:
  SecretBytes key_;
};

}  // namespace bsmd
