#include "bsmd/crypto.hpp"

#include <sodium.h>

#include <cstring>

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"

namespace bsmd {

void crypto_init() {
  static const int status = sodium_init();
  if (status < 0) throw Error(ErrorCode::kCrypto, "libsodium initialisation failed");
}

Digest sha256(ByteView data) {
  Digest out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

Digest sha256(std::string_view text) { return sha256(as_bytes(text)); }

std::string to_hex(ByteView data) {
  std::string out(data.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), data.data(), data.size());
  out.pop_back();
  return out;
}

Bytes from_hex(std::string_view hex) {
  Bytes out(hex.size() / 2 + 1);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_hex2bin(out.data(), out.size(), hex.data(), hex.size(), nullptr, &len, &end) != 0 ||
      end != hex.data() + hex.size()) {
    throw Error(ErrorCode::kParse, "invalid hex string");
  }
  out.resize(len);
  return out;
}

std::string to_base64(ByteView data) {
  constexpr int kVariant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(data.size(), kVariant), '\0');
  sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), kVariant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

Bytes from_base64(std::string_view text) {
  Bytes out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size()) {
    throw Error(ErrorCode::kParse, "invalid base64 string");
  }
  out.resize(len);
  return out;
}

Seed seed_from(std::mt19937_64& rng) {
  Seed seed{};
  for (std::size_t i = 0; i < seed.size(); i += 8) {
    std::uint64_t word = rng();
    std::memcpy(seed.data() + i, &word, 8);
  }
  return seed;
}

SecretBytes::SecretBytes(SecretBytes&& other) noexcept : bytes_(std::move(other.bytes_)) {
  other.bytes_.clear();
}

SecretBytes& SecretBytes::operator=(SecretBytes&& other) noexcept {
  if (this != &other) {
    erase();
    bytes_ = std::move(other.bytes_);
    other.bytes_.clear();
  }
  return *this;
}

SecretBytes::~SecretBytes() { erase(); }

void SecretBytes::erase() {
  if (!bytes_.empty()) sodium_memzero(bytes_.data(), bytes_.size());
  bytes_.clear();
  bytes_.shrink_to_fit();
}

SigningKey SigningKey::from_seed(const Seed& seed) {
  crypto_init();
  SigningKey key;
  key.secret_ = SecretBytes(crypto_sign_SECRETKEYBYTES);
  crypto_sign_seed_keypair(key.public_.data(), key.secret_.data(), seed.data());
  return key;
}

SignatureBytes SigningKey::sign(ByteView message) const {
  SignatureBytes sig{};
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_.data());
  return sig;
}

bool verify_signature(const PublicKey& key, ByteView message, const SignatureBytes& sig) {
  return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), key.data()) == 0;
}

BoxKeyPair BoxKeyPair::from_seed(const Seed& seed) {
  crypto_init();
  BoxKeyPair pair;
  pair.secret_ = SecretBytes(crypto_box_SECRETKEYBYTES);
  crypto_box_seed_keypair(pair.public_.data(), pair.secret_.data(), seed.data());
  return pair;
}

SessionKey SessionKey::derive(const BoxKeyPair& local, const PublicKey& remote) {
  if (local.erased()) throw Error(ErrorCode::kCrypto, "local key pair has been erased");
  SessionKey key;
  key.key_ = SecretBytes(crypto_box_BEFORENMBYTES);
  if (crypto_box_beforenm(key.key_.data(), remote.data(), local.secret().data()) != 0) {
    throw Error(ErrorCode::kCrypto, "key agreement rejected the remote public key");
  }
  return key;
}

Bytes SessionKey::seal(ByteView plaintext, std::uint64_t counter, std::uint8_t direction) const {
  if (erased()) throw Error(ErrorCode::kCrypto, "session key has been erased");
  static_assert(kNonceSize == crypto_box_NONCEBYTES);
  static_assert(kMacSize == crypto_box_MACBYTES);
  // Nonce: direction tag then a big-endian message counter; never reused per key.
  ByteWriter nonce;
  nonce.u8(direction);
  nonce.u64(counter);
  Bytes n = nonce.take();
  n.resize(kNonceSize, 0);

  Bytes out(kNonceSize + kMacSize + plaintext.size());
  std::memcpy(out.data(), n.data(), kNonceSize);
  crypto_box_easy_afternm(out.data() + kNonceSize, plaintext.data(), plaintext.size(), n.data(),
                          key_.data());
  return out;
}

std::optional<Bytes> SessionKey::open(ByteView sealed) const {
  if (erased() || sealed.size() < kNonceSize + kMacSize) return std::nullopt;
  Bytes plain(sealed.size() - kNonceSize - kMacSize);
  if (crypto_box_open_easy_afternm(plain.data(), sealed.data() + kNonceSize,
                                   sealed.size() - kNonceSize, sealed.data(),
                                   key_.data()) != 0) {
    return std::nullopt;
  }
  return plain;
}

}  // namespace bsmd
