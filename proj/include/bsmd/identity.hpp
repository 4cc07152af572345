#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bsmd/crypto.hpp"
#include "bsmd/ledger.hpp"

namespace bsmd {

enum class NodeKind : std::uint8_t { kIndividual, kCompany, kUniversity, kGovernment, kNonProfit };

std::string_view to_string(NodeKind kind) noexcept;
NodeKind parse_node_kind(std::string_view text);

// DID used as the counterparty of registry writes (schemas have no holder).
inline constexpr std::string_view kRegistryDid = "did:bsmd:registry";

struct MobilityRecord {
  std::int64_t timestamp_ms = 0;
  double x = 0.0;
  double y = 0.0;
};

// A node's data vault. Only the metadata section is ever published; static
// and dynamic sections leave the node solely through an enforced contract.
class Identification {
 public:
  struct Metadata {
    NodeKind kind = NodeKind::kIndividual;
    std::string did;
    std::optional<std::string> identity_key;  // hex registry digest
    std::vector<std::string> tags;
  };

  Identification() = default;
  explicit Identification(Metadata metadata) : metadata_(std::move(metadata)) {}

  const Metadata& metadata() const noexcept { return metadata_; }
  Metadata& metadata() noexcept { return metadata_; }
  const std::map<std::string, std::string>& static_data() const noexcept { return static_; }
  const std::vector<MobilityRecord>& dynamic_data() const noexcept { return dynamic_; }

  void set_static(std::string key, std::string value);
  // Throws InvalidArgument if the timestamp runs backwards.
  void append_dynamic(const MobilityRecord& record);

  std::string to_json() const;
  static Identification from_json(std::string_view text);
  void save(const std::string& path) const;
  static Identification load(const std::string& path);

 private:
  Metadata metadata_;
  std::map<std::string, std::string> static_;
  std::vector<MobilityRecord> dynamic_;
};

// A node able to sign: issuers, holders and verifiers all use this.
struct NodeIdentity {
  std::string node_id;
  NodeKind kind = NodeKind::kIndividual;
  std::string did;
  SigningKey key;

  static NodeIdentity create(std::string node_id, NodeKind kind, std::mt19937_64& rng);
};

// Issuers allowed to create schemas and sign credentials.
class TrustPolicy {
 public:
  TrustPolicy() = default;
  explicit TrustPolicy(std::set<std::string> trusted) : trusted_(std::move(trusted)) {}
  void trust(std::string node_id) { trusted_.insert(std::move(node_id)); }
  bool is_trusted(const std::string& node_id) const { return trusted_.count(node_id) != 0; }

 private:
  std::set<std::string> trusted_;
};

struct CredentialSchema {
  std::string schema_id;
  std::string issuer_id;
  PublicKey issuer_key{};
  std::vector<std::string> attributes;
};

struct AttributeValue {
  std::string name;
  std::string value;
  std::string salt;  // hex; blinds the on-ledger commitment

  friend bool operator==(const AttributeValue&, const AttributeValue&) = default;
};

struct Credential {
  std::string schema_id;
  std::string issuer_id;
  std::string holder_did;
  PublicKey holder_key{};
  std::vector<AttributeValue> attributes;  // sorted by name
  SignatureBytes issuer_signature{};
  Digest registry_digest{};
};

// Ledger-derived view of published schemas and credential registries.
class CredentialRegistry {
 public:
  struct Entry {
    std::string schema_id;
    std::string issuer_id;
    SignatureBytes issuer_signature{};
    bool superseded = false;
  };

  static CredentialRegistry from_ledger(const Ledger& ledger);
  // Indexes blocks appended since the last sync.
  void sync(const Ledger& ledger);

  const CredentialSchema* find_schema(const std::string& schema_id) const;
  const Entry* find_entry(const Digest& digest) const;
  std::size_t schema_count() const noexcept { return schemas_.size(); }
  std::size_t entry_count() const noexcept { return entries_.size(); }

 private:
  void index(const TxRecord& tx);

  std::map<std::string, CredentialSchema> schemas_;
  std::map<Digest, Entry> entries_;
  std::size_t synced_blocks_ = 0;
};

struct SchemaPublication {
  CredentialSchema schema;
  TxRecord tx;
};

struct Issuance {
  Credential credential;
  TxRecord tx;
};

SchemaPublication create_schema(const NodeIdentity& issuer, std::string schema_id,
                                std::vector<std::string> attributes, const TrustPolicy& trust,
                                const CredentialRegistry& registry, std::int64_t now_ms);

Issuance issue_credential(const NodeIdentity& issuer, const std::string& schema_id,
                          const std::string& holder_did, const PublicKey& holder_key,
                          const std::map<std::string, std::string>& values,
                          const CredentialRegistry& registry, std::mt19937_64& rng,
                          std::int64_t now_ms);

// Re-issues a holder's credential with new values; the registry entry of the
// old credential is marked superseded once the returned tx is committed.
Issuance rotate_credential(const NodeIdentity& issuer, const Credential& old,
                           const std::map<std::string, std::string>& values,
                           const CredentialRegistry& registry, std::mt19937_64& rng,
                           std::int64_t now_ms);

Digest credential_digest(const Credential& credential);

// Holder-side credential store.
class CredentialWallet {
 public:
  explicit CredentialWallet(const NodeIdentity* holder) : holder_(holder) {}
  void store(Credential credential) { credentials_.push_back(std::move(credential)); }
  const std::vector<Credential>& credentials() const noexcept { return credentials_; }
  const NodeIdentity& holder() const { return *holder_; }

 private:
  const NodeIdentity* holder_;
  std::vector<Credential> credentials_;
};

// The verifier's sharing application: a fresh challenge plus the attribute
// values the holder must prove.
struct ProofRequest {
  std::string nonce;
  std::map<std::string, std::string> required;
};

struct ProofApplication {
  std::string schema_id;
  std::string issuer_id;
  std::string holder_did;
  PublicKey holder_key{};
  std::vector<AttributeValue> disclosed;
  std::vector<std::pair<std::string, Digest>> hidden;  // name -> commitment
  SignatureBytes issuer_signature{};
  Digest registry_digest{};
  SignatureBytes holder_signature{};

  std::string to_json() const;
};

// Throws NoProof when no stored credential satisfies the request with a
// live registry entry on the ledger.
ProofApplication build_proof(const CredentialWallet& wallet, const ProofRequest& request,
                             const CredentialRegistry& registry);

bool verify_proof(const ProofRequest& request, const ProofApplication& proof,
                  const CredentialRegistry& registry, const TrustPolicy& trust);

enum class ConnectionDecision { kConnected, kNoProof, kRejected };

std::string_view to_string(ConnectionDecision d) noexcept;

// Both gates must pass: the holder obtains a proof, then the verifier checks it.
constexpr bool connection_allowed(bool proof_built, bool proof_verified) noexcept {
  return proof_built && proof_verified;
}

ConnectionDecision authenticate_peer(const CredentialWallet& wallet, const ProofRequest& request,
                                     const CredentialRegistry& registry, const TrustPolicy& trust);

}  // namespace bsmd
