#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bsmd/crypto.hpp"
#include "bsmd/identity.hpp"
#include "bsmd/ledger.hpp"

namespace bsmd {

// Currency in integer micro-units so that fee splits add up exactly.
struct Money {
  std::int64_t micros = 0;

  static constexpr Money units(std::int64_t u) { return {u * 1'000'000}; }
  static Money from_double(double units);
  double as_units() const noexcept { return static_cast<double>(micros) / 1e6; }

  friend constexpr auto operator<=>(const Money&, const Money&) = default;
  friend constexpr Money operator+(Money a, Money b) { return {a.micros + b.micros}; }
  friend constexpr Money operator-(Money a, Money b) { return {a.micros - b.micros}; }
};

// Closed interval [start_ms, end_ms].
struct TimeWindow {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  bool contains(const TimeWindow& other) const noexcept {
    return start_ms <= other.start_ms && other.end_ms <= end_ms;
  }
  bool contains(std::int64_t t) const noexcept { return start_ms <= t && t <= end_ms; }
};

// Normalised disclosure tokens. Location descriptors from either side map to
// one vocabulary ("geoind" and "low_geo_accuracy" both become
// "location:low"); attribute names pass through unchanged.
class DisclosureSet {
 public:
  DisclosureSet() = default;
  DisclosureSet(std::initializer_list<std::string_view> tokens);
  static std::string normalize(std::string_view token);

  void add(std::string_view token) { tokens_.insert(normalize(token)); }
  bool subset_of(const DisclosureSet& other) const;
  const std::set<std::string>& tokens() const noexcept { return tokens_; }
  bool empty() const noexcept { return tokens_.empty(); }

 private:
  std::set<std::string> tokens_;
};

struct ExtendedPermissions {
  bool redistribution = false;
  std::set<std::string> whitelist;
};

struct OwnerTerms {
  std::string service_requested;
  Money monetary_reward;
  DisclosureSet privacy_level;
  TimeWindow temporality;
  ExtendedPermissions extended_permissions;
  bool require_identity_key = false;

  void validate() const;
};

struct RequesterTerms {
  std::string service_provided;
  Money monetary_reward;
  DisclosureSet accuracy;
  TimeWindow temporality;
  ExtendedPermissions extended_permissions;
  bool require_identity_key = false;

  void validate() const;
};

// Gates in evaluation order; refusal reports the first that fails.
enum class MatchGate { kService = 0, kReward = 1, kPrivacy = 2, kTemporality = 3, kIdentity = 4 };

std::string_view to_string(MatchGate gate) noexcept;

struct MatchResult {
  std::optional<MatchGate> refused;
  bool accepted() const noexcept { return !refused.has_value(); }
};

// A party's identity-key proof, answered against a challenge issued by the
// counterparty.
struct PartyEvidence {
  std::optional<ProofApplication> proof;
  ProofRequest request;
};

// Everything gate five needs to check identity keys against the ledger.
struct IdentityContext {
  const CredentialRegistry* registry = nullptr;
  const TrustPolicy* trust = nullptr;
  PartyEvidence owner;
  PartyEvidence requester;
};

bool evidence_verifies(const PartyEvidence& evidence, const IdentityContext& ctx);

MatchResult match_terms(const OwnerTerms& owner, const RequesterTerms& requester,
                        const IdentityContext& identity);

struct FeeSplit {
  Money broker;
  Money owner;
};

FeeSplit split_reward(Money reward, double fee_fraction);

struct BrokeredMatch {
  MatchResult match;
  std::optional<FeeSplit> split;  // per-transfer split, set on accept
};

// Throws UnverifiedBroker when the broker's identity key does not verify.
BrokeredMatch match_with_broker(const OwnerTerms& owner, const RequesterTerms& requester,
                                double fee_fraction, const PartyEvidence& broker,
                                const IdentityContext& identity);

enum class ContractStatus { kProposed, kActive, kExpired, kRevoked };
enum class PartyRole { kOwner, kRequester, kBroker };

std::string_view to_string(ContractStatus s) noexcept;

struct ContractParty {
  std::string node_id;
  std::string did;
  PublicKey key{};
};

enum class DenyReason { kNone, kNotActive, kNotStarted, kExpired, kRevoked, kPrivacy };

std::string_view to_string(DenyReason r) noexcept;

struct TransferDecision {
  DenyReason reason = DenyReason::kNone;
  bool allowed() const noexcept { return reason == DenyReason::kNone; }
};

struct RewardEntry {
  std::string contract_id;
  std::int64_t time_ms = 0;
  std::string owner_id;
  Money owner_credit;
  std::optional<std::string> broker_id;
  Money broker_credit;
};

// Ledger-internal reward accounting.
class RewardBook {
 public:
  void record(RewardEntry entry);
  Money balance(const std::string& account) const;
  const std::vector<RewardEntry>& entries() const noexcept { return entries_; }

 private:
  std::vector<RewardEntry> entries_;
  std::map<std::string, Money> balances_;
};

class SmartContract {
 public:
  SmartContract(std::string contract_id, ContractParty owner, ContractParty requester,
                OwnerTerms owner_terms, RequesterTerms requester_terms,
                std::optional<ContractParty> broker = std::nullopt,
                std::optional<double> broker_fee_fraction = std::nullopt);

  const std::string& id() const noexcept { return id_; }
  const ContractParty& owner() const noexcept { return owner_; }
  const ContractParty& requester() const noexcept { return requester_; }
  const std::optional<ContractParty>& broker() const noexcept { return broker_; }
  const OwnerTerms& owner_terms() const noexcept { return owner_terms_; }
  const RequesterTerms& requester_terms() const noexcept { return requester_terms_; }
  std::optional<double> broker_fee_fraction() const noexcept { return fee_; }
  const std::optional<MatchResult>& match() const noexcept { return match_; }

  // Runs the matching gates (with broker verification when a broker is set).
  MatchResult evaluate(const IdentityContext& identity, const PartyEvidence* broker_evidence = nullptr);

  // Status at `now`: an active contract turns expired past the agreed end.
  ContractStatus status(std::int64_t now_ms) const noexcept;
  ContractStatus stored_status() const noexcept { return status_; }
  TimeWindow agreed_window() const noexcept;

  Digest digest() const;
  bool signed_by(PartyRole role) const { return signatures_.count(role) != 0; }
  bool signature_valid(PartyRole role) const;

  // Throws NotMatched unless the match was accepted. Returns the private
  // transaction to commit once both parties have signed.
  std::optional<TxRecord> sign(PartyRole role, const SigningKey& key, std::int64_t now_ms);

  // Idempotent; revoked is terminal.
  void revoke(PartyRole by);

  TransferDecision enforce_transfer(std::int64_t now_ms, const DisclosureSet& payload,
                                    RewardBook& rewards) const;

 private:
  std::string id_;
  ContractParty owner_;
  ContractParty requester_;
  std::optional<ContractParty> broker_;
  OwnerTerms owner_terms_;
  RequesterTerms requester_terms_;
  std::optional<double> fee_;
  std::optional<MatchResult> match_;
  std::map<PartyRole, SignatureBytes> signatures_;
  ContractStatus status_ = ContractStatus::kProposed;
};

// Free-function forms of the contract operations.
std::optional<TxRecord> sign_contract(SmartContract& contract, PartyRole role, const SigningKey& key,
                                      std::int64_t now_ms);
TransferDecision enforce_transfer(const SmartContract& contract, std::int64_t now_ms,
                                  const DisclosureSet& payload, RewardBook& rewards);
void revoke(SmartContract& contract, PartyRole by);

// Contract ids are never reused, including after revocation.
class ContractBook {
 public:
  SmartContract& add(SmartContract contract);
  SmartContract* find(const std::string& id);
  const SmartContract* find(const std::string& id) const;
  std::size_t size() const noexcept { return contracts_.size(); }
  const std::map<std::string, SmartContract>& all() const noexcept { return contracts_; }

 private:
  std::map<std::string, SmartContract> contracts_;
};

}  // namespace bsmd
