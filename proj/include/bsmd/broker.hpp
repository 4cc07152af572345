#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bsmd/contract.hpp"
#include "bsmd/identity.hpp"
#include "bsmd/network.hpp"

namespace bsmd {

struct Candidate {
  std::string did;
  NodeKind kind = NodeKind::kIndividual;
  std::set<std::string> tags;
  std::optional<PublicKey> identity_key;
};

struct DiscoveryFilter {
  std::optional<NodeKind> kind;
  std::set<std::string> any_tags;  // empty: no tag filter
  bool require_identity_key = false;
};

// Filters public DID documents on their metadata only.
std::vector<Candidate> discover(const NodeIdentity& broker, const std::vector<DidDocument>& resolver,
                                const DiscoveryFilter& filter);

struct Customer {
  std::string did;
  std::string node_id;
  std::set<std::string> tags;
  SignatureBytes broker_signature{};
  SignatureBytes customer_signature{};
};

class BrokerWallet {
 public:
  explicit BrokerWallet(std::string broker_id) : broker_id_(std::move(broker_id)) {}

  const std::string& broker_id() const noexcept { return broker_id_; }
  bool contains(const std::string& did) const { return customers_.count(did) != 0; }
  const Customer* find(const std::string& did) const;
  std::size_t size() const noexcept { return customers_.size(); }
  const std::map<std::string, Customer>& customers() const noexcept { return customers_; }
  // Fees exist only as reward-book credits from enforced transfers.
  Money earned_fees(const RewardBook& rewards) const { return rewards.balance(broker_id_); }

  // Stores the customer once both agreement signatures verify; throws Crypto
  // otherwise. Re-adding an existing customer is a no-op.
  void add(Customer customer, const PublicKey& broker_key, const PublicKey& customer_key,
           const std::string& broker_did);

 private:
  std::string broker_id_;
  std::map<std::string, Customer> customers_;
};

enum class SolicitResult { kAccepted, kRejected };

std::string_view to_string(SolicitResult r) noexcept;

// Digest both sides sign when a candidate becomes a customer.
Digest broker_agreement_digest(const std::string& broker_did, const std::string& customer_did);

// The candidate checks the broker's identity-key proof; on success both sign
// the broker-customer agreement and the candidate joins the wallet.
SolicitResult solicit(BrokerWallet& wallet, const NodeIdentity& broker, const PartyEvidence& broker_evidence,
                      const Candidate& candidate, const NodeIdentity& customer, const CredentialRegistry& registry,
                      const TrustPolicy& trust);

struct Arrangement {
  MatchResult match;
  std::optional<FeeSplit> split;
  SmartContract* contract = nullptr;  // set when accepted
};

// Builds the brokered contract between two parties the broker can reach
// through its wallet. The contract is only added to `book` when accepted.
// Throws UnknownEntity when neither party is a customer.
Arrangement arrange(const BrokerWallet& wallet, const ContractParty& broker, const std::string& contract_id,
                    const ContractParty& owner, const ContractParty& requester, const OwnerTerms& owner_terms,
                    const RequesterTerms& requester_terms, double fee_fraction, const PartyEvidence& broker_evidence,
                    const IdentityContext& identity, ContractBook& book);

}  // namespace bsmd
