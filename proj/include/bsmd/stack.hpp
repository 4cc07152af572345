#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bsmd/consensus.hpp"
#include "bsmd/contract.hpp"
#include "bsmd/identity.hpp"
#include "bsmd/network.hpp"

namespace bsmd {

// 2020-03-01T00:00:00Z; simulated time zero maps here.
constexpr std::int64_t kDefaultClockOriginMs = 1'583'020'800'000;
constexpr std::int64_t kDayMs = 86'400'000;

struct StackConfig {
  std::size_t active_nodes = 3;
  std::size_t faulty = 0;
  FaultMode fault_mode = FaultMode::kRandomVotes;
  LatencyModel link{ms(10), ms(5), 0.0};
  ConsensusParams consensus;
  std::size_t pool_capacity = 0;
  SimTime tx_timeout = 0;
  std::uint64_t seed = 1;
};

struct Participant {
  NodeIdentity identity;
  CredentialWallet wallet;
  std::string public_did;
  std::set<std::string> tags;

  explicit Participant(NodeIdentity id) : identity(std::move(id)), wallet(&identity) {}
};

// One simulated deployment: event loop, links, DID network, active nodes and
// the contract/reward books, plus helpers that commit through consensus.
class Stack {
 public:
  explicit Stack(StackConfig config);
  Stack(const Stack&) = delete;
  Stack& operator=(const Stack&) = delete;

  EventLoop& loop() noexcept { return loop_; }
  SimTransport& transport() noexcept { return transport_; }
  Network& network() noexcept { return network_; }
  Consensus& consensus() noexcept { return *consensus_; }
  const Ledger& ledger() const;
  TrustPolicy& trust() noexcept { return trust_; }
  const CredentialRegistry& registry();
  ContractBook& contracts() noexcept { return contracts_; }
  RewardBook& rewards() noexcept { return rewards_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  std::int64_t now_ms() const;
  const StackConfig& config() const noexcept { return config_; }

  // Extra observer for commits; the stack keeps its own bookkeeping.
  void on_commit(Consensus::CommitHandler handler) { user_commit_ = std::move(handler); }

  // Creates the node with a public DID whose document carries only metadata
  // (kind, interest tags, identity-key reference).
  Participant& add_participant(const std::string& node_id, NodeKind kind, std::set<std::string> tags = {});
  Participant& participant(const std::string& node_id);
  bool has_participant(const std::string& node_id) const { return participants_.count(node_id) != 0; }

  // Submits the tx and runs the loop until every honest replica holds it. Throws Internal
  // when consensus stalls.
  void commit(TxRecord tx);

  CredentialSchema publish_schema(const std::string& issuer, const std::string& schema_id,
                                  std::vector<std::string> attributes);
  Credential issue(const std::string& issuer, const std::string& schema_id, const std::string& holder,
                   const std::map<std::string, std::string>& values);

  // Challenge for `attributes`; the holder's answer is nullopt when no
  // ledger-registered credential covers it.
  PartyEvidence evidence(const std::string& holder, const std::map<std::string, std::string>& required);
  IdentityContext identity_context(PartyEvidence owner, PartyEvidence requester);

  // Binds fresh pairwise DIDs for both parties and records the proposal.
  SmartContract& propose_contract(const std::string& contract_id, const std::string& owner,
                                  const std::string& requester, OwnerTerms owner_terms,
                                  RequesterTerms requester_terms, const std::string& broker = {},
                                  std::optional<double> fee = std::nullopt);
  // Runs the gates; on acceptance both parties sign and the activation tx is
  // committed.
  MatchResult activate(SmartContract& contract, const IdentityContext& identity,
                       const PartyEvidence* broker_evidence = nullptr);
  // Both parties sign an already matched contract; commits the activation tx.
  void sign_and_commit(SmartContract& contract);
  // Contract party bound to a fresh pairwise DID of `node`.
  ContractParty pairwise_party(const std::string& node);

  ChannelPair open_channel(const SmartContract& contract);

 private:
  StackConfig config_;
  EventLoop loop_;
  SimTransport transport_;
  Network network_;
  std::unique_ptr<Consensus> consensus_;
  std::mt19937_64 rng_;
  TrustPolicy trust_;
  CredentialRegistry registry_;
  ContractBook contracts_;
  RewardBook rewards_;
  std::map<std::string, std::unique_ptr<Participant>> participants_;
  std::set<std::uint64_t> committed_ids_;
  Consensus::CommitHandler user_commit_;
};

}  // namespace bsmd
