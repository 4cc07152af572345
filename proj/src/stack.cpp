#include "bsmd/stack.hpp"

#include <sstream>

#include "bsmd/error.hpp"

namespace bsmd {

namespace {

std::string join(const std::set<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

}  // namespace

Stack::Stack(StackConfig config)
    : config_(std::move(config)),
      transport_(loop_, config_.link, config_.seed),
      network_(transport_, config_.seed + 1),
      rng_(config_.seed + 2) {
  ConsensusParams params = config_.consensus;
  if (params.clock_origin_ms == 0) params.clock_origin_ms = kDefaultClockOriginMs;
  config_.consensus = params;
  auto set = ActiveNodeSet::create(config_.active_nodes, config_.faulty, config_.fault_mode, rng_);
  consensus_ = std::make_unique<Consensus>(transport_, std::move(set), params, config_.seed + 3,
                                           config_.pool_capacity, config_.tx_timeout);
  consensus_->on_commit([this](const CommitEvent& ev) {
    committed_ids_.insert(ev.pool_ids.begin(), ev.pool_ids.end());
    if (user_commit_) user_commit_(ev);
  });
}

const Ledger& Stack::ledger() const {
  auto ledgers = consensus_->honest_ledgers();
  if (ledgers.empty()) throw Error(ErrorCode::kInternal, "no honest replica");
  return *ledgers.front();
}

const CredentialRegistry& Stack::registry() {
  registry_.sync(ledger());
  return registry_;
}

std::int64_t Stack::now_ms() const { return config_.consensus.clock_origin_ms + loop_.now() / 1000; }

Participant& Stack::add_participant(const std::string& node_id, NodeKind kind, std::set<std::string> tags) {
  if (participants_.count(node_id)) throw Error(ErrorCode::kInvalidArgument, "participant " + node_id + " exists");
  auto p = std::make_unique<Participant>(NodeIdentity::create(node_id, kind, rng_));
  p->tags = std::move(tags);
  std::map<std::string, std::string> doc{
      {"kind", std::string(to_string(kind))},
      {"tags", join(p->tags)},
      {"identity_key", to_hex(ByteView(p->identity.key.public_key()))},
  };
  p->public_did = network_.create_did(node_id, DidKind::kPublic, std::move(doc)).did;
  auto& ref = *p;
  participants_.emplace(node_id, std::move(p));
  return ref;
}

Participant& Stack::participant(const std::string& node_id) {
  auto it = participants_.find(node_id);
  if (it == participants_.end()) throw Error(ErrorCode::kUnknownEntity, "unknown participant " + node_id);
  return *it->second;
}

void Stack::commit(TxRecord tx) {
  auto id = consensus_->submit(std::move(tx));
  if (!id) throw Error(ErrorCode::kInternal, "transaction pool refused the transaction");
  auto replicated = [this] {
    for (const Ledger* l : consensus_->honest_ledgers()) {
      if (l->size() < consensus_->committed_heights()) return false;
    }
    return true;
  };
  while (!committed_ids_.count(*id) || !replicated()) {
    if (consensus_->stalled() || loop_.idle()) {
      throw Error(ErrorCode::kInternal, "consensus did not commit the transaction");
    }
    loop_.run(1);
  }
}

CredentialSchema Stack::publish_schema(const std::string& issuer, const std::string& schema_id,
                                       std::vector<std::string> attributes) {
  auto pub = create_schema(participant(issuer).identity, schema_id, std::move(attributes), trust_, registry(),
                           now_ms());
  commit(pub.tx);
  return pub.schema;
}

Credential Stack::issue(const std::string& issuer, const std::string& schema_id, const std::string& holder,
                        const std::map<std::string, std::string>& values) {
  Participant& h = participant(holder);
  auto iss = issue_credential(participant(issuer).identity, schema_id, h.identity.did, h.identity.key.public_key(),
                              values, registry(), rng_, now_ms());
  commit(iss.tx);
  h.wallet.store(iss.credential);
  return iss.credential;
}

PartyEvidence Stack::evidence(const std::string& holder, const std::map<std::string, std::string>& required) {
  PartyEvidence ev;
  Seed nonce = seed_from(rng_);
  ev.request.nonce = to_hex(ByteView(nonce.data(), 16));
  ev.request.required = required;
  try {
    ev.proof = build_proof(participant(holder).wallet, ev.request, registry());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoProof) throw;
  }
  return ev;
}

IdentityContext Stack::identity_context(PartyEvidence owner, PartyEvidence requester) {
  IdentityContext ctx;
  ctx.registry = &registry();
  ctx.trust = &trust_;
  ctx.owner = std::move(owner);
  ctx.requester = std::move(requester);
  return ctx;
}

SmartContract& Stack::propose_contract(const std::string& contract_id, const std::string& owner,
                                       const std::string& requester, OwnerTerms owner_terms,
                                       RequesterTerms requester_terms, const std::string& broker,
                                       std::optional<double> fee) {
  auto party = [&](const std::string& node) { return pairwise_party(node); };
  std::optional<ContractParty> broker_party;
  if (!broker.empty()) {
    Participant& b = participant(broker);
    broker_party = ContractParty{broker, b.public_did, b.identity.key.public_key()};
  }
  return contracts_.add(SmartContract(contract_id, party(owner), party(requester), std::move(owner_terms),
                                      std::move(requester_terms), broker_party, fee));
}

MatchResult Stack::activate(SmartContract& contract, const IdentityContext& identity,
                            const PartyEvidence* broker_evidence) {
  MatchResult m = contract.evaluate(identity, broker_evidence);
  if (m.accepted()) sign_and_commit(contract);
  return m;
}

ContractParty Stack::pairwise_party(const std::string& node) {
  Participant& p = participant(node);
  return ContractParty{node, network_.create_did(node, DidKind::kPairwise).did, p.identity.key.public_key()};
}

void Stack::sign_and_commit(SmartContract& contract) {
  const std::int64_t now = now_ms();
  contract.sign(PartyRole::kOwner, participant(contract.owner().node_id).identity.key, now);
  auto tx = contract.sign(PartyRole::kRequester, participant(contract.requester().node_id).identity.key, now);
  if (!tx) throw Error(ErrorCode::kInternal, "contract did not activate after both signatures");
  commit(*tx);
}

ChannelPair Stack::open_channel(const SmartContract& contract) { return network_.open_channel(contract, now_ms()); }

}  // namespace bsmd
