#include "bsmd/broker.hpp"

#include <sstream>

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"

namespace bsmd {

namespace {

std::set<std::string> split_tags(const std::string& text) {
  std::set<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

std::optional<PublicKey> key_reference(const std::map<std::string, std::string>& doc) {
  auto it = doc.find("identity_key");
  if (it == doc.end() || it->second.empty()) return std::nullopt;
  try {
    Bytes b = from_hex(it->second);
    if (b.size() != 32) return std::nullopt;
    PublicKey k{};
    std::copy(b.begin(), b.end(), k.begin());
    return k;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<Candidate> discover(const NodeIdentity& broker, const std::vector<DidDocument>& resolver,
                                const DiscoveryFilter& filter) {
  std::vector<Candidate> out;
  for (const auto& doc : resolver) {
    auto kind_it = doc.doc.find("kind");
    if (kind_it == doc.doc.end()) continue;
    Candidate c;
    c.did = doc.did;
    try {
      c.kind = parse_node_kind(kind_it->second);
    } catch (const Error&) {
      continue;
    }
    if (auto t = doc.doc.find("tags"); t != doc.doc.end()) c.tags = split_tags(t->second);
    c.identity_key = key_reference(doc.doc);
    if (c.identity_key && *c.identity_key == broker.key.public_key()) continue;  // itself
    if (filter.kind && c.kind != *filter.kind) continue;
    if (filter.require_identity_key && !c.identity_key) continue;
    if (!filter.any_tags.empty()) {
      bool hit = false;
      for (const auto& t : filter.any_tags) hit = hit || c.tags.count(t);
      if (!hit) continue;
    }
    out.push_back(std::move(c));
  }
  return out;
}

const Customer* BrokerWallet::find(const std::string& did) const {
  auto it = customers_.find(did);
  return it == customers_.end() ? nullptr : &it->second;
}

void BrokerWallet::add(Customer customer, const PublicKey& broker_key, const PublicKey& customer_key,
                       const std::string& broker_did) {
  if (customers_.count(customer.did)) return;
  const Digest d = broker_agreement_digest(broker_did, customer.did);
  if (!verify_signature(broker_key, d, customer.broker_signature) ||
      !verify_signature(customer_key, d, customer.customer_signature)) {
    throw Error(ErrorCode::kCrypto, "broker-customer agreement signatures do not verify");
  }
  customers_.emplace(customer.did, std::move(customer));
}

std::string_view to_string(SolicitResult r) noexcept {
  return r == SolicitResult::kAccepted ? "accepted" : "rejected";
}

Digest broker_agreement_digest(const std::string& broker_did, const std::string& customer_did) {
  ByteWriter w;
  w.str("bsmd.broker-customer.v1");
  w.str(broker_did);
  w.str(customer_did);
  return sha256(ByteView(w.data()));
}

SolicitResult solicit(BrokerWallet& wallet, const NodeIdentity& broker, const PartyEvidence& broker_evidence,
                      const Candidate& candidate, const NodeIdentity& customer, const CredentialRegistry& registry,
                      const TrustPolicy& trust) {
  if (wallet.contains(candidate.did)) return SolicitResult::kAccepted;
  if (!broker_evidence.proof || !verify_proof(broker_evidence.request, *broker_evidence.proof, registry, trust)) {
    return SolicitResult::kRejected;
  }
  if (broker_evidence.proof->holder_key != broker.key.public_key()) return SolicitResult::kRejected;
  if (candidate.identity_key && *candidate.identity_key != customer.key.public_key()) {
    return SolicitResult::kRejected;
  }
  const Digest d = broker_agreement_digest(broker.did, candidate.did);
  Customer c{candidate.did, customer.node_id, candidate.tags, broker.key.sign(d), customer.key.sign(d)};
  wallet.add(std::move(c), broker.key.public_key(), customer.key.public_key(), broker.did);
  return SolicitResult::kAccepted;
}

Arrangement arrange(const BrokerWallet& wallet, const ContractParty& broker, const std::string& contract_id,
                    const ContractParty& owner, const ContractParty& requester, const OwnerTerms& owner_terms,
                    const RequesterTerms& requester_terms, double fee_fraction, const PartyEvidence& broker_evidence,
                    const IdentityContext& identity, ContractBook& book) {
  auto reachable = [&](const ContractParty& p) {
    for (const auto& [did, c] : wallet.customers()) {
      if (c.node_id == p.node_id) return true;
    }
    return false;
  };
  if (!reachable(owner) && !reachable(requester)) {
    throw Error(ErrorCode::kUnknownEntity, "neither party is a customer of broker " + broker.node_id);
  }
  BrokeredMatch bm = match_with_broker(owner_terms, requester_terms, fee_fraction, broker_evidence, identity);
  Arrangement out{bm.match, bm.split, nullptr};
  if (!bm.match.accepted()) return out;
  SmartContract contract(contract_id, owner, requester, owner_terms, requester_terms, broker, fee_fraction);
  contract.evaluate(identity, &broker_evidence);
  out.contract = &book.add(std::move(contract));
  return out;
}

}  // namespace bsmd
