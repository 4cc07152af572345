#pragma once

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bsmd/contract.hpp"
#include "bsmd/error.hpp"
#include "bsmd/identity.hpp"

namespace testfx {

inline bsmd::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const bsmd::Error& e) {
    return e.code();
  }
  return bsmd::ErrorCode::kOk;
}

// Single-validator ledger where "gov" has issued an identity key to each
// named node.
struct Keys {
  std::mt19937_64 rng{21};
  bsmd::SigningKey validator = bsmd::SigningKey::from_seed(bsmd::seed_from(rng));
  bsmd::Ledger ledger{[this] {
    bsmd::ValidatorSet v;
    v.add("v0", validator.public_key());
    return v;
  }()};
  bsmd::CredentialRegistry registry;
  bsmd::TrustPolicy trust{{"gov"}};
  bsmd::NodeIdentity gov = bsmd::NodeIdentity::create("gov", bsmd::NodeKind::kGovernment, rng);
  std::map<std::string, bsmd::NodeIdentity> nodes;
  std::map<std::string, bsmd::CredentialWallet> wallets;

  void commit(const bsmd::TxRecord& tx) {
    bsmd::Block b = bsmd::build_public_block({tx}, ledger.tip_hash(), ledger.size(),
                                             static_cast<std::int64_t>(ledger.size()));
    b.signatures.push_back({"v0", validator.sign(bsmd::hash_block(b))});
    ledger.append(std::move(b));
    registry.sync(ledger);
  }

  explicit Keys(std::vector<std::string> names = {"owner", "requester", "broker"}) {
    commit(bsmd::create_schema(gov, "identity-key", {"name"}, trust, registry, 0).tx);
    for (const auto& n : names) add(n, true);
  }

  // Creates the node; only issues its key when `keyed`.
  void add(const std::string& n, bool keyed, bsmd::NodeKind kind = bsmd::NodeKind::kIndividual) {
    nodes.emplace(n, bsmd::NodeIdentity::create(n, kind, rng));
    const auto& id = nodes.at(n);
    wallets.emplace(n, bsmd::CredentialWallet(&nodes.at(n)));
    if (!keyed) return;
    auto iss = bsmd::issue_credential(gov, "identity-key", id.did, id.key.public_key(), {{"name", n}}, registry,
                                      rng, 0);
    commit(iss.tx);
    wallets.at(n).store(iss.credential);
  }

  bsmd::PartyEvidence evidence(const std::string& who) {
    bsmd::ProofRequest req{"challenge-" + who, {{"name", who}}};
    bsmd::PartyEvidence ev{std::nullopt, req};
    if (!wallets.at(who).credentials().empty()) ev.proof = bsmd::build_proof(wallets.at(who), req, registry);
    return ev;
  }

  bsmd::IdentityContext context(bool owner_valid = true, bool requester_valid = true) {
    bsmd::IdentityContext ctx{&registry, &trust, evidence("owner"), evidence("requester")};
    if (!owner_valid) ctx.owner.proof.reset();
    if (!requester_valid) ctx.requester.proof->disclosed[0].value = "someone-else";
    return ctx;
  }

  bsmd::ContractParty party(const std::string& who) {
    const auto& n = nodes.at(who);
    return {n.node_id, "did:bsmd:pair-" + who, n.key.public_key()};
  }
};

}  // namespace testfx
