#include <filesystem>
#include <functional>

#include "bsmd/error.hpp"
#include "bsmd/identity.hpp"
#include "doctest.h"

using namespace bsmd;

namespace {

struct World {
  std::mt19937_64 rng{11};
  SigningKey validator = SigningKey::from_seed(seed_from(rng));
  Ledger ledger{[this] {
    ValidatorSet v;
    v.add("v0", validator.public_key());
    return v;
  }()};
  CredentialRegistry registry;
  NodeIdentity gov = NodeIdentity::create("government", NodeKind::kGovernment, rng);
  NodeIdentity uni = NodeIdentity::create("university", NodeKind::kUniversity, rng);
  NodeIdentity ind = NodeIdentity::create("individual", NodeKind::kIndividual, rng);
  TrustPolicy trust{{"government"}};
  std::int64_t now = 0;

  void commit(const TxRecord& tx) {
    Block b = build_public_block({tx}, ledger.tip_hash(), ledger.size(), ++now);
    b.signatures.push_back({"v0", validator.sign(hash_block(b))});
    ledger.append(std::move(b));
    registry.sync(ledger);
  }

  void publish_schema() { commit(create_schema(gov, "inst", {"kind", "sector"}, trust, registry, now).tx); }

  Credential issue(const NodeIdentity& holder, std::map<std::string, std::string> values, bool on_ledger = true) {
    auto iss = issue_credential(gov, "inst", holder.did, holder.key.public_key(), values, registry, rng, now);
    if (on_ledger) commit(iss.tx);
    return iss.credential;
  }
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

ProofRequest wants_university() { return {"nonce-1", {{"kind", "university"}}}; }

}  // namespace

TEST_SUITE("identity") {
  TEST_CASE("schema publication by a trusted issuer") {
    World w;
    w.publish_schema();
    REQUIRE(w.registry.find_schema("inst") != nullptr);
    CHECK(w.registry.find_schema("inst")->attributes == std::vector<std::string>{"kind", "sector"});
    CHECK(w.ledger.size() == 1);
    CHECK(w.ledger.at(0).kind() == TxKind::kPublic);
  }

  TEST_CASE("untrusted issuer and duplicate schema are refused") {
    World w;
    CHECK(code_of([&] { create_schema(w.ind, "x", {"a"}, w.trust, w.registry, 0); }) == ErrorCode::kUntrustedIssuer);
    w.publish_schema();
    CHECK(code_of([&] { create_schema(w.gov, "inst", {"a"}, w.trust, w.registry, 0); }) ==
          ErrorCode::kDuplicateSchema);
  }

  TEST_CASE("issuing against an unknown schema") {
    World w;
    CHECK(code_of([&] { w.issue(w.uni, {{"kind", "university"}, {"sector", "education"}}); }) ==
          ErrorCode::kUnknownSchema);
  }

  TEST_CASE("valid proof connects") {
    World w;
    w.publish_schema();
    CredentialWallet wallet(&w.uni);
    wallet.store(w.issue(w.uni, {{"kind", "university"}, {"sector", "education"}}));
    auto proof = build_proof(wallet, wants_university(), w.registry);
    CHECK(verify_proof(wants_university(), proof, w.registry, w.trust));
    CHECK(authenticate_peer(wallet, wants_university(), w.registry, w.trust) == ConnectionDecision::kConnected);
    // Only requested attributes are disclosed.
    REQUIRE(proof.disclosed.size() == 1);
    CHECK(proof.disclosed[0].name == "kind");
    CHECK(proof.to_json().find("education") == std::string::npos);
  }

  TEST_CASE("no credential gives NoProof") {
    World w;
    w.publish_schema();
    CredentialWallet empty(&w.ind);
    CHECK(code_of([&] { build_proof(empty, wants_university(), w.registry); }) == ErrorCode::kNoProof);
    CHECK(authenticate_peer(empty, wants_university(), w.registry, w.trust) == ConnectionDecision::kNoProof);
  }

  TEST_CASE("credential never committed gives NoProof") {
    World w;
    w.publish_schema();
    CredentialWallet wallet(&w.uni);
    wallet.store(w.issue(w.uni, {{"kind", "university"}, {"sector", "education"}}, false));
    CHECK(code_of([&] { build_proof(wallet, wants_university(), w.registry); }) == ErrorCode::kNoProof);
  }

  TEST_CASE("altered attribute is rejected") {
    World w;
    w.publish_schema();
    CredentialWallet wallet(&w.ind);
    wallet.store(w.issue(w.ind, {{"kind", "individual"}, {"sector", "none"}}));
    auto proof = build_proof(wallet, {"n", {{"kind", "individual"}}}, w.registry);
    proof.disclosed[0].value = "university";
    CHECK_FALSE(verify_proof(wants_university(), proof, w.registry, w.trust));
  }

  TEST_CASE("replayed proof for another nonce is rejected") {
    World w;
    w.publish_schema();
    CredentialWallet wallet(&w.uni);
    wallet.store(w.issue(w.uni, {{"kind", "university"}, {"sector", "education"}}));
    auto proof = build_proof(wallet, wants_university(), w.registry);
    ProofRequest other = wants_university();
    other.nonce = "nonce-2";
    CHECK_FALSE(verify_proof(other, proof, w.registry, w.trust));
  }

  TEST_CASE("proof against an empty ledger is false") {
    World w;
    w.publish_schema();
    CredentialWallet wallet(&w.uni);
    wallet.store(w.issue(w.uni, {{"kind", "university"}, {"sector", "education"}}));
    auto proof = build_proof(wallet, wants_university(), w.registry);
    CHECK_FALSE(verify_proof(wants_university(), proof, CredentialRegistry{}, w.trust));
  }

  TEST_CASE("two credentials to one holder verify independently") {
    World w;
    w.publish_schema();
    CredentialWallet a(&w.uni), b(&w.uni);
    a.store(w.issue(w.uni, {{"kind", "university"}, {"sector", "education"}}));
    b.store(w.issue(w.uni, {{"kind", "university"}, {"sector", "research"}}));
    ProofRequest ra{"n1", {{"sector", "education"}}}, rb{"n2", {{"sector", "research"}}};
    CHECK(verify_proof(ra, build_proof(a, ra, w.registry), w.registry, w.trust));
    CHECK(verify_proof(rb, build_proof(b, rb, w.registry), w.registry, w.trust));
    CHECK(w.registry.entry_count() == 2);
  }

  TEST_CASE("rotation supersedes the old entry") {
    World w;
    w.publish_schema();
    Credential old = w.issue(w.uni, {{"kind", "university"}, {"sector", "education"}});
    auto rot = rotate_credential(w.gov, old, {{"kind", "university"}, {"sector", "research"}}, w.registry, w.rng, w.now);
    w.commit(rot.tx);
    REQUIRE(w.registry.find_entry(credential_digest(old)) != nullptr);
    CHECK(w.registry.find_entry(credential_digest(old))->superseded);
    CredentialWallet stale(&w.uni);
    stale.store(old);
    CHECK(authenticate_peer(stale, wants_university(), w.registry, w.trust) != ConnectionDecision::kConnected);
    CredentialWallet fresh(&w.uni);
    fresh.store(rot.credential);
    CHECK(authenticate_peer(fresh, wants_university(), w.registry, w.trust) == ConnectionDecision::kConnected);
  }

  TEST_CASE("registry sync is incremental and matches a full rebuild") {
    World w;
    w.publish_schema();
    for (int i = 0; i < 5; ++i) w.issue(w.uni, {{"kind", "university"}, {"sector", std::to_string(i)}});
    auto rebuilt = CredentialRegistry::from_ledger(w.ledger);
    CHECK(rebuilt.entry_count() == w.registry.entry_count());
    CHECK(rebuilt.schema_count() == 1);
  }

  TEST_CASE("identification round trips and keeps dynamic order") {
    Identification id({NodeKind::kIndividual, "did:bsmd:x", std::nullopt, {"mobility"}});
    id.set_static("age_range", "25-34");
    id.append_dynamic({1000, 1.0, 2.0});
    id.append_dynamic({2000, 3.0, 4.0});
    CHECK(code_of([&] { id.append_dynamic({1500, 0, 0}); }) == ErrorCode::kInvalidArgument);
    auto back = Identification::from_json(id.to_json());
    CHECK(back.to_json() == id.to_json());
    CHECK(back.dynamic_data().size() == 2);
    auto path = (std::filesystem::temp_directory_path() / "bsmd_ident_test.json").string();
    id.save(path);
    CHECK(Identification::load(path).to_json() == id.to_json());
    std::filesystem::remove(path);
    CHECK(parse_node_kind(to_string(NodeKind::kUniversity)) == NodeKind::kUniversity);
  }

  TEST_CASE("connection gate truth table") {
    CHECK(connection_allowed(true, true));
    CHECK_FALSE(connection_allowed(true, false));
    CHECK_FALSE(connection_allowed(false, true));
    CHECK_FALSE(connection_allowed(false, false));
  }
}
