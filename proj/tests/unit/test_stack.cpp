#include <set>

#include "bsmd/stack.hpp"
#include "doctest.h"
#include "fixture.hpp"

using namespace bsmd;
using testfx::code_of;

namespace {

StackConfig four_nodes() {
  StackConfig c;
  c.active_nodes = 4;
  c.seed = 5;
  return c;
}

bool replicas_agree(Stack& s) {
  auto ledgers = s.consensus().honest_ledgers();
  for (auto* l : ledgers) {
    if (l->size() != ledgers[0]->size()) return false;
    for (std::size_t h = 0; h < l->size(); ++h)
      if (hash_block(l->at(h)) != hash_block(ledgers[0]->at(h))) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("stack") {
  TEST_CASE("participants publish metadata only") {
    Stack s(four_nodes());
    auto& p = s.add_participant("alice", NodeKind::kIndividual, {"mobility"});
    auto doc = s.network().resolve(p.public_did);
    REQUIRE(doc.has_value());
    CHECK(doc->doc.at("kind") == "individual");
    CHECK(doc->doc.at("tags") == "mobility");
    CHECK(doc->doc.size() <= 3);
  }

  TEST_CASE("credential flow commits on every replica") {
    Stack s(four_nodes());
    s.add_participant("gov", NodeKind::kGovernment);
    s.add_participant("uni", NodeKind::kUniversity);
    s.trust().trust("gov");
    s.publish_schema("gov", "inst", {"kind"});
    s.issue("gov", "inst", "uni", {{"kind", "university"}});
    CHECK(s.ledger().size() == 2);
    CHECK(replicas_agree(s));
    CHECK(verify_chain(s.ledger()));
    auto ev = s.evidence("uni", {{"kind", "university"}});
    CHECK(ev.proof.has_value());
    CHECK_FALSE(s.evidence("gov", {{"kind", "university"}}).proof.has_value());
  }

  TEST_CASE("contract activation and private channel") {
    Stack s(four_nodes());
    s.add_participant("ind", NodeKind::kIndividual);
    s.add_participant("co", NodeKind::kCompany);
    OwnerTerms o;
    o.service_requested = "nav";
    o.privacy_level = {"geoind"};
    o.temporality = {kDefaultClockOriginMs, kDefaultClockOriginMs + kDayMs};
    RequesterTerms r;
    r.service_provided = "nav";
    r.accuracy = {"geoind"};
    r.temporality = o.temporality;
    auto& c = s.propose_contract("k1", "ind", "co", o, r);
    CHECK(c.owner().did != s.participant("ind").public_did);
    CHECK(code_of([&] { s.open_channel(c); }) == ErrorCode::kInactiveContract);
    const auto before = s.ledger().size();
    REQUIRE(s.activate(c, s.identity_context({}, {})).accepted());
    CHECK(s.ledger().size() == before + 1);
    const auto& tx = s.ledger().at(before).transactions.at(0);
    CHECK(tx.kind == TxKind::kPrivate);
    CHECK(tx.did_sender == c.owner().did);
    CHECK_FALSE(tx.payload.has_value());
    auto pair = s.open_channel(c);
    s.network().send_encrypted(pair.owner_end, Bytes{1, 2, 3});
    s.loop().run();
    CHECK(s.network().inbox(pair.requester_end).size() == 1);
    CHECK(replicas_agree(s));
  }

  TEST_CASE("unknown participants") {
    Stack s(four_nodes());
    CHECK(code_of([&] { s.participant("nobody"); }) == ErrorCode::kUnknownEntity);
  }
}
