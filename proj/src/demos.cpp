#include "bsmd/demos.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "bsmd/broker.hpp"
#include "bsmd/error.hpp"
#include "bsmd/stack.hpp"

namespace bsmd {

bool DemoReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const DemoCheck& c) { return c.passed; });
}

namespace {

class Recorder {
 public:
  Recorder(std::string demo, const DemoLog& sink) : sink_(sink) { report_.demo = std::move(demo); }

  void say(const std::string& line) {
    report_.log.push_back(line);
    if (sink_) sink_(line);
  }
  bool check(const std::string& name, bool passed, const std::string& detail) {
    report_.checks.push_back({name, passed, detail});
    say(std::string(passed ? "PASS " : "FAIL ") + name + ": " + detail);
    return passed;
  }
  void value(const std::string& key, const std::string& v) { report_.values[key] = v; }
  DemoReport take() { return std::move(report_); }

 private:
  DemoReport report_;
  const DemoLog& sink_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

StackConfig stack_config(const DemoOptions& o) {
  StackConfig c;
  c.active_nodes = o.active_nodes;
  c.faulty = o.faulty;
  c.consensus.timeout = ms(static_cast<double>(o.timeout_ms));
  c.seed = o.seed;
  return c;
}

// Terms that always match: same service, no reward, location disclosure
// at low accuracy, window covering the first four months from the origin.
TimeWindow four_months() { return {kDefaultClockOriginMs, kDefaultClockOriginMs + 122 * kDayMs - 1}; }

OwnerTerms plain_owner_terms(TimeWindow window) {
  OwnerTerms t;
  t.service_requested = "none";
  t.privacy_level = DisclosureSet{"geoind"};
  t.temporality = window;
  return t;
}

RequesterTerms plain_requester_terms(TimeWindow window) {
  RequesterTerms t;
  t.service_provided = "none";
  t.accuracy = DisclosureSet{"low_geo_accuracy"};
  t.temporality = window;
  return t;
}

std::string decision_text(ConnectionDecision d) { return std::string(to_string(d)); }

}  // namespace

DemoReport run_spoofing_demo(const DemoOptions& options, const DemoLog& log) {
  Recorder rec("spoofing", log);
  Stack stack(stack_config(options));
  stack.add_participant("government", NodeKind::kGovernment);
  stack.add_participant("university", NodeKind::kUniversity, {"research"});
  stack.add_participant("individual", NodeKind::kIndividual, {"mobility"});
  Participant& spoofer = stack.add_participant("spoofer", NodeKind::kUniversity, {"research"});
  stack.trust().trust("government");

  rec.say("step 1: government writes the credential schema to the ledger");
  stack.publish_schema("government", "institution-id", {"name", "sector"});
  rec.say("step 2: government issues the university credential; the registry entry is committed");
  Credential uni_cred =
      stack.issue("government", "institution-id", "university", {{"name", "University"}, {"sector", "education"}});
  // The spoofer holds a genuine credential, just not the one it needs.
  Credential spoofer_cred =
      stack.issue("government", "institution-id", "spoofer", {{"name", "Spoofer Inc"}, {"sector", "transport"}});
  rec.value("ledger_height", std::to_string(stack.ledger().size()));

  const auto& registry = stack.registry();
  const TrustPolicy& trust = stack.trust();
  std::uint64_t nonce_counter = 0;
  auto application = [&] {
    rec.say("step 4: individual sends a sharing application requiring sector=education");
    return ProofRequest{"nonce-" + std::to_string(options.seed) + "-" + std::to_string(++nonce_counter),
                        {{"sector", "education"}}};
  };

  // Runs steps 5 and 6 for one wallet and reports where it stopped.
  struct Attempt {
    bool proof_built = false;
    bool verified = false;
  };
  auto attempt = [&](const std::string& who, const CredentialWallet& wallet) {
    rec.say("step 3: " + who + " requests a connection to the individual");
    ProofRequest request = application();
    Attempt a;
    ProofApplication proof;
    try {
      proof = build_proof(wallet, request, registry);
      a.proof_built = true;
      rec.say("step 5: " + who + " built an application proof from the ledger registry");
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoProof) throw;
      rec.say("step 5: " + who + " has no application proof; the connection does not proceed");
      return a;
    }
    a.verified = verify_proof(request, proof, registry, trust);
    rec.say(std::string("step 6: individual ") + (a.verified ? "accepts" : "rejects") + " the proof of " + who);
    return a;
  };

  Attempt genuine = attempt("university", stack.participant("university").wallet);
  rec.check("genuine_connects", genuine.proof_built && genuine.verified,
            "ledger-registered credential passes both steps");

  CredentialWallet empty_wallet(&spoofer.identity);
  Attempt none = attempt("spoofer (no credential)", empty_wallet);
  rec.check("no_credential_refused_at_step5", !none.proof_built,
            "no application proof exists, step 6 never reached");

  // A self-signed credential that never reached the ledger.
  CredentialWallet self_signed(&spoofer.identity);
  {
    Credential fake = uni_cred;
    fake.issuer_id = "spoofer";
    fake.holder_did = spoofer.identity.did;
    fake.holder_key = spoofer.identity.key.public_key();
    fake.registry_digest = credential_digest(fake);
    fake.issuer_signature = spoofer.identity.key.sign(ByteView(fake.registry_digest));
    self_signed.store(fake);
  }
  Attempt unregistered = attempt("spoofer (unregistered credential)", self_signed);
  rec.check("unregistered_credential_refused_at_step5", !unregistered.proof_built,
            "credential absent from the ledger registry yields no proof");

  // Genuine registry entry, attribute value edited in the holder's copy.
  CredentialWallet forged(&spoofer.identity);
  {
    Credential edited = spoofer_cred;
    for (auto& a : edited.attributes) {
      if (a.name == "sector") a.value = "education";
    }
    forged.store(edited);
  }
  Attempt forged_attempt = attempt("spoofer (forged attribute)", forged);
  rec.check("forged_attribute_rejected_at_step6", forged_attempt.proof_built && !forged_attempt.verified,
            "proof built at step 5, commitment mismatch rejected at step 6");

  CredentialWallet stolen(&spoofer.identity);
  stolen.store(uni_cred);
  Attempt stolen_attempt = attempt("spoofer (copied credential)", stolen);
  rec.check("copied_credential_rejected_at_step6", stolen_attempt.proof_built && !stolen_attempt.verified,
            "holder key binding fails at step 6");

  rec.check("authenticate_peer_agrees",
            authenticate_peer(stack.participant("university").wallet, application(), registry, trust) ==
                    ConnectionDecision::kConnected &&
                authenticate_peer(empty_wallet, application(), registry, trust) == ConnectionDecision::kNoProof &&
                authenticate_peer(forged, application(), registry, trust) == ConnectionDecision::kRejected,
            "connected / " + decision_text(ConnectionDecision::kNoProof) + " / " +
                decision_text(ConnectionDecision::kRejected));
  return rec.take();
}

DemoReport run_interception_demo(const DemoOptions& options, const DemoLog& log) {
  Recorder rec("interception", log);
  Stack stack(stack_config(options));
  Participant& uni = stack.add_participant("university", NodeKind::kUniversity);
  Participant& ind = stack.add_participant("individual", NodeKind::kIndividual);

  SmartContract& contract = stack.propose_contract("tap-contract", "individual", "university",
                                                   plain_owner_terms(four_months()),
                                                   plain_requester_terms(four_months()));
  if (!stack.activate(contract, stack.identity_context({}, {})).accepted()) {
    throw Error(ErrorCode::kInternal, "interception contract did not match");
  }
  ChannelPair pair = stack.open_channel(contract);
  rec.say("channel open between pairwise DIDs " + contract.owner().did + " and " + contract.requester().did);

  std::vector<Bytes> delivered;
  stack.network().on_delivery([&](const Delivery& d) { delivered.push_back(d.plaintext); });
  stack.network().keep_inbox(false);

  std::mt19937_64 rng(options.seed * 7919 + 17);
  std::uniform_int_distribution<int> len(32, 256);
  std::uniform_int_distribution<int> byte(0, 255);
  std::vector<Bytes> sent;
  stack.transport().clear_tap();
  stack.transport().enable_tap(true);
  for (std::size_t i = 0; i < options.frames; ++i) {
    Bytes payload(static_cast<std::size_t>(len(rng)));
    for (auto& b : payload) b = static_cast<std::uint8_t>(byte(rng));
    stack.network().send_encrypted(i % 2 == 0 ? pair.owner_end : pair.requester_end, payload);
    sent.push_back(std::move(payload));
  }
  stack.loop().run_until(stack.loop().now() + ms(60'000));
  stack.transport().enable_tap(false);

  std::vector<Frame> frames;
  Bytes wire;
  for (const auto& raw : stack.transport().tapped()) {
    wire.insert(wire.end(), raw.begin(), raw.end());
    try {
      frames.push_back(Frame::decode(raw));
    } catch (const Error&) {
    }
  }
  rec.say("tapped " + std::to_string(stack.transport().tapped().size()) + " frames, " +
          std::to_string(wire.size()) + " bytes");
  rec.value("frames_tapped", std::to_string(frames.size()));
  rec.value("bytes_tapped", std::to_string(wire.size()));
  rec.check("all_frames_tapped", frames.size() == options.frames,
            std::to_string(frames.size()) + " of " + std::to_string(options.frames));
  rec.check("delivered_intact", delivered == sent || (delivered.size() == sent.size() && std::is_permutation(
                                                          delivered.begin(), delivered.end(), sent.begin())),
            std::to_string(delivered.size()) + " payloads decrypted by the contract parties");

  std::size_t leaks = 0;
  for (const auto& p : sent) {
    auto it = std::search(wire.begin(), wire.end(), std::boyer_moore_horspool_searcher(p.begin(), p.end()));
    if (it != wire.end()) ++leaks;
  }
  rec.check("plaintext_absent", leaks == 0,
            std::to_string(leaks) + " of " + std::to_string(sent.size()) + " payloads found in captured bytes");

  // The eavesdropper knows every public key the resolver hands out.
  std::vector<PublicKey> known;
  for (const auto& d : stack.network().public_documents()) known.push_back(d.key);
  std::size_t attempts = 0, opened = 0;
  for (const auto& f : frames) {
    std::vector<SessionKey> guesses;
    for (const auto& k : known) guesses.push_back(SessionKey::derive(BoxKeyPair::from_seed(seed_from(rng)), k));
    guesses.push_back(
        SessionKey::derive(BoxKeyPair::from_seed(seed_from(rng)), BoxKeyPair::from_seed(seed_from(rng)).public_key()));
    for (const auto& g : guesses) {
      ++attempts;
      if (g.open(f.body)) ++opened;
    }
  }
  rec.check("decryption_without_secret_fails", attempts > 0 && opened == 0,
            std::to_string(attempts - opened) + " of " + std::to_string(attempts) + " attempts failed");

  std::size_t resolvable = 0;
  for (const auto& f : frames) {
    if (stack.network().resolve(f.sender_did) || stack.network().resolve(f.receiver_did)) ++resolvable;
  }
  rec.check("frame_dids_unlinkable", resolvable == 0,
            "frame headers carry pairwise DIDs only (public DIDs " + uni.public_did + ", " + ind.public_did + ")");
  return rec.take();
}

DemoReport run_revocation_demo(const DemoOptions& options, const DemoLog& log) {
  Recorder rec("revocation", log);
  std::mt19937_64 rng(options.seed * 104729 + 3);
  const SigningKey owner_key = SigningKey::from_seed(seed_from(rng));
  const SigningKey requester_key = SigningKey::from_seed(seed_from(rng));
  const std::int64_t t0 = kDefaultClockOriginMs;
  const TimeWindow window{t0 + kDayMs, t0 + 30 * kDayMs};

  std::uint64_t serial = 0;
  auto fresh = [&](bool matching) {
    RequesterTerms rt = plain_requester_terms(window);
    rt.monetary_reward = Money::units(2);
    OwnerTerms ot = plain_owner_terms(window);
    ot.monetary_reward = matching ? Money::units(1) : Money::units(3);
    SmartContract c("lifecycle-" + std::to_string(++serial), {"owner", "did:bsmd:o", owner_key.public_key()},
                    {"requester", "did:bsmd:r", requester_key.public_key()}, ot, rt);
    c.evaluate(IdentityContext{});
    return c;
  };
  auto sign = [&](SmartContract& c, bool owner, bool requester) {
    if (owner) c.sign(PartyRole::kOwner, owner_key, t0);
    if (requester) c.sign(PartyRole::kRequester, requester_key, t0);
  };

  struct State {
    std::string name;
    std::function<SmartContract()> build;
    std::int64_t from, to;  // attempt times, inclusive
    bool allowed;
  };
  const std::int64_t late = window.end_ms + 60 * kDayMs;
  std::vector<State> states = {
      {"proposed", [&] { return fresh(true); }, window.start_ms, window.end_ms, false},
      {"owner_signed_only", [&] { auto c = fresh(true); sign(c, true, false); return c; }, window.start_ms,
       window.end_ms, false},
      {"requester_signed_only", [&] { auto c = fresh(true); sign(c, false, true); return c; }, window.start_ms,
       window.end_ms, false},
      {"refused_match", [&] { return fresh(false); }, window.start_ms, window.end_ms, false},
      {"active_before_start", [&] { auto c = fresh(true); sign(c, true, true); return c; }, t0,
       window.start_ms - 1, false},
      {"active_in_window", [&] { auto c = fresh(true); sign(c, true, true); return c; }, window.start_ms,
       window.end_ms, true},
      {"expired", [&] { auto c = fresh(true); sign(c, true, true); return c; }, window.end_ms + 1, late, false},
      {"revoked_while_proposed", [&] { auto c = fresh(true); c.revoke(PartyRole::kOwner); return c; },
       window.start_ms, window.end_ms, false},
      {"revoked_half_signed", [&] { auto c = fresh(true); sign(c, true, false); c.revoke(PartyRole::kRequester); return c; },
       window.start_ms, window.end_ms, false},
      {"revoked_by_owner", [&] { auto c = fresh(true); sign(c, true, true); c.revoke(PartyRole::kOwner); return c; },
       window.start_ms, window.end_ms, false},
      {"revoked_by_requester",
       [&] { auto c = fresh(true); sign(c, true, true); c.revoke(PartyRole::kRequester); return c; },
       window.start_ms, window.end_ms, false},
      {"revoked_after_expiry",
       [&] { auto c = fresh(true); sign(c, true, true); c.revoke(PartyRole::kOwner); return c; }, window.end_ms + 1,
       late, false},
  };

  const DisclosureSet payload{"geoind"};
  std::size_t total_allowed = 0, expected_allowed = 0;
  for (const auto& s : states) {
    SmartContract c = s.build();
    RewardBook book;
    std::uniform_int_distribution<std::int64_t> when(s.from, s.to);
    std::vector<std::int64_t> times{s.from, s.to};
    while (times.size() < std::max<std::size_t>(options.trials, 2)) times.push_back(when(rng));
    std::size_t allowed = 0;
    std::string reasons;
    for (auto t : times) {
      auto d = c.enforce_transfer(t, payload, book);
      if (d.allowed()) ++allowed;
      else if (reasons.find(std::string(to_string(d.reason))) == std::string::npos)
        reasons += (reasons.empty() ? "" : ",") + std::string(to_string(d.reason));
    }
    total_allowed += allowed;
    if (s.allowed) expected_allowed += times.size();
    const bool ok = s.allowed ? allowed == times.size() : allowed == 0;
    rec.check("state_" + s.name, ok && book.entries().size() == allowed,
              std::to_string(allowed) + " of " + std::to_string(times.size()) + " allowed" +
                  (reasons.empty() ? "" : ", denied: " + reasons));
  }
  rec.value("lifecycle_states", std::to_string(states.size()));
  rec.value("transfers_allowed", std::to_string(total_allowed));

  {
    SmartContract c = fresh(false);
    bool refused = false;
    try {
      c.sign(PartyRole::kOwner, owner_key, t0);
    } catch (const Error& e) {
      refused = e.code() == ErrorCode::kNotMatched;
    }
    rec.check("sign_refused_match", refused, "signing a refused match raises NotMatched");

    ContractBook book;
    SmartContract& stored = book.add(fresh(true));
    stored.revoke(PartyRole::kOwner);
    stored.revoke(PartyRole::kOwner);
    bool duplicate = false;
    try {
      book.add(SmartContract(stored.id(), stored.owner(), stored.requester(), stored.owner_terms(),
                             stored.requester_terms()));
    } catch (const Error& e) {
      duplicate = e.code() == ErrorCode::kDuplicateContract;
    }
    rec.check("revocation_terminal", stored.stored_status() == ContractStatus::kRevoked && duplicate,
              "revoke is idempotent and a re-match needs a new contract id");
  }

  // Live channel: the owner revokes both the contract and its pairwise DID.
  Stack stack(stack_config(options));
  stack.add_participant("university", NodeKind::kUniversity);
  stack.add_participant("individual", NodeKind::kIndividual);
  SmartContract& live = stack.propose_contract("live-contract", "individual", "university",
                                               plain_owner_terms(four_months()),
                                               plain_requester_terms(four_months()));
  if (!stack.activate(live, stack.identity_context({}, {})).accepted()) {
    throw Error(ErrorCode::kInternal, "revocation contract did not match");
  }
  ChannelPair pair = stack.open_channel(live);
  std::size_t before_ok = 0, after_denied = 0, after_refused = 0;
  stack.network().on_delivery([&](const Delivery&) {
    if (live.enforce_transfer(stack.now_ms(), payload, stack.rewards()).allowed()) ++before_ok;
  });
  const Bytes point(32, 0x5a);
  for (std::size_t i = 0; i < options.transfers; ++i) stack.network().send_encrypted(pair.owner_end, point);
  stack.loop().run_until(stack.loop().now() + ms(10'000));
  rec.check("live_before_revocation", before_ok == options.transfers,
            std::to_string(before_ok) + " of " + std::to_string(options.transfers) + " transfers allowed");

  live.revoke(PartyRole::kOwner);
  auto closed = stack.network().revoke_did("individual", live.owner().did);
  rec.say("owner revoked the contract and erased pairwise DID " + live.owner().did);
  for (std::size_t i = 0; i < options.transfers; ++i) {
    if (!live.enforce_transfer(stack.now_ms(), payload, stack.rewards()).allowed()) ++after_denied;
    for (ChannelId end : {pair.owner_end, pair.requester_end}) {
      try {
        stack.network().send_encrypted(end, point);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kChannelClosed) ++after_refused;
      }
    }
  }
  const bool channel_closed = std::find(closed.begin(), closed.end(), live.id()) != closed.end() &&
                              stack.network().channel(pair.owner_end).state == ChannelState::kClosed &&
                              stack.network().channel(pair.requester_end).state == ChannelState::kClosed;
  rec.check("live_after_revocation", after_denied == options.transfers && after_refused == 2 * options.transfers &&
                                         channel_closed,
            std::to_string(after_denied) + " deny(revoked), " + std::to_string(after_refused) +
                " sends refused on the closed channel");
  return rec.take();
}

DemoReport run_broker_demo(const DemoOptions& options, const DemoLog& log) {
  Recorder rec("broker", log);
  Stack stack(stack_config(options));
  stack.transport().enable_log(true);
  stack.add_participant("government", NodeKind::kGovernment);
  Participant& broker = stack.add_participant("broker", NodeKind::kCompany, {"brokerage"});
  stack.add_participant("university", NodeKind::kUniversity, {"mobility-research"});
  stack.add_participant("individual", NodeKind::kIndividual, {"mobility"});
  stack.add_participant("individual-2", NodeKind::kIndividual, {"fitness"});
  stack.add_participant("ride-hailing", NodeKind::kCompany, {"transport"});
  stack.trust().trust("government");

  stack.publish_schema("government", "identity-key", {"name", "role"});
  stack.issue("government", "identity-key", "broker", {{"name", "Broker"}, {"role", "broker"}});
  stack.issue("government", "identity-key", "university", {{"name", "University"}, {"role", "university"}});
  rec.say("government issued identity keys to the broker and the university");

  DiscoveryFilter individuals{NodeKind::kIndividual, {"mobility"}, true};
  DiscoveryFilter researchers{NodeKind::kUniversity, {}, true};
  auto docs = stack.network().public_documents();
  auto cands = discover(broker.identity, docs, individuals);
  auto uni_cands = discover(broker.identity, docs, researchers);
  cands.insert(cands.end(), uni_cands.begin(), uni_cands.end());
  rec.say("broker discovered " + std::to_string(cands.size()) + " candidates from metadata");

  BrokerWallet wallet("broker");
  PartyEvidence broker_ev = stack.evidence("broker", {{"role", "broker"}});
  for (const auto& c : cands) {
    const DidRecord* rec_did = stack.network().find_did(c.did);
    if (rec_did == nullptr) continue;
    auto r = solicit(wallet, broker.identity, broker_ev, c, stack.participant(rec_did->owner).identity,
                     stack.registry(), stack.trust());
    rec.say("solicit " + rec_did->owner + ": " + std::string(to_string(r)));
  }
  rec.check("customers_in_wallet", wallet.size() == 2, std::to_string(wallet.size()) + " customers");

  // Individual: no service, asks r_o, discloses differential privacy and
  // gender from March to June, wants the requester's identity key.
  const Money r_o = Money::units(8), r_r = Money::units(10);
  OwnerTerms ot;
  ot.service_requested = "none";
  ot.monetary_reward = r_o;
  ot.privacy_level = DisclosureSet{"differential privacy", "gender"};
  ot.temporality = four_months();
  ot.require_identity_key = true;
  // University: no service, offers r_r, accepts low geographic accuracy and
  // gender over four months, no key required.
  RequesterTerms rt;
  rt.service_provided = "none";
  rt.monetary_reward = r_r;
  rt.accuracy = DisclosureSet{"low geo accuracy", "gender"};
  rt.temporality = four_months();

  ContractParty broker_party{"broker", broker.public_did, broker.identity.key.public_key()};
  IdentityContext ctx = stack.identity_context({}, stack.evidence("university", {{"role", "university"}}));

  // Reward conflict first: refusal propagates and nothing is recorded.
  OwnerTerms greedy = ot;
  greedy.monetary_reward = Money::units(12);
  Arrangement refused = arrange(wallet, broker_party, "brokered-refused", stack.pairwise_party("individual"),
                                stack.pairwise_party("university"), greedy, rt, options.fee, broker_ev, ctx,
                                stack.contracts());
  rec.check("reward_conflict_refused",
            !refused.match.accepted() && *refused.match.refused == MatchGate::kReward && refused.contract == nullptr &&
                stack.contracts().find("brokered-refused") == nullptr,
            "refused at gate " + std::string(refused.match.refused ? to_string(*refused.match.refused) : "none"));

  Arrangement arr = arrange(wallet, broker_party, "brokered-alg2", stack.pairwise_party("individual"),
                            stack.pairwise_party("university"), ot, rt, options.fee, broker_ev, ctx,
                            stack.contracts());
  if (!arr.match.accepted() || arr.contract == nullptr) {
    rec.check("arrangement_accepted", false,
              "refused at gate " + std::string(arr.match.refused ? to_string(*arr.match.refused) : "none"));
    return rec.take();
  }
  stack.sign_and_commit(*arr.contract);
  SmartContract& contract = *arr.contract;
  rec.check("arrangement_accepted", contract.status(stack.now_ms()) == ContractStatus::kActive,
            "contract " + contract.id() + " active, activation committed at height " +
                std::to_string(stack.ledger().size()));

  ChannelPair pair = stack.open_channel(contract);
  const DisclosureSet shared{"geoind", "gender"};
  std::size_t allowed = 0;
  stack.network().on_delivery([&](const Delivery& d) {
    if (d.contract_id == contract.id() && contract.enforce_transfer(stack.now_ms(), shared, stack.rewards()).allowed())
      ++allowed;
  });
  std::mt19937_64 rng(options.seed + 99);
  for (std::size_t i = 0; i < options.transfers; ++i) {
    auto p = privacy::geoind_perturb({0.0, 0.0}, options.policy.geoind_epsilon, rng);
    std::string msg = fmt("%.3f", p.x) + "," + fmt("%.3f", p.y) + ",gender=f";
    stack.network().send_encrypted(pair.owner_end, as_bytes(msg));
  }
  stack.loop().run_until(stack.loop().now() + ms(30'000));

  const FeeSplit per = split_reward(r_r, options.fee);
  const Money broker_total = wallet.earned_fees(stack.rewards());
  const Money owner_total = stack.rewards().balance("individual");
  const auto n = static_cast<std::int64_t>(allowed);
  rec.value("transfers", std::to_string(allowed));
  rec.value("fee_fraction", fmt("%.4f", options.fee));
  rec.value("broker_credit_per_transfer", fmt("%.6f", per.broker.as_units()));
  rec.value("owner_credit_per_transfer", fmt("%.6f", per.owner.as_units()));
  rec.value("broker_fees_total", fmt("%.6f", broker_total.as_units()));
  rec.value("owner_credit_total", fmt("%.6f", owner_total.as_units()));
  rec.check("transfers_enforced", allowed == options.transfers,
            std::to_string(allowed) + " of " + std::to_string(options.transfers) + " allowed");
  rec.check("broker_fee_exact",
            per.broker.micros == std::llround(static_cast<double>(r_r.micros) * options.fee) &&
                broker_total.micros == n * per.broker.micros,
            fmt("%.6f", broker_total.as_units()) + " = " + std::to_string(n) + " x " + fmt("%.2f", options.fee) +
                " x r_r");
  rec.check("rewards_conserved", (broker_total + owner_total).micros == n * r_r.micros,
            "broker + owner credits equal the routed rewards");

  std::size_t data_frames = 0, to_broker = 0;
  const std::string broker_endpoint = Network::endpoint_of("broker");
  for (const auto& e : stack.transport().log()) {
    if (e.cls != FrameClass::kData) continue;
    ++data_frames;
    if (e.to == broker_endpoint) ++to_broker;
  }
  rec.check("broker_never_receives_data", data_frames > 0 && to_broker == 0,
            std::to_string(data_frames) + " data frames logged, " + std::to_string(to_broker) + " addressed to the broker");
  return rec.take();
}

PrivacyDemo run_privacy_demo(const DemoOptions& options, const DemoLog& log) {
  Recorder rec("privacy", log);
  options.policy.validate();
  PrivacyDemo out;
  std::mt19937_64 rng(options.seed * 31337 + 5);
  const privacy::GeoPoint origin{0.0, 0.0};
  const double inner = options.policy.donut_inner, outer = options.policy.donut_outer;
  const double eps = options.policy.geoind_epsilon;

  double mask_sum = 0.0, ind_sum = 0.0;
  std::size_t outside = 0;
  for (std::size_t i = 0; i < options.samples; ++i) {
    auto m = privacy::geomask_donut(origin, inner, outer, rng);
    PrivacySample s{i, m.x, m.y, privacy::distance(origin, m)};
    if (s.d < inner - 1e-9 || s.d > outer + 1e-9) ++outside;
    mask_sum += s.d;
    out.geomask.push_back(s);
    auto g = privacy::geoind_perturb(origin, eps, rng);
    PrivacySample t{i, g.x, g.y, privacy::distance(origin, g)};
    ind_sum += t.d;
    out.geoind.push_back(t);
  }
  const double n = static_cast<double>(std::max<std::size_t>(options.samples, 1));
  // Uniform over the annulus area: E[d] = 2/3 (R^3 - r^3) / (R^2 - r^2).
  const double mask_mean = 2.0 / 3.0 * (outer * outer * outer - inner * inner * inner) / (outer * outer - inner * inner);
  const double mask_sd = std::sqrt((outer * outer + inner * inner) / 2.0 - mask_mean * mask_mean);
  // Planar Laplace radius is Gamma(2, 1/eps).
  const double ind_mean = 2.0 / eps, ind_sd = std::sqrt(2.0) / eps;
  const double mask_emp = mask_sum / n, ind_emp = ind_sum / n;
  rec.value("geomask_mean_m", fmt("%.3f", mask_emp));
  rec.value("geomask_analytic_mean_m", fmt("%.3f", mask_mean));
  rec.value("geoind_mean_m", fmt("%.3f", ind_emp));
  rec.value("geoind_analytic_mean_m", fmt("%.3f", ind_mean));
  rec.say("geomask " + fmt("%.0f", inner) + "-" + fmt("%.0f", outer) + " m, geoind epsilon " + fmt("%g", eps) + " /m");

  rec.check("geomask_annulus", outside == 0, std::to_string(outside) + " samples outside the annulus");
  rec.check("geomask_mean", std::abs(mask_emp - mask_mean) <= 5.0 * mask_sd / std::sqrt(n),
            fmt("%.3f", mask_emp) + " vs " + fmt("%.3f", mask_mean) + " m");
  rec.check("geoind_mean", std::abs(ind_emp - ind_mean) <= 5.0 * ind_sd / std::sqrt(n),
            fmt("%.3f", ind_emp) + " vs " + fmt("%.3f", ind_mean) + " m");

  // One LBS round trip: the service sees only the perturbed point.
  const privacy::GeoPoint home{120.0, -40.0};
  auto reported = privacy::geoind_perturb(home, eps, rng);
  privacy::LbsQuery q{reported, privacy::covering_radius(reported, home, 500.0), 500.0};
  privacy::LbsResults<int> items, results;
  std::uniform_real_distribution<double> u(-3000.0, 3000.0);
  for (int i = 0; i < 400; ++i) {
    privacy::GeoPoint p{home.x + u(rng), home.y + u(rng)};
    items.push_back({p, i});
    if (privacy::distance(p, reported) <= q.search_radius) results.push_back({p, i});
  }
  auto kept = privacy::filter_results(q, results, home);
  std::size_t brute = 0;
  for (const auto& r : items) brute += privacy::distance(r.first, home) <= 500.0;
  rec.check("lbs_filter", kept.size() == brute,
            std::to_string(kept.size()) + " of " + std::to_string(results.size()) + " results within 500 m");
  out.report = rec.take();
  return out;
}

void write_privacy_csv(const std::string& path, const std::vector<PrivacySample>& samples) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path);
  f << "sample_id,dx,dy,d\n";
  char buf[160];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", s.id, s.dx, s.dy, s.d);
    f << buf;
  }
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path);
}

}  // namespace bsmd
