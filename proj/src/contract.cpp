#include "bsmd/contract.hpp"

#include <algorithm>
#include <cmath>

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"

namespace bsmd {

namespace {

void validate_common(Money reward, const TimeWindow& window) {
  if (reward.micros < 0) throw Error(ErrorCode::kInvalidArgument, "monetary reward must be non-negative");
  if (!(window.start_ms < window.end_ms)) throw Error(ErrorCode::kInvalidArgument, "temporality needs start < end");
}

void encode_disclosure(ByteWriter& w, const DisclosureSet& d) {
  w.u32(static_cast<std::uint32_t>(d.tokens().size()));
  for (const auto& t : d.tokens()) w.str(t);
}

void encode_party(ByteWriter& w, const ContractParty& p) {
  w.str(p.node_id);
  w.str(p.did);
  w.raw(p.key);
}

}  // namespace

Money Money::from_double(double units) {
  if (!std::isfinite(units)) throw Error(ErrorCode::kInvalidArgument, "money must be finite");
  return {std::llround(units * 1e6)};
}

DisclosureSet::DisclosureSet(std::initializer_list<std::string_view> tokens) {
  for (auto t : tokens) add(t);
}

std::string DisclosureSet::normalize(std::string_view token) {
  std::string t(token);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return c == ' ' || c == '-' ? '_' : std::tolower(c); });
  if (t == "geoind" || t == "differential_privacy" || t == "low_geo_accuracy" || t == "location:low") {
    return "location:low";
  }
  if (t == "geomask" || t == "coarse_geo_accuracy" || t == "location:coarse") return "location:coarse";
  if (t == "exact" || t == "exact_location" || t == "exact_geo_accuracy" || t == "raw_location" ||
      t == "location:exact") {
    return "location:exact";
  }
  return t;
}

bool DisclosureSet::subset_of(const DisclosureSet& other) const {
  return std::includes(other.tokens_.begin(), other.tokens_.end(), tokens_.begin(), tokens_.end());
}

void OwnerTerms::validate() const { validate_common(monetary_reward, temporality); }
void RequesterTerms::validate() const { validate_common(monetary_reward, temporality); }

std::string_view to_string(MatchGate gate) noexcept {
  switch (gate) {
    case MatchGate::kService: return "service";
    case MatchGate::kReward: return "reward";
    case MatchGate::kPrivacy: return "privacy";
    case MatchGate::kTemporality: return "temporality";
    case MatchGate::kIdentity: return "identity";
  }
  return "unknown";
}

bool evidence_verifies(const PartyEvidence& evidence, const IdentityContext& ctx) {
  if (!evidence.proof || ctx.registry == nullptr || ctx.trust == nullptr) return false;
  return verify_proof(evidence.request, *evidence.proof, *ctx.registry, *ctx.trust);
}

MatchResult match_terms(const OwnerTerms& owner, const RequesterTerms& requester,
                        const IdentityContext& identity) {
  if (owner.service_requested != requester.service_provided) return {MatchGate::kService};
  if (!(owner.monetary_reward <= requester.monetary_reward)) return {MatchGate::kReward};
  if (!owner.privacy_level.subset_of(requester.accuracy)) return {MatchGate::kPrivacy};
  if (!requester.temporality.contains(owner.temporality)) return {MatchGate::kTemporality};
  // Each side's requirement is met by the *other* side's key.
  const bool owner_ok = !owner.require_identity_key || evidence_verifies(identity.requester, identity);
  const bool requester_ok = !requester.require_identity_key || evidence_verifies(identity.owner, identity);
  if (!(owner_ok && requester_ok)) return {MatchGate::kIdentity};
  return {};
}

FeeSplit split_reward(Money reward, double fee_fraction) {
  if (!(fee_fraction >= 0.0 && fee_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fee fraction must be in [0,1]");
  }
  Money fee{std::llround(static_cast<double>(reward.micros) * fee_fraction)};
  return {fee, reward - fee};
}

BrokeredMatch match_with_broker(const OwnerTerms& owner, const RequesterTerms& requester,
                                double fee_fraction, const PartyEvidence& broker,
                                const IdentityContext& identity) {
  if (!(fee_fraction >= 0.0 && fee_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fee fraction must be in [0,1]");
  }
  if (!evidence_verifies(broker, identity)) {
    throw Error(ErrorCode::kUnverifiedBroker, "broker identity key does not verify; connection rejected");
  }
  BrokeredMatch out{match_terms(owner, requester, identity), std::nullopt};
  if (out.match.accepted()) out.split = split_reward(requester.monetary_reward, fee_fraction);
  return out;
}

std::string_view to_string(ContractStatus s) noexcept {
  switch (s) {
    case ContractStatus::kProposed: return "proposed";
    case ContractStatus::kActive: return "active";
    case ContractStatus::kExpired: return "expired";
    case ContractStatus::kRevoked: return "revoked";
  }
  return "unknown";
}

std::string_view to_string(DenyReason r) noexcept {
  switch (r) {
    case DenyReason::kNone: return "allow";
    case DenyReason::kNotActive: return "not_active";
    case DenyReason::kNotStarted: return "not_started";
    case DenyReason::kExpired: return "expired";
    case DenyReason::kRevoked: return "revoked";
    case DenyReason::kPrivacy: return "privacy";
  }
  return "unknown";
}

void RewardBook::record(RewardEntry entry) {
  balances_[entry.owner_id] = balances_[entry.owner_id] + entry.owner_credit;
  if (entry.broker_id) balances_[*entry.broker_id] = balances_[*entry.broker_id] + entry.broker_credit;
  entries_.push_back(std::move(entry));
}

Money RewardBook::balance(const std::string& account) const {
  auto it = balances_.find(account);
  return it == balances_.end() ? Money{} : it->second;
}

SmartContract::SmartContract(std::string contract_id, ContractParty owner, ContractParty requester,
                             OwnerTerms owner_terms, RequesterTerms requester_terms,
                             std::optional<ContractParty> broker, std::optional<double> broker_fee_fraction)
    : id_(std::move(contract_id)),
      owner_(std::move(owner)),
      requester_(std::move(requester)),
      broker_(std::move(broker)),
      owner_terms_(std::move(owner_terms)),
      requester_terms_(std::move(requester_terms)),
      fee_(broker_fee_fraction) {
  if (id_.empty()) throw Error(ErrorCode::kInvalidArgument, "contract id must be non-empty");
  owner_terms_.validate();
  requester_terms_.validate();
  if (fee_ && !broker_) throw Error(ErrorCode::kInvalidArgument, "a broker fee needs a broker");
  if (fee_ && !(*fee_ >= 0.0 && *fee_ <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "fee fraction must be in [0,1]");
}

MatchResult SmartContract::evaluate(const IdentityContext& identity, const PartyEvidence* broker_evidence) {
  if (broker_) {
    if (broker_evidence == nullptr) throw Error(ErrorCode::kUnverifiedBroker, "brokered contract without broker evidence");
    match_ = match_with_broker(owner_terms_, requester_terms_, fee_.value_or(0.0), *broker_evidence, identity).match;
  } else {
    match_ = match_terms(owner_terms_, requester_terms_, identity);
  }
  return *match_;
}

TimeWindow SmartContract::agreed_window() const noexcept {
  return {std::max(owner_terms_.temporality.start_ms, requester_terms_.temporality.start_ms),
          std::min(owner_terms_.temporality.end_ms, requester_terms_.temporality.end_ms)};
}

ContractStatus SmartContract::status(std::int64_t now_ms) const noexcept {
  if (status_ == ContractStatus::kActive && now_ms > agreed_window().end_ms) return ContractStatus::kExpired;
  return status_;
}

Digest SmartContract::digest() const {
  ByteWriter w;
  w.str("bsmd.contract.v1");
  w.str(id_);
  encode_party(w, owner_);
  encode_party(w, requester_);
  w.u8(broker_ ? 1 : 0);
  if (broker_) encode_party(w, *broker_);
  w.str(owner_terms_.service_requested);
  w.i64(owner_terms_.monetary_reward.micros);
  encode_disclosure(w, owner_terms_.privacy_level);
  w.i64(owner_terms_.temporality.start_ms);
  w.i64(owner_terms_.temporality.end_ms);
  w.u8(owner_terms_.require_identity_key);
  w.str(requester_terms_.service_provided);
  w.i64(requester_terms_.monetary_reward.micros);
  encode_disclosure(w, requester_terms_.accuracy);
  w.i64(requester_terms_.temporality.start_ms);
  w.i64(requester_terms_.temporality.end_ms);
  w.u8(requester_terms_.require_identity_key);
  w.i64(fee_ ? std::llround(*fee_ * 1e9) : -1);
  return sha256(w.data());
}

bool SmartContract::signature_valid(PartyRole role) const {
  auto it = signatures_.find(role);
  if (it == signatures_.end()) return false;
  const ContractParty* party = role == PartyRole::kOwner       ? &owner_
                               : role == PartyRole::kRequester ? &requester_
                               : broker_                        ? &*broker_
                                                                : nullptr;
  return party != nullptr && verify_signature(party->key, digest(), it->second);
}

std::optional<TxRecord> SmartContract::sign(PartyRole role, const SigningKey& key, std::int64_t now_ms) {
  if (!match_ || !match_->accepted()) throw Error(ErrorCode::kNotMatched, "contract " + id_ + " has no accepted match");
  if (status_ != ContractStatus::kProposed) {
    throw Error(ErrorCode::kInvalidArgument, "contract " + id_ + " is no longer open for signing");
  }
  if (role == PartyRole::kBroker && !broker_) throw Error(ErrorCode::kInvalidArgument, "contract has no broker");
  signatures_[role] = key.sign(digest());
  if (!signature_valid(role)) {
    signatures_.erase(role);
    throw Error(ErrorCode::kCrypto, "signing key does not belong to the party");
  }
  if (signature_valid(PartyRole::kOwner) && signature_valid(PartyRole::kRequester)) {
    status_ = ContractStatus::kActive;
    TxRecord tx;
    tx.timestamp_ms = now_ms;
    tx.kind = TxKind::kPrivate;
    tx.did_requester = requester_.did;
    tx.did_sender = owner_.did;
    if (broker_) tx.broker_id = broker_->did;
    return tx;
  }
  return std::nullopt;
}

void SmartContract::revoke(PartyRole by) {
  if (by == PartyRole::kBroker) throw Error(ErrorCode::kInvalidArgument, "only owner or requester may revoke");
  status_ = ContractStatus::kRevoked;
}

TransferDecision SmartContract::enforce_transfer(std::int64_t now_ms, const DisclosureSet& payload,
                                                 RewardBook& rewards) const {
  switch (status(now_ms)) {
    case ContractStatus::kRevoked: return {DenyReason::kRevoked};
    case ContractStatus::kExpired: return {DenyReason::kExpired};
    case ContractStatus::kProposed: return {DenyReason::kNotActive};
    case ContractStatus::kActive: break;
  }
  if (now_ms < agreed_window().start_ms) return {DenyReason::kNotStarted};
  if (!payload.subset_of(owner_terms_.privacy_level)) return {DenyReason::kPrivacy};

  const FeeSplit split = split_reward(requester_terms_.monetary_reward, fee_.value_or(0.0));
  RewardEntry entry{id_, now_ms, owner_.node_id, split.owner, std::nullopt, split.broker};
  if (broker_) entry.broker_id = broker_->node_id;
  rewards.record(std::move(entry));
  return {};
}

std::optional<TxRecord> sign_contract(SmartContract& contract, PartyRole role, const SigningKey& key,
                                      std::int64_t now_ms) {
  return contract.sign(role, key, now_ms);
}

TransferDecision enforce_transfer(const SmartContract& contract, std::int64_t now_ms,
                                  const DisclosureSet& payload, RewardBook& rewards) {
  return contract.enforce_transfer(now_ms, payload, rewards);
}

void revoke(SmartContract& contract, PartyRole by) { contract.revoke(by); }

SmartContract& ContractBook::add(SmartContract contract) {
  std::string id = contract.id();
  auto [it, inserted] = contracts_.emplace(id, std::move(contract));
  if (!inserted) throw Error(ErrorCode::kDuplicateContract, "contract id " + id + " already used");
  return it->second;
}

SmartContract* ContractBook::find(const std::string& id) {
  auto it = contracts_.find(id);
  return it == contracts_.end() ? nullptr : &it->second;
}

const SmartContract* ContractBook::find(const std::string& id) const {
  auto it = contracts_.find(id);
  return it == contracts_.end() ? nullptr : &it->second;
}

}  // namespace bsmd
