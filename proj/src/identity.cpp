#include "bsmd/identity.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"

namespace bsmd {

using nlohmann::json;

namespace {

PublicKey key_from(const Bytes& bytes) {
  if (bytes.size() != 32) throw Error(ErrorCode::kParse, "public key must be 32 bytes");
  PublicKey k{};
  std::copy(bytes.begin(), bytes.end(), k.begin());
  return k;
}

Digest digest_from_hex(const std::string& hex) {
  Bytes b = from_hex(hex);
  if (b.size() != 32) throw Error(ErrorCode::kParse, "digest must be 32 bytes");
  Digest d{};
  std::copy(b.begin(), b.end(), d.begin());
  return d;
}

SignatureBytes sig_from(const Bytes& bytes) {
  if (bytes.size() != 64) throw Error(ErrorCode::kParse, "signature must be 64 bytes");
  SignatureBytes s{};
  std::copy(bytes.begin(), bytes.end(), s.begin());
  return s;
}

Digest attribute_commitment(const AttributeValue& a) {
  ByteWriter w;
  w.str("bsmd.attr.v1");
  w.str(a.name);
  w.str(a.value);
  w.str(a.salt);
  return sha256(w.data());
}

Digest digest_over(const std::string& schema_id, const std::string& issuer_id,
                   const std::string& holder_did, const PublicKey& holder_key,
                   std::vector<std::pair<std::string, Digest>> leaves) {
  std::sort(leaves.begin(), leaves.end());
  ByteWriter w;
  w.str("bsmd.credential.v1");
  w.str(schema_id);
  w.str(issuer_id);
  w.str(holder_did);
  w.raw(holder_key);
  w.u32(static_cast<std::uint32_t>(leaves.size()));
  for (const auto& [name, leaf] : leaves) {
    w.str(name);
    w.raw(leaf);
  }
  return sha256(w.data());
}

Bytes proof_binding(const std::string& nonce, const Digest& registry_digest,
                    const std::vector<AttributeValue>& disclosed) {
  ByteWriter w;
  w.str("bsmd.proof.v1");
  w.str(nonce);
  w.raw(registry_digest);
  w.u32(static_cast<std::uint32_t>(disclosed.size()));
  for (const auto& a : disclosed) {
    w.str(a.name);
    w.str(a.value);
  }
  return w.take();
}

Bytes to_payload(const json& j) {
  std::string s = j.dump();
  return {s.begin(), s.end()};
}

Issuance make_credential(const NodeIdentity& issuer, const CredentialSchema& schema,
                         const std::string& holder_did, const PublicKey& holder_key,
                         const std::map<std::string, std::string>& values, std::mt19937_64& rng,
                         std::int64_t now_ms, const std::optional<Digest>& supersedes) {
  if (schema.issuer_id != issuer.node_id) {
    throw Error(ErrorCode::kUntrustedIssuer, "only the schema issuer may sign its credentials");
  }
  for (const auto& [name, value] : values) {
    if (std::find(schema.attributes.begin(), schema.attributes.end(), name) == schema.attributes.end()) {
      throw Error(ErrorCode::kInvalidArgument, "attribute '" + name + "' is not in schema " + schema.schema_id);
    }
  }
  Credential c;
  c.schema_id = schema.schema_id;
  c.issuer_id = issuer.node_id;
  c.holder_did = holder_did;
  c.holder_key = holder_key;
  for (const auto& [name, value] : values) {
    Seed salt = seed_from(rng);
    c.attributes.push_back({name, value, to_hex(ByteView(salt.data(), 16))});
  }
  c.registry_digest = credential_digest(c);
  c.issuer_signature = issuer.key.sign(c.registry_digest);

  json payload;
  payload["type"] = "credential_registry";
  payload["schema_id"] = c.schema_id;
  payload["issuer_id"] = c.issuer_id;
  payload["registry_digest"] = to_hex(c.registry_digest);
  payload["issuer_signature"] = to_base64(c.issuer_signature);
  payload["supersedes"] = supersedes ? json(to_hex(*supersedes)) : json(nullptr);

  TxRecord tx;
  tx.timestamp_ms = now_ms;
  tx.kind = TxKind::kPublic;
  tx.did_sender = issuer.did;
  tx.did_requester = holder_did;
  tx.payload = to_payload(payload);
  return {std::move(c), std::move(tx)};
}

}  // namespace

std::string_view to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::kIndividual: return "individual";
    case NodeKind::kCompany: return "company";
    case NodeKind::kUniversity: return "university";
    case NodeKind::kGovernment: return "government";
    case NodeKind::kNonProfit: return "non_profit";
  }
  return "individual";
}

NodeKind parse_node_kind(std::string_view text) {
  for (NodeKind k : {NodeKind::kIndividual, NodeKind::kCompany, NodeKind::kUniversity,
                     NodeKind::kGovernment, NodeKind::kNonProfit}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::kParse, "unknown node kind '" + std::string(text) + "'");
}

void Identification::set_static(std::string key, std::string value) {
  static_[std::move(key)] = std::move(value);
}

void Identification::append_dynamic(const MobilityRecord& record) {
  if (!dynamic_.empty() && record.timestamp_ms < dynamic_.back().timestamp_ms) {
    throw Error(ErrorCode::kInvalidArgument, "dynamic records must be time ordered");
  }
  dynamic_.push_back(record);
}

std::string Identification::to_json() const {
  json j;
  j["metadata"]["kind"] = to_string(metadata_.kind);
  j["metadata"]["did"] = metadata_.did;
  j["metadata"]["identity_key"] = metadata_.identity_key ? json(*metadata_.identity_key) : json(nullptr);
  j["metadata"]["tags"] = metadata_.tags;
  j["static"] = static_;
  json dyn = json::array();
  for (const auto& r : dynamic_) dyn.push_back({{"timestamp", r.timestamp_ms}, {"x", r.x}, {"y", r.y}});
  j["dynamic"] = dyn;
  return j.dump(2);
}

Identification Identification::from_json(std::string_view text) {
  try {
    json j = json::parse(text);
    const json& meta = j.at("metadata");
    for (const auto& [key, _] : meta.items()) {
      if (key != "kind" && key != "did" && key != "identity_key" && key != "tags") {
        throw Error(ErrorCode::kParse, "metadata may not carry field '" + key + "'");
      }
    }
    Metadata m;
    m.kind = parse_node_kind(meta.at("kind").get<std::string>());
    m.did = meta.at("did").get<std::string>();
    if (meta.contains("identity_key") && !meta["identity_key"].is_null()) {
      m.identity_key = meta["identity_key"].get<std::string>();
    }
    if (meta.contains("tags")) m.tags = meta["tags"].get<std::vector<std::string>>();
    Identification id(std::move(m));
    if (j.contains("static")) {
      for (const auto& [k, v] : j["static"].items()) id.set_static(k, v.get<std::string>());
    }
    if (j.contains("dynamic")) {
      for (const auto& r : j["dynamic"]) {
        id.append_dynamic({r.at("timestamp").get<std::int64_t>(), r.at("x").get<double>(),
                           r.at("y").get<double>()});
      }
    }
    return id;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
}

void Identification::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << to_json() << '\n';
}

Identification Identification::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

NodeIdentity NodeIdentity::create(std::string node_id, NodeKind kind, std::mt19937_64& rng) {
  NodeIdentity id{std::move(node_id), kind, {}, SigningKey::from_seed(seed_from(rng))};
  Digest d = sha256(ByteView(id.key.public_key()));
  id.did = "did:bsmd:" + to_hex(ByteView(d.data(), 16));
  return id;
}

CredentialRegistry CredentialRegistry::from_ledger(const Ledger& ledger) {
  CredentialRegistry r;
  r.sync(ledger);
  return r;
}

void CredentialRegistry::sync(const Ledger& ledger) {
  for (; synced_blocks_ < ledger.size(); ++synced_blocks_) {
    const Block& block = ledger.at(synced_blocks_);
    if (block.kind() != TxKind::kPublic) continue;
    for (const auto& tx : block.transactions) index(tx);
  }
}

void CredentialRegistry::index(const TxRecord& tx) {
  if (!tx.payload) return;
  json j = json::parse(tx.payload->begin(), tx.payload->end(), nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("type")) return;
  try {
    if (j["type"] == "schema") {
      CredentialSchema s;
      s.schema_id = j.at("schema_id").get<std::string>();
      s.issuer_id = j.at("issuer_id").get<std::string>();
      s.issuer_key = key_from(from_base64(j.at("issuer_key").get<std::string>()));
      s.attributes = j.at("attributes").get<std::vector<std::string>>();
      schemas_.emplace(s.schema_id, std::move(s));  // first publication wins
    } else if (j["type"] == "credential_registry") {
      Entry e;
      e.schema_id = j.at("schema_id").get<std::string>();
      e.issuer_id = j.at("issuer_id").get<std::string>();
      e.issuer_signature = sig_from(from_base64(j.at("issuer_signature").get<std::string>()));
      Digest digest = digest_from_hex(j.at("registry_digest").get<std::string>());
      if (!j["supersedes"].is_null()) {
        auto old = entries_.find(digest_from_hex(j["supersedes"].get<std::string>()));
        if (old != entries_.end() && old->second.issuer_id == e.issuer_id) old->second.superseded = true;
      }
      entries_.emplace(digest, std::move(e));
    }
  } catch (const std::exception&) {
    // Malformed registry payloads are ignored; they can never verify.
  }
}

const CredentialSchema* CredentialRegistry::find_schema(const std::string& schema_id) const {
  auto it = schemas_.find(schema_id);
  return it == schemas_.end() ? nullptr : &it->second;
}

const CredentialRegistry::Entry* CredentialRegistry::find_entry(const Digest& digest) const {
  auto it = entries_.find(digest);
  return it == entries_.end() ? nullptr : &it->second;
}

SchemaPublication create_schema(const NodeIdentity& issuer, std::string schema_id,
                                std::vector<std::string> attributes, const TrustPolicy& trust,
                                const CredentialRegistry& registry, std::int64_t now_ms) {
  if (!trust.is_trusted(issuer.node_id)) {
    throw Error(ErrorCode::kUntrustedIssuer, issuer.node_id + " is not a trusted issuer");
  }
  if (registry.find_schema(schema_id) != nullptr) {
    throw Error(ErrorCode::kDuplicateSchema, "schema " + schema_id + " already on ledger");
  }
  if (schema_id.empty() || attributes.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "schema needs an id and at least one attribute");
  }
  std::sort(attributes.begin(), attributes.end());
  attributes.erase(std::unique(attributes.begin(), attributes.end()), attributes.end());

  CredentialSchema schema{std::move(schema_id), issuer.node_id, issuer.key.public_key(),
                          std::move(attributes)};
  json payload;
  payload["type"] = "schema";
  payload["schema_id"] = schema.schema_id;
  payload["issuer_id"] = schema.issuer_id;
  payload["issuer_key"] = to_base64(schema.issuer_key);
  payload["attributes"] = schema.attributes;

  TxRecord tx;
  tx.timestamp_ms = now_ms;
  tx.kind = TxKind::kPublic;
  tx.did_sender = issuer.did;
  tx.did_requester = std::string(kRegistryDid);
  tx.payload = to_payload(payload);
  return {std::move(schema), std::move(tx)};
}

Issuance issue_credential(const NodeIdentity& issuer, const std::string& schema_id,
                          const std::string& holder_did, const PublicKey& holder_key,
                          const std::map<std::string, std::string>& values,
                          const CredentialRegistry& registry, std::mt19937_64& rng,
                          std::int64_t now_ms) {
  const CredentialSchema* schema = registry.find_schema(schema_id);
  if (schema == nullptr) throw Error(ErrorCode::kUnknownSchema, "schema " + schema_id + " is not on the ledger");
  return make_credential(issuer, *schema, holder_did, holder_key, values, rng, now_ms, std::nullopt);
}

Issuance rotate_credential(const NodeIdentity& issuer, const Credential& old,
                           const std::map<std::string, std::string>& values,
                           const CredentialRegistry& registry, std::mt19937_64& rng,
                           std::int64_t now_ms) {
  const CredentialSchema* schema = registry.find_schema(old.schema_id);
  if (schema == nullptr) throw Error(ErrorCode::kUnknownSchema, "schema " + old.schema_id + " is not on the ledger");
  return make_credential(issuer, *schema, old.holder_did, old.holder_key, values, rng, now_ms,
                         old.registry_digest);
}

Digest credential_digest(const Credential& c) {
  std::vector<std::pair<std::string, Digest>> leaves;
  for (const auto& a : c.attributes) leaves.emplace_back(a.name, attribute_commitment(a));
  return digest_over(c.schema_id, c.issuer_id, c.holder_did, c.holder_key, std::move(leaves));
}

std::string ProofApplication::to_json() const {
  json j;
  j["schema_id"] = schema_id;
  j["issuer_id"] = issuer_id;
  j["holder_did"] = holder_did;
  j["holder_key"] = to_base64(holder_key);
  json d = json::array();
  for (const auto& a : disclosed) d.push_back({{"name", a.name}, {"value", a.value}, {"salt", a.salt}});
  j["disclosed"] = d;
  json h = json::array();
  for (const auto& [name, leaf] : hidden) h.push_back({{"name", name}, {"commitment", to_hex(leaf)}});
  j["hidden"] = h;
  j["issuer_signature"] = to_base64(issuer_signature);
  j["registry_digest"] = to_hex(registry_digest);
  j["holder_signature"] = to_base64(holder_signature);
  return j.dump();
}

ProofApplication build_proof(const CredentialWallet& wallet, const ProofRequest& request,
                             const CredentialRegistry& registry) {
  for (const auto& c : wallet.credentials()) {
    const auto* entry = registry.find_entry(c.registry_digest);
    if (entry == nullptr || entry->superseded) continue;
    bool satisfies = std::all_of(request.required.begin(), request.required.end(), [&](const auto& req) {
      return std::any_of(c.attributes.begin(), c.attributes.end(),
                         [&](const AttributeValue& a) { return a.name == req.first && a.value == req.second; });
    });
    if (!satisfies) continue;

    ProofApplication p;
    p.schema_id = c.schema_id;
    p.issuer_id = c.issuer_id;
    p.holder_did = c.holder_did;
    p.holder_key = c.holder_key;
    for (const auto& a : c.attributes) {
      if (request.required.count(a.name)) {
        p.disclosed.push_back(a);
      } else {
        p.hidden.emplace_back(a.name, attribute_commitment(a));
      }
    }
    p.issuer_signature = c.issuer_signature;
    p.registry_digest = c.registry_digest;
    p.holder_signature = wallet.holder().key.sign(proof_binding(request.nonce, p.registry_digest, p.disclosed));
    return p;
  }
  throw Error(ErrorCode::kNoProof, "no ledger-registered credential satisfies the application");
}

bool verify_proof(const ProofRequest& request, const ProofApplication& proof,
                  const CredentialRegistry& registry, const TrustPolicy& trust) {
  const auto* entry = registry.find_entry(proof.registry_digest);
  if (entry == nullptr || entry->superseded) return false;
  if (entry->schema_id != proof.schema_id || entry->issuer_id != proof.issuer_id) return false;
  if (entry->issuer_signature != proof.issuer_signature) return false;
  if (!trust.is_trusted(proof.issuer_id)) return false;
  const CredentialSchema* schema = registry.find_schema(proof.schema_id);
  if (schema == nullptr || schema->issuer_id != proof.issuer_id) return false;

  std::vector<std::pair<std::string, Digest>> leaves = proof.hidden;
  for (const auto& a : proof.disclosed) leaves.emplace_back(a.name, attribute_commitment(a));
  Digest recomputed = digest_over(proof.schema_id, proof.issuer_id, proof.holder_did,
                                  proof.holder_key, std::move(leaves));
  if (recomputed != proof.registry_digest) return false;
  if (!verify_signature(schema->issuer_key, proof.registry_digest, proof.issuer_signature)) return false;

  for (const auto& [name, value] : request.required) {
    bool found = std::any_of(proof.disclosed.begin(), proof.disclosed.end(),
                             [&](const AttributeValue& a) { return a.name == name && a.value == value; });
    if (!found) return false;
  }
  return verify_signature(proof.holder_key,
                          proof_binding(request.nonce, proof.registry_digest, proof.disclosed),
                          proof.holder_signature);
}

std::string_view to_string(ConnectionDecision d) noexcept {
  switch (d) {
    case ConnectionDecision::kConnected: return "connected";
    case ConnectionDecision::kNoProof: return "no_proof";
    case ConnectionDecision::kRejected: return "rejected";
  }
  return "rejected";
}

ConnectionDecision authenticate_peer(const CredentialWallet& wallet, const ProofRequest& request,
                                     const CredentialRegistry& registry, const TrustPolicy& trust) {
  ProofApplication proof;
  try {
    proof = build_proof(wallet, request, registry);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNoProof) return ConnectionDecision::kNoProof;
    throw;
  }
  return verify_proof(request, proof, registry, trust) ? ConnectionDecision::kConnected
                                                       : ConnectionDecision::kRejected;
}

}  // namespace bsmd
