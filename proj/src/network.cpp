#include "bsmd/network.hpp"

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"

namespace bsmd {

namespace {

void put_short(ByteWriter& w, const std::string& s) {
  if (s.size() > 0xFFFF) throw Error(ErrorCode::kInvalidArgument, "frame header field too long");
  w.u16(static_cast<std::uint16_t>(s.size()));
  w.raw(as_bytes(s));
}

std::string get_short(ByteReader& r) {
  Bytes b = r.raw(r.u16());
  return {b.begin(), b.end()};
}

}  // namespace

Bytes Frame::encode() const {
  ByteWriter inner;
  put_short(inner, sender_did);
  put_short(inner, receiver_did);
  put_short(inner, contract_id);
  inner.bytes(body);
  ByteWriter out;
  out.bytes(inner.data());
  return out.take();
}

Frame Frame::decode(ByteView bytes) {
  ByteReader outer(bytes);
  Bytes inner_bytes = outer.bytes();
  if (!outer.done()) throw Error(ErrorCode::kParse, "trailing bytes after frame");
  ByteReader r(inner_bytes);
  Frame f;
  f.sender_did = get_short(r);
  f.receiver_did = get_short(r);
  f.contract_id = get_short(r);
  f.body = r.bytes();
  if (!r.done()) throw Error(ErrorCode::kParse, "frame length mismatch");
  return f;
}

const DidRecord& Network::create_did(const std::string& node, DidKind kind,
                                     std::map<std::string, std::string> doc) {
  DidRecord rec;
  rec.kind = kind;
  rec.owner = node;
  rec.endpoint = endpoint_of(node);
  rec.keys = BoxKeyPair::from_seed(seed_from(rng_));
  Digest d = sha256(ByteView(rec.keys.public_key()));
  rec.did = "did:bsmd:" + to_hex(ByteView(d.data(), 16));
  if (kind == DidKind::kPublic) rec.doc = std::move(doc);
  auto [it, inserted] = dids_.emplace(rec.did, std::move(rec));
  if (!inserted) throw Error(ErrorCode::kInternal, "DID collision");
  return it->second;
}

std::optional<DidDocument> Network::resolve(const std::string& did) const {
  const DidRecord* rec = find_did(did);
  if (rec == nullptr || rec->kind != DidKind::kPublic || rec->revoked) return std::nullopt;
  return DidDocument{rec->did, rec->endpoint, rec->keys.public_key(), rec->doc};
}

std::vector<DidDocument> Network::public_documents() const {
  std::vector<DidDocument> out;
  for (const auto& [did, rec] : dids_) {
    if (auto doc = resolve(did)) out.push_back(std::move(*doc));
  }
  return out;
}

const DidRecord* Network::find_did(const std::string& did) const {
  auto it = dids_.find(did);
  return it == dids_.end() ? nullptr : &it->second;
}

std::vector<std::string> Network::dids_of(const std::string& node) const {
  std::vector<std::string> out;
  for (const auto& [did, rec] : dids_) {
    if (rec.owner == node) out.push_back(did);
  }
  return out;
}

const DidRecord& Network::did_for(const std::string& node, const std::string& preferred) {
  auto it = dids_.find(preferred);
  if (it != dids_.end() && it->second.owner == node && it->second.kind == DidKind::kPairwise &&
      !it->second.revoked && bound_pairwise_.insert(preferred).second) {
    return it->second;
  }
  const DidRecord& fresh = create_did(node, DidKind::kPairwise);
  bound_pairwise_.insert(fresh.did);
  return fresh;
}

ChannelPair Network::open_channel(const SmartContract& contract, std::int64_t now_ms) {
  if (contract.status(now_ms) != ContractStatus::kActive) {
    throw Error(ErrorCode::kInactiveContract, "contract " + contract.id() + " is not active");
  }
  const DidRecord& owner_did = did_for(contract.owner().node_id, contract.owner().did);
  const DidRecord& requester_did = did_for(contract.requester().node_id, contract.requester().did);

  ChannelEnd a;
  a.id = next_channel_++;
  a.node = owner_did.owner;
  a.local_did = owner_did.did;
  a.remote_did = requester_did.did;
  a.remote_key = requester_did.keys.public_key();
  a.contract_id = contract.id();
  a.direction = 0;
  a.session = SessionKey::derive(owner_did.keys, requester_did.keys.public_key());

  ChannelEnd b;
  b.id = next_channel_++;
  b.node = requester_did.owner;
  b.local_did = requester_did.did;
  b.remote_did = owner_did.did;
  b.remote_key = owner_did.keys.public_key();
  b.contract_id = contract.id();
  b.direction = 1;
  b.session = SessionKey::derive(requester_did.keys, owner_did.keys.public_key());

  a.peer = b.id;
  b.peer = a.id;
  ChannelPair pair{a.id, b.id};
  channels_.emplace(a.id, std::move(a));
  channels_.emplace(b.id, std::move(b));
  return pair;
}

ChannelEnd& Network::end(ChannelId id) {
  auto it = channels_.find(id);
  if (it == channels_.end()) throw Error(ErrorCode::kUnknownEntity, "unknown channel");
  return it->second;
}

const ChannelEnd& Network::channel(ChannelId id) const {
  auto it = channels_.find(id);
  if (it == channels_.end()) throw Error(ErrorCode::kUnknownEntity, "unknown channel");
  return it->second;
}

SendReceipt Network::send_encrypted(ChannelId channel_id, ByteView plaintext) {
  ChannelEnd& ch = end(channel_id);
  if (ch.state != ChannelState::kOpen || ch.session.erased()) {
    throw Error(ErrorCode::kChannelClosed, "channel for contract " + ch.contract_id + " is closed");
  }
  Frame f{ch.local_did, ch.remote_did, ch.contract_id, ch.session.seal(plaintext, ch.next_counter++, ch.direction)};
  const std::string& to_node = channels_.at(ch.peer).node;
  const SimTime sent_at = transport_.loop().now();
  const ChannelId receiver = ch.peer;
  ++stats_.sent;
  SendReceipt receipt{next_message_++, SendStatus::kQueued};
  bool queued = transport_.send(endpoint_of(ch.node), endpoint_of(to_node), f.encode(), FrameClass::kData,
                                [this, receiver, sent_at](const Bytes& bytes) { deliver(bytes, receiver, sent_at); });
  if (!queued) {
    ++stats_.dropped;
    receipt.status = SendStatus::kDropped;
  }
  return receipt;
}

void Network::deliver(const Bytes& frame_bytes, ChannelId receiver, SimTime sent_at) {
  ChannelEnd& ch = end(receiver);
  Frame f = Frame::decode(frame_bytes);
  std::optional<Bytes> plain;
  if (ch.state == ChannelState::kOpen && f.receiver_did == ch.local_did) plain = ch.session.open(f.body);
  if (!plain) {
    ++stats_.undeliverable;
    return;
  }
  ++stats_.delivered;
  Delivery d{receiver, ch.contract_id, std::move(*plain), sent_at, transport_.loop().now()};
  if (handler_) handler_(d);
  if (keep_inbox_) inboxes_[receiver].push_back(std::move(d));
}

const std::vector<Delivery>& Network::inbox(ChannelId channel_id) const {
  static const std::vector<Delivery> kEmpty;
  auto it = inboxes_.find(channel_id);
  return it == inboxes_.end() ? kEmpty : it->second;
}

void Network::close_channel(ChannelId id) {
  ChannelEnd& ch = end(id);
  for (ChannelEnd* e : {&ch, &end(ch.peer)}) {
    e->state = ChannelState::kClosed;
    e->session.erase();
  }
}

void Network::close_contract_channels(const std::string& contract_id) {
  for (auto& [id, ch] : channels_) {
    if (ch.contract_id == contract_id && ch.state == ChannelState::kOpen) close_channel(id);
  }
}

std::vector<std::string> Network::revoke_did(const std::string& node, const std::string& did) {
  auto it = dids_.find(did);
  if (it == dids_.end()) throw Error(ErrorCode::kUnknownEntity, "unknown DID " + did);
  if (it->second.owner != node) throw Error(ErrorCode::kNotOwner, node + " does not own " + did);
  it->second.revoked = true;
  it->second.keys.erase();

  std::vector<std::string> affected;
  for (auto& [id, ch] : channels_) {
    if ((ch.local_did == did || ch.remote_did == did) && ch.state == ChannelState::kOpen) {
      close_channel(id);
      affected.push_back(ch.contract_id);
    }
  }
  return affected;
}

}  // namespace bsmd
