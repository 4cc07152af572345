#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bsmd/contract.hpp"
#include "bsmd/crypto.hpp"
#include "bsmd/transport.hpp"

namespace bsmd {

enum class DidKind : std::uint8_t { kPublic, kPairwise };

struct DidRecord {
  std::string did;
  DidKind kind = DidKind::kPublic;
  std::string owner;     // node id
  std::string endpoint;  // simulated address
  BoxKeyPair keys;
  std::map<std::string, std::string> doc;  // public kind only
  bool revoked = false;
};

// What the public resolver hands out for a DID_p.
struct DidDocument {
  std::string did;
  std::string endpoint;
  PublicKey key{};
  std::map<std::string, std::string> doc;
};

// Wire frame: u32 total length, then u16-length-prefixed sender DID,
// receiver DID and contract id, then u32-length-prefixed body
// (nonce || ciphertext).
struct Frame {
  std::string sender_did;
  std::string receiver_did;
  std::string contract_id;
  Bytes body;

  Bytes encode() const;
  static Frame decode(ByteView bytes);
};

enum class ChannelState { kOpen, kClosed };

using ChannelId = std::uint64_t;

struct ChannelEnd {
  ChannelId id = 0;
  ChannelId peer = 0;
  std::string node;
  std::string local_did;
  std::string remote_did;
  PublicKey remote_key{};
  std::string contract_id;
  ChannelState state = ChannelState::kOpen;
  std::uint8_t direction = 0;
  std::uint64_t next_counter = 0;
  SessionKey session;
};

struct ChannelPair {
  ChannelId owner_end = 0;
  ChannelId requester_end = 0;
};

struct Delivery {
  ChannelId channel = 0;
  std::string contract_id;
  Bytes plaintext;
  SimTime sent_at = 0;
  SimTime delivered_at = 0;
};

enum class SendStatus { kQueued, kDropped };

struct SendReceipt {
  std::uint64_t message_id = 0;
  SendStatus status = SendStatus::kQueued;
};

struct NetworkStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t undeliverable = 0;  // arrived after the receiving side closed
};

// DID registry, pairwise encrypted channels and delivery over SimTransport.
class Network {
 public:
  using DeliveryHandler = std::function<void(const Delivery&)>;

  Network(SimTransport& transport, std::uint64_t seed) : transport_(transport), rng_(seed) {}

  static std::string endpoint_of(const std::string& node) { return "sim://" + node; }

  const DidRecord& create_did(const std::string& node, DidKind kind,
                              std::map<std::string, std::string> doc = {});

  // Public resolver; pairwise and revoked DIDs are never resolvable.
  std::optional<DidDocument> resolve(const std::string& did) const;
  std::vector<DidDocument> public_documents() const;

  // Opens the channel for an active contract between its owner and
  // requester nodes. Uses the contract's DIDs when they are unused pairwise
  // DIDs of the right nodes, otherwise creates fresh ones.
  // Throws InactiveContract unless the contract is active at `now_ms`.
  ChannelPair open_channel(const SmartContract& contract, std::int64_t now_ms);

  SendReceipt send_encrypted(ChannelId channel, ByteView plaintext);

  void close_channel(ChannelId channel);
  void close_contract_channels(const std::string& contract_id);

  // Erases the DID's keys and closes every channel bound to it. Returns the
  // contract ids whose channels were closed. Throws NotOwner.
  std::vector<std::string> revoke_did(const std::string& node, const std::string& did);

  const ChannelEnd& channel(ChannelId id) const;
  const DidRecord* find_did(const std::string& did) const;
  std::vector<std::string> dids_of(const std::string& node) const;

  void on_delivery(DeliveryHandler handler) { handler_ = std::move(handler); }
  const std::vector<Delivery>& inbox(ChannelId channel) const;
  void keep_inbox(bool on) { keep_inbox_ = on; }

  const NetworkStats& stats() const noexcept { return stats_; }
  SimTransport& transport() noexcept { return transport_; }

 private:
  ChannelEnd& end(ChannelId id);
  const DidRecord& did_for(const std::string& node, const std::string& preferred);
  void deliver(const Bytes& frame_bytes, ChannelId receiver, SimTime sent_at);

  SimTransport& transport_;
  std::mt19937_64 rng_;
  std::map<std::string, DidRecord> dids_;
  std::set<std::string> bound_pairwise_;
  std::map<ChannelId, ChannelEnd> channels_;
  std::map<ChannelId, std::vector<Delivery>> inboxes_;
  ChannelId next_channel_ = 1;
  std::uint64_t next_message_ = 1;
  DeliveryHandler handler_;
  bool keep_inbox_ = true;
  NetworkStats stats_;
};

}  // namespace bsmd
