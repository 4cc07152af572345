#include "bsmd/consensus.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"

namespace bsmd {

namespace {

enum MsgType : std::uint8_t { kProposal = 1, kVote = 2, kCert = 3 };

constexpr std::string_view kProposalTag = "bsmd.proposal.v1";

Bytes proposal_signing_bytes(std::uint64_t height, std::uint32_t round, const Digest& digest) {
  ByteWriter w;
  w.str(kProposalTag);
  w.u64(height);
  w.u32(round);
  w.raw(digest);
  return w.take();
}

template <std::size_t N>
std::array<std::uint8_t, N> fixed(const Bytes& b) {
  if (b.size() != N) throw Error(ErrorCode::kParse, "fixed-size field has wrong length");
  std::array<std::uint8_t, N> out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

bool well_formed(const Block& block) {
  if (block.transactions.empty()) return false;
  const TxKind kind = block.transactions.front().kind;
  for (const auto& tx : block.transactions) {
    if (tx.kind != kind) return false;
    try {
      validate(tx);
    } catch (const Error&) {
      return false;
    }
  }
  return kind == TxKind::kPublic || block.transactions.size() == 1;
}

}  // namespace

std::string_view to_string(FaultMode m) noexcept {
  switch (m) {
    case FaultMode::kHonest: return "honest";
    case FaultMode::kSilent: return "silent";
    case FaultMode::kRandomVotes: return "random-votes";
    case FaultMode::kEquivocate: return "equivocate";
  }
  return "?";
}

ActiveNodeSet ActiveNodeSet::create(std::size_t n, std::size_t faulty, FaultMode fault_mode, std::mt19937_64& rng,
                                    const std::string& prefix) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "active node set must not be empty");
  if (faulty > n) throw Error(ErrorCode::kInvalidArgument, "more faulty members than members");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_faulty(n, false);
  for (std::size_t i = 0; i < faulty; ++i) is_faulty[order[i]] = true;

  ActiveNodeSet set;
  for (std::size_t i = 0; i < n; ++i) {
    set.add(ActiveMember{prefix + "-" + std::to_string(i), SigningKey::from_seed(seed_from(rng)),
                         is_faulty[i] ? fault_mode : FaultMode::kHonest});
  }
  return set;
}

std::optional<std::size_t> ActiveNodeSet::index_of(const std::string& node_id) const {
  for (std::size_t i = 0; i < members_.size(); ++i) {
    if (members_[i].node_id == node_id) return i;
  }
  return std::nullopt;
}

std::size_t ActiveNodeSet::faulty_count() const {
  return static_cast<std::size_t>(std::count_if(members_.begin(), members_.end(),
                                                [](const ActiveMember& m) { return m.mode != FaultMode::kHonest; }));
}

ValidatorSet ActiveNodeSet::validators() const {
  ValidatorSet v;
  for (const auto& m : members_) v.add(m.node_id, m.key.public_key());
  return v;
}

std::optional<std::uint64_t> TxPool::submit(TxRecord tx, SimTime now) {
  ++stats_.submitted;
  if (capacity_ != 0 && entries_.size() >= capacity_) {
    ++stats_.rejected;
    return std::nullopt;
  }
  const std::uint64_t id = next_id_++;
  entries_.push_back(PoolEntry{id, std::move(tx), now, false});
  index_.emplace(id, now);
  return id;
}

std::vector<PoolEntry> TxPool::expire(SimTime now) {
  std::vector<PoolEntry> out;
  if (tx_timeout_ <= 0) return out;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (!it->proposed && now - it->submitted > tx_timeout_) {
      index_.erase(it->id);
      out.push_back(std::move(*it));
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  stats_.expired += out.size();
  return out;
}

std::vector<PoolEntry> TxPool::head_batch(std::size_t max_public) const {
  std::vector<PoolEntry> out;
  if (entries_.empty()) return out;
  if (entries_.front().tx.kind == TxKind::kPrivate) {
    out.push_back(entries_.front());
    return out;
  }
  for (const auto& e : entries_) {
    if (e.tx.kind != TxKind::kPublic || out.size() >= max_public) break;
    out.push_back(e);
  }
  return out;
}

void TxPool::mark_proposed(const std::vector<std::uint64_t>& ids) {
  for (auto& e : entries_) {
    if (std::find(ids.begin(), ids.end(), e.id) != ids.end()) e.proposed = true;
  }
}

bool TxPool::remove(std::uint64_t id) {
  if (index_.erase(id) == 0) return false;
  auto it = std::find_if(entries_.begin(), entries_.end(), [id](const PoolEntry& e) { return e.id == id; });
  if (it != entries_.end()) entries_.erase(it);
  return true;
}

std::optional<SimTime> TxPool::submitted_at(std::uint64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<Block> propose(const ActiveNodeSet& set, const std::string& node_id, std::uint64_t height,
                             std::uint32_t round, const TxPool& pool, const Digest& prev,
                             std::int64_t timestamp_ms, std::size_t max_public_batch) {
  auto idx = set.index_of(node_id);
  if (!idx || *idx != set.proposer(height, round)) {
    throw Error(ErrorCode::kNotProposer, node_id + " is not the proposer for height " + std::to_string(height) +
                                             " round " + std::to_string(round));
  }
  auto batch = pool.head_batch(max_public_batch);
  if (batch.empty()) return std::nullopt;
  if (batch.front().tx.kind == TxKind::kPrivate) {
    return build_private_block(batch.front().tx, prev, height, timestamp_ms);
  }
  std::vector<TxRecord> txs;
  txs.reserve(batch.size());
  for (auto& e : batch) txs.push_back(std::move(e.tx));
  return build_public_block(txs, prev, height, timestamp_ms);
}

// One member's replica of the state machine.
struct Consensus::Node {
  Consensus& c;
  std::size_t idx;
  FaultMode mode;
  std::unique_ptr<Ledger> ledger;
  std::mt19937_64 rng;

  std::uint64_t height = 0;
  std::uint32_t round = 0;
  bool active = false;
  bool gave_up = false;
  bool commit_pending = false;
  std::uint64_t timer_token = 0;
  SimTime last_commit = std::numeric_limits<SimTime>::min() / 4;
  std::optional<Digest> locked;
  std::map<Digest, std::shared_ptr<const Block>> known;
  std::map<Digest, std::map<std::size_t, SignatureBytes>> votes;
  std::set<std::pair<std::uint32_t, Digest>> voted;
  std::map<std::uint64_t, std::vector<std::pair<std::size_t, Bytes>>> future;

  // byzantine bookkeeping
  std::set<Digest> echoed;
  std::set<std::pair<std::uint64_t, std::uint32_t>> scrambled;

  Node(Consensus& owner, std::size_t i, FaultMode m, std::uint64_t seed) : c(owner), idx(i), mode(m), rng(seed) {
    if (mode == FaultMode::kHonest) ledger = std::make_unique<Ledger>(c.set_.validators());
  }

  EventLoop& loop() { return c.transport_.loop(); }
  bool writer() const { return c.set_.proposer(height, round) == idx; }

  void handle(std::size_t from, const Bytes& msg) {
    if (msg.empty()) return;
    if (mode != FaultMode::kHonest) {
      byzantine(msg);
      return;
    }
    try {
      ByteReader r(msg);
      const std::uint8_t type = r.u8();
      const std::uint64_t h = r.u64();
      if (h < height) return;
      if (h > height) {
        future[h].emplace_back(from, msg);
        return;
      }
      if (type == kProposal) on_proposal(r);
      else if (type == kVote) on_vote(r);
      else if (type == kCert) on_cert(from, msg, r);
    } catch (const Error&) {
      // malformed traffic is ignored
    }
  }

  void arm() {
    const std::uint64_t token = ++timer_token;
    const SimTime delay = c.params_.timeout << std::min<std::uint32_t>(round, 30);
    loop().after(delay, [this, token] { on_timer(token); });
  }

  void enter_round(std::uint32_t r) {
    round = r;
    active = true;
    arm();
    c.round_started(height, round, ledger->tip_hash());
    if (writer()) act_as_writer();
  }

  void maybe_start() {
    if (mode != FaultMode::kHonest || active || gave_up || c.pool_.empty()) return;
    enter_round(0);
  }

  void on_timer(std::uint64_t token) {
    if (token != timer_token || !active) return;
    if (round + 1 >= c.params_.max_rounds) {
      active = false;
      gave_up = true;
      c.node_failed(idx, height, round);
      return;
    }
    enter_round(round + 1);
  }

  void act_as_writer() {
    const std::size_t q = c.set_.quorum();
    for (const auto& [digest, vs] : votes) {
      if (vs.size() >= q && known.count(digest)) {
        try_commit(digest);
        return;
      }
    }
    std::shared_ptr<const Block> block;
    if (locked) {
      block = known.at(*locked);
    } else {
      c.pool_.expire(loop().now());
      auto batch = c.pool_.head_batch(c.params_.max_public_batch);
      auto fresh = propose(c.set_, c.set_.at(idx).node_id, height, round, c.pool_, ledger->tip_hash(), c.clock_ms(),
                           c.params_.max_public_batch);
      if (!fresh) return;
      c.remember_proposal(*fresh, batch);
      block = std::make_shared<const Block>(std::move(*fresh));
    }
    c.broadcast(idx, c.proposal_message(idx, round, *block));
  }

  void on_proposal(ByteReader& r) {
    const std::uint32_t pr = r.u32();
    const std::size_t proposer = r.u32();
    Block block = decode_block(r.bytes());
    const auto sig = fixed<64>(r.raw(64));
    if (proposer != c.set_.proposer(height, pr)) return;
    const Digest digest = hash_block(block);
    if (!c.verify_cached(c.set_.at(proposer).key.public_key(), proposal_signing_bytes(height, pr, digest), sig)) return;
    if (block.height != height || block.prev_hash != ledger->tip_hash() || !block.signatures.empty() ||
        !well_formed(block)) {
      return;
    }
    if (!known.count(digest)) known.emplace(digest, std::make_shared<const Block>(std::move(block)));
    if (pr > round || !active) {
      round = std::max(round, pr);
      active = true;
      gave_up = false;
      arm();
    }
    if ((!locked || *locked == digest) && voted.insert({pr, digest}).second) {
      locked = digest;
      c.broadcast(idx, c.vote_message(idx, height, pr, digest));
    }
    check_quorum(digest);
  }

  void on_vote(ByteReader& r) {
    r.u32();  // round, informational
    const std::size_t voter = r.u32();
    const Digest digest = fixed<32>(r.raw(32));
    const auto sig = fixed<64>(r.raw(64));
    if (voter >= c.set_.size()) return;
    if (votes[digest].count(voter)) return;
    if (!c.verify_cached(c.set_.at(voter).key.public_key(), digest, sig)) return;
    votes[digest][voter] = sig;
    check_quorum(digest);
  }

  void check_quorum(const Digest& digest) {
    auto it = votes.find(digest);
    if (it == votes.end() || it->second.size() < c.set_.quorum()) return;
    if (writer() && active && known.count(digest)) try_commit(digest);
  }

  void try_commit(const Digest& digest) {
    if (commit_pending) return;
    const SimTime earliest = last_commit + c.params_.min_block_interval;
    if (loop().now() < earliest) {
      commit_pending = true;
      const std::uint64_t h = height;
      loop().at(earliest, [this, h, digest] {
        commit_pending = false;
        if (height == h) try_commit(digest);
      });
      return;
    }
    Block block = *known.at(digest);
    const std::size_t q = c.set_.quorum();
    for (const auto& [voter, sig] : votes.at(digest)) {
      if (block.signatures.size() == q) break;
      block.signatures.push_back(BlockSignature{c.set_.at(voter).node_id, sig});
    }
    auto shared = std::make_shared<const Block>(std::move(block));
    ByteWriter w;
    w.u8(kCert);
    w.u64(height);
    w.bytes(encode_block(*shared));
    Bytes cert = w.take();
    commit(shared);
    for (std::size_t to = 0; to < c.set_.size(); ++to) {
      if (to != idx) c.send_to(idx, to, cert);
    }
  }

  void on_cert(std::size_t from, const Bytes& msg, ByteReader& r) {
    Bytes body = r.bytes();
    auto block = c.intern(body, height);
    if (block->height != height || block->prev_hash != ledger->tip_hash() || !well_formed(*block)) return;
    const Digest digest = hash_block(*block);
    std::set<std::string> signers;
    for (const auto& s : block->signatures) {
      auto v = c.set_.index_of(s.node_id);
      if (!v || !signers.insert(s.node_id).second) return;
      if (!c.verify_cached(c.set_.at(*v).key.public_key(), digest, s.signature)) return;
    }
    if (signers.size() < c.set_.quorum()) return;
    commit(block);
    for (std::size_t to = 0; to < c.set_.size(); ++to) {
      if (to != idx && to != from) c.send_to(idx, to, msg);
    }
  }

  void commit(std::shared_ptr<const Block> block) {
    ledger->append_certified(block);
    last_commit = loop().now();
    const std::uint32_t committed_round = round;
    ++height;
    round = 0;
    active = false;
    gave_up = false;
    commit_pending = false;
    ++timer_token;
    locked.reset();
    known.clear();
    votes.clear();
    voted.clear();
    c.committed(idx, std::move(block), committed_round);
    maybe_start();
    auto it = future.find(height);
    if (it != future.end()) {
      auto pending = std::move(it->second);
      future.erase(it);
      for (auto& [from, msg] : pending) handle(from, msg);
    }
    future.erase(future.begin(), future.lower_bound(height));
  }

  // Faulty behaviour. Faulty members track nothing but what they are sent.
  void byzantine(const Bytes& msg) {
    if (mode == FaultMode::kSilent) return;
    try {
      ByteReader r(msg);
      if (r.u8() != kProposal) return;
      const std::uint64_t h = r.u64();
      const std::uint32_t pr = r.u32();
      r.u32();
      Block block = decode_block(r.bytes());
      if (mode == FaultMode::kRandomVotes) {
        if (!scrambled.insert({h, pr}).second) return;
        Digest junk{};
        for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
        c.broadcast(idx, c.vote_message(idx, h, pr, junk));
      } else if (mode == FaultMode::kEquivocate) {
        const Digest digest = hash_block(block);
        if (echoed.insert(digest).second) c.broadcast(idx, c.vote_message(idx, h, pr, digest));
      }
    } catch (const Error&) {
    }
  }
};

Consensus::Consensus(SimTransport& transport, ActiveNodeSet set, ConsensusParams params, std::uint64_t seed,
                     std::size_t pool_capacity, SimTime tx_timeout)
    : transport_(transport), set_(std::move(set)), params_(params), pool_(pool_capacity, tx_timeout), rng_(seed) {
  if (set_.size() == 0) throw Error(ErrorCode::kInvalidArgument, "consensus needs at least one active node");
  if (params_.timeout <= 0 || params_.max_rounds == 0) {
    throw Error(ErrorCode::kInvalidArgument, "timeout and max_rounds must be positive");
  }
  for (std::size_t i = 0; i < set_.size(); ++i) {
    nodes_.push_back(std::make_unique<Node>(*this, i, set_.at(i).mode, rng_()));
    endpoints_.push_back("sim://" + set_.at(i).node_id);
  }
}

Consensus::~Consensus() = default;

std::int64_t Consensus::clock_ms() const { return params_.clock_origin_ms + transport_.loop().now() / 1000; }

std::optional<std::uint64_t> Consensus::submit(TxRecord tx) {
  validate(tx);
  auto id = pool_.submit(std::move(tx), transport_.loop().now());
  if (id) kick();
  return id;
}

void Consensus::kick() {
  for (auto& n : nodes_) n->maybe_start();
}

const Ledger* Consensus::ledger_of(std::size_t i) const { return nodes_.at(i)->ledger.get(); }

std::vector<const Ledger*> Consensus::honest_ledgers() const {
  std::vector<const Ledger*> out;
  for (const auto& n : nodes_) {
    if (n->ledger) out.push_back(n->ledger.get());
  }
  return out;
}

std::uint64_t Consensus::run_until_idle(SimTime until) {
  EventLoop& loop = transport_.loop();
  while (!loop.idle() && loop.now() <= until) loop.run(1);
  return committed_heights_;
}

bool Consensus::verify_cached(const PublicKey& key, ByteView msg, const SignatureBytes& sig) {
  std::string k;
  k.reserve(key.size() + msg.size() + sig.size());
  k.append(reinterpret_cast<const char*>(key.data()), key.size());
  k.append(reinterpret_cast<const char*>(sig.data()), sig.size());
  k.append(reinterpret_cast<const char*>(msg.data()), msg.size());
  if (verified_.count(k) || verified_old_.count(k)) return true;
  ++verify_calls_;
  if (!verify_signature(key, msg, sig)) return false;
  verified_.insert(std::move(k));
  return true;
}

void Consensus::send_to(std::size_t from, std::size_t to, Bytes msg) {
  if (from == to) {
    transport_.loop().after(0, [this, from, msg = std::move(msg)] { nodes_[from]->handle(from, msg); });
    return;
  }
  transport_.send(endpoints_[from], endpoints_[to], std::move(msg), FrameClass::kControl,
                  [this, from, to](const Bytes& b) { nodes_[to]->handle(from, b); });
}

void Consensus::broadcast(std::size_t from, const Bytes& msg) {
  for (std::size_t to = 0; to < set_.size(); ++to) send_to(from, to, msg);
}

Bytes Consensus::proposal_message(std::size_t proposer, std::uint32_t round, const Block& block) {
  const Digest digest = hash_block(block);
  ByteWriter w;
  w.u8(kProposal);
  w.u64(block.height);
  w.u32(round);
  w.u32(static_cast<std::uint32_t>(proposer));
  w.bytes(encode_block(block));
  w.raw(set_.at(proposer).key.sign(proposal_signing_bytes(block.height, round, digest)));
  return w.take();
}

Bytes Consensus::vote_message(std::size_t voter, std::uint64_t height, std::uint32_t round, const Digest& digest) {
  ByteWriter w;
  w.u8(kVote);
  w.u64(height);
  w.u32(round);
  w.u32(static_cast<std::uint32_t>(voter));
  w.raw(digest);
  w.raw(set_.at(voter).key.sign(digest));
  return w.take();
}

void Consensus::remember_proposal(const Block& block, const std::vector<PoolEntry>& batch) {
  std::vector<std::uint64_t> ids;
  ids.reserve(batch.size());
  for (const auto& e : batch) ids.push_back(e.id);
  pool_.mark_proposed(ids);
  proposal_ids_[block.height][hash_block(block)] = std::move(ids);
}

void Consensus::round_started(std::uint64_t height, std::uint32_t round, const Digest& prev) {
  const std::size_t p = set_.proposer(height, round);
  if (set_.at(p).mode != FaultMode::kEquivocate || !byzantine_acted_.insert({height, round}).second) return;
  auto batch = pool_.head_batch(params_.max_public_batch);
  if (batch.empty()) return;
  // Two conflicting blocks over the same transactions, split between peers.
  std::vector<Block> blocks;
  for (std::int64_t skew : {0, 1}) {
    auto b = propose(set_, set_.at(p).node_id, height, round, pool_, prev, clock_ms() + skew,
                     params_.max_public_batch);
    remember_proposal(*b, batch);
    blocks.push_back(std::move(*b));
  }
  const Bytes a = proposal_message(p, round, blocks[0]);
  const Bytes b = proposal_message(p, round, blocks[1]);
  for (std::size_t to = 0; to < set_.size(); ++to) {
    if (to != p) send_to(p, to, to % 2 == 0 ? a : b);
  }
  for (const auto& blk : blocks) {
    const Digest d = hash_block(blk);
    nodes_[p]->echoed.insert(d);
    broadcast(p, vote_message(p, height, round, d));
  }
}

std::shared_ptr<const Block> Consensus::intern(const Bytes& cert, std::uint64_t height) {
  const Digest key = sha256(ByteView(cert));
  auto& slot = cert_cache_[height];
  auto it = slot.find(key);
  if (it != slot.end()) return it->second;
  auto block = std::make_shared<const Block>(decode_block(cert));
  slot.emplace(key, block);
  return block;
}

void Consensus::committed(std::size_t node, std::shared_ptr<const Block> block, std::uint32_t round) {
  const std::uint64_t h = block->height;
  if (h < committed_heights_) return;
  committed_heights_ = h + 1;

  CommitEvent ev;
  ev.height = h;
  ev.writer = set_.at(node).node_id;
  ev.at = transport_.loop().now();
  auto pit = proposal_ids_.find(h);
  if (pit != proposal_ids_.end()) {
    auto dit = pit->second.find(hash_block(*block));
    if (dit != pit->second.end()) ev.pool_ids = dit->second;
  }
  for (auto id : ev.pool_ids) pool_.remove(id);
  pool_.mark_committed(ev.pool_ids.size());
  proposal_ids_.erase(proposal_ids_.begin(), proposal_ids_.upper_bound(h));
  if (h >= 8) cert_cache_.erase(cert_cache_.begin(), cert_cache_.lower_bound(h - 8));
  if (committed_heights_ % 256 == 0) {
    verified_old_ = std::move(verified_);
    verified_.clear();
  }

  ConsensusRound rec;
  rec.height = h;
  rec.round = round;
  rec.proposer = set_.at(set_.proposer(h, round)).node_id;
  rec.committed = hash_block(*block);
  rec.outcome = RoundOutcome::kCommitted;
  rec.at = ev.at;
  rounds_.push_back(std::move(rec));

  ev.block = std::move(block);
  if (on_commit_) on_commit_(ev);
}

void Consensus::node_failed(std::size_t node, std::uint64_t height, std::uint32_t round) {
  auto& failed = failed_nodes_[height];
  failed.insert(node);
  const std::size_t honest = set_.size() - set_.faulty_count();
  if (failed.size() < honest || committed_heights_ > height) return;
  stalled_ = true;
  ConsensusRound rec;
  rec.height = height;
  rec.round = round;
  rec.proposer = set_.at(set_.proposer(height, round)).node_id;
  rec.outcome = RoundOutcome::kFailed;
  rec.at = transport_.loop().now();
  rounds_.push_back(std::move(rec));
}

const std::vector<ConsensusCharacteristics>& consensus_reference_table() {
  static const std::vector<ConsensusCharacteristics> table = {
      {"PoW", "open", "no", "<25% computing power"},
      {"PoS", "open", "partial", "<51% stakes"},
      {"pBFT", "permissioned", "yes", "<33% faulty replicas"},
      {"Tendermint", "permissioned", "yes", "<33% voting power"},
  };
  return table;
}

const std::string& consensus_reference(std::string_view algorithm, std::string_view property) {
  for (const auto& row : consensus_reference_table()) {
    if (row.algorithm != algorithm) continue;
    if (property == "permission") return row.permission;
    if (property == "energy") return row.energy_saving;
    if (property == "adversary") return row.adversary_tolerance;
    throw Error(ErrorCode::kUnknownEntity, "unknown property " + std::string(property));
  }
  throw Error(ErrorCode::kUnknownEntity, "unknown consensus algorithm " + std::string(algorithm));
}

}  // namespace bsmd
