#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string_view>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "bsmd/ledger.hpp"
#include "bsmd/transport.hpp"

namespace bsmd {

enum class FaultMode : std::uint8_t {
  kHonest,
  kSilent,       // never sends anything
  kRandomVotes,  // signs votes for random digests, never proposes
  kEquivocate,   // splits proposals between peers and votes for everything
};

std::string_view to_string(FaultMode m) noexcept;

struct ActiveMember {
  std::string node_id;
  SigningKey key;
  FaultMode mode = FaultMode::kHonest;
};

// Permissioned set of block writers. Faulty modes are a simulation device.
class ActiveNodeSet {
 public:
  static ActiveNodeSet create(std::size_t n, std::size_t faulty, FaultMode fault_mode, std::mt19937_64& rng,
                              const std::string& prefix = "active");

  void add(ActiveMember member) { members_.push_back(std::move(member)); }
  std::size_t size() const noexcept { return members_.size(); }
  const ActiveMember& at(std::size_t i) const { return members_.at(i); }
  const std::vector<ActiveMember>& members() const noexcept { return members_; }
  std::optional<std::size_t> index_of(const std::string& node_id) const;
  std::size_t faulty_count() const;

  // Votes needed to commit: strictly more than 2n/3.
  std::size_t quorum() const noexcept { return 2 * members_.size() / 3 + 1; }
  // Round-robin writer for (height, round).
  std::size_t proposer(std::uint64_t height, std::uint32_t round) const noexcept {
    return static_cast<std::size_t>((height + round) % members_.size());
  }
  ValidatorSet validators() const;

 private:
  std::vector<ActiveMember> members_;
};

struct PoolEntry {
  std::uint64_t id = 0;
  TxRecord tx;
  SimTime submitted = 0;
  bool proposed = false;  // part of a live proposal; never expired
};

struct PoolStats {
  std::uint64_t submitted = 0;
  std::uint64_t rejected = 0;  // refused at admission (pool full)
  std::uint64_t expired = 0;   // waited longer than the tx timeout
  std::uint64_t committed = 0;
};

// Pending transactions shared by the active nodes (stands in for gossip).
class TxPool {
 public:
  TxPool(std::size_t capacity, SimTime tx_timeout) : capacity_(capacity), tx_timeout_(tx_timeout) {}

  std::optional<std::uint64_t> submit(TxRecord tx, SimTime now);
  // Drops entries older than the timeout and returns them.
  std::vector<PoolEntry> expire(SimTime now);
  // Head batch for the next block: one private tx, or consecutive public txs.
  std::vector<PoolEntry> head_batch(std::size_t max_public) const;
  void mark_proposed(const std::vector<std::uint64_t>& ids);
  bool remove(std::uint64_t id);
  std::optional<SimTime> submitted_at(std::uint64_t id) const;

  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  const PoolStats& stats() const noexcept { return stats_; }
  void mark_committed(std::size_t n) { stats_.committed += n; }

 private:
  std::size_t capacity_;
  SimTime tx_timeout_;
  std::uint64_t next_id_ = 1;
  std::deque<PoolEntry> entries_;
  std::map<std::uint64_t, SimTime> index_;
  PoolStats stats_;
};

// Builds the proposal of `node_id` for (height, round) from the pool head.
// Returns nullopt for an empty pool; throws NotProposer for the wrong node.
std::optional<Block> propose(const ActiveNodeSet& set, const std::string& node_id, std::uint64_t height,
                             std::uint32_t round, const TxPool& pool, const Digest& prev,
                             std::int64_t timestamp_ms, std::size_t max_public_batch = 500);

struct ConsensusParams {
  SimTime timeout = ms(500);            // first-round timeout; doubles per retry
  std::uint32_t max_rounds = 6;         // per height before a node gives up
  SimTime min_block_interval = 0;       // writer pacing (capacity bound)
  std::size_t max_public_batch = 500;
  std::int64_t clock_origin_ms = 0;     // wall-clock ms at simulated time 0
};

enum class RoundOutcome { kCommitted, kFailed };

struct ConsensusRound {
  std::uint64_t height = 0;
  std::uint32_t round = 0;
  std::string proposer;
  std::optional<Digest> committed;
  RoundOutcome outcome = RoundOutcome::kFailed;
  SimTime at = 0;
};

struct CommitEvent {
  std::uint64_t height = 0;
  std::string writer;
  std::shared_ptr<const Block> block;
  std::vector<std::uint64_t> pool_ids;
  SimTime at = 0;
};

class Consensus {
 public:
  using CommitHandler = std::function<void(const CommitEvent&)>;

  Consensus(SimTransport& transport, ActiveNodeSet set, ConsensusParams params, std::uint64_t seed,
            std::size_t pool_capacity = 0, SimTime tx_timeout = 0);
  ~Consensus();
  Consensus(const Consensus&) = delete;
  Consensus& operator=(const Consensus&) = delete;

  // Returns the pool id, or nullopt when admission refused the tx.
  std::optional<std::uint64_t> submit(TxRecord tx);

  // Fires once per height, when the writer first commits the block.
  void on_commit(CommitHandler handler) { on_commit_ = std::move(handler); }

  const ActiveNodeSet& active_set() const noexcept { return set_; }
  const TxPool& pool() const noexcept { return pool_; }
  // Ledger replica of member `i` (faulty members keep none).
  const Ledger* ledger_of(std::size_t i) const;
  std::vector<const Ledger*> honest_ledgers() const;
  const std::vector<ConsensusRound>& rounds() const noexcept { return rounds_; }
  std::uint64_t committed_heights() const noexcept { return committed_heights_; }
  bool stalled() const noexcept { return stalled_; }
  std::size_t signature_verifications() const noexcept { return verify_calls_; }

  // Runs the event loop until it is idle or the clock passes `until` and
  // returns the number of committed heights.
  std::uint64_t run_until_idle(SimTime until);

  struct Node;

 private:
  friend struct Node;
  bool verify_cached(const PublicKey& key, ByteView msg, const SignatureBytes& sig);
  void send_to(std::size_t from, std::size_t to, Bytes msg);
  void broadcast(std::size_t from, const Bytes& msg);
  void node_failed(std::size_t node, std::uint64_t height, std::uint32_t round);
  void round_started(std::uint64_t height, std::uint32_t round, const Digest& prev);
  void remember_proposal(const Block& block, const std::vector<PoolEntry>& batch);
  Bytes proposal_message(std::size_t proposer, std::uint32_t round, const Block& block);
  Bytes vote_message(std::size_t voter, std::uint64_t height, std::uint32_t round, const Digest& digest);
  std::int64_t clock_ms() const;
  void committed(std::size_t node, std::shared_ptr<const Block> block, std::uint32_t round);
  std::shared_ptr<const Block> intern(const Bytes& cert, std::uint64_t height);
  void kick();

  SimTransport& transport_;
  ActiveNodeSet set_;
  ConsensusParams params_;
  TxPool pool_;
  std::mt19937_64 rng_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<ConsensusRound> rounds_;
  std::unordered_set<std::string> verified_;
  std::unordered_set<std::string> verified_old_;
  std::vector<std::string> endpoints_;
  std::size_t verify_calls_ = 0;
  std::map<std::uint64_t, std::set<std::size_t>> failed_nodes_;
  std::map<std::uint64_t, std::map<Digest, std::vector<std::uint64_t>>> proposal_ids_;
  std::map<std::uint64_t, std::map<Digest, std::shared_ptr<const Block>>> cert_cache_;
  std::set<std::pair<std::uint64_t, std::uint32_t>> byzantine_acted_;
  std::uint64_t committed_heights_ = 0;
  bool stalled_ = false;
  CommitHandler on_commit_;
};

// Reference data for consensus families; only the BFT family is implemented.
struct ConsensusCharacteristics {
  std::string algorithm;
  std::string permission;
  std::string energy_saving;
  std::string adversary_tolerance;
};

const std::vector<ConsensusCharacteristics>& consensus_reference_table();
// property in {"permission", "energy", "adversary"}; throws UnknownEntity.
const std::string& consensus_reference(std::string_view algorithm, std::string_view property);

}  // namespace bsmd
