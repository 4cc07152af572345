#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bsmd/mixture.hpp"

namespace bsmd {

// Utilities of the company/user sharing game.
struct GameParams {
  double r_n = 0.0;  // non-monetary reward for sharing
  double r_m = 0.0;  // monetary reward
  double c_d = 0.0;  // cost of sharing the data
  double c_i = 0.0;  // privacy cost
  double c_r = 1.0;  // company cost of paying rewards, > 0
  double c_f = 0.0;  // company fixed cost
  double B = 0.0;
  double D = 0.0;

  void validate() const;
};

enum class CompanyAction { kRewards, kNoRewards };
enum class UserAction { kShare, kNotShare };

std::string_view to_string(CompanyAction a) noexcept;
std::string_view to_string(UserAction a) noexcept;

struct Equilibrium {
  CompanyAction company = CompanyAction::kNoRewards;
  UserAction user = UserAction::kNotShare;
  double company_utility = 0.0;
  double user_utility = 0.0;
};

struct GameLeaf {
  CompanyAction company;
  UserAction user;
  double company_utility;
  double user_utility;
};

// The four terminal nodes, ordered (rewards,share), (no_rewards,share),
// (rewards,not_share), (no_rewards,not_share).
std::array<GameLeaf, 4> game_leaves(const GameParams& p);

// Backward induction: the user shares only on strictly positive utility, the
// company then picks the better branch, ties going to no_rewards.
Equilibrium solve_game(const GameParams& p);

struct CapacityParams {
  double tps_capacity = 3500.0;
  double tx_size_bytes = 134.0;
  double lbs_fraction = 1.0;
  double daily_points_mean = 3600.0;
  double daily_points_sd = 950.0;
  TimeMixture mixture = TimeMixture::daily_default();
  double target_throughput = 1.0;
  double max_users_cap = 1e12;

  void validate() const;
};

// Points per second one user sends at the busiest moment of the day.
double peak_rate_per_user(const CapacityParams& p);
std::uint64_t max_users(const CapacityParams& p);

struct LedgerGrowth {
  double bytes_per_s = 0.0;
  double bytes_per_year = 0.0;
};

constexpr double kSecondsPerYear = 31'536'000.0;

LedgerGrowth ledger_growth(const CapacityParams& p);

struct UsersRow {
  double lbs_fraction;
  std::uint64_t users_90;
  std::uint64_t users_100;
  std::uint64_t reported_90;
  std::uint64_t reported_100;
};

struct GrowthRow {
  double tps;
  double bytes_per_s;
  double bytes_per_year;
  double reported_tb_per_year;
  std::uint64_t users_90;  // at 75% LBS, the population the growth row serves
  std::uint64_t reported_users;
};

struct CapacityTables {
  std::vector<UsersRow> users;
  std::vector<GrowthRow> growth;
};

// Users by LBS share and ledger growth by throughput cap, alongside the
// published figures for comparison.
CapacityTables capacity_table(const CapacityParams& base = {});

}  // namespace bsmd
