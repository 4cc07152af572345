#include "bsmd/econ.hpp"

#include <cmath>

#include "bsmd/error.hpp"

namespace bsmd {

void GameParams::validate() const {
  for (double v : {r_n, r_m, c_d, c_i, c_r, c_f, B, D}) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "game parameters must be finite");
  }
  if (!(c_r > 0.0)) throw Error(ErrorCode::kInvalidArgument, "c_r must be positive");
}

std::string_view to_string(CompanyAction a) noexcept {
  return a == CompanyAction::kRewards ? "rewards" : "no_rewards";
}

std::string_view to_string(UserAction a) noexcept { return a == UserAction::kShare ? "share" : "not_share"; }

std::array<GameLeaf, 4> game_leaves(const GameParams& p) {
  const double surplus = p.B * p.D;
  return {{
      {CompanyAction::kRewards, UserAction::kShare, surplus - p.c_r - p.c_f, p.r_m + p.r_n - p.c_d - p.c_i},
      {CompanyAction::kNoRewards, UserAction::kShare, surplus - p.c_f, p.r_n - p.c_d - p.c_i},
      {CompanyAction::kRewards, UserAction::kNotShare, -p.c_r, 0.0},
      {CompanyAction::kNoRewards, UserAction::kNotShare, 0.0, 0.0},
  }};
}

Equilibrium solve_game(const GameParams& p) {
  p.validate();
  const auto leaves = game_leaves(p);
  auto respond = [&](const GameLeaf& share, const GameLeaf& keep) -> const GameLeaf& {
    return share.user_utility > keep.user_utility ? share : keep;
  };
  const GameLeaf& with_rewards = respond(leaves[0], leaves[2]);
  const GameLeaf& without = respond(leaves[1], leaves[3]);
  const GameLeaf& pick = with_rewards.company_utility > without.company_utility ? with_rewards : without;
  return {pick.company, pick.user, pick.company_utility, pick.user_utility};
}

void CapacityParams::validate() const {
  if (!(tps_capacity > 0.0) || !std::isfinite(tps_capacity)) {
    throw Error(ErrorCode::kInvalidArgument, "tps capacity must be positive");
  }
  if (!(tx_size_bytes > 0.0)) throw Error(ErrorCode::kInvalidArgument, "transaction size must be positive");
  if (!(lbs_fraction > 0.0 && lbs_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "LBS fraction must be in (0, 1]");
  }
  if (!(daily_points_mean > 0.0)) throw Error(ErrorCode::kInvalidArgument, "daily points must be positive");
  if (!(daily_points_sd >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "daily points sd must be non-negative");
  if (!(target_throughput > 0.0 && target_throughput <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target throughput must be in (0, 1]");
  }
  if (!(max_users_cap > 0.0)) throw Error(ErrorCode::kInvalidArgument, "user cap must be positive");
  mixture.validate();
}

double peak_rate_per_user(const CapacityParams& p) {
  return p.daily_points_mean * p.mixture.max_density() / 3600.0;
}

std::uint64_t max_users(const CapacityParams& p) {
  p.validate();
  const double effective_tps = p.tps_capacity / p.target_throughput;
  const double users = std::floor(effective_tps / (p.lbs_fraction * peak_rate_per_user(p)));
  return static_cast<std::uint64_t>(std::min(users, p.max_users_cap));
}

LedgerGrowth ledger_growth(const CapacityParams& p) {
  p.validate();
  const double per_s = p.tps_capacity * p.tx_size_bytes;
  return {per_s, per_s * kSecondsPerYear};
}

CapacityTables capacity_table(const CapacityParams& base) {
  CapacityTables out;
  const std::array<std::pair<double, std::pair<std::uint64_t, std::uint64_t>>, 4> users_rows{{
      {1.00, {60'000, 48'000}},
      {0.75, {76'000, 72'000}},
      {0.50, {115'000, 108'000}},
      {0.25, {230'000, 216'000}},
  }};
  for (const auto& [lbs, reported] : users_rows) {
    CapacityParams p = base;
    p.lbs_fraction = lbs;
    p.target_throughput = 0.9;
    const auto u90 = max_users(p);
    p.target_throughput = 1.0;
    out.users.push_back({lbs, u90, max_users(p), reported.first, reported.second});
  }
  const std::array<std::pair<double, std::pair<double, std::uint64_t>>, 4> growth_rows{{
      {3500.0, {13.8, 76'000}},
      {7000.0, {27.6, 152'000}},
      {10500.0, {41.4, 228'000}},
      {14000.0, {55.2, 304'000}},
  }};
  for (const auto& [tps, reported] : growth_rows) {
    CapacityParams p = base;
    p.tps_capacity = tps;
    const auto g = ledger_growth(p);
    p.lbs_fraction = 0.75;
    p.target_throughput = 0.9;
    out.growth.push_back({tps, g.bytes_per_s, g.bytes_per_year, reported.first, max_users(p), reported.second});
  }
  return out;
}

}  // namespace bsmd
