#include "bsmd/mixture.hpp"

#include <cmath>
#include <numbers>

#include "bsmd/error.hpp"

namespace bsmd {

namespace {

double normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

constexpr int kWraps = 3;  // +-72 h covers any sd we accept

}  // namespace

TimeMixture::TimeMixture(std::vector<MixtureComponent> components) : components_(std::move(components)) {
  validate();
}

TimeMixture TimeMixture::daily_default() {
  return TimeMixture({{8.0, 2.3, 1.0 / 3.0}, {13.0, 3.5, 1.0 / 3.0}, {18.0, 2.3, 1.0 / 3.0}});
}

void TimeMixture::validate() const {
  if (components_.empty()) throw Error(ErrorCode::kInvalidArgument, "mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.sd_hours > 0.0) || !(c.sd_hours <= 12.0)) {
      throw Error(ErrorCode::kInvalidArgument, "mixture sd must be in (0, 12] hours");
    }
    if (!(c.weight >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "mixture weights must be non-negative");
    if (!std::isfinite(c.mean_hour)) throw Error(ErrorCode::kInvalidArgument, "mixture mean must be finite");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::kInvalidArgument, "mixture weights must sum to 1");
}

double TimeMixture::density(double hour) const {
  double d = 0.0;
  for (const auto& c : components_) {
    for (int k = -kWraps; k <= kWraps; ++k) d += c.weight * normal_pdf(hour + 24.0 * k, c.mean_hour, c.sd_hours);
  }
  return d;
}

double TimeMixture::mass(double from_hour, double to_hour) const {
  double m = 0.0;
  for (const auto& c : components_) {
    for (int k = -kWraps; k <= kWraps; ++k) {
      m += c.weight * (normal_cdf(to_hour + 24.0 * k, c.mean_hour, c.sd_hours) -
                       normal_cdf(from_hour + 24.0 * k, c.mean_hour, c.sd_hours));
    }
  }
  return m;
}

double TimeMixture::max_density() const {
  constexpr int kGrid = 24 * 60;
  double best_t = 0.0, best = -1.0;
  for (int i = 0; i < kGrid; ++i) {
    const double t = 24.0 * i / kGrid;
    const double d = density(t);
    if (d > best) {
      best = d;
      best_t = t;
    }
  }
  // golden-section refinement around the best grid point
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = best_t - 24.0 / kGrid, b = best_t + 24.0 / kGrid;
  for (int it = 0; it < 60; ++it) {
    const double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    if (density(x1) < density(x2)) a = x1;
    else b = x2;
  }
  return std::max(best, density(0.5 * (a + b)));
}

double TimeMixture::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double pick = u(rng);
  const MixtureComponent* chosen = &components_.back();
  for (const auto& c : components_) {
    if (pick < c.weight) {
      chosen = &c;
      break;
    }
    pick -= c.weight;
  }
  const double t = std::normal_distribution<double>(chosen->mean_hour, chosen->sd_hours)(rng);
  double wrapped = std::fmod(t, 24.0);
  if (wrapped < 0.0) wrapped += 24.0;
  if (wrapped >= 24.0) wrapped = 0.0;
  return wrapped;
}

}  // namespace bsmd
