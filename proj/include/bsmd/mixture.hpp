#pragma once

#include <random>
#include <vector>

namespace bsmd {

struct MixtureComponent {
  double mean_hour = 0.0;
  double sd_hours = 1.0;
  double weight = 0.0;
};

// Time-of-day mixture of normals, wrapped onto the 24 h circle.
class TimeMixture {
 public:
  TimeMixture() = default;
  explicit TimeMixture(std::vector<MixtureComponent> components);

  // Three daily peaks at 08:00, 13:00 and 18:00 with equal weights.
  static TimeMixture daily_default();

  const std::vector<MixtureComponent>& components() const noexcept { return components_; }
  // Throws InvalidArgument unless weights are non-negative and sum to 1 and
  // every sd is positive.
  void validate() const;

  // Density per hour at time-of-day t in [0, 24).
  double density(double hour) const;
  // Fraction of daily mass in [from, to) hours, to > from, wrapped.
  double mass(double from_hour, double to_hour) const;
  // Maximum of density() over the day (dense grid plus local refinement).
  double max_density() const;
  double sample(std::mt19937_64& rng) const;

 private:
  std::vector<MixtureComponent> components_;
};

}  // namespace bsmd
