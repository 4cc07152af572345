#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bsmd/crypto.hpp"

namespace bsmd::privacy {

// Planar local frame, metres.
struct GeoPoint {
  double x = 0.0;
  double y = 0.0;
};

double distance(const GeoPoint& a, const GeoPoint& b) noexcept;

enum class PrivacyLevel { kHigh, kLow };
enum class Mechanism { kGeomask, kGeoInd };

std::string_view to_string(Mechanism m) noexcept;

struct PrivacyPolicy {
  PrivacyLevel level = PrivacyLevel::kHigh;
  double geoind_epsilon = 0.01;  // 1/m
  double donut_inner = 100.0;    // m
  double donut_outer = 300.0;    // m

  // Throws BadEpsilon / BadRadii.
  void validate() const;
};

// Uniform over the annulus inner <= d <= outer around `loc`.
GeoPoint geomask_donut(const GeoPoint& loc, double inner, double outer, std::mt19937_64& rng);

// Planar Laplace: P[d <= r] = 1 - (1 + eps r) exp(-eps r), angle uniform.
GeoPoint geoind_perturb(const GeoPoint& loc, double epsilon, std::mt19937_64& rng);

double planar_laplace_cdf(double r, double epsilon) noexcept;
// Radius with CDF(r) = p, found by bisection to `tolerance` metres.
double planar_laplace_inverse_cdf(double p, double epsilon, double tolerance = 1e-9);

Mechanism choose_mechanism(const PrivacyPolicy& policy, bool needs_exact) noexcept;

// Applies the chosen mechanism of `policy` to `loc`.
GeoPoint obfuscate(const GeoPoint& loc, const PrivacyPolicy& policy, bool needs_exact,
                   std::mt19937_64& rng);

// Location-based-service query issued from a perturbed location. The search
// radius is widened so the circle around the true location is contained.
struct LbsQuery {
  GeoPoint reported;
  double search_radius = 0.0;
  double true_radius = 0.0;
};

// Search radius that keeps the true-radius circle inside the reported one.
double covering_radius(const GeoPoint& reported, const GeoPoint& true_loc, double true_radius) noexcept;

template <typename Item>
using LbsResults = std::vector<std::pair<GeoPoint, Item>>;

void check_containment(const LbsQuery& query, const GeoPoint& true_loc);

// Keeps the results within true_radius of the true location. Throws
// RadiusViolation if the query circle does not contain the true circle.
template <typename Item>
LbsResults<Item> filter_results(const LbsQuery& query, const LbsResults<Item>& results,
                                const GeoPoint& true_loc) {
  check_containment(query, true_loc);
  LbsResults<Item> out;
  for (const auto& r : results) {
    if (distance(r.first, true_loc) <= query.true_radius) out.push_back(r);
  }
  return out;
}

// What the service provider receives: the true location is not a field.
Bytes encode_lbs_request(const LbsQuery& query);

}  // namespace bsmd::privacy
