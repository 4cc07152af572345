#include "bsmd/privacy.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"

namespace bsmd::privacy {

namespace {

GeoPoint displace(const GeoPoint& loc, double radius, double angle) {
  return {loc.x + radius * std::cos(angle), loc.y + radius * std::sin(angle)};
}

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

void check_radii(double inner, double outer) {
  if (!(inner > 0.0) || !(outer > inner) || !std::isfinite(outer)) {
    throw Error(ErrorCode::kBadRadii, "need 0 < inner < outer");
  }
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error(ErrorCode::kBadEpsilon, "epsilon must be positive");
}

}  // namespace

double distance(const GeoPoint& a, const GeoPoint& b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

std::string_view to_string(Mechanism m) noexcept { return m == Mechanism::kGeomask ? "geomask" : "geoind"; }

void PrivacyPolicy::validate() const {
  check_epsilon(geoind_epsilon);
  check_radii(donut_inner, donut_outer);
}

GeoPoint geomask_donut(const GeoPoint& loc, double inner, double outer, std::mt19937_64& rng) {
  check_radii(inner, outer);
  // Area-uniform radius: r^2 uniform on [inner^2, outer^2].
  const double u = uniform01(rng);
  const double r = std::sqrt(inner * inner + u * (outer * outer - inner * inner));
  const double angle = 2.0 * std::numbers::pi * uniform01(rng);
  return displace(loc, std::clamp(r, inner, outer), angle);
}

double planar_laplace_cdf(double r, double epsilon) noexcept {
  if (r <= 0.0) return 0.0;
  const double er = epsilon * r;
  return 1.0 - (1.0 + er) * std::exp(-er);
}

double planar_laplace_inverse_cdf(double p, double epsilon, double tolerance) {
  check_epsilon(epsilon);
  if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::kInvalidArgument, "probability must be in [0,1)");
  double lo = 0.0;
  double hi = 1.0 / epsilon;
  while (planar_laplace_cdf(hi, epsilon) < p) hi *= 2.0;
  while (hi - lo > tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // below double resolution
    if (planar_laplace_cdf(mid, epsilon) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

GeoPoint geoind_perturb(const GeoPoint& loc, double epsilon, std::mt19937_64& rng) {
  check_epsilon(epsilon);
  const double angle = 2.0 * std::numbers::pi * uniform01(rng);
  const double r = planar_laplace_inverse_cdf(uniform01(rng), epsilon);
  return displace(loc, r, angle);
}

Mechanism choose_mechanism(const PrivacyPolicy& policy, bool needs_exact) noexcept {
  if (needs_exact) return Mechanism::kGeoInd;
  return policy.level == PrivacyLevel::kHigh ? Mechanism::kGeomask : Mechanism::kGeoInd;
}

GeoPoint obfuscate(const GeoPoint& loc, const PrivacyPolicy& policy, bool needs_exact,
                   std::mt19937_64& rng) {
  switch (choose_mechanism(policy, needs_exact)) {
    case Mechanism::kGeomask: return geomask_donut(loc, policy.donut_inner, policy.donut_outer, rng);
    case Mechanism::kGeoInd: return geoind_perturb(loc, policy.geoind_epsilon, rng);
  }
  return loc;
}

double covering_radius(const GeoPoint& reported, const GeoPoint& true_loc, double true_radius) noexcept {
  return distance(reported, true_loc) + true_radius;
}

void check_containment(const LbsQuery& query, const GeoPoint& true_loc) {
  if (!(query.true_radius >= 0.0) ||
      query.search_radius < covering_radius(query.reported, true_loc, query.true_radius)) {
    throw Error(ErrorCode::kRadiusViolation, "search circle does not contain the true-radius circle");
  }
}

Bytes encode_lbs_request(const LbsQuery& query) {
  ByteWriter w;
  w.str("bsmd.lbs.v1");
  w.u64(std::bit_cast<std::uint64_t>(query.reported.x));
  w.u64(std::bit_cast<std::uint64_t>(query.reported.y));
  w.u64(std::bit_cast<std::uint64_t>(query.search_radius));
  return w.take();
}

}  // namespace bsmd::privacy
