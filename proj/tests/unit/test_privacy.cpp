#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>

#include "bsmd/codec.hpp"
#include "bsmd/error.hpp"
#include "bsmd/privacy.hpp"
#include "doctest.h"

using namespace bsmd;
using namespace bsmd::privacy;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

// Root of (1 + x) e^-x = 1 - p in x = eps r, by Newton from x = 2.
double oracle_radius(double p, double eps) {
  double x = 2.0;
  for (int i = 0; i < 100; ++i) {
    const double f = (1 + x) * std::exp(-x) - (1 - p);
    const double df = -x * std::exp(-x);
    x -= f / df;
  }
  return x / eps;
}

}  // namespace

TEST_SUITE("privacy") {
  TEST_CASE("geomask stays inside the annulus") {
    std::mt19937_64 rng(1);
    const GeoPoint o{10, -20};
    for (int i = 0; i < 100000; ++i) {
      const double d = distance(o, geomask_donut(o, 100, 200, rng));
      REQUIRE(d >= 100.0 - 1e-9);
      REQUIRE(d <= 200.0 + 1e-9);
    }
  }

  TEST_CASE("geomask mean displacement") {
    const double r = 100, R = 200;
    const double analytic = 2 * (R * R * R - r * r * r) / (3 * (R * R - r * r));
    CHECK(analytic == doctest::Approx(155.555).epsilon(1e-4));
    std::mt19937_64 rng(2);
    double sum = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += distance({}, geomask_donut({}, r, R, rng));
    CHECK(std::abs(sum / n - analytic) / analytic < 0.01);
  }

  TEST_CASE("geomask radii errors") {
    std::mt19937_64 rng(3);
    CHECK(code_of([&] { geomask_donut({}, 100, 100, rng); }) == ErrorCode::kBadRadii);
    CHECK(code_of([&] { geomask_donut({}, 0, 100, rng); }) == ErrorCode::kBadRadii);
    CHECK(code_of([&] { geomask_donut({}, 300, 100, rng); }) == ErrorCode::kBadRadii);
  }

  TEST_CASE("geoind closed-form checkpoints") {
    std::mt19937_64 rng(4);
    const int n = 100000;
    int inside = 0;
    for (int i = 0; i < n; ++i) inside += distance({}, geoind_perturb({}, 0.01, rng)) <= 100.0;
    CHECK(std::abs(static_cast<double>(inside) / n - (1 - 2 * std::exp(-1.0))) < 0.01);

    std::vector<double> d(n);
    for (auto& x : d) x = distance({}, geoind_perturb({}, 0.05, rng));
    std::nth_element(d.begin(), d.begin() + n / 2, d.end());
    const double median = oracle_radius(0.5, 0.05);
    CHECK(median == doctest::Approx(33.57).epsilon(0.001));
    CHECK(std::abs(d[n / 2] - median) / median < 0.02);

    int tight = 0;
    for (int i = 0; i < 10000; ++i) tight += distance({}, geoind_perturb({}, 1000, rng)) <= 0.05;
    CHECK(tight > 9900);
  }

  TEST_CASE("geoind empirical CDF within Kolmogorov distance") {
    std::mt19937_64 rng(5);
    const int n = 100000;
    const double eps = 0.01;
    std::vector<double> d(n);
    for (auto& x : d) x = distance({}, geoind_perturb({}, eps, rng));
    std::sort(d.begin(), d.end());
    for (double r : {25.0, 50.0, 100.0, 200.0}) {
      const double emp = static_cast<double>(std::upper_bound(d.begin(), d.end(), r) - d.begin()) / n;
      CHECK(std::abs(emp - (1 - (1 + eps * r) * std::exp(-eps * r))) <= 0.01);
    }
  }

  TEST_CASE("geoind angle is uniform") {
    std::mt19937_64 rng(6);
    int quadrant[4] = {};
    for (int i = 0; i < 40000; ++i) {
      auto p = geoind_perturb({}, 0.01, rng);
      quadrant[(p.x >= 0 ? 0 : 1) + (p.y >= 0 ? 0 : 2)]++;
    }
    for (int q : quadrant) CHECK(std::abs(q - 10000) < 400);
  }

  TEST_CASE("cdf and inverse agree") {
    CHECK(planar_laplace_cdf(0, 0.01) == 0.0);
    CHECK(planar_laplace_cdf(100, 0.01) == doctest::Approx(1 - 2 * std::exp(-1.0)));
    for (double p : {0.1, 0.5, 0.9}) {
      CHECK(planar_laplace_inverse_cdf(p, 0.02) == doctest::Approx(oracle_radius(p, 0.02)).epsilon(1e-6));
    }
    std::mt19937_64 rng(7);
    CHECK(code_of([&] { geoind_perturb({}, 0, rng); }) == ErrorCode::kBadEpsilon);
    CHECK(code_of([&] { geoind_perturb({}, -1, rng); }) == ErrorCode::kBadEpsilon);
  }

  TEST_CASE("mechanism choice") {
    PrivacyPolicy high, low;
    low.level = PrivacyLevel::kLow;
    CHECK(choose_mechanism(high, false) == Mechanism::kGeomask);
    CHECK(choose_mechanism(low, true) == Mechanism::kGeoInd);
    CHECK(choose_mechanism(high, true) == Mechanism::kGeoInd);
    CHECK(choose_mechanism(low, false) == Mechanism::kGeoInd);
  }

  TEST_CASE("policy validation") {
    PrivacyPolicy p;
    CHECK_NOTHROW(p.validate());
    p.geoind_epsilon = 0;
    CHECK(code_of([&] { p.validate(); }) == ErrorCode::kBadEpsilon);
    p = {};
    p.donut_inner = 400;
    CHECK(code_of([&] { p.validate(); }) == ErrorCode::kBadRadii);
  }

  TEST_CASE("filter keeps items inside the true radius") {
    const GeoPoint truth{0, 0};
    LbsQuery q{{30, 40}, 0, 200};
    q.search_radius = covering_radius(q.reported, truth, q.true_radius);
    CHECK(q.search_radius >= 250.0);
    LbsResults<int> items{{{50, 0}, 1}, {{0, 150}, 2}, {{-400, 0}, 3}};
    auto kept = filter_results(q, items, truth);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].second == 1);
    CHECK(kept[1].second == 2);
    LbsResults<int> far{{{500, 0}, 1}, {{0, -900}, 2}};
    CHECK(filter_results(q, far, truth).empty());
    LbsQuery bad{{30, 40}, 100, 200};
    CHECK(code_of([&] { filter_results(bad, items, truth); }) == ErrorCode::kRadiusViolation);
  }

  TEST_CASE("filtered big-circle results equal the brute-force small circle") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1000, 1000);
    for (int inst = 0; inst < 300; ++inst) {
      const GeoPoint truth{u(rng), u(rng)};
      const double radius = 50 + std::fmod(std::abs(u(rng)), 300);
      const GeoPoint reported = geoind_perturb(truth, 0.01, rng);
      LbsQuery q{reported, covering_radius(reported, truth, radius), radius};
      std::vector<std::pair<GeoPoint, int>> all;
      for (int i = 0; i < 200; ++i) all.push_back({{u(rng), u(rng)}, i});
      LbsResults<int> provider, truth_set;
      for (const auto& it : all) {
        if (std::hypot(it.first.x - reported.x, it.first.y - reported.y) <= q.search_radius) provider.push_back(it);
        if (std::hypot(it.first.x - truth.x, it.first.y - truth.y) <= radius) truth_set.push_back(it);
      }
      auto got = filter_results(q, provider, truth);
      REQUIRE(got.size() == truth_set.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].second == truth_set[i].second);
    }
  }

  TEST_CASE("provider request omits the true location") {
    const GeoPoint truth{1234.5, -987.25};
    std::mt19937_64 rng(9);
    const GeoPoint reported = geoind_perturb(truth, 0.01, rng);
    LbsQuery q{reported, covering_radius(reported, truth, 100), 100};
    Bytes wire = encode_lbs_request(q);
    ByteWriter w;
    w.u64(std::bit_cast<std::uint64_t>(truth.x));
    Bytes needle = w.data();
    CHECK(std::search(wire.begin(), wire.end(), needle.begin(), needle.end()) == wire.end());
  }
}
