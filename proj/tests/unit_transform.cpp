#include <doctest.h>

#include <cmath>

#include "fresel/objects.hpp"
#include "fresel/rng.hpp"
#include "fresel/transform.hpp"
#include "support/helpers.hpp"

using namespace fresel;

namespace {

QuantileObject point_mass(double v) {
  return QuantileObject(Eigen::VectorXd::Constant(1, v));
}

}  // namespace

TEST_SUITE("transform") {

TEST_CASE("reference resolution rules") {
  Rng rng(3);
  auto ys = testhelp::random_quantiles(rng, 8, 10);

  SUBCASE("frechet mean on a single response returns that response") {
    std::vector<MetricResponse> one{ys[0]};
    ReferencePolicy policy;
    policy.y_rule = ReferencePolicy::YRule::sample_index;
    policy.sample_index = 0;
    ResolvedReference ref = resolve_reference(policy, one);
    CHECK(response_dist_sq(ref.y0, ys[0]) == 0.0);
  }

  SUBCASE("sample_index picks the requested row") {
    ReferencePolicy policy;
    policy.y_rule = ReferencePolicy::YRule::sample_index;
    policy.sample_index = 3;
    ResolvedReference ref = resolve_reference(policy, ys);
    CHECK(response_dist_sq(ref.y, ys[3]) == 0.0);
    CHECK(ref.y_index == 3);

    policy.sample_index = 99;
    CHECK_THROWS(resolve_reference(policy, ys));
  }

  SUBCASE("perturbed mean at scale zero is exactly the frechet mean") {
    ReferencePolicy policy;
    policy.y_rule = ReferencePolicy::YRule::perturbed_mean;
    policy.perturb_scale = 0.0;
    policy.seed = 42;
    ResolvedReference ref = resolve_reference(policy, ys);
    CHECK(response_dist_sq(ref.y, frechet_mean(ys)) == 0.0);
  }

  SUBCASE("random sample is deterministic in the seed and lands in the sample") {
    ReferencePolicy policy = default_policy(977);
    ResolvedReference a = resolve_reference(policy, ys);
    ResolvedReference b = resolve_reference(policy, ys);
    CHECK(a.y_index == b.y_index);
    CHECK(a.y_index >= 0);
    CHECK(a.y_index < 8);
    CHECK(response_dist_sq(a.y, ys[a.y_index]) == 0.0);
  }
}

TEST_CASE("transform fixed examples") {
  SUBCASE("y equal to y0 vanishes identically") {
    Rng rng(5);
    auto ys = testhelp::random_quantiles(rng, 6, 12);
    ResolvedReference ref;
    ref.y = frechet_mean(ys);
    ref.y0 = ref.y;
    TransformedResponse tr = transform_response(ys, ref);
    CHECK(tr.u.cwiseAbs().maxCoeff() == 0.0);
    CHECK(tr.u_mean == 0.0);
  }

  SUBCASE("point masses reduce to the scalar identity 1 - 2y") {
    std::vector<MetricResponse> ys;
    Eigen::VectorXd raw_expect(4);
    int i = 0;
    for (double v : {-1.0, 0.0, 0.5, 2.0}) {
      ys.emplace_back(point_mass(v));
      raw_expect[i++] = 1.0 - 2.0 * v;
    }
    ResolvedReference ref;
    ref.y = point_mass(1.0);
    ref.y0 = point_mass(0.0);
    Eigen::VectorXd raw = raw_transform(ys, ref);
    CHECK((raw - raw_expect).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("centering splits raw values into u and u_mean") {
    // engineered so the raw transform values are exactly (3, 5)
    std::vector<MetricResponse> ys{point_mass(-1.0), point_mass(-2.0)};
    ResolvedReference ref;
    ref.y = point_mass(1.0);
    ref.y0 = point_mass(0.0);
    Eigen::VectorXd raw = raw_transform(ys, ref);
    REQUIRE(raw[0] == doctest::Approx(3.0));
    REQUIRE(raw[1] == doctest::Approx(5.0));

    TransformedResponse tr = transform_response(ys, ref);
    CHECK(tr.u_mean == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(tr.u[0] == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(tr.u[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(tr.u.sum()) < 1e-10);
  }

  SUBCASE("mixed tags rejected") {
    std::vector<MetricResponse> ys{point_mass(0.0)};
    ResolvedReference ref;
    ref.y = SPDObject(Eigen::Matrix2d::Identity());
    ref.y0 = point_mass(0.0);
    CHECK_THROWS(raw_transform(ys, ref));
  }
}

TEST_CASE("centering absorbs any constant added to the raw transform") {
  Rng rng(17);
  auto ys = testhelp::random_quantiles(rng, 20, 15);
  ReferencePolicy policy = default_policy(8);
  ResolvedReference ref = resolve_reference(policy, ys);
  TransformedResponse tr = transform_response(ys, ref);

  Eigen::VectorXd raw = raw_transform(ys, ref);
  for (double c : {-3.0, 0.25, 100.0}) {
    Eigen::VectorXd shifted = raw.array() + c;
    Eigen::VectorXd centered = shifted.array() - shifted.mean();
    CHECK((centered - tr.u).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("perturbed mean draws differ by seed but keep the metric tag") {
  Rng rng(19);

  SUBCASE("quantile") {
    auto ys = testhelp::random_quantiles(rng, 10, 12);
    ReferencePolicy policy;
    policy.y_rule = ReferencePolicy::YRule::perturbed_mean;
    policy.perturb_scale = 0.5;
    policy.seed = 1;
    ResolvedReference a = resolve_reference(policy, ys);
    policy.seed = 2;
    ResolvedReference b = resolve_reference(policy, ys);
    CHECK(response_dist_sq(a.y, b.y) > 0.0);
    CHECK(response_tag(a.y) == ResponseTag::quantile_w2);
  }

  SUBCASE("spd") {
    auto ys = testhelp::random_spds(rng, 10, 3);
    ReferencePolicy policy;
    policy.y_rule = ReferencePolicy::YRule::perturbed_mean;
    policy.perturb_scale = 0.3;
    policy.seed = 1;
    ResolvedReference a = resolve_reference(policy, ys);
    CHECK(response_tag(a.y) == ResponseTag::spd_cholesky);
    // perturbed object must still be constructible as SPD (it is one)
    CHECK(std::get<SPDObject>(a.y).dim() == 3);
  }
}

}  // TEST_SUITE
