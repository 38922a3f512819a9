#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fresel/objects.hpp"
#include "fresel/rng.hpp"
#include "support/helpers.hpp"

using namespace fresel;

TEST_SUITE("objects") {

TEST_CASE("w2 squared distance on fixed inputs") {
  Eigen::VectorXd v(4);
  v << -1.0, 0.0, 0.5, 2.0;
  QuantileObject a(v);

  SUBCASE("identical objects give zero") { CHECK(w2_sq(a, a) == 0.0); }

  SUBCASE("constant shift gives the squared shift") {
    QuantileObject b(v.array() + 3.0);
    CHECK(w2_sq(a, b) == doctest::Approx(9.0).epsilon(1e-12));
  }

  SUBCASE("two-point grid direct evaluation") {
    Eigen::VectorXd va(2), vb(2);
    va << 0.0, 1.0;
    vb << 1.0, 2.0;
    CHECK(w2_sq(QuantileObject(va), QuantileObject(vb)) == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("grid size mismatch throws") {
    Eigen::VectorXd w(3);
    w << 0, 1, 2;
    CHECK_THROWS(w2_sq(a, QuantileObject(w)));
  }
}

TEST_CASE("cholesky distance on fixed matrices") {
  SPDObject eye(Eigen::Matrix2d::Identity());

  SUBCASE("identical") { CHECK(cholesky_dist_sq(eye, eye) == 0.0); }

  SUBCASE("I vs 4I") {
    SPDObject four(4.0 * Eigen::Matrix2d::Identity());
    CHECK(cholesky_dist_sq(eye, four) == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("I vs diag(1,9)") {
    Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
    d(0, 0) = 1.0;
    d(1, 1) = 9.0;
    CHECK(cholesky_dist_sq(eye, SPDObject(d)) == doctest::Approx(4.0).epsilon(1e-12));
  }

  SUBCASE("non-spd input rejected") {
    Eigen::Matrix2d bad;
    bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
    CHECK_THROWS(SPDObject(bad));
  }
}

TEST_CASE("covariate distances") {
  CHECK(covariate_dist_sq(CovariateValue(3.0), CovariateValue(5.0)) == 4.0);

  Rng rng(7);
  auto q = testhelp::random_quantile(rng, 12);
  CHECK(covariate_dist_sq(CovariateValue(q), CovariateValue(q)) == 0.0);

  SPDObject eye(Eigen::Matrix2d::Identity());
  SPDObject four(4.0 * Eigen::Matrix2d::Identity());
  CHECK(covariate_dist_sq(CovariateValue(eye), CovariateValue(four)) ==
        doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS(covariate_dist_sq(CovariateValue(1.0), CovariateValue(q)));
}

TEST_CASE("frechet mean on fixed inputs") {
  SUBCASE("single response is its own mean") {
    Eigen::VectorXd v(3);
    v << 1, 2, 3;
    std::vector<MetricResponse> ys{QuantileObject(v)};
    auto m = std::get<QuantileObject>(frechet_mean(ys));
    CHECK((m.values - v).norm() == 0.0);
  }

  SUBCASE("two quantile objects shifted by 2 average to the midpoint") {
    Eigen::VectorXd v(3);
    v << -1, 0, 4;
    std::vector<MetricResponse> ys{QuantileObject(v), QuantileObject(v.array() + 2.0)};
    auto m = std::get<QuantileObject>(frechet_mean(ys));
    CHECK((m.values - (v.array() + 1.0).matrix()).norm() < 1e-14);
  }

  SUBCASE("I and 4I average to 2.25 I") {
    std::vector<MetricResponse> ys{SPDObject(Eigen::Matrix2d::Identity()),
                                   SPDObject(4.0 * Eigen::Matrix2d::Identity())};
    auto m = std::get<SPDObject>(frechet_mean(ys));
    CHECK((m.mat() - 2.25 * Eigen::Matrix2d::Identity()).norm() < 1e-12);
  }

  SUBCASE("empty and mixed-tag inputs rejected") {
    std::vector<MetricResponse> empty;
    CHECK_THROWS(frechet_mean(empty));
    Eigen::VectorXd v(3);
    v << 1, 2, 3;
    std::vector<MetricResponse> mixed{QuantileObject(v), SPDObject(Eigen::Matrix2d::Identity())};
    CHECK_THROWS(frechet_mean(mixed));
  }
}

TEST_CASE("metric axioms hold on random pairs and triples") {
  Rng rng(101);
  const int trials = 40;

  for (int t = 0; t < trials; ++t) {
    auto a = testhelp::random_quantile(rng, 20);
    auto b = testhelp::random_quantile(rng, 20);
    auto c = testhelp::random_quantile(rng, 20);

    CHECK(w2_sq(a, b) >= 0.0);
    CHECK(w2_sq(a, b) == doctest::Approx(w2_sq(b, a)).epsilon(1e-14));
    CHECK(w2_sq(a, a) == 0.0);
    const double dab = std::sqrt(w2_sq(a, b));
    const double dbc = std::sqrt(w2_sq(b, c));
    const double dac = std::sqrt(w2_sq(a, c));
    CHECK(dac <= dab + dbc + 1e-9);
  }

  for (int t = 0; t < trials; ++t) {
    auto a = testhelp::random_spd(rng, 3);
    auto b = testhelp::random_spd(rng, 3);
    auto c = testhelp::random_spd(rng, 3);

    CHECK(cholesky_dist_sq(a, b) >= 0.0);
    CHECK(cholesky_dist_sq(a, b) == doctest::Approx(cholesky_dist_sq(b, a)).epsilon(1e-14));
    CHECK(cholesky_dist_sq(a, a) == 0.0);
    const double dab = std::sqrt(cholesky_dist_sq(a, b));
    const double dbc = std::sqrt(cholesky_dist_sq(b, c));
    const double dac = std::sqrt(cholesky_dist_sq(a, c));
    CHECK(dac <= dab + dbc + 1e-9);
  }
}

TEST_CASE("frechet mean is a local minimizer of the summed squared distance") {
  Rng rng(55);

  auto check_local_min = [&](const std::vector<MetricResponse>& ys) {
    MetricResponse center = frechet_mean(ys);
    const double at_mean = frechet_variance(ys, center);
    for (const auto& y : ys) CHECK(at_mean <= frechet_variance(ys, y) + 1e-12);

    // small random perturbations of the mean should not do better
    for (int t = 0; t < 10; ++t) {
      if (auto* q = std::get_if<QuantileObject>(&center)) {
        Eigen::VectorXd noise = testhelp::random_vector(rng, q->m(), 1e-3);
        // keep the perturbed vector a valid quantile function
        std::sort(noise.data(), noise.data() + noise.size());
        QuantileObject perturbed(q->values + noise);
        CHECK(at_mean <= frechet_variance(ys, perturbed) + 1e-12);
      } else {
        const auto& s = std::get<SPDObject>(center);
        Eigen::MatrixXd e(s.dim(), s.dim());
        for (int i = 0; i < s.dim(); ++i)
          for (int j = 0; j < s.dim(); ++j) e(i, j) = 1e-3 * rng.normal();
        Eigen::MatrixXd m = s.mat() + e * e.transpose();
        CHECK(at_mean <= frechet_variance(ys, SPDObject(0.5 * (m + m.transpose()))) + 1e-12);
      }
    }
  };

  check_local_min(testhelp::random_quantiles(rng, 15, 16));
  check_local_min(testhelp::random_spds(rng, 15, 3));
}

TEST_CASE("response tags round-trip by name") {
  Eigen::VectorXd v(2);
  v << 0, 1;
  CHECK(tag_name(response_tag(MetricResponse(QuantileObject(v)))) == "quantile_w2");
  CHECK(tag_name(response_tag(MetricResponse(SPDObject(Eigen::Matrix2d::Identity())))) ==
        "spd_cholesky");
}

}  // TEST_SUITE
