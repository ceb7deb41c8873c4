#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kbench/stats.hpp"
#include "oracle.hpp"

using namespace kbench;

TEST_CASE("summary_stats textbook values") {
  const std::vector<double> v{1, 2, 3};
  const auto s = summary_stats(v);
  CHECK(s.mean == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.sd == doctest::Approx(1.0).epsilon(1e-15));

  const std::vector<double> c{4.2, 4.2, 4.2, 4.2};
  const auto sc = summary_stats(c);
  CHECK(sc.mean == doctest::Approx(4.2));
  CHECK(sc.sd == 0.0);

  CHECK_THROWS_AS(summary_stats(std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("pearson_r endpoints and hand value") {
  const std::vector<double> x{1, 2, 3, 4};
  std::vector<double> nx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) nx[i] = -x[i];
  CHECK(pearson_r(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson_r(x, nx) == doctest::Approx(-1.0).epsilon(1e-15));

  const std::vector<double> y{2, 1, 4, 3};
  CHECK(pearson_r(x, y) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("pearson_r error cases") {
  const std::vector<double> x{1, 2};
  CHECK_THROWS_AS(pearson_r(x, x), ConfigError);  // too short
  const std::vector<double> cx{1, 1, 1};
  const std::vector<double> y{1, 2, 3};
  CHECK_THROWS_AS(pearson_r(cx, y), NumericError);
  CHECK_THROWS_AS(pearson_r(y, cx), NumericError);
  const std::vector<double> bad{1, 2, 3, 4};
  CHECK_THROWS_AS(pearson_r(bad, y), ConfigError);  // length mismatch
}

TEST_CASE("pearson_r affine invariance / negation") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(12), y(12), x2(12), y2(12);
    for (auto& v : x) v = n01(rng);
    for (auto& v : y) v = n01(rng);
    const double a = std::abs(n01(rng)) + 0.1, b = n01(rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x2[i] = a * x[i] + b;
      y2[i] = -a * y[i] + b;
    }
    const double r = pearson_r(x, y);
    CHECK(pearson_r(x2, y) == doctest::Approx(r).epsilon(1e-12));
    CHECK(pearson_r(x, y2) == doctest::Approx(-r).epsilon(1e-12));
  }
}

TEST_CASE("ols_fit exact line and defined degenerate case") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2 * x[i] + 1;
  const auto f = ols_fit(x, y);
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-14));

  const std::vector<double> yc{5, 5, 5, 5, 5};
  const auto fc = ols_fit(x, yc);
  CHECK(fc.slope == 0.0);
  CHECK(fc.r_squared == 0.0);

  const std::vector<double> xc{2, 2, 2, 2, 2};
  CHECK_THROWS_AS(ols_fit(xc, y), NumericError);
}

TEST_CASE("stats match high-precision oracles on random fixtures") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> len(3, 40);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = len(rng);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = 10 * n01(rng);
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] =
        3 * n01(rng) + 0.5 * x[static_cast<std::size_t>(i)];
    CHECK(mean(x) == doctest::Approx(static_cast<double>(oracle::o_mean(x))).epsilon(1e-12));
    CHECK(sample_sd(x) ==
          doctest::Approx(static_cast<double>(oracle::o_sample_sd(x))).epsilon(1e-12));
    CHECK(pearson_r(x, y) ==
          doctest::Approx(static_cast<double>(oracle::o_pearson(x, y))).epsilon(1e-10));
    const auto f = ols_fit(x, y);
    const auto of = oracle::o_ols(x, y);
    CHECK(f.slope == doctest::Approx(static_cast<double>(of.slope)).epsilon(1e-10));
    CHECK(f.intercept == doctest::Approx(static_cast<double>(of.intercept)).epsilon(1e-10));
    CHECK(f.r_squared == doctest::Approx(static_cast<double>(of.r_squared)).epsilon(1e-10));
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0})
      CHECK(quantile(x, p) ==
            doctest::Approx(static_cast<double>(oracle::o_quantile(x, p))).epsilon(1e-12));
  }
}

TEST_CASE("quantile interpolation and iqr") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(median(v) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(quantile(v, 0.75) == doctest::Approx(3.25));
  CHECK(iqr(v) == doctest::Approx(1.5));
  CHECK(median(std::vector<double>{7}) == 7.0);
}
