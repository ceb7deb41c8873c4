#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kbench/dataset.hpp"
#include "kbench/kstat.hpp"

using namespace kbench;

namespace {

// chi-square critical value, df=3, alpha=0.01 (frozen from scipy
// chi2.ppf(0.99, 3) = 11.344866730144373)
constexpr double kChi2Crit3 = 11.344866730144373;

double chi2_group_counts(const GroupedDataset& ds, SplitTag split,
                         const std::map<GroupId, double>& expected) {
  const auto dist = empirical_group_distribution(ds, split);
  double stat = 0;
  for (const auto& [g, e] : expected) {
    const double o = static_cast<double>(dist.at(g).count);
    stat += (o - e) * (o - e) / e;
  }
  return stat;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  DataConfig c;
  c.confounder_strength = 1.2;
  CHECK_THROWS_WITH_AS(generate(c),
                       "invalid config: confounder_strength must be in [0.5, 1]",
                       ConfigError);
  c = DataConfig{};
  c.n_train = 0;
  CHECK_THROWS_WITH_AS(generate(c), "invalid config: n_train must be > 0", ConfigError);
  c = DataConfig{};
  c.attr_noise = 0.7;
  CHECK_THROWS_WITH_AS(generate(c), "invalid config: attr_noise must be in [0, 0.5]",
                       ConfigError);
  c = DataConfig{};
  c.fg_noise = -1;
  CHECK_THROWS_AS(generate(c), ConfigError);
}

TEST_CASE("rho=0.5 train group counts pass a chi-square test") {
  DataConfig c;
  c.n_train = 4000;
  c.n_val = 100;
  c.n_test = 200;
  c.confounder_strength = 0.5;
  c.seed = 3;
  const auto ds = generate(c);
  const std::map<GroupId, double> expected{
      {{0, 0}, 1000}, {{0, 1}, 1000}, {{1, 0}, 1000}, {{1, 1}, 1000}};
  CHECK(chi2_group_counts(ds, SplitTag::train, expected) < kChi2Crit3);
}

TEST_CASE("rho=0.9 train group counts match the multinomial expectation") {
  DataConfig c;
  c.n_train = 5000;
  c.n_val = 100;
  c.n_test = 200;
  c.confounder_strength = 0.9;
  c.seed = 5;
  const auto ds = generate(c);
  // P(a=y, y) = rho/2 per aligned group, (1-rho)/2 otherwise
  const std::map<GroupId, double> expected{
      {{0, 0}, 2250}, {{0, 1}, 250}, {{1, 0}, 250}, {{1, 1}, 2250}};
  CHECK(chi2_group_counts(ds, SplitTag::train, expected) < kChi2Crit3);
}

TEST_CASE("same config and seed is byte-identical") {
  DataConfig c;
  c.n_train = 300;
  c.n_val = 60;
  c.n_test = 80;
  c.seed = 17;
  const auto a = generate(c);
  const auto b = generate(c);
  CHECK(a.fingerprint() == b.fingerprint());
  std::ostringstream sa, sb;
  write_dataset_csv(sa, a);
  write_dataset_csv(sb, b);
  CHECK(sa.str() == sb.str());

  c.seed = 18;
  CHECK(generate(c).fingerprint() != a.fingerprint());
}

TEST_CASE("test split is group-balanced by construction") {
  DataConfig c;
  c.n_train = 200;
  c.n_val = 50;
  c.n_test = 2000;
  c.confounder_strength = 0.95;
  const auto ds = generate(c);
  const auto dist = empirical_group_distribution(ds, SplitTag::test);
  for (const auto& [g, gc] : dist) CHECK(gc.count == 500);

  c.n_test = 10;  // not divisible by 4: counts differ by at most one
  const auto ds2 = generate(c);
  const auto dist2 = empirical_group_distribution(ds2, SplitTag::test);
  std::size_t lo = 10, hi = 0;
  for (const auto& [g, gc] : dist2) {
    lo = std::min(lo, gc.count);
    hi = std::max(hi, gc.count);
  }
  CHECK(hi - lo <= 1);
}

TEST_CASE("rho=1 forces a=y in the sampled splits") {
  DataConfig c;
  c.n_train = 500;
  c.n_val = 100;
  c.n_test = 40;
  c.confounder_strength = 1.0;
  const auto ds = generate(c);
  const auto dist = empirical_group_distribution(ds, SplitTag::train);
  CHECK(dist.at({0, 1}).count == 0);
  CHECK(dist.at({1, 0}).count == 0);
  CHECK(dist.at({0, 0}).count + dist.at({1, 1}).count == 500);
}

TEST_CASE("empirical distribution: four-sample toy and closed-form rho=0.75") {
  GroupedDataset toy;
  toy.features = Eigen::MatrixXd::Zero(4, 1);
  toy.labels = {0, 1, 0, 1};
  toy.attributes = {0, 0, 1, 1};
  toy.split = {SplitTag::train, SplitTag::train, SplitTag::train, SplitTag::train};
  toy.core_dim = 1;
  const auto dist = empirical_group_distribution(toy, SplitTag::train);
  for (const auto& [g, gc] : dist) {
    CHECK(gc.count == 1);
    CHECK(gc.frequency == doctest::Approx(0.25));
  }
  CHECK_THROWS_AS(empirical_group_distribution(toy, SplitTag::test), ConfigError);

  DataConfig c;
  c.n_train = 10000;
  c.n_val = 100;
  c.n_test = 200;
  c.confounder_strength = 0.75;
  c.seed = 2;
  const auto ds = generate(c);
  const auto d75 = empirical_group_distribution(ds, SplitTag::train);
  CHECK(d75.at({0, 0}).frequency == doctest::Approx(0.375).epsilon(0.055));
  CHECK(d75.at({1, 1}).frequency == doctest::Approx(0.375).epsilon(0.055));
  CHECK(std::abs(d75.at({0, 1}).frequency - 0.125) < 0.02);
  CHECK(std::abs(d75.at({1, 0}).frequency - 0.125) < 0.02);
  double total = 0;
  for (const auto& [g, gc] : d75) total += gc.frequency;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("marginal label balance") {
  for (std::uint64_t seed : {0ull, 1ull, 2ull, 3ull, 4ull}) {
    DataConfig c;
    c.seed = seed;
    const auto ds = generate(c);
    double m = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) m += ds.labels[i];
    m /= static_cast<double>(ds.size());
    CHECK(std::abs(m - 0.5) < 1.5 / std::sqrt(static_cast<double>(ds.size())));
  }
}

TEST_CASE("eta=0 leaves annotations equal to generating attributes") {
  DataConfig c;
  c.n_train = 400;
  c.n_val = 80;
  c.n_test = 80;
  c.confounder_strength = 1.0;  // sampled splits: a == y exactly
  c.attr_noise = 0.0;
  const auto ds = generate(c);
  for (auto i : ds.indices_of(SplitTag::train)) CHECK(ds.attributes[i] == ds.labels[i]);
}

TEST_CASE("attr noise flips annotations only, at roughly the requested rate") {
  DataConfig base;
  base.n_train = 5000;
  base.n_val = 500;
  base.n_test = 500;
  base.confounder_strength = 1.0;
  base.seed = 9;
  DataConfig noisy = base;
  noisy.attr_noise = 0.25;
  const auto clean = generate(base);
  const auto ds = generate(noisy);
  // features identical: the generating attribute did not change
  CHECK(clean.features == ds.features);
  std::size_t flipped = 0;
  const auto idx = ds.indices_of(SplitTag::train);
  for (auto i : idx)
    if (ds.attributes[i] != clean.attributes[i]) ++flipped;
  const double rate = static_cast<double>(flipped) / static_cast<double>(idx.size());
  CHECK(rate == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("the (Y,A) tables depend only on rho and eta, never on the noise") {
  DataConfig a;
  a.seed = 21;
  a.confounder_strength = 0.8;
  DataConfig b = a;
  b.fg_noise = 2.5;
  b.bg_noise = 7.0;
  b.core_separation = 0.3;
  b.spurious_separation = 2.0;
  const auto da = generate(a);
  const auto db = generate(b);
  CHECK(da.labels == db.labels);
  CHECK(da.attributes == db.attributes);
  CHECK(mutual_information(da, SplitTag::train) ==
        mutual_information(db, SplitTag::train));
}

TEST_CASE("dataset csv round-trips") {
  DataConfig c;
  c.n_train = 30;
  c.n_val = 10;
  c.n_test = 8;
  c.core_dim = 2;
  c.spurious_dim = 3;
  const auto ds = generate(c);
  std::ostringstream out;
  write_dataset_csv(out, ds);
  std::istringstream in(out.str());
  const auto back = read_dataset_csv(in);
  CHECK(back.labels == ds.labels);
  CHECK(back.attributes == ds.attributes);
  CHECK(back.split == ds.split);
  CHECK(back.features == ds.features);  // exact: shortest round-trip formatting
  std::ostringstream out2;
  write_dataset_csv(out2, back);
  CHECK(out2.str() == out.str());
}
