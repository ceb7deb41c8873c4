#include "kbench/validity.hpp"

#include <algorithm>

#include "kbench/stats.hpp"

namespace kbench {

std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::vision: return "vision";
    case ModelFamily::language: return "language";
    case ModelFamily::other: return "other";
  }
  throw ConfigError("unknown model family");
}

ModelFamily parse_family(const std::string& s) {
  if (s == "vision") return ModelFamily::vision;
  if (s == "language") return ModelFamily::language;
  if (s == "other") return ModelFamily::other;
  throw ConfigError("unknown model family: " + s);
}

bool ResultsTable::has(const std::string& benchmark, const std::string& method) const {
  return cells.count({benchmark, method}) > 0;
}

double ResultsTable::at(const std::string& benchmark, const std::string& method) const {
  auto it = cells.find({benchmark, method});
  if (it == cells.end())
    throw ConfigError("results: missing cell (" + benchmark + ", " + method + ")");
  return it->second;
}

void ResultsTable::set(const std::string& benchmark, ModelFamily fam,
                       const std::string& method, double wg_acc) {
  if (wg_acc < 0.0 || wg_acc > 100.0)
    throw ConfigError("results: accuracy outside [0,100] for (" + benchmark + ", " +
                      method + ")");
  if (!family.count(benchmark)) benchmarks.push_back(benchmark);
  family[benchmark] = fam;
  if (std::find(methods.begin(), methods.end(), method) == methods.end())
    methods.push_back(method);
  cells[{benchmark, method}] = wg_acc;
}

double erm_failure_sd(const GroupAccuracyTable& groups, const std::string& benchmark) {
  auto it = groups.acc.find(benchmark);
  if (it == groups.acc.end())
    throw ConfigError("erm_failure_sd: unknown benchmark " + benchmark);
  std::vector<double> v;
  v.reserve(it->second.size());
  for (const auto& [g, a] : it->second) v.push_back(a);
  if (v.size() < 2)
    throw ConfigError("erm_failure_sd: benchmark " + benchmark + " has fewer than 2 groups");
  return sample_sd(v);
}

double disc_power_sd(const ResultsTable& results, const std::string& benchmark) {
  std::vector<double> v;
  for (const auto& m : results.methods)
    if (results.has(benchmark, m)) v.push_back(results.at(benchmark, m));
  if (v.size() < 2)
    throw ConfigError("disc_power_sd: benchmark " + benchmark +
                      " has fewer than 2 non-missing methods");
  return sample_sd(v);
}

std::optional<double> AgreementMatrix::at(const std::string& a,
                                          const std::string& b) const {
  auto ia = std::find(benchmarks.begin(), benchmarks.end(), a);
  auto ib = std::find(benchmarks.begin(), benchmarks.end(), b);
  if (ia == benchmarks.end() || ib == benchmarks.end())
    throw ConfigError("agreement: unknown benchmark " + (ia == benchmarks.end() ? a : b));
  return r[static_cast<std::size_t>(ia - benchmarks.begin())]
          [static_cast<std::size_t>(ib - benchmarks.begin())];
}

AgreementMatrix agreement_matrix(const ResultsTable& results) {
  AgreementMatrix m;
  m.benchmarks = results.benchmarks;
  std::sort(m.benchmarks.begin(), m.benchmarks.end());
  const std::size_t n = m.benchmarks.size();
  m.r.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    m.r[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      std::vector<double> xi, xj;
      for (const auto& meth : results.methods)
        if (results.has(m.benchmarks[i], meth) && results.has(m.benchmarks[j], meth)) {
          xi.push_back(results.at(m.benchmarks[i], meth));
          xj.push_back(results.at(m.benchmarks[j], meth));
        }
      if (xi.size() < 3) {
        m.undefined[{m.benchmarks[i], m.benchmarks[j]}] =
            "fewer than 3 shared methods";
        continue;
      }
      try {
        const double r = pearson_r(xi, xj);
        m.r[i][j] = r;
        m.r[j][i] = r;
      } catch (const NumericError& e) {
        m.undefined[{m.benchmarks[i], m.benchmarks[j]}] = e.what();
      }
    }
  }
  return m;
}

ConvergentValidity convergent_validity_fit(
    std::span<const std::pair<double, double>> points) {
  if (points.size() < 2)
    throw ConfigError("convergent_validity: fewer than 2 partner points");
  std::vector<double> dk, r;
  dk.reserve(points.size());
  r.reserve(points.size());
  for (const auto& [d, rr] : points) {
    dk.push_back(d);
    r.push_back(rr);
  }
  const OlsFit fit = ols_fit(dk, r);
  ConvergentValidity cv;
  cv.coeff = -fit.slope;  // positive coeff = agreement decays with K distance
  cv.r_squared = fit.r_squared;
  cv.n_partners = static_cast<int>(points.size());
  return cv;
}

ConvergentValidity convergent_validity_for(const AgreementMatrix& agreement,
                                           const std::map<std::string, double>& k_values,
                                           const std::map<std::string, ModelFamily>& families,
                                           const std::set<std::string>& prefilter,
                                           const std::string& benchmark) {
  auto kb = k_values.find(benchmark);
  if (kb == k_values.end())
    throw ConfigError("convergent_validity: no K value for " + benchmark);
  auto fb = families.find(benchmark);
  if (fb == families.end())
    throw ConfigError("convergent_validity: no family for " + benchmark);
  std::vector<std::pair<double, double>> points;
  for (const auto& partner : prefilter) {
    if (partner == benchmark) continue;
    auto kp = k_values.find(partner);
    auto fp = families.find(partner);
    if (kp == k_values.end() || fp == families.end()) continue;
    if (fp->second != fb->second) continue;  // K is model-specific
    const auto r = agreement.at(benchmark, partner);
    if (!r) continue;
    points.emplace_back(std::abs(kb->second - kp->second), *r);
  }
  if (points.size() < 2)
    throw ConfigError("convergent_validity: benchmark " + benchmark +
                      " has fewer than 2 comparison partners");
  return convergent_validity_fit(points);
}

std::map<std::string, ConvOutcome> convergent_validity(
    const ResultsTable& results, const std::map<std::string, double>& k_values,
    const std::set<std::string>& prefilter) {
  const AgreementMatrix agreement = agreement_matrix(results);
  std::map<std::string, ConvOutcome> out;
  for (const auto& b : results.benchmarks) {
    ConvOutcome o;
    if (!k_values.count(b)) {
      o.error = "no K value";
    } else {
      try {
        o.value = convergent_validity_for(agreement, k_values, results.family,
                                          prefilter, b);
      } catch (const std::runtime_error& e) {
        o.error = e.what();
      }
    }
    out[b] = std::move(o);
  }
  return out;
}

ValidityFlags classify_validity(double erm_sd, double disc_sd,
                                std::optional<double> conv_coeff, const Thresholds& t) {
  ValidityFlags f;
  f.pass_erm_failure = erm_sd >= t.erm_failure;
  f.pass_disc_power = disc_sd >= t.disc_power;
  f.pass_conv_validity = conv_coeff.has_value() && *conv_coeff >= t.conv_validity;
  f.valid = f.pass_erm_failure && f.pass_disc_power && f.pass_conv_validity;
  return f;
}

std::set<std::string> ValidityReport::valid_set() const {
  std::set<std::string> s;
  for (const auto& r : rows)
    if (r.flags.valid) s.insert(r.benchmark);
  return s;
}

std::set<std::string> ValidityReport::invalid_set() const {
  std::set<std::string> s;
  for (const auto& r : rows)
    if (!r.flags.valid) s.insert(r.benchmark);
  return s;
}

std::map<std::string, int> method_ranks(const ResultsTable& results,
                                        const std::string& benchmark) {
  std::vector<std::pair<std::string, double>> present;
  for (const auto& m : results.methods)
    if (results.has(benchmark, m)) present.emplace_back(m, results.at(benchmark, m));
  if (present.size() < 2)
    throw ConfigError("method_ranks: benchmark " + benchmark +
                      " has fewer than 2 methods");
  std::map<std::string, int> ranks;
  for (const auto& [m, acc] : present) {
    int better = 0;
    for (const auto& [m2, acc2] : present)
      if (acc2 > acc) ++better;
    ranks[m] = better + 1;  // ties share the smaller rank
  }
  return ranks;
}

}  // namespace kbench
