#include "kbench/recommend.hpp"

#include <algorithm>
#include <cmath>

#include "kbench/stats.hpp"

namespace kbench {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::all_avg: return "all_avg";
    case Strategy::valid_avg: return "valid_avg";
    case Strategy::closest: return "closest";
  }
  throw ConfigError("unknown strategy");
}

Recommendation best_by_average(const ResultsTable& results,
                               const std::set<std::string>& subset, Strategy which) {
  if (subset.empty()) throw ConfigError("best_by_average: empty benchmark subset");
  for (const auto& b : subset)
    if (!results.family.count(b))
      throw ConfigError("best_by_average: unknown benchmark " + b);
  Recommendation rec;
  rec.strategy = which;
  for (const auto& m : results.methods) {
    double sum = 0;
    int cnt = 0;
    for (const auto& b : subset)
      if (results.has(b, m)) {
        sum += results.at(b, m);
        ++cnt;
      }
    if (cnt == 0) {
      rec.skipped_methods.push_back(m);
      continue;
    }
    rec.method_means[m] = sum / cnt;
  }
  if (rec.method_means.empty())
    throw ConfigError("best_by_average: no method has a cell in the subset");
  // method_means is name-ordered, so strict > keeps the lexicographically
  // smallest name among ties
  for (const auto& [m, mean] : rec.method_means)
    if (rec.chosen_method.empty() || mean > rec.method_means.at(rec.chosen_method))
      rec.chosen_method = m;
  return rec;
}

std::string closest_benchmark(double k_test, ModelFamily family,
                              const std::map<std::string, KTableEntry>& k_table,
                              const std::set<std::string>& exclude) {
  std::string best;
  double best_dist = 0;
  for (const auto& [name, entry] : k_table) {
    if (entry.family != family) continue;
    if (exclude.count(name)) continue;
    const double d = std::abs(k_test - entry.k);
    if (best.empty() || d < best_dist) {  // map order breaks ties lexicographically
      best = name;
      best_dist = d;
    }
  }
  if (best.empty())
    throw QueryError("closest_benchmark: no " + to_string(family) +
                     " candidate, the query lacks appropriate comparison benchmarks");
  return best;
}

std::string best_method_on(const ResultsTable& results, const std::string& benchmark) {
  std::string best;
  for (const auto& m : results.methods) {
    if (!results.has(benchmark, m)) continue;
    if (best.empty() || results.at(benchmark, m) > results.at(benchmark, best) ||
        (results.at(benchmark, m) == results.at(benchmark, best) && m < best))
      best = m;
  }
  if (best.empty())
    throw ConfigError("best_method_on: benchmark " + benchmark + " has no cells");
  return best;
}

std::vector<LooRow> leave_one_out(const ResultsTable& results,
                                  const std::map<std::string, KTableEntry>& k_table,
                                  const ValidityReport& validity) {
  const std::set<std::string> valid = validity.valid_set();
  const std::set<std::string> invalid = validity.invalid_set();
  if (valid.size() < 3)
    throw ConfigError("leave_one_out: fewer than 3 valid benchmarks");

  std::set<std::string> benchmark_pool;  // datasets that are benchmarks at all
  for (const auto& r : validity.rows) {
    if (!results.family.count(r.benchmark))
      throw ConfigError("leave_one_out: validity report names unknown benchmark " +
                        r.benchmark);
    benchmark_pool.insert(r.benchmark);
  }

  std::map<std::string, KTableEntry> valid_k;
  for (const auto& b : valid) {
    auto it = k_table.find(b);
    if (it != k_table.end()) valid_k[b] = it->second;
  }

  std::vector<std::string> rows_order = results.benchmarks;
  std::sort(rows_order.begin(), rows_order.end());

  std::vector<LooRow> rows;
  for (const auto& t : rows_order) {
    if (invalid.count(t)) continue;  // invalid benchmarks are not test datasets
    LooRow row;
    row.test_dataset = t;

    auto pick = [&](const std::set<std::string>& pool, Strategy which)
        -> std::pair<std::string, std::optional<double>> {
      std::set<std::string> subset = pool;
      subset.erase(t);
      if (subset.empty()) return {"", std::nullopt};
      const Recommendation rec = best_by_average(results, subset, which);
      std::optional<double> acc;
      if (results.has(t, rec.chosen_method)) acc = results.at(t, rec.chosen_method);
      return {rec.chosen_method, acc};
    };

    std::tie(row.all_method, row.all_acc) = pick(benchmark_pool, Strategy::all_avg);
    std::tie(row.valid_method, row.valid_acc) = pick(valid, Strategy::valid_avg);

    try {
      auto kt = k_table.find(t);
      if (kt == k_table.end())
        throw QueryError("closest_benchmark: no K value for test dataset " + t);
      row.closest_bench =
          closest_benchmark(kt->second.k, kt->second.family, valid_k, {t});
      row.closest_method = best_method_on(results, row.closest_bench);
      if (results.has(t, row.closest_method))
        row.closest_acc = results.at(t, row.closest_method);
    } catch (const std::runtime_error& e) {
      row.closest_error = e.what();
    }

    // winner: highest accuracy, ties to the simpler strategy
    row.winner = Strategy::all_avg;
    double best = row.all_acc.value_or(-1);
    if (row.valid_acc && *row.valid_acc > best) {
      best = *row.valid_acc;
      row.winner = Strategy::valid_avg;
    }
    if (row.closest_acc && *row.closest_acc > best) row.winner = Strategy::closest;

    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<MethodProfile> method_profiles(
    const ResultsTable& results, const std::map<std::string, KTableEntry>& k_table) {
  std::vector<std::string> methods = results.methods;
  std::sort(methods.begin(), methods.end());
  std::vector<MethodProfile> out;
  for (const auto& m : methods) {
    MethodProfile p;
    p.method = m;
    std::vector<double> accs, ks;
    for (const auto& b : results.benchmarks) {
      if (!results.has(b, m)) continue;
      auto kt = k_table.find(b);
      if (kt == k_table.end()) continue;
      accs.push_back(results.at(b, m));
      ks.push_back(kt->second.k);
    }
    p.n_cells = accs.size();
    if (accs.empty()) {
      p.flagged = true;
      out.push_back(std::move(p));
      continue;
    }
    p.median_wg = median(accs);
    p.iqr_wg = iqr(accs);
    if (accs.size() < 3) {
      p.flagged = true;
    } else {
      try {
        p.r2_vs_k = ols_fit(ks, accs).r_squared;
      } catch (const NumericError&) {
        p.flagged = true;  // all K equal: variance share undefined
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace kbench
