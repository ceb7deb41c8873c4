#include "kbench/kstat.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "kbench/stats.hpp"

namespace kbench {

GroupId worst_group_of(const std::map<GroupId, GroupEval>& evals) {
  if (evals.empty()) throw ConfigError("worst_group: no groups");
  // map iteration is in GroupId order, so strict < keeps the
  // lexicographically smallest id among ties
  auto it = evals.begin();
  GroupId worst = it->first;
  double acc = it->second.accuracy;
  for (++it; it != evals.end(); ++it)
    if (it->second.accuracy < acc) {
      acc = it->second.accuracy;
      worst = it->first;
    }
  return worst;
}

GroupId worst_group(const TrainedModel& model_erm, const GroupedDataset& ds,
                    SplitTag split) {
  return worst_group_of(evaluate_groups(model_erm, ds, split));
}

KEstimate bayes_factor_k(const TrainedModel& m_rw, const TrainedModel& m_erm,
                         const GroupedDataset& ds) {
  if (m_rw.objective != Objective::reweight && m_rw.objective != Objective::groupdro)
    throw ConfigError("bayes_factor_k: reference model must be reweight or groupdro, got " +
                      to_string(m_rw.objective));
  if (m_erm.objective != Objective::erm)
    throw ConfigError("bayes_factor_k: second model must be erm, got " +
                      to_string(m_erm.objective));
  const std::uint64_t fp = ds.fingerprint();
  if (m_rw.data_fingerprint != fp || m_erm.data_fingerprint != fp)
    throw ConfigError("bayes_factor_k: dataset fingerprint mismatch, models were not "
                      "trained on this dataset");
  const auto ev_erm = evaluate_groups(m_erm, ds, SplitTag::test);
  const auto ev_rw = evaluate_groups(m_rw, ds, SplitTag::test);
  const GroupId wg = worst_group_of(ev_erm);
  KEstimate est;
  est.worst_group = wg;
  est.n_worst = ev_erm.at(wg).count;
  est.ll_erm = ev_erm.at(wg).mean_log_likelihood;
  est.ll_rw = ev_rw.at(wg).mean_log_likelihood;
  est.k = est.ll_rw - est.ll_erm;
  est.reference = m_rw.objective;
  est.seed = m_erm.seed;
  return est;
}

double mutual_information(const GroupedDataset& ds, SplitTag split) {
  const auto dist = empirical_group_distribution(ds, split);
  double pa[2] = {0, 0}, py[2] = {0, 0};
  for (const auto& [g, c] : dist) {
    pa[g.attribute] += c.frequency;
    py[g.label] += c.frequency;
  }
  double mi = 0;
  for (const auto& [g, c] : dist) {
    if (c.frequency == 0) continue;  // 0 * log 0 := 0
    mi += c.frequency * std::log(c.frequency / (pa[g.attribute] * py[g.label]));
  }
  return mi;
}

std::string to_string(Knob k) {
  switch (k) {
    case Knob::confounder: return "confounder";
    case Knob::bg_noise: return "bg_noise";
    case Knob::fg_noise: return "fg_noise";
    case Knob::attr_noise: return "attr_noise";
  }
  throw ConfigError("unknown knob");
}

Knob parse_knob(const std::string& s) {
  if (s == "confounder") return Knob::confounder;
  if (s == "bg_noise") return Knob::bg_noise;
  if (s == "fg_noise") return Knob::fg_noise;
  if (s == "attr_noise") return Knob::attr_noise;
  throw ConfigError("unknown knob: " + s);
}

std::string to_string(Hyper h) {
  return h == Hyper::learning_rate ? "learning_rate" : "batch_size";
}

Hyper parse_hyper(const std::string& s) {
  if (s == "learning_rate") return Hyper::learning_rate;
  if (s == "batch_size") return Hyper::batch_size;
  throw ConfigError("unknown hyperparameter: " + s);
}

KRun estimate_k_run(const DataConfig& config, std::uint64_t seed,
                    const SweepOptions& opts) {
  DataConfig cfg = config;
  cfg.seed = seed;
  const GroupedDataset ds = generate(cfg);
  TrainConfig tc = opts.train;
  tc.seed = seed;
  tc.objective = Objective::erm;
  KRun run;
  run.erm = train(ds, opts.arch, tc);
  tc.objective = opts.reference;
  run.reference = train(ds, opts.arch, tc);
  run.estimate = bayes_factor_k(run.reference, run.erm, ds);
  return run;
}

KEstimate estimate_k(const DataConfig& config, std::uint64_t seed,
                     const SweepOptions& opts) {
  return estimate_k_run(config, seed, opts).estimate;
}

namespace {

DataConfig apply_knob(DataConfig cfg, Knob knob, double value) {
  switch (knob) {
    case Knob::confounder: cfg.confounder_strength = value; break;
    case Knob::bg_noise: cfg.bg_noise = value; break;
    case Knob::fg_noise: cfg.fg_noise = value; break;
    case Knob::attr_noise: cfg.attr_noise = value; break;
  }
  return cfg;
}

/// Deterministic parallel map: slot i of the output is always cell i.
template <typename Fn>
void run_cells(std::size_t count, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  const int nthreads = std::max(1, threads);
  if (nthreads == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int w = 0; w < nthreads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
  }
  // rethrow the first error in cell order so failures are deterministic
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

[[noreturn]] void rethrow_with_context(const std::string& ctx) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(ctx + ": " + e.what());
  } catch (const QueryError& e) {
    throw QueryError(ctx + ": " + e.what());
  }
}

}  // namespace

std::vector<SweepCell> k_sweep(const DataConfig& base, Knob knob,
                               const std::vector<double>& values,
                               const std::vector<std::uint64_t>& seeds,
                               const SweepOptions& opts) {
  if (values.empty()) throw ConfigError("k_sweep: empty value list");
  if (!std::is_sorted(values.begin(), values.end()))
    throw ConfigError("k_sweep: values must be sorted");
  if (seeds.empty()) throw ConfigError("k_sweep: empty seed list");

  std::vector<SweepCell> cells(values.size() * seeds.size());
  for (std::size_t vi = 0; vi < values.size(); ++vi)
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      auto& c = cells[vi * seeds.size() + si];
      c.knob = knob;
      c.value = values[vi];
      c.seed = seeds[si];
    }

  run_cells(cells.size(), opts.threads, [&](std::size_t i) {
    auto& c = cells[i];
    try {
      c.estimate = estimate_k(apply_knob(base, knob, c.value), c.seed, opts);
    } catch (...) {
      rethrow_with_context("k_sweep(" + to_string(knob) + "=" + format_double(c.value) +
                           ", seed=" + std::to_string(c.seed) + ")");
    }
  });
  return cells;
}

std::vector<RobustnessRow> k_robustness(const DataConfig& base, Hyper hyper,
                                        const std::vector<double>& settings,
                                        std::vector<DataConfig> probes,
                                        const SweepOptions& opts) {
  if (probes.empty()) {
    for (double rho : {0.5, 0.6, 0.7, 0.8, 0.9, 0.95}) {
      DataConfig c = base;
      c.confounder_strength = rho;
      probes.push_back(c);
    }
  }
  if (probes.size() < 3)
    throw ConfigError("k_robustness: need at least 3 probe configs");
  const double reference =
      hyper == Hyper::learning_rate ? opts.train.learning_rate
                                    : static_cast<double>(opts.train.batch_size);
  if (std::find(settings.begin(), settings.end(), reference) == settings.end())
    throw ConfigError("k_robustness: settings must include the reference setting " +
                      format_double(reference));

  auto k_vector = [&](double setting) {
    SweepOptions o = opts;
    if (hyper == Hyper::learning_rate)
      o.train.learning_rate = setting;
    else
      o.train.batch_size = static_cast<int>(setting);
    std::vector<double> ks(probes.size());
    run_cells(probes.size(), opts.threads, [&](std::size_t i) {
      try {
        ks[i] = estimate_k(probes[i], probes[i].seed, o).k;
      } catch (...) {
        rethrow_with_context("k_robustness(" + to_string(hyper) + "=" +
                             format_double(setting) + ", probe=" + std::to_string(i) + ")");
      }
    });
    return ks;
  };

  const std::vector<double> ref_ks = k_vector(reference);
  std::vector<RobustnessRow> rows;
  rows.reserve(settings.size());
  for (double s : settings) {
    const std::vector<double> ks = s == reference ? ref_ks : k_vector(s);
    rows.push_back({s, pearson_r(ks, ref_ks)});
  }
  return rows;
}

}  // namespace kbench
