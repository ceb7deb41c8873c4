// kbench: simulate grouped datasets, estimate the Bayes-factor statistic K,
// run sweeps and robustness checks, score benchmark validity, and recommend
// mitigation methods. Exit codes: 0 ok, 2 input/config error, 3 numerical
// failure, 4 unsatisfiable query.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kbench/io.hpp"
#include "kbench/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kbench;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  std::vector<std::uint64_t> seeds;
  const auto dots = spec.find("..");
  if (dots != std::string::npos) {
    const auto a = std::stoull(spec.substr(0, dots));
    const auto b = std::stoull(spec.substr(dots + 2));
    if (b < a) throw ConfigError("bad seed range: " + spec);
    for (auto s = a; s <= b; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) seeds.push_back(std::stoull(tok));
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

std::vector<double> parse_values(const std::string& spec) {
  std::vector<double> vals;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
  if (vals.empty()) throw ConfigError("empty value list");
  return vals;
}

json load_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Gathers a command's outputs, then writes them all with the manifest id
/// stamped in (comment line for CSV, "manifest_id" key for JSON objects).
class OutputSet {
 public:
  OutputSet(std::string command, fs::path dir) : dir_(std::move(dir)) {
    manifest_.command = std::move(command);
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output dir " + dir_.string());
    start_ = std::chrono::steady_clock::now();
  }

  RunManifest& manifest() { return manifest_; }

  void add_input(const fs::path& p) { manifest_.input_digests[p.string()] = file_digest(p); }

  void add_csv(const std::string& name, std::string content) {
    manifest_.outputs.push_back(name);
    csv_.emplace_back(name, std::move(content));
  }

  void add_json(const std::string& name, json content) {
    manifest_.outputs.push_back(name);
    json_.emplace_back(name, std::move(content));
  }

  void commit() {
    const std::string id = manifest_.id();
    for (auto& [name, content] : csv_) {
      std::ofstream f(dir_ / name, std::ios::binary);
      if (!f) throw ConfigError("cannot write " + (dir_ / name).string());
      f << "# manifest: " << id << "\n" << content;
    }
    for (auto& [name, content] : json_) {
      if (content.is_object()) content["manifest_id"] = id;
      std::ofstream f(dir_ / name, std::ios::binary);
      if (!f) throw ConfigError("cannot write " + (dir_ / name).string());
      f << content.dump(2) << "\n";
    }
    manifest_.wall_clock_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                  start_)
            .count();
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir_ / "manifest.json").string());
    f << manifest_to_json(manifest_).dump(2) << "\n";
  }

 private:
  fs::path dir_;
  RunManifest manifest_;
  std::vector<std::pair<std::string, std::string>> csv_;
  std::vector<std::pair<std::string, json>> json_;
  std::chrono::steady_clock::time_point start_;
};

std::string hash_config(const DataConfig& c) {
  return hex64(fnv1a(dataconfig_to_json(c).dump()));
}

struct CommonTrainFlags {
  std::string reference = "reweight";
  std::string arch = "linear";
  double lr = 1e-3;
  int batch_size = 0;
  int max_epochs = 500;
  int hidden = 16;

  SweepOptions options(int threads) const {
    SweepOptions o;
    o.reference = parse_objective(reference);
    if (o.reference == Objective::erm)
      throw ConfigError("--reference must be reweight or groupdro");
    o.arch = parse_arch(arch);
    o.train.learning_rate = lr;
    o.train.batch_size = batch_size;
    o.train.max_epochs = max_epochs;
    o.train.hidden_width = hidden;
    o.threads = threads;
    return o;
  }
};

void add_train_flags(CLI::App* cmd, CommonTrainFlags& f) {
  cmd->add_option("--reference", f.reference, "reference objective: reweight|groupdro");
  cmd->add_option("--arch", f.arch, "model architecture: linear|mlp1");
  cmd->add_option("--lr", f.lr, "learning rate for both models");
  cmd->add_option("--batch-size", f.batch_size, "minibatch size (0 = full batch)");
  cmd->add_option("--max-epochs", f.max_epochs, "epoch cap");
  cmd->add_option("--hidden", f.hidden, "hidden width (mlp1)");
}

int run_simulate(const fs::path& config_path, const fs::path& out,
                 const std::string& seed_spec) {
  OutputSet outs("simulate", out);
  outs.add_input(config_path);
  DataConfig cfg = dataconfig_from_json(load_json(config_path));
  if (!seed_spec.empty()) cfg.seed = parse_seeds(seed_spec).at(0);
  outs.manifest().config_hash = hash_config(cfg);
  outs.manifest().seeds = {cfg.seed};

  const GroupedDataset ds = generate(cfg);
  std::ostringstream csv;
  write_dataset_csv(csv, ds);
  outs.add_csv("dataset.csv", csv.str());
  outs.add_json("config.json", dataconfig_to_json(cfg));
  outs.commit();
  return 0;
}

int run_k(const fs::path& config_path, const fs::path& out, const std::string& seed_spec,
          const CommonTrainFlags& flags, const std::string& aggregate,
          const std::string& format) {
  OutputSet outs("k", out);
  outs.add_input(config_path);
  const DataConfig cfg = dataconfig_from_json(load_json(config_path));
  const SweepOptions opts = flags.options(1);
  std::vector<std::uint64_t> seeds =
      seed_spec.empty() ? std::vector<std::uint64_t>{cfg.seed} : parse_seeds(seed_spec);
  outs.manifest().config_hash = hash_config(cfg);
  outs.manifest().seeds = seeds;

  json runs = json::array();
  std::vector<double> ks;
  std::vector<SweepCell> cells;
  for (auto seed : seeds) {
    const KRun run = estimate_k_run(cfg, seed, opts);
    ks.push_back(run.estimate.k);
    json entry;
    entry["estimate"] = kestimate_to_json(run.estimate);
    entry["m_erm"] = model_to_json(run.erm);
    entry["m_ref"] = model_to_json(run.reference);
    runs.push_back(std::move(entry));
    cells.push_back({Knob::confounder, cfg.confounder_strength, seed, run.estimate});
  }
  json report;
  report["config"] = dataconfig_to_json(cfg);
  report["reference"] = flags.reference;
  report["runs"] = std::move(runs);
  if (aggregate == "median") report["median_k"] = median(ks);

  if (format != "csv") outs.add_json("k.json", std::move(report));
  if (format != "json") {
    std::ostringstream csv;
    csv << "seed,k,ll_rw,ll_erm,worst_group,n_worst\n";
    for (const auto& c : cells)
      csv << c.seed << ',' << format_double(c.estimate.k) << ','
          << format_double(c.estimate.ll_rw) << ',' << format_double(c.estimate.ll_erm)
          << ',' << to_string(c.estimate.worst_group) << ',' << c.estimate.n_worst
          << "\n";
    outs.add_csv("k_estimates.csv", csv.str());
  }
  outs.commit();
  return 0;
}

int run_sweep(const fs::path& config_path, const fs::path& out, const std::string& knob,
              const std::string& values_spec, const std::string& seed_spec,
              const CommonTrainFlags& flags, int threads) {
  OutputSet outs("sweep", out);
  outs.add_input(config_path);
  const DataConfig base = dataconfig_from_json(load_json(config_path));
  const auto seeds = parse_seeds(seed_spec);
  outs.manifest().config_hash = hash_config(base);
  outs.manifest().seeds = seeds;

  const auto cells =
      k_sweep(base, parse_knob(knob), parse_values(values_spec), seeds, flags.options(threads));
  std::ostringstream csv;
  write_sweep_csv(csv, cells);
  outs.add_csv("sweep.csv", csv.str());
  outs.commit();
  return 0;
}

int run_robustness(const fs::path& config_path, const fs::path& out,
                   const std::string& hyper, const std::string& settings_spec,
                   const fs::path& probes_path, const CommonTrainFlags& flags,
                   int threads) {
  OutputSet outs("robustness", out);
  outs.add_input(config_path);
  const DataConfig base = dataconfig_from_json(load_json(config_path));
  std::vector<DataConfig> probes;
  if (!probes_path.empty()) {
    outs.add_input(probes_path);
    const json j = load_json(probes_path);
    if (!j.is_array()) throw ConfigError(probes_path.string() + ": expected a JSON array");
    for (const auto& e : j) probes.push_back(dataconfig_from_json(e));
  }
  outs.manifest().config_hash = hash_config(base);

  const Hyper h = parse_hyper(hyper);
  const auto rows =
      k_robustness(base, h, parse_values(settings_spec), std::move(probes), flags.options(threads));
  std::ostringstream csv;
  write_robustness_csv(csv, h, rows);
  outs.add_csv("robustness.csv", csv.str());
  outs.commit();
  return 0;
}

ValidityReport build_report_from_stats(const fs::path& stats_path, const Thresholds& th) {
  const auto rows = read_csv_file(stats_path);
  const std::string ctx = stats_path.filename().string();
  const std::vector<std::string> header{"benchmark", "model_family", "k",
                                        "erm_failure_sd", "disc_power_sd", "conv_coeff"};
  if (rows.empty() || rows.front().cells != header)
    throw ConfigError(ctx + " row " + std::to_string(rows.empty() ? 1 : rows.front().line) +
                      ": expected header benchmark,model_family,k,erm_failure_sd,"
                      "disc_power_sd,conv_coeff");
  ValidityReport rep;
  rep.thresholds = th;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.cells.size() != 6)
      throw ConfigError(ctx + " row " + std::to_string(r.line) + ": expected 6 columns");
    if (!seen.insert(r.cells[0]).second)
      throw ConfigError(ctx + " row " + std::to_string(r.line) + ": duplicate benchmark " +
                        r.cells[0]);
    ValidityRow row;
    row.benchmark = r.cells[0];
    row.family = parse_family(r.cells[1]);
    row.k = std::stod(r.cells[2]);
    row.erm_failure_sd = std::stod(r.cells[3]);
    row.disc_power_sd = std::stod(r.cells[4]);
    row.conv_coeff = std::stod(r.cells[5]);
    row.flags = classify_validity(row.erm_failure_sd, row.disc_power_sd, row.conv_coeff, th);
    rep.rows.push_back(std::move(row));
  }
  std::sort(rep.rows.begin(), rep.rows.end(),
            [](const auto& a, const auto& b) { return a.benchmark < b.benchmark; });
  return rep;
}

ValidityReport build_report(const ResultsTable& results, const GroupAccuracyTable& groups,
                            const std::map<std::string, KTableEntry>& k_table,
                            const Thresholds& th) {
  ValidityReport rep;
  rep.thresholds = th;
  // desiderata 1-2 first; their passers form the convergent-validity prefilter
  std::map<std::string, std::pair<double, double>> sds;
  std::set<std::string> prefilter;
  for (const auto& b : results.benchmarks) {
    const double erm_sd = erm_failure_sd(groups, b);
    const double disc_sd = disc_power_sd(results, b);
    sds[b] = {erm_sd, disc_sd};
    if (erm_sd >= th.erm_failure && disc_sd >= th.disc_power) prefilter.insert(b);
  }
  std::map<std::string, double> k_values;
  for (const auto& [b, e] : k_table) k_values[b] = e.k;
  const auto conv = convergent_validity(results, k_values, prefilter);
  for (const auto& b : results.benchmarks) {
    ValidityRow row;
    row.benchmark = b;
    row.family = results.family.at(b);
    if (k_values.count(b)) row.k = k_values.at(b);
    row.erm_failure_sd = sds.at(b).first;
    row.disc_power_sd = sds.at(b).second;
    const auto& outcome = conv.at(b);
    if (outcome.value) {
      row.conv_coeff = outcome.value->coeff;
      row.conv_r2 = outcome.value->r_squared;
    } else {
      row.conv_error = outcome.error;
    }
    row.flags = classify_validity(row.erm_failure_sd, row.disc_power_sd, row.conv_coeff, th);
    rep.rows.push_back(std::move(row));
  }
  std::sort(rep.rows.begin(), rep.rows.end(),
            [](const auto& a, const auto& b) { return a.benchmark < b.benchmark; });
  return rep;
}

int run_validate(const fs::path& results_path, const fs::path& groups_path,
                 const fs::path& k_path, const fs::path& stats_path, const fs::path& out,
                 const std::string& thresholds_spec, const std::string& format) {
  OutputSet outs("validate", out);
  Thresholds th;
  if (!thresholds_spec.empty()) {
    const auto t = parse_values(thresholds_spec);
    if (t.size() != 3) throw ConfigError("--thresholds expects t1,t2,t3");
    th = {t[0], t[1], t[2]};
  }

  ValidityReport rep;
  if (!stats_path.empty()) {
    outs.add_input(stats_path);
    rep = build_report_from_stats(stats_path, th);
  } else {
    if (results_path.empty() || groups_path.empty() || k_path.empty())
      throw ConfigError("validate needs --results, --groups and --k (or --stats)");
    outs.add_input(results_path);
    outs.add_input(groups_path);
    outs.add_input(k_path);
    const ResultsTable results = read_results_csv(results_path);
    const GroupAccuracyTable groups = read_groups_csv(groups_path);
    const auto k_table = read_k_csv(k_path);
    rep = build_report(results, groups, k_table, th);

    const AgreementMatrix agreement = agreement_matrix(results);
    std::set<std::string> prefilter;
    for (const auto& r : rep.rows)
      if (r.flags.pass_erm_failure && r.flags.pass_disc_power)
        prefilter.insert(r.benchmark);
    std::map<std::string, double> k_values;
    for (const auto& [b, e] : k_table) k_values[b] = e.k;
    if (format != "json") {
      std::ostringstream acsv;
      write_agreement_csv(acsv, agreement);
      outs.add_csv("agreement.csv", acsv.str());
      std::ostringstream pcsv;
      write_conv_points_csv(pcsv, agreement, k_values, results.family, prefilter);
      outs.add_csv("conv_points.csv", pcsv.str());
    }
  }

  if (format != "csv") outs.add_json("validity.json", validity_to_json(rep));
  if (format != "json") {
    std::ostringstream csv;
    write_validity_csv(csv, rep);
    outs.add_csv("validity.csv", csv.str());
  }
  outs.commit();
  return 0;
}

int run_agreement(const fs::path& results_path, const fs::path& out) {
  OutputSet outs("agreement", out);
  outs.add_input(results_path);
  const ResultsTable results = read_results_csv(results_path);
  std::ostringstream csv;
  write_agreement_csv(csv, agreement_matrix(results));
  outs.add_csv("agreement.csv", csv.str());
  outs.commit();
  return 0;
}

int run_recommend(const fs::path& results_path, const fs::path& k_path,
                  const fs::path& validity_path, const fs::path& out, bool loo,
                  double test_k, bool have_test_k, const std::string& test_family,
                  const std::string& format) {
  OutputSet outs("recommend", out);
  outs.add_input(results_path);
  outs.add_input(k_path);
  outs.add_input(validity_path);
  const ResultsTable results = read_results_csv(results_path);
  const auto k_table = read_k_csv(k_path);
  const ValidityReport validity = validity_from_json(load_json(validity_path));

  if (loo) {
    const auto rows = leave_one_out(results, k_table, validity);
    if (format != "csv") outs.add_json("loo.json", json{{"rows", loo_to_json(rows)}});
    if (format != "json") {
      std::ostringstream csv;
      write_loo_csv(csv, rows);
      outs.add_csv("loo.csv", csv.str());
    }
    outs.commit();
    return 0;
  }

  if (!have_test_k) throw ConfigError("recommend needs --loo or --test-k/--test-family");
  const ModelFamily family = parse_family(test_family);

  std::set<std::string> pool, valid;
  for (const auto& r : validity.rows) {
    pool.insert(r.benchmark);
    if (r.flags.valid) valid.insert(r.benchmark);
  }
  std::map<std::string, KTableEntry> valid_k;
  for (const auto& b : valid) {
    auto it = k_table.find(b);
    if (it != k_table.end()) valid_k[b] = it->second;
  }

  json report;
  report["test_k"] = test_k;
  report["test_family"] = test_family;
  auto rec_json = [](const Recommendation& r) {
    json j{{"strategy", to_string(r.strategy)},
           {"chosen_method", r.chosen_method},
           {"method_means", r.method_means}};
    if (!r.skipped_methods.empty()) j["skipped_methods"] = r.skipped_methods;
    return j;
  };
  report["all_avg"] = rec_json(best_by_average(results, pool, Strategy::all_avg));
  report["valid_avg"] = rec_json(best_by_average(results, valid, Strategy::valid_avg));

  bool closest_failed = false;
  try {
    const std::string match = closest_benchmark(test_k, family, valid_k);
    Recommendation rec;
    rec.strategy = Strategy::closest;
    rec.matched_benchmark = match;
    rec.k_distance = std::abs(test_k - valid_k.at(match).k);
    rec.chosen_method = best_method_on(results, match);
    report["closest"] = {{"strategy", "closest"},
                         {"chosen_method", rec.chosen_method},
                         {"matched_benchmark", rec.matched_benchmark},
                         {"k_distance", rec.k_distance}};
  } catch (const QueryError& e) {
    closest_failed = true;
    report["closest"] = {{"error", e.what()}};
  }
  outs.add_json("recommendation.json", std::move(report));
  outs.commit();
  return closest_failed ? 4 : 0;
}

int run_profiles(const fs::path& results_path, const fs::path& k_path, const fs::path& out,
                 const std::string& format) {
  OutputSet outs("profiles", out);
  outs.add_input(results_path);
  outs.add_input(k_path);
  const ResultsTable results = read_results_csv(results_path);
  const auto k_table = read_k_csv(k_path);
  const auto profiles = method_profiles(results, k_table);
  if (format != "csv")
    outs.add_json("profiles.json", json{{"profiles", profiles_to_json(profiles)}});
  if (format != "json") {
    std::ostringstream csv;
    write_profiles_csv(csv, profiles);
    outs.add_csv("profiles.csv", csv.str());
  }
  outs.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmark validity and method recommendation toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();  // global flags (--out, --format, --threads) after subcommands

  std::string out = ".";
  std::string format = "both";
  int threads = 1;
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--format", format, "json|csv|both")->capture_default_str();
  app.add_option("--threads", threads, "worker threads for sweeps")->capture_default_str();

  std::string config_path, seed_spec, knob = "confounder", values_spec, hyper,
              settings_spec, probes_path, thresholds_spec, aggregate;
  std::string results_path, groups_path, k_path, stats_path, validity_path;
  std::string test_family = "vision";
  double test_k = 0;
  bool loo = false;
  CommonTrainFlags flags;

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic grouped dataset");
  simulate->add_option("--config", config_path, "DataConfig JSON")->required();
  simulate->add_option("--seed", seed_spec, "seed override");

  auto* kcmd = app.add_subcommand("k", "estimate K for one config");
  kcmd->add_option("--config", config_path, "DataConfig JSON")->required();
  kcmd->add_option("--seed,--seeds", seed_spec, "seed, list or range a..b");
  kcmd->add_option("--aggregate", aggregate, "median");
  add_train_flags(kcmd, flags);

  auto* sweep = app.add_subcommand("sweep", "K over a knob grid");
  sweep->add_option("--config", config_path, "base DataConfig JSON")->required();
  sweep->add_option("--knob", knob, "confounder|bg_noise|fg_noise|attr_noise")->required();
  sweep->add_option("--values", values_spec, "sorted comma list")->required();
  sweep->add_option("--seeds", seed_spec, "seed list or range a..b")->required();
  add_train_flags(sweep, flags);

  auto* robust = app.add_subcommand("robustness", "K stability across hyperparameters");
  robust->add_option("--config", config_path, "base DataConfig JSON")->required();
  robust->add_option("--hyper", hyper, "learning_rate|batch_size")->required();
  robust->add_option("--settings", settings_spec, "comma list incl. the default")->required();
  robust->add_option("--probes", probes_path, "JSON array of probe DataConfigs");
  add_train_flags(robust, flags);

  auto* validate = app.add_subcommand("validate", "three-desiderata validity report");
  validate->add_option("--results", results_path, "results CSV");
  validate->add_option("--groups", groups_path, "per-group ERM accuracy CSV");
  validate->add_option("--k", k_path, "K table CSV");
  validate->add_option("--stats", stats_path, "precomputed statistics CSV");
  validate->add_option("--thresholds", thresholds_spec, "t1,t2,t3");

  auto* agree = app.add_subcommand("agreement", "benchmark agreement matrix");
  agree->add_option("--results", results_path, "results CSV")->required();

  auto* recommend = app.add_subcommand("recommend", "method selection strategies");
  recommend->add_option("--results", results_path, "results CSV")->required();
  recommend->add_option("--k", k_path, "K table CSV")->required();
  recommend->add_option("--validity", validity_path, "validity report JSON")->required();
  recommend->add_flag("--loo", loo, "leave-one-out evaluation over all test datasets");
  auto* tk = recommend->add_option("--test-k", test_k, "K of the new dataset");
  recommend->add_option("--test-family", test_family, "vision|language|other");

  auto* profiles = app.add_subcommand("profiles", "method robustness profiles");
  profiles->add_option("--results", results_path, "results CSV")->required();
  profiles->add_option("--k", k_path, "K table CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return run_simulate(config_path, out, seed_spec);
    if (kcmd->parsed()) return run_k(config_path, out, seed_spec, flags, aggregate, format);
    if (sweep->parsed())
      return run_sweep(config_path, out, knob, values_spec, seed_spec, flags, threads);
    if (robust->parsed())
      return run_robustness(config_path, out, hyper, settings_spec, probes_path, flags,
                            threads);
    if (validate->parsed())
      return run_validate(results_path, groups_path, k_path, stats_path, out,
                          thresholds_spec, format);
    if (agree->parsed()) return run_agreement(results_path, out);
    if (recommend->parsed())
      return run_recommend(results_path, k_path, validity_path, out, loo, test_k,
                           tk->count() > 0, test_family, format);
    if (profiles->parsed()) return run_profiles(results_path, k_path, out, format);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const QueryError& e) {
    std::cerr << "unsatisfiable query: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
