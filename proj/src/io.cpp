#include "kbench/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace kbench {

namespace {

double parse_number(const std::string& s, const std::string& context, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(context + " row " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s, const std::string& context,
                        std::size_t line) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
    throw ConfigError(context + " row " + std::to_string(line) + ": bad integer '" + s + "'");
  return v;
}

void expect_header(const std::vector<CsvRow>& rows, const std::string& context,
                   const std::vector<std::string>& header) {
  if (rows.empty()) throw ConfigError(context + ": empty file");
  if (rows.front().cells != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw ConfigError(context + " row " + std::to_string(rows.front().line) +
                      ": expected header " + want);
  }
}

void expect_cols(const CsvRow& row, std::size_t n, const std::string& context) {
  if (row.cells.size() != n)
    throw ConfigError(context + " row " + std::to_string(row.line) + ": expected " +
                      std::to_string(n) + " columns, got " +
                      std::to_string(row.cells.size()));
}

}  // namespace

std::vector<CsvRow> read_csv(std::istream& is) {
  std::vector<CsvRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    CsvRow row;
    row.line = lineno;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.cells.push_back(cell);
    if (!line.empty() && line.back() == ',') row.cells.emplace_back();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CsvRow> read_csv_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  return read_csv(f);
}

ResultsTable read_results_csv(const std::filesystem::path& path) {
  const auto rows = read_csv_file(path);
  const std::string ctx = path.filename().string();
  expect_header(rows, ctx, {"benchmark", "model_family", "method", "wg_test_acc"});
  ResultsTable t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    expect_cols(r, 4, ctx);
    const auto& bench = r.cells[0];
    const auto& method = r.cells[2];
    if (t.has(bench, method))
      throw ConfigError(ctx + " row " + std::to_string(r.line) + ": duplicate cell (" +
                        bench + ", " + method + ")");
    const ModelFamily fam = parse_family(r.cells[1]);
    if (t.family.count(bench) && t.family.at(bench) != fam)
      throw ConfigError(ctx + " row " + std::to_string(r.line) +
                        ": benchmark " + bench + " listed with two families");
    const double acc = parse_number(r.cells[3], ctx, r.line);
    if (acc < 0.0 || acc > 100.0)
      throw ConfigError(ctx + " row " + std::to_string(r.line) +
                        ": wg_test_acc outside [0,100]");
    t.set(bench, fam, method, acc);
  }
  if (t.benchmarks.empty()) throw ConfigError(ctx + ": no data rows");
  return t;
}

void write_results_csv(std::ostream& os, const ResultsTable& t) {
  os << "benchmark,model_family,method,wg_test_acc\n";
  for (const auto& b : t.benchmarks)
    for (const auto& m : t.methods)
      if (t.has(b, m))
        os << b << ',' << to_string(t.family.at(b)) << ',' << m << ','
           << format_double(t.at(b, m)) << "\n";
}

GroupAccuracyTable read_groups_csv(const std::filesystem::path& path) {
  const auto rows = read_csv_file(path);
  const std::string ctx = path.filename().string();
  expect_header(rows, ctx, {"benchmark", "group_id", "erm_test_acc"});
  GroupAccuracyTable t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    expect_cols(r, 3, ctx);
    auto& groups = t.acc[r.cells[0]];
    if (groups.count(r.cells[1]))
      throw ConfigError(ctx + " row " + std::to_string(r.line) + ": duplicate group (" +
                        r.cells[0] + ", " + r.cells[1] + ")");
    const double acc = parse_number(r.cells[2], ctx, r.line);
    if (acc < 0.0 || acc > 100.0)
      throw ConfigError(ctx + " row " + std::to_string(r.line) +
                        ": erm_test_acc outside [0,100]");
    groups[r.cells[1]] = acc;
  }
  if (t.acc.empty()) throw ConfigError(ctx + ": no data rows");
  return t;
}

std::map<std::string, KTableEntry> read_k_csv(const std::filesystem::path& path) {
  const auto rows = read_csv_file(path);
  const std::string ctx = path.filename().string();
  expect_header(rows, ctx, {"benchmark", "model_family", "k"});
  std::map<std::string, KTableEntry> t;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    expect_cols(r, 3, ctx);
    if (t.count(r.cells[0]))
      throw ConfigError(ctx + " row " + std::to_string(r.line) +
                        ": duplicate benchmark " + r.cells[0]);
    t[r.cells[0]] = {parse_number(r.cells[2], ctx, r.line), parse_family(r.cells[1])};
  }
  if (t.empty()) throw ConfigError(ctx + ": no data rows");
  return t;
}

void write_k_csv(std::ostream& os, const std::map<std::string, KTableEntry>& k) {
  os << "benchmark,model_family,k\n";
  for (const auto& [b, e] : k)
    os << b << ',' << to_string(e.family) << ',' << format_double(e.k) << "\n";
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepCell>& cells) {
  os << "knob,value,seed,k,ll_rw,ll_erm,worst_group,n_worst\n";
  for (const auto& c : cells)
    os << to_string(c.knob) << ',' << format_double(c.value) << ',' << c.seed << ','
       << format_double(c.estimate.k) << ',' << format_double(c.estimate.ll_rw) << ','
       << format_double(c.estimate.ll_erm) << ',' << to_string(c.estimate.worst_group)
       << ',' << c.estimate.n_worst << "\n";
}

std::vector<SweepCell> read_sweep_csv(const std::filesystem::path& path) {
  const auto rows = read_csv_file(path);
  const std::string ctx = path.filename().string();
  expect_header(rows, ctx,
                {"knob", "value", "seed", "k", "ll_rw", "ll_erm", "worst_group", "n_worst"});
  std::vector<SweepCell> cells;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    expect_cols(r, 8, ctx);
    SweepCell c;
    c.knob = parse_knob(r.cells[0]);
    c.value = parse_number(r.cells[1], ctx, r.line);
    c.seed = parse_u64(r.cells[2], ctx, r.line);
    c.estimate.k = parse_number(r.cells[3], ctx, r.line);
    c.estimate.ll_rw = parse_number(r.cells[4], ctx, r.line);
    c.estimate.ll_erm = parse_number(r.cells[5], ctx, r.line);
    c.estimate.worst_group = parse_group_id(r.cells[6]);
    c.estimate.n_worst = parse_u64(r.cells[7], ctx, r.line);
    c.estimate.seed = c.seed;
    cells.push_back(std::move(c));
  }
  return cells;
}

void write_robustness_csv(std::ostream& os, Hyper hyper,
                          const std::vector<RobustnessRow>& rows) {
  os << "hyper,setting,pearson_r\n";
  for (const auto& r : rows)
    os << to_string(hyper) << ',' << format_double(r.setting) << ','
       << format_double(r.pearson_r) << "\n";
}

void write_agreement_csv(std::ostream& os, const AgreementMatrix& m) {
  os << "benchmark";
  for (const auto& b : m.benchmarks) os << ',' << b;
  os << "\n";
  for (std::size_t i = 0; i < m.benchmarks.size(); ++i) {
    os << m.benchmarks[i];
    for (std::size_t j = 0; j < m.benchmarks.size(); ++j) {
      os << ',';
      if (m.r[i][j]) os << format_double(*m.r[i][j]);
    }
    os << "\n";
  }
}

void write_conv_points_csv(std::ostream& os, const AgreementMatrix& agreement,
                           const std::map<std::string, double>& k_values,
                           const std::map<std::string, ModelFamily>& families,
                           const std::set<std::string>& prefilter) {
  os << "benchmark,partner,dk,pearson_r\n";
  for (const auto& b : agreement.benchmarks) {
    auto kb = k_values.find(b);
    auto fb = families.find(b);
    if (kb == k_values.end() || fb == families.end()) continue;
    for (const auto& p : prefilter) {
      if (p == b) continue;
      auto kp = k_values.find(p);
      auto fp = families.find(p);
      if (kp == k_values.end() || fp == families.end() || fp->second != fb->second)
        continue;
      const auto r = agreement.at(b, p);
      if (!r) continue;
      os << b << ',' << p << ',' << format_double(std::abs(kb->second - kp->second))
         << ',' << format_double(*r) << "\n";
    }
  }
}

void write_validity_csv(std::ostream& os, const ValidityReport& report) {
  os << "benchmark,model_family,k,erm_failure_sd,disc_power_sd,conv_coeff,conv_r2,"
        "pass_erm_failure,pass_disc_power,pass_conv_validity,valid\n";
  for (const auto& r : report.rows) {
    os << r.benchmark << ',' << to_string(r.family) << ','
       << (r.k ? format_double(*r.k) : "") << ',' << format_double(r.erm_failure_sd)
       << ',' << format_double(r.disc_power_sd) << ','
       << (r.conv_coeff ? format_double(*r.conv_coeff) : "") << ','
       << (r.conv_r2 ? format_double(*r.conv_r2) : "") << ','
       << (r.flags.pass_erm_failure ? 1 : 0) << ',' << (r.flags.pass_disc_power ? 1 : 0)
       << ',' << (r.flags.pass_conv_validity ? 1 : 0) << ',' << (r.flags.valid ? 1 : 0)
       << "\n";
  }
}

nlohmann::json validity_to_json(const ValidityReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row{{"benchmark", r.benchmark},
                       {"model_family", to_string(r.family)},
                       {"erm_failure_sd", r.erm_failure_sd},
                       {"disc_power_sd", r.disc_power_sd},
                       {"pass_erm_failure", r.flags.pass_erm_failure},
                       {"pass_disc_power", r.flags.pass_disc_power},
                       {"pass_conv_validity", r.flags.pass_conv_validity},
                       {"valid", r.flags.valid}};
    if (r.k) row["k"] = *r.k;
    if (r.conv_coeff) row["conv_coeff"] = *r.conv_coeff;
    if (r.conv_r2) row["conv_r2"] = *r.conv_r2;
    if (!r.conv_error.empty()) row["conv_error"] = r.conv_error;
    rows.push_back(std::move(row));
  }
  return nlohmann::json{{"thresholds",
                         {{"erm_failure", report.thresholds.erm_failure},
                          {"disc_power", report.thresholds.disc_power},
                          {"conv_validity", report.thresholds.conv_validity}}},
                        {"benchmarks", std::move(rows)}};
}

ValidityReport validity_from_json(const nlohmann::json& j) {
  ValidityReport rep;
  try {
    rep.thresholds.erm_failure = j.at("thresholds").at("erm_failure").get<double>();
    rep.thresholds.disc_power = j.at("thresholds").at("disc_power").get<double>();
    rep.thresholds.conv_validity = j.at("thresholds").at("conv_validity").get<double>();
    for (const auto& row : j.at("benchmarks")) {
      ValidityRow r;
      r.benchmark = row.at("benchmark").get<std::string>();
      r.family = parse_family(row.at("model_family").get<std::string>());
      if (row.contains("k")) r.k = row.at("k").get<double>();
      r.erm_failure_sd = row.at("erm_failure_sd").get<double>();
      r.disc_power_sd = row.at("disc_power_sd").get<double>();
      if (row.contains("conv_coeff")) r.conv_coeff = row.at("conv_coeff").get<double>();
      if (row.contains("conv_r2")) r.conv_r2 = row.at("conv_r2").get<double>();
      if (row.contains("conv_error")) r.conv_error = row.at("conv_error").get<std::string>();
      r.flags.pass_erm_failure = row.at("pass_erm_failure").get<bool>();
      r.flags.pass_disc_power = row.at("pass_disc_power").get<bool>();
      r.flags.pass_conv_validity = row.at("pass_conv_validity").get<bool>();
      r.flags.valid = row.at("valid").get<bool>();
      rep.rows.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("validity json: ") + e.what());
  }
  return rep;
}

void write_loo_csv(std::ostream& os, const std::vector<LooRow>& rows) {
  os << "test_dataset,all_method,all_acc,valid_method,valid_acc,"
        "closest_benchmark,closest_method,closest_acc\n";
  for (const auto& r : rows) {
    os << r.test_dataset << ',' << r.all_method << ','
       << (r.all_acc ? format_double(*r.all_acc) : "") << ',' << r.valid_method << ','
       << (r.valid_acc ? format_double(*r.valid_acc) : "") << ',' << r.closest_bench
       << ',' << r.closest_method << ','
       << (r.closest_acc ? format_double(*r.closest_acc) : "") << "\n";
  }
}

nlohmann::json loo_to_json(const std::vector<LooRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{"test_dataset", r.test_dataset},
                       {"all_method", r.all_method},
                       {"valid_method", r.valid_method},
                       {"winner", to_string(r.winner)}};
    if (r.all_acc) row["all_acc"] = *r.all_acc;
    if (r.valid_acc) row["valid_acc"] = *r.valid_acc;
    if (!r.closest_bench.empty()) row["closest_benchmark"] = r.closest_bench;
    if (!r.closest_method.empty()) row["closest_method"] = r.closest_method;
    if (r.closest_acc) row["closest_acc"] = *r.closest_acc;
    if (!r.closest_error.empty()) row["closest_error"] = r.closest_error;
    out.push_back(std::move(row));
  }
  return out;
}

void write_profiles_csv(std::ostream& os, const std::vector<MethodProfile>& profiles) {
  os << "method,median_wg,iqr_wg,r2_vs_k,n_cells,flagged\n";
  for (const auto& p : profiles)
    os << p.method << ',' << format_double(p.median_wg) << ','
       << format_double(p.iqr_wg) << ',' << (p.r2_vs_k ? format_double(*p.r2_vs_k) : "")
       << ',' << p.n_cells << ',' << (p.flagged ? 1 : 0) << "\n";
}

nlohmann::json profiles_to_json(const std::vector<MethodProfile>& profiles) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : profiles) {
    nlohmann::json row{{"method", p.method},
                       {"median_wg", p.median_wg},
                       {"iqr_wg", p.iqr_wg},
                       {"n_cells", p.n_cells},
                       {"flagged", p.flagged}};
    if (p.r2_vs_k) row["r2_vs_k"] = *p.r2_vs_k;
    out.push_back(std::move(row));
  }
  return out;
}

DataConfig dataconfig_from_json(const nlohmann::json& j) {
  DataConfig c;
  try {
    if (j.contains("n_train")) c.n_train = j.at("n_train").get<int>();
    if (j.contains("n_val")) c.n_val = j.at("n_val").get<int>();
    if (j.contains("n_test")) c.n_test = j.at("n_test").get<int>();
    if (j.contains("core_dim")) c.core_dim = j.at("core_dim").get<int>();
    if (j.contains("spurious_dim")) c.spurious_dim = j.at("spurious_dim").get<int>();
    if (j.contains("confounder_strength"))
      c.confounder_strength = j.at("confounder_strength").get<double>();
    if (j.contains("core_separation"))
      c.core_separation = j.at("core_separation").get<double>();
    if (j.contains("spurious_separation"))
      c.spurious_separation = j.at("spurious_separation").get<double>();
    if (j.contains("fg_noise")) c.fg_noise = j.at("fg_noise").get<double>();
    if (j.contains("bg_noise")) c.bg_noise = j.at("bg_noise").get<double>();
    if (j.contains("attr_noise")) c.attr_noise = j.at("attr_noise").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config json: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json dataconfig_to_json(const DataConfig& c) {
  return nlohmann::json{{"n_train", c.n_train},
                        {"n_val", c.n_val},
                        {"n_test", c.n_test},
                        {"core_dim", c.core_dim},
                        {"spurious_dim", c.spurious_dim},
                        {"confounder_strength", c.confounder_strength},
                        {"core_separation", c.core_separation},
                        {"spurious_separation", c.spurious_separation},
                        {"fg_noise", c.fg_noise},
                        {"bg_noise", c.bg_noise},
                        {"attr_noise", c.attr_noise},
                        {"seed", c.seed}};
}

nlohmann::json model_to_json(const TrainedModel& m) {
  nlohmann::json j;
  j["architecture"] = to_string(m.params.shape.arch);
  j["input_dim"] = m.params.shape.input_dim;
  j["hidden"] = m.params.shape.hidden;
  j["classes"] = m.params.shape.classes;
  j["objective"] = to_string(m.objective);
  j["seed"] = m.seed;
  j["best_epoch"] = m.best_epoch;
  j["data_fingerprint"] = hex64(m.data_fingerprint);
  // packed parameters, weight matrices row-major
  j["theta"] = std::vector<double>(m.params.theta.data(),
                                   m.params.theta.data() + m.params.theta.size());
  j["val_loss_trace"] = m.val_loss_trace;
  j["train_loss_trace"] = m.train_loss_trace;
  return j;
}

TrainedModel model_from_json(const nlohmann::json& j) {
  TrainedModel m;
  try {
    m.params.shape.arch = parse_arch(j.at("architecture").get<std::string>());
    m.params.shape.input_dim = j.at("input_dim").get<int>();
    m.params.shape.hidden = j.at("hidden").get<int>();
    m.params.shape.classes = j.at("classes").get<int>();
    m.objective = parse_objective(j.at("objective").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.best_epoch = j.at("best_epoch").get<int>();
    const auto theta = j.at("theta").get<std::vector<double>>();
    if (static_cast<int>(theta.size()) != m.params.shape.param_count())
      throw ConfigError("model json: theta size does not match shape");
    m.params.theta = Eigen::Map<const Eigen::VectorXd>(
        theta.data(), static_cast<Eigen::Index>(theta.size()));
    m.val_loss_trace = j.at("val_loss_trace").get<std::vector<double>>();
    if (j.contains("train_loss_trace"))
      m.train_loss_trace = j.at("train_loss_trace").get<std::vector<double>>();
    if (j.contains("data_fingerprint"))
      m.data_fingerprint =
          std::stoull(j.at("data_fingerprint").get<std::string>(), nullptr, 16);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model json: ") + e.what());
  }
  return m;
}

nlohmann::json kestimate_to_json(const KEstimate& k) {
  return nlohmann::json{{"k", k.k},
                        {"ll_rw", k.ll_rw},
                        {"ll_erm", k.ll_erm},
                        {"worst_group", to_string(k.worst_group)},
                        {"n_worst", k.n_worst},
                        {"reference", to_string(k.reference)},
                        {"seed", k.seed}};
}

std::string RunManifest::id() const {
  std::uint64_t h = fnv1a(command);
  h = fnv1a(tool_version, h);
  h = fnv1a(config_hash, h);
  for (auto s : seeds) h = fnv1a(&s, sizeof s, h);
  for (const auto& [k, v] : input_digests) {
    h = fnv1a(k, h);
    h = fnv1a(v, h);
  }
  for (const auto& o : outputs) h = fnv1a(o, h);
  return hex64(h);
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  return nlohmann::json{{"id", m.id()},
                        {"command", m.command},
                        {"tool_version", m.tool_version},
                        {"config_hash", m.config_hash},
                        {"seeds", m.seeds},
                        {"inputs", m.input_digests},
                        {"outputs", m.outputs},
                        {"wall_clock_ms", m.wall_clock_ms}};
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[4096];
  while (f.read(buf, sizeof buf) || f.gcount() > 0)
    h = fnv1a(buf, static_cast<std::size_t>(f.gcount()), h);
  return hex64(h);
}

}  // namespace kbench
