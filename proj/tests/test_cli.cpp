#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kbench/io.hpp"

using namespace kbench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = KBENCH_CLI_PATH;
const fs::path kData = KBENCH_TEST_DATA;

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "kbench_cli_out.txt";
  const std::string cmd = kCli + " " + args + " >" + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream f(p);
  f << j.dump(2);
  return p;
}

json small_config(double rho = 0.9) {
  return json{{"n_train", 400}, {"n_val", 120},  {"n_test", 160},
              {"core_dim", 4},  {"spurious_dim", 4}, {"confounder_strength", rho},
              {"seed", 0}};
}

}  // namespace

TEST_CASE("simulate: deterministic outputs, row count, manifest citation") {
  const auto dir = fresh_dir("kb_cli_sim");
  const auto cfg = write_config(dir, small_config());
  const auto out1 = dir / "run1";
  const auto out2 = dir / "run2";
  CHECK(run("simulate --config " + cfg.string() + " --out " + out1.string()).code == 0);
  CHECK(run("simulate --config " + cfg.string() + " --out " + out2.string()).code == 0);

  const std::string ds1 = slurp(out1 / "dataset.csv");
  CHECK(ds1 == slurp(out2 / "dataset.csv"));
  CHECK(slurp(out1 / "config.json") == slurp(out2 / "config.json"));

  // 400 + 120 + 160 data rows, plus manifest comment and header
  std::size_t lines = 0;
  for (char c : ds1) lines += c == '\n';
  CHECK(lines == 400 + 120 + 160 + 2);

  // the dataset cites the manifest that produced it
  const json manifest = json::parse(slurp(out1 / "manifest.json"));
  CHECK(ds1.find("# manifest: " + manifest.at("id").get<std::string>()) == 0);

  // and the emitted csv round-trips through ingestion
  std::ifstream f(out1 / "dataset.csv");
  const auto ds = read_dataset_csv(f);
  CHECK(ds.size() == 680);
}

TEST_CASE("simulate: invalid config exits 2 naming the field") {
  const auto dir = fresh_dir("kb_cli_sim_bad");
  auto bad = small_config();
  bad["confounder_strength"] = 1.2;
  const auto cfg = write_config(dir, bad);
  const auto r = run("simulate --config " + cfg.string() + " --out " + dir.string());
  CHECK(r.code == 2);
  CHECK(r.output.find("confounder_strength") != std::string::npos);

  const auto missing = run("simulate --config /nonexistent/x.json --out " + dir.string());
  CHECK(missing.code == 2);
}

TEST_CASE("k: json report with traces, divergence exits 3") {
  const auto dir = fresh_dir("kb_cli_k");
  const auto cfg = write_config(dir, small_config());
  const auto r = run("k --config " + cfg.string() + " --out " + dir.string() +
                     " --seeds 0..2 --aggregate median --max-epochs 60");
  CHECK(r.code == 0);
  const json report = json::parse(slurp(dir / "k.json"));
  CHECK(report.at("runs").size() == 3);
  CHECK(report.contains("median_k"));
  const auto& first = report.at("runs")[0];
  CHECK(first.at("estimate").contains("ll_rw"));
  CHECK(first.at("estimate").contains("ll_erm"));
  CHECK(first.at("m_erm").at("val_loss_trace").size() > 0);
  CHECK(first.at("m_ref").at("objective") == "reweight");
  const double k = first.at("estimate").at("k").get<double>();
  const double llr = first.at("estimate").at("ll_rw").get<double>();
  const double lle = first.at("estimate").at("ll_erm").get<double>();
  CHECK(k == llr - lle);

  // k_estimates.csv also emitted by default (--format both)
  CHECK(fs::exists(dir / "k_estimates.csv"));

  // a huge-separation config with a huge lr overflows: exit 3
  auto div = small_config();
  div["core_separation"] = 1e150;
  div["n_train"] = 50;
  div["n_val"] = 20;
  div["n_test"] = 20;
  const auto cfg2 = write_config(fresh_dir("kb_cli_kdiv"), div);
  const auto rd = run("k --config " + cfg2.string() + " --out " + dir.string() +
                      " --lr 1e200");
  CHECK(rd.code == 3);
}

TEST_CASE("sweep: byte-identical across reruns and thread counts") {
  const auto dir = fresh_dir("kb_cli_sweep");
  const auto cfg = write_config(dir, small_config());
  const std::string base = "sweep --config " + cfg.string() +
                           " --knob confounder --values 0.5,0.9 --seeds 0..1 "
                           "--max-epochs 40 --out ";
  const auto o1 = dir / "t1";
  const auto o8 = dir / "t8";
  CHECK(run(base + o1.string() + " --threads 1").code == 0);
  CHECK(run(base + o8.string() + " --threads 8").code == 0);
  CHECK(slurp(o1 / "sweep.csv") == slurp(o8 / "sweep.csv"));

  // ingests back
  const auto cells = read_sweep_csv(o1 / "sweep.csv");
  CHECK(cells.size() == 4);

  // unsorted values: exit 2
  const auto bad = run("sweep --config " + cfg.string() +
                       " --knob confounder --values 0.9,0.5 --seeds 0 --out " +
                       (dir / "bad").string());
  CHECK(bad.code == 2);
}

TEST_CASE("validate: table-1 statistics input reproduces the partition") {
  const auto dir = fresh_dir("kb_cli_validate");
  const auto r = run("validate --stats " + (kData / "table1_stats.csv").string() +
                     " --out " + dir.string());
  CHECK(r.code == 0);
  const auto rep = validity_from_json(json::parse(slurp(dir / "validity.json")));
  CHECK(rep.invalid_set() ==
        std::set<std::string>{"ImageNetBG", "MultiNLI", "AvP"});
  CHECK(rep.valid_set().size() == 8);
  CHECK(fs::exists(dir / "validity.csv"));

  // duplicate benchmark rows exit 2
  const fs::path dup = dir / "dup.csv";
  {
    std::ofstream f(dup);
    f << "benchmark,model_family,k,erm_failure_sd,disc_power_sd,conv_coeff\n"
         "A,vision,1,10,10,0.2\nA,vision,1,10,10,0.2\n";
  }
  CHECK(run("validate --stats " + dup.string() + " --out " + dir.string()).code == 2);
}

TEST_CASE("validate: raw tables mode computes statistics and agreement") {
  const auto dir = fresh_dir("kb_cli_validate_raw");
  // three benchmarks, five methods, groups with spread
  const fs::path results = dir / "results.csv";
  {
    std::ofstream f(results);
    f << "benchmark,model_family,method,wg_test_acc\n";
    const std::vector<double> a{70, 75, 80, 85, 90};
    const std::vector<double> b{71, 73, 82, 84, 88};
    const std::vector<double> c{90, 84, 81, 74, 69};
    for (int i = 0; i < 5; ++i) {
      f << "A,vision,M" << i << "," << a[static_cast<std::size_t>(i)] << "\n";
      f << "B,vision,M" << i << "," << b[static_cast<std::size_t>(i)] << "\n";
      f << "C,vision,M" << i << "," << c[static_cast<std::size_t>(i)] << "\n";
    }
  }
  const fs::path groups = dir / "groups.csv";
  {
    std::ofstream f(groups);
    f << "benchmark,group_id,erm_test_acc\n";
    for (const auto& b : {"A", "B", "C"})
      f << b << ",a0y0,90\n" << b << ",a0y1,60\n" << b << ",a1y0,85\n" << b
        << ",a1y1,70\n";
  }
  const fs::path kcsv = dir / "k.csv";
  {
    std::ofstream f(kcsv);
    f << "benchmark,model_family,k\nA,vision,1.0\nB,vision,1.2\nC,vision,0.1\n";
  }
  const auto r = run("validate --results " + results.string() + " --groups " +
                     groups.string() + " --k " + kcsv.string() + " --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "agreement.csv"));
  CHECK(fs::exists(dir / "conv_points.csv"));
  const auto rep = validity_from_json(json::parse(slurp(dir / "validity.json")));
  REQUIRE(rep.rows.size() == 3);
  for (const auto& row : rep.rows) CHECK(row.erm_failure_sd > 2.0);
}

TEST_CASE("recommend: loo replay and the unsatisfiable-family query") {
  const auto dir = fresh_dir("kb_cli_recommend");
  // produce validity.json from the table-1 transcription
  CHECK(run("validate --stats " + (kData / "table1_stats.csv").string() + " --out " +
            dir.string())
            .code == 0);
  const std::string common = "recommend --results " + (kData / "loo_results.csv").string() +
                             " --k " + (kData / "loo_k.csv").string() + " --validity " +
                             (dir / "validity.json").string();

  const auto r = run(common + " --loo --out " + (dir / "loo").string());
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "loo" / "loo.csv"));
  CHECK(fs::exists(dir / "loo" / "loo.json"));

  // DollarStreet resolves to (NICO++, Focal) per the paper's table
  const json loo = json::parse(slurp(dir / "loo" / "loo.json"));
  bool found = false;
  for (const auto& row : loo.at("rows"))
    if (row.at("test_dataset") == "DollarStreet") {
      found = true;
      CHECK(row.at("closest_benchmark") == "NICO++");
      CHECK(row.at("closest_method") == "Focal");
    }
  CHECK(found);

  // no valid language benchmark besides CivilComments itself: exit 4
  const auto bad = run(common + " --test-k 0.5 --test-family language --out " +
                       (dir / "q").string());
  CHECK(bad.code == 4);
  const json rec = json::parse(slurp(dir / "q" / "recommendation.json"));
  CHECK(rec.at("closest").contains("error"));
  CHECK(rec.at("all_avg").at("chosen_method") == "GroupDRO");

  // vision query works and returns the nearest valid benchmark
  const auto good = run(common + " --test-k 2.5 --test-family vision --out " +
                        (dir / "v").string());
  CHECK(good.code == 0);
  const json recv = json::parse(slurp(dir / "v" / "recommendation.json"));
  CHECK(recv.at("closest").at("matched_benchmark") == "CelebA");
  CHECK(recv.at("closest").at("chosen_method") == "DFR");
}

TEST_CASE("agreement and profiles commands run and round-trip") {
  const auto dir = fresh_dir("kb_cli_agree");
  const auto r = run("agreement --results " + (kData / "loo_results.csv").string() +
                     " --out " + dir.string());
  CHECK(r.code == 0);
  const auto csv = slurp(dir / "agreement.csv");
  CHECK(csv.find("benchmark,AvP,CMNIST") != std::string::npos);

  const auto rp = run("profiles --results " + (kData / "loo_results.csv").string() +
                      " --k " + (kData / "loo_k.csv").string() + " --out " +
                      (dir / "p").string());
  CHECK(rp.code == 0);
  const json profiles = json::parse(slurp(dir / "p" / "profiles.json"));
  CHECK(profiles.at("profiles").size() == 9);
}

TEST_CASE("every command is byte-identical across reruns") {
  const auto dir = fresh_dir("kb_cli_det");
  const auto cfg = write_config(dir, small_config());
  const std::vector<std::pair<std::string, std::string>> cases{
      {"validate --stats " + (kData / "table1_stats.csv").string(), "validity.json"},
      {"profiles --results " + (kData / "loo_results.csv").string() + " --k " +
           (kData / "loo_k.csv").string(),
       "profiles.csv"},
      {"k --config " + cfg.string() + " --seed 1 --max-epochs 30", "k.json"},
  };
  for (const auto& [cmd, artifact] : cases) {
    const auto o1 = dir / "a";
    const auto o2 = dir / "b";
    fs::remove_all(o1);
    fs::remove_all(o2);
    CHECK(run(cmd + " --out " + o1.string()).code == 0);
    CHECK(run(cmd + " --out " + o2.string()).code == 0);
    CHECK(slurp(o1 / artifact) == slurp(o2 / artifact));
  }
}
