#include "catch2/catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>
#include <vector>

#include "essd/cli.hpp"
#include "json.hpp"

using namespace essd;

namespace {

int run(const std::vector<std::string>& args) {
  std::vector<std::string> all;
  all.push_back("essd");
  all.insert(all.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& a : all) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string base_dir() {
  static std::string dir = [] {
    auto d = std::filesystem::temp_directory_path() /
             ("essd_cli_" + std::to_string(::getpid()));
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d.string();
  }();
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_pipeline_generator_config(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  out << "generator.n_patients = 1200\n"
      << "generator.span_years = 6\n";
  for (int k = 1; k <= 3; ++k) {
    std::string fam = "05-01-01-0" + std::to_string(k);
    std::string sub = std::to_string(k);
    out << "generator.family = " << fam << " 0.3 E1.1.1.1.1\n";
    out << "generator.background = E2." << sub << ".1.1.1 0.025\n"
        << "generator.background = E2." << sub << ".2.1.1 0.03\n"
        << "generator.background = E3." << sub << ".1.1.1 0.025\n"
        << "generator.background = E3." << sub << ".2.1.1 0.03\n";
    out << "generator.effect = ADR " << fam << " E2." << sub
        << ".1.1.1 7 30\n"
        << "generator.effect = ADR " << fam << " E2." << sub
        << ".2.1.1 6 30\n";
    out << "generator.decoy = " << fam << " E3." << sub << ".1.1.1\n"
        << "generator.decoy = " << fam << " E3." << sub << ".2.1.1\n";
  }
}

}  // namespace

TEST_CASE("the five subcommands chain into a working pipeline") {
  std::string base = base_dir();
  std::string gen_cfg = base + "/gen.essd";
  write_pipeline_generator_config(gen_cfg);

  std::string data_dir = base + "/data";
  REQUIRE(run({"generate", "--config", gen_cfg, "--seed", "5", "--out",
               data_dir}) == 0);
  for (const char* name :
       {"patients.csv", "events.csv", "prescriptions.csv", "event_tree.csv",
        "reference.csv", "ground_truth.json", "run_config.essd",
        "manifest.json"})
    CHECK(std::filesystem::exists(data_dir + "/" + name));

  // The emitted run config drives the rest of the pipeline; shrink the
  // forest so cross-validation works on twelve labelled rows. The copy
  // stays in the data directory so its relative data paths keep resolving.
  std::string run_cfg = data_dir + "/run_tuned.essd";
  {
    std::ofstream out(run_cfg, std::ios::binary);
    out << slurp(data_dir + "/run_config.essd");
    out << "forest.n_trees = 40\n"
        << "forest.folds = 3\n"
        << "forest.mtry_candidates = 1 3 9\n";
  }

  std::string feat_dir = base + "/features";
  REQUIRE(run({"features", "--config", run_cfg, "--seed", "5", "--workers",
               "2", "--out", feat_dir}) == 0);
  auto rows = read_features_csv(feat_dir + "/features.csv");
  REQUIRE(rows.size() == 12);
  for (const FeatureRow& row : rows) {
    REQUIRE(row.label.has_value());
    CHECK(row.n_target > 50);
  }

  std::string model_dir = base + "/model";
  REQUIRE(run({"train", "--features", feat_dir + "/features.csv", "--config",
               run_cfg, "--seed", "5", "--out", model_dir}) == 0);
  Forest forest = read_forest(model_dir + "/model.txt");
  CHECK(forest.trees.size() == 40);
  CHECK((forest.mtry == 1 || forest.mtry == 3 || forest.mtry == 9));
  std::string tuning = slurp(model_dir + "/tuning.txt");
  CHECK(tuning.find("mtry 1 ") != std::string::npos);
  CHECK(tuning.find("chosen ") != std::string::npos);

  std::string eval_dir = base + "/eval";
  REQUIRE(run({"evaluate", "--features", feat_dir + "/features.csv",
               "--config", run_cfg, "--seed", "5", "--out", eval_dir}) == 0);
  auto report = nlohmann::json::parse(slurp(eval_dir + "/report.json"));
  CHECK(report.at("evaluations").size() == 3);
  double pooled = report.at("pooled").at("ESSD").at("auc").get<double>();
  CHECK(pooled >= 0.0);
  CHECK(pooled <= 1.0);
  for (const char* method :
       {"ESSD", "SSD1", "SSD2", "SSD3", "SSD4", "SSD5", "SSD6"})
    CHECK(report.at("pooled").contains(method));
  CHECK(std::filesystem::exists(eval_dir + "/report.csv"));

  std::string sig_dir = base + "/signals";
  REQUIRE(run({"signal", "--model", model_dir + "/model.txt", "--features",
               feat_dir + "/features.csv", "--threshold", "0.4", "--out",
               sig_dir}) == 0);
  std::istringstream signals(slurp(sig_dir + "/signals.csv"));
  std::string line;
  REQUIRE(std::getline(signals, line));
  CHECK(line == "family_prefix,event_code,probability,signal");
  double last_prob = 2.0;
  std::size_t n_rows = 0, n_flagged = 0;
  while (std::getline(signals, line)) {
    auto fields = split_csv_line(line, n_rows + 2);
    REQUIRE(fields.size() == 4);
    double prob = parse_double_field(fields[2], "signals");
    CHECK(prob <= last_prob);  // sorted most suspicious first
    last_prob = prob;
    bool flagged = fields[3] == "1";
    CHECK(flagged == (prob >= 0.4));
    n_flagged += flagged;
    ++n_rows;
  }
  CHECK(n_rows == 12);
  CHECK(n_flagged >= 1);
  CHECK(n_flagged <= 11);

  // Every stage wrote its manifest.
  for (const std::string& dir : {feat_dir, model_dir, eval_dir, sig_dir}) {
    auto manifest = nlohmann::json::parse(slurp(dir + "/manifest.json"));
    CHECK(manifest.at("tool").get<std::string>() == "essd");
  }
}

TEST_CASE("usage errors exit nonzero without partial outputs") {
  std::string base = base_dir();
  CHECK(run({"generate", "--preset", "galaxy", "--seed", "1", "--out",
             base + "/err1"}) != 0);
  CHECK(run({"generate", "--seed", "1", "--out", base + "/err2"}) != 0);
  CHECK(run({"generate", "--preset", "smoke", "--config", "x.essd",
             "--seed", "1", "--out", base + "/err3"}) != 0);
  CHECK(run({"features", "--config", base + "/missing.essd", "--seed", "1",
             "--out", base + "/err4"}) != 0);
  CHECK_FALSE(std::filesystem::exists(base + "/err4/features.csv"));
  CHECK(run({"train", "--features", base + "/nope.csv", "--seed", "1",
             "--out", base + "/err5"}) != 0);
  CHECK(run({}) != 0);

  // Fewer than three families cannot be cross-evaluated.
  std::vector<FeatureRow> rows(4);
  rows[0].family = parse_bnf("05-01");
  rows[1].family = parse_bnf("05-01");
  rows[2].family = parse_bnf("05-02");
  rows[3].family = parse_bnf("05-02");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].event_code = "E" + std::to_string(i + 1);
    rows[i].label = static_cast<std::int32_t>(i % 2);
  }
  std::string two_fam = base + "/two_fam.csv";
  write_features_csv(rows, two_fam);
  std::string eval_dir = base + "/err_eval";
  CHECK(run({"evaluate", "--features", two_fam, "--seed", "1", "--out",
             eval_dir}) != 0);
  CHECK_FALSE(std::filesystem::exists(eval_dir + "/report.json"));
}

TEST_CASE("version flag reports and exits cleanly") {
  CHECK(run({"--version"}) == 0);
}
