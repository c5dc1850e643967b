#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "essd/config.hpp"
#include "essd/dataset.hpp"
#include "essd/error.hpp"
#include "essd/evaluation.hpp"
#include "essd/feature_matrix.hpp"
#include "essd/forest.hpp"
#include "essd/generator.hpp"
#include "essd/log.hpp"
#include "essd/presets.hpp"
#include "essd/version.hpp"

namespace essd {

namespace detail {

// The generated dataset ships with a run configuration wired to its own
// files, so `essd features --config <out>/run_config.essd` works as-is.
// Comparators are assigned cyclically across the generated families.
inline std::string render_run_config(const GeneratorConfig& gen) {
  std::string out;
  out += "# Pipeline configuration for the dataset in this directory.\n";
  out += "data.patients = patients.csv\n";
  out += "data.events = events.csv\n";
  out += "data.prescriptions = prescriptions.csv\n";
  out += "data.tree = event_tree.csv\n";
  out += "data.reference = reference.csv\n";
  out += "\n";
  const std::size_t n = gen.families.size();
  for (std::size_t i = 0; i < n; ++i)
    out += "family = " + to_string(gen.families[i].prefix) + "\n";
  for (std::size_t i = 0; i < n; ++i) {
    std::string self = to_string(gen.families[i].prefix);
    if (n >= 2) {
      out += "comparator." + self + " = " +
             to_string(gen.families[(i + 1) % n].prefix) + "\n";
    } else {
      out += "# comparator." + self + " = <another family>\n";
    }
  }
  out += "\n";
  out += "cohort.washout_days = 90\n";
  out += "cohort.min_pre_observation_days = 30\n";
  out += "cohort.min_post_observation_days = 30\n";
  out += "rme.window_days = 30\n";
  out += "rme.min_patients = 3\n";
  out += "match.year_tolerance_max = 5\n";
  out += "forest.n_trees = 500\n";
  out += "forest.folds = 20\n";
  out += "forest.mtry_candidates = 1 2 3 4 5 6 7 8 9\n";
  out += "threshold.essd = 0.5\n";
  out += "features.scope = reference\n";
  return out;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << content;
}

// Labeled rows in canonical (family, event code) order, so training does
// not depend on the row order of the features file.
inline std::vector<TrainingRow> training_rows(std::vector<FeatureRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const FeatureRow& a, const FeatureRow& b) {
              if (!(a.family == b.family)) return a.family < b.family;
              return a.event_code < b.event_code;
            });
  std::vector<TrainingRow> out;
  for (const FeatureRow& row : rows)
    if (row.label) out.push_back({row.x, *row.label});
  if (out.empty())
    throw Error(Errc::TooFewRows, "features file has no labeled rows");
  return out;
}

}  // namespace detail

inline int cmd_generate(const std::string& preset,
                        const std::string& config_path, std::uint64_t seed,
                        const std::string& out_dir) {
  GeneratorConfig gen;
  std::uint64_t config_hash = 0;
  std::vector<std::string> inputs;
  if (!preset.empty()) {
    gen = benchmark_suite(preset);
    config_hash = fnv1a64("preset:" + preset);
    inputs.push_back("preset:" + preset);
  } else {
    ConfigMap cfg = read_config(config_path);
    gen = parse_generator_config(cfg);
    config_hash = cfg.content_hash;
    inputs.push_back(config_path);
  }
  gen.seed = seed;
  std::filesystem::create_directories(out_dir);
  GeneratedPaths paths = generate(gen, out_dir);
  std::string run_config_path = out_dir + "/run_config.essd";
  atomic_write(run_config_path, [&](const std::string& tmp) {
    detail::write_text_file(tmp, detail::render_run_config(gen));
  });
  write_manifest(out_dir, "generate", config_hash, seed, 1, inputs,
                 {paths.patients, paths.events, paths.prescriptions,
                  paths.tree, paths.reference, paths.ground_truth,
                  run_config_path});
  std::cout << "generated " << gen.n_patients << " patients, "
            << gen.families.size() << " drug families -> " << out_dir
            << "\n";
  return 0;
}

inline int cmd_features(const std::string& config_path, std::uint64_t seed,
                        unsigned workers, const std::string& out_dir) {
  ConfigMap cfg = read_config(config_path);
  RunConfig run = parse_run_config(cfg);
  Dataset ds = load_dataset(run.patients_path, run.events_path,
                            run.prescriptions_path, run.tree_path);
  std::vector<LabeledPair> reference = read_reference_csv(run.reference_path);
  std::vector<FeatureRow> rows = feature_matrix(
      ds, run.families, reference, run.features, seed, workers, run.scope);
  std::filesystem::create_directories(out_dir);
  std::string features_path = out_dir + "/features.csv";
  atomic_write(features_path, [&](const std::string& tmp) {
    write_features_csv(rows, tmp);
  });
  write_manifest(out_dir, "features", cfg.content_hash, seed, workers,
                 {config_path, run.patients_path, run.events_path,
                  run.prescriptions_path, run.tree_path, run.reference_path},
                 {features_path});
  std::cout << "wrote " << rows.size() << " feature rows -> "
            << features_path << "\n";
  return 0;
}

inline int cmd_train(const std::string& features_path,
                     const std::string& config_path, std::uint64_t seed,
                     unsigned workers, const std::string& out_dir) {
  EvalParams params;
  std::uint64_t config_hash = 0;
  std::vector<std::string> inputs = {features_path};
  if (!config_path.empty()) {
    ConfigMap cfg = read_config(config_path);
    params = parse_run_config(cfg, false).eval;
    config_hash = cfg.content_hash;
    inputs.push_back(config_path);
  }
  std::vector<TrainingRow> training =
      detail::training_rows(read_features_csv(features_path));
  TuneResult tuned = tune_mtry(training, params.mtry_candidates, params.folds,
                               params.n_trees, seed, workers);
  std::filesystem::create_directories(out_dir);
  std::string model_path = out_dir + "/model.txt";
  atomic_write(model_path, [&](const std::string& tmp) {
    write_forest(tuned.forest, tmp);
  });
  std::string log;
  for (const auto& [mtry, auc] : tuned.mean_auc)
    log += "mtry " + std::to_string(mtry) + " cv_auc " + format_double(auc) +
           "\n";
  log += "chosen " + std::to_string(tuned.best_mtry) + "\n";
  std::string tuning_path = out_dir + "/tuning.txt";
  atomic_write(tuning_path, [&](const std::string& tmp) {
    detail::write_text_file(tmp, log);
  });
  write_manifest(out_dir, "train", config_hash, seed, workers, inputs,
                 {model_path, tuning_path});
  std::cout << "trained " << params.n_trees << "-tree forest on "
            << training.size() << " rows, mtry " << tuned.best_mtry << " -> "
            << model_path << "\n";
  return 0;
}

inline int cmd_evaluate(const std::string& features_path,
                        const std::string& config_path, std::uint64_t seed,
                        unsigned workers, const std::string& out_dir) {
  EvalParams params;
  std::uint64_t config_hash = 0;
  std::vector<std::string> inputs = {features_path};
  if (!config_path.empty()) {
    ConfigMap cfg = read_config(config_path);
    params = parse_run_config(cfg, false).eval;
    config_hash = cfg.content_hash;
    inputs.push_back(config_path);
  }
  std::vector<FeatureRow> rows = read_features_csv(features_path);
  EvaluationReport report = leave_one_family_out(rows, params, seed, workers);
  std::filesystem::create_directories(out_dir);
  std::string json_path = out_dir + "/report.json";
  std::string csv_path = out_dir + "/report.csv";
  atomic_write(json_path, [&](const std::string& tmp) {
    write_report_json(report, tmp);
  });
  atomic_write(csv_path, [&](const std::string& tmp) {
    write_report_csv(report, tmp);
  });
  write_manifest(out_dir, "evaluate", config_hash, seed, workers, inputs,
                 {json_path, csv_path});
  const MethodResult& pooled = report.pooled.at("ESSD");
  std::cout << "evaluated " << report.evaluations.size()
            << " held-out families; pooled ESSD auc "
            << format_double(pooled.auc) << " -> " << json_path << "\n";
  return 0;
}

inline int cmd_signal(const std::string& model_path,
                      const std::string& features_path, double threshold,
                      const std::string& out_dir) {
  Forest forest = read_forest(model_path);
  std::vector<FeatureRow> rows = read_features_csv(features_path);
  if (rows.empty()) throw Error(Errc::EmptyDataset, "no feature rows");
  struct Scored {
    std::string family;
    std::string event_code;
    double probability;
  };
  std::vector<Scored> scored;
  scored.reserve(rows.size());
  for (const FeatureRow& row : rows)
    scored.push_back(
        {to_string(row.family), row.event_code, predict_proba(forest, row.x)});
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    if (a.family != b.family) return a.family < b.family;
    return a.event_code < b.event_code;
  });
  std::filesystem::create_directories(out_dir);
  std::string signals_path = out_dir + "/signals.csv";
  std::size_t flagged = 0;
  atomic_write(signals_path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp);
    out << "family_prefix,event_code,probability,signal\n";
    for (const Scored& s : scored) {
      bool flag = s.probability >= threshold;
      flagged += flag ? 1 : 0;
      out << join_csv({s.family, s.event_code, format_double(s.probability),
                       flag ? "1" : "0"})
          << "\n";
    }
  });
  write_manifest(out_dir, "signal", 0, std::nullopt, 1,
                 {model_path, features_path}, {signals_path});
  std::cout << "scored " << scored.size() << " pairs, " << flagged
            << " signalled -> " << signals_path << "\n";
  return 0;
}

// Command-line front end. Every stage that draws random numbers requires an
// explicit --seed; there is no entropy-based default anywhere.
inline int run_cli(int argc, char** argv) {
  CLI::App app{"ensemble of simple study designs for adverse drug reaction "
               "signalling"};
  app.set_version_flag("--version", std::string("essd ") + kVersion);
  app.require_subcommand(1);

  std::string preset, config_path, out_dir = ".";
  std::string features_path, model_path;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double threshold = 0.5;

  CLI::App* gen = app.add_subcommand(
      "generate", "generate a synthetic dataset with planted effects");
  gen->add_option("--preset", preset,
                  "built-in benchmark: smoke, standard or confounded");
  gen->add_option("--config", config_path, "generator configuration file");
  gen->add_option("--seed", seed, "root seed")->required();
  gen->add_option("--out", out_dir, "output directory");

  CLI::App* feat = app.add_subcommand(
      "features", "build the nine-feature matrix for all study pairs");
  feat->add_option("--config", config_path, "pipeline configuration file")
      ->required();
  feat->add_option("--seed", seed, "root seed")->required();
  feat->add_option("--workers", workers, "worker threads");
  feat->add_option("--out", out_dir, "output directory");

  CLI::App* train = app.add_subcommand(
      "train", "tune mtry by cross-validation and train the final forest");
  train->add_option("--features", features_path, "features.csv path")
      ->required();
  train->add_option("--config", config_path, "pipeline configuration file");
  train->add_option("--seed", seed, "root seed")->required();
  train->add_option("--workers", workers, "worker threads");
  train->add_option("--out", out_dir, "output directory");

  CLI::App* eval = app.add_subcommand(
      "evaluate", "leave-one-family-out evaluation of all methods");
  eval->add_option("--features", features_path, "features.csv path")
      ->required();
  eval->add_option("--config", config_path, "pipeline configuration file");
  eval->add_option("--seed", seed, "root seed")->required();
  eval->add_option("--workers", workers, "worker threads");
  eval->add_option("--out", out_dir, "output directory");

  CLI::App* sig = app.add_subcommand(
      "signal", "score pairs with a trained model and flag signals");
  sig->add_option("--model", model_path, "model.txt path")->required();
  sig->add_option("--features", features_path, "features.csv path")
      ->required();
  sig->add_option("--threshold", threshold, "signal probability threshold");
  sig->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) {
      if (preset.empty() == config_path.empty())
        throw Error(Errc::ConfigError,
                    "generate needs exactly one of --preset or --config");
      return cmd_generate(preset, config_path, seed, out_dir);
    }
    if (feat->parsed())
      return cmd_features(config_path, seed, workers, out_dir);
    if (train->parsed())
      return cmd_train(features_path, config_path, seed, workers, out_dir);
    if (eval->parsed())
      return cmd_evaluate(features_path, config_path, seed, workers, out_dir);
    if (sig->parsed())
      return cmd_signal(model_path, features_path, threshold, out_dir);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace essd
