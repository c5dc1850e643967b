#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "essd/csv.hpp"
#include "essd/error.hpp"
#include "essd/evaluation.hpp"
#include "essd/feature_matrix.hpp"
#include "essd/generator.hpp"
#include "essd/log.hpp"
#include "essd/rng.hpp"
#include "essd/version.hpp"

namespace essd {

// Flat key/value configuration: one `key = value` per line, full-line `#`
// comments, blank lines ignored. Repeated keys accumulate into lists; for
// scalar lookups the last occurrence wins.
struct ConfigMap {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string base_dir;  // directory of the config file, for relative paths
  std::uint64_t content_hash = 0;

  std::optional<std::string> get(const std::string& key) const {
    std::optional<std::string> found;
    for (const auto& [k, v] : entries)
      if (k == key) found = v;
    return found;
  }

  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v) throw Error(Errc::ConfigError, "missing config key '" + key + "'");
    return *v;
  }

  std::vector<std::string> get_all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries)
      if (k == key) out.push_back(v);
    return out;
  }

  std::string resolve_path(const std::string& value) const {
    std::filesystem::path p(value);
    if (p.is_absolute() || base_dir.empty()) return value;
    return (std::filesystem::path(base_dir) / p).string();
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

inline std::int64_t to_int(const std::string& s, const std::string& key) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(Errc::ConfigError, key + ": bad integer '" + s + "'");
  return v;
}

inline double to_real(const std::string& s, const std::string& key) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(Errc::ConfigError, key + ": bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline ConfigMap read_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open config " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string content = buffer.str();

  ConfigMap cfg;
  cfg.base_dir = std::filesystem::path(path).parent_path().string();
  cfg.content_hash = fnv1a64(content);
  std::istringstream lines(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::ConfigError,
                  path + " line " + std::to_string(line_no) +
                      ": expected 'key = value'");
    std::string key = detail::trim(t.substr(0, eq));
    std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty())
      throw Error(Errc::ConfigError,
                  path + " line " + std::to_string(line_no) + ": empty key");
    cfg.entries.emplace_back(std::move(key), std::move(value));
  }
  return cfg;
}

// Everything the pipeline stages need beyond the dataset itself.
struct RunConfig {
  std::string patients_path;
  std::string events_path;
  std::string prescriptions_path;
  std::string tree_path;
  std::string reference_path;
  std::vector<FamilySpec> families;
  FeatureParams features;
  EvalParams eval;
  PairScope scope = PairScope::reference_only;
};

inline RunConfig parse_run_config(const ConfigMap& cfg,
                                  bool require_data = true) {
  RunConfig run;
  if (require_data) {
    run.patients_path = cfg.resolve_path(cfg.require("data.patients"));
    run.events_path = cfg.resolve_path(cfg.require("data.events"));
    run.prescriptions_path =
        cfg.resolve_path(cfg.require("data.prescriptions"));
    run.tree_path = cfg.resolve_path(cfg.require("data.tree"));
    run.reference_path = cfg.resolve_path(cfg.require("data.reference"));
    auto families = cfg.get_all("family");
    if (families.empty())
      throw Error(Errc::ConfigError, "no 'family' entries in config");
    for (const std::string& prefix : families) {
      FamilySpec spec;
      spec.family = parse_bnf(prefix);
      spec.comparator = parse_bnf(cfg.require("comparator." + prefix));
      if (spec.comparator == spec.family)
        throw Error(Errc::ConfigError,
                    "comparator." + prefix + " equals the family itself");
      run.families.push_back(spec);
    }
  }
  auto int_key = [&](const char* key, std::int32_t fallback) {
    auto v = cfg.get(key);
    return v ? static_cast<std::int32_t>(detail::to_int(*v, key)) : fallback;
  };
  auto real_key = [&](const char* key, double fallback) {
    auto v = cfg.get(key);
    return v ? detail::to_real(*v, key) : fallback;
  };
  run.features.washout_days = int_key("cohort.washout_days", 90);
  run.features.min_pre_observation_days =
      int_key("cohort.min_pre_observation_days", 30);
  run.features.min_post_observation_days =
      int_key("cohort.min_post_observation_days", 30);
  run.features.rme_window_days = int_key("rme.window_days", 30);
  run.features.rme_min_patients = int_key("rme.min_patients", 3);
  run.features.match_year_tolerance_max =
      int_key("match.year_tolerance_max", 5);
  run.eval.n_trees = int_key("forest.n_trees", 500);
  run.eval.folds = int_key("forest.folds", 20);
  run.eval.essd_threshold = real_key("threshold.essd", 0.5);
  if (auto v = cfg.get("forest.mtry_candidates")) {
    run.eval.mtry_candidates.clear();
    for (const std::string& word : detail::split_words(*v))
      run.eval.mtry_candidates.push_back(
          static_cast<int>(detail::to_int(word, "forest.mtry_candidates")));
    if (run.eval.mtry_candidates.empty())
      throw Error(Errc::ConfigError, "forest.mtry_candidates is empty");
  }
  if (auto v = cfg.get("features.scope")) {
    if (*v == "reference")
      run.scope = PairScope::reference_only;
    else if (*v == "all")
      run.scope = PairScope::all_rme;
    else
      throw Error(Errc::ConfigError,
                  "features.scope must be 'reference' or 'all'");
  }
  return run;
}

inline GeneratorConfig parse_generator_config(const ConfigMap& cfg) {
  GeneratorConfig gen;
  gen.n_patients = static_cast<std::int32_t>(
      detail::to_int(cfg.require("generator.n_patients"),
                     "generator.n_patients"));
  gen.span_years = static_cast<std::int32_t>(detail::to_int(
      cfg.get("generator.span_years").value_or("6"), "generator.span_years"));
  if (auto v = cfg.get("generator.tree.roots"))
    gen.tree.roots =
        static_cast<std::int32_t>(detail::to_int(*v, "generator.tree.roots"));
  if (auto v = cfg.get("generator.tree.branching")) {
    auto words = detail::split_words(*v);
    if (words.size() != 4)
      throw Error(Errc::ConfigError,
                  "generator.tree.branching needs 4 integers");
    for (std::size_t i = 0; i < 4; ++i)
      gen.tree.branching[i] = static_cast<std::int32_t>(
          detail::to_int(words[i], "generator.tree.branching"));
  }
  for (const std::string& value : cfg.get_all("generator.family")) {
    auto words = detail::split_words(value);
    if (words.size() < 2)
      throw Error(Errc::ConfigError,
                  "generator.family needs '<prefix> <exposure> [codes...]'");
    FamilyGenConfig fam;
    fam.prefix = parse_bnf(words[0]);
    fam.exposure_prob = detail::to_real(words[1], "generator.family");
    for (std::size_t i = 2; i < words.size(); ++i)
      fam.indication_codes.push_back(words[i]);
    gen.families.push_back(std::move(fam));
  }
  for (const std::string& value : cfg.get_all("generator.background")) {
    auto words = detail::split_words(value);
    if (words.size() != 2)
      throw Error(Errc::ConfigError,
                  "generator.background needs '<code> <rate>'");
    gen.background[words[0]] =
        detail::to_real(words[1], "generator.background");
  }
  for (const std::string& value : cfg.get_all("generator.effect")) {
    auto words = detail::split_words(value);
    if (words.size() != 5)
      throw Error(Errc::ConfigError,
                  "generator.effect needs '<kind> <family> <code> "
                  "<relative_risk> <window_days>'");
    PlantedEffect effect;
    if (words[0] == "ADR")
      effect.kind = EffectKind::adr;
    else if (words[0] == "IndicationConfounder")
      effect.kind = EffectKind::indication_confounder;
    else if (words[0] == "ProgressiveEvent")
      effect.kind = EffectKind::progressive;
    else if (words[0] == "CodingNoise")
      effect.kind = EffectKind::coding_noise;
    else
      throw Error(Errc::ConfigError,
                  "unknown effect kind '" + words[0] + "'");
    effect.family = parse_bnf(words[1]);
    effect.event_code = words[2];
    effect.relative_risk = detail::to_real(words[3], "generator.effect");
    effect.window_days = static_cast<std::int32_t>(
        detail::to_int(words[4], "generator.effect"));
    gen.effects.push_back(std::move(effect));
  }
  for (const std::string& value : cfg.get_all("generator.decoy")) {
    auto words = detail::split_words(value);
    if (words.size() != 2)
      throw Error(Errc::ConfigError,
                  "generator.decoy needs '<family> <code>'");
    gen.decoys.push_back({parse_bnf(words[0]), words[1]});
  }
  auto real_key = [&](const char* key, double fallback) {
    auto v = cfg.get(key);
    return v ? detail::to_real(*v, key) : fallback;
  };
  gen.indication_prob = real_key("generator.indication_prob", 0.8);
  gen.indication_bg_monthly =
      real_key("generator.indication_bg_monthly", 0.01);
  gen.coding_noise_prob = real_key("generator.coding_noise_prob", 0.5);
  gen.repeat_rx_prob = real_key("generator.repeat_rx_prob", 0.5);
  return gen;
}

// Writes through a temp file and renames, so readers never observe a
// partial file.
template <typename Writer>
void atomic_write(const std::string& path, Writer&& writer) {
  std::string tmp = path + ".tmp";
  writer(tmp);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw Error(Errc::IoError,
                "cannot move " + tmp + " to " + path + ": " + ec.message());
}

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[72];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return std::string(buf);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return std::string(buf);
}

// Every command leaves a manifest beside its outputs: tool version, config
// hash, seed, and worker count. The timestamp lives only here, so the data
// outputs stay byte-reproducible.
inline void write_manifest(const std::string& out_dir,
                           const std::string& command,
                           std::uint64_t config_hash,
                           std::optional<std::uint64_t> seed,
                           unsigned workers,
                           const std::vector<std::string>& inputs,
                           const std::vector<std::string>& outputs) {
  nlohmann::ordered_json j;
  j["tool"] = "essd";
  j["version"] = kVersion;
  j["command"] = command;
  j["config_fnv1a64"] = hex64(config_hash);
  if (seed)
    j["seed"] = *seed;
  else
    j["seed"] = nullptr;
  j["workers"] = workers;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["created"] = utc_timestamp();
  atomic_write(out_dir + "/manifest.json", [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp);
    out << j.dump(2) << "\n";
  });
}

}  // namespace essd
