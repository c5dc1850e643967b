#include "catch2/catch_amalgamated.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>
#include <unistd.h>

#include "essd/config.hpp"
#include "essd/feature_matrix.hpp"
#include "essd/generator.hpp"
#include "essd/presets.hpp"
#include "json.hpp"

using namespace essd;

namespace {

std::string fresh_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("essd_gen_" + std::to_string(::getpid()) + "_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset load_generated(const GeneratedPaths& paths) {
  return load_dataset(paths.patients, paths.events, paths.prescriptions,
                      paths.tree);
}

// Two-family layout used by the targeted mechanism tests below.
GeneratorConfig two_family_config(std::int32_t n_patients) {
  GeneratorConfig cfg;
  cfg.n_patients = n_patients;
  cfg.span_years = 6;
  FamilyGenConfig a;
  a.prefix = parse_bnf("05-01-01-01");
  a.exposure_prob = 0.5;
  FamilyGenConfig b;
  b.prefix = parse_bnf("05-01-01-02");
  b.exposure_prob = 0.2;
  cfg.families = {a, b};
  return cfg;
}

}  // namespace

TEST_CASE("the smoke preset generates a loadable consistent dataset") {
  GeneratorConfig cfg = benchmark_suite("smoke");
  cfg.seed = 7;
  auto dir = fresh_dir("smoke");
  GeneratedPaths paths = generate(cfg, dir);

  Dataset ds = load_generated(paths);
  CHECK(ds.provenance.n_patients == 1500);
  CHECK(ds.provenance.n_events > 0);
  CHECK(ds.provenance.n_prescriptions > 0);

  auto reference = read_reference_csv(paths.reference);
  REQUIRE_FALSE(reference.empty());
  bool any_pos = false, any_neg = false;
  std::set<std::pair<std::string, std::string>> seen;
  for (const LabeledPair& pair : reference) {
    ds.tree.require(pair.event_code);
    CHECK(seen.insert({to_string(pair.family), pair.event_code}).second);
    (pair.label == 1 ? any_pos : any_neg) = true;
  }
  CHECK(any_pos);
  CHECK(any_neg);

  // Every configured family actually has users.
  FeatureParams params;
  for (const FamilyGenConfig& fam : cfg.families) {
    CohortIndex cohort =
        build_cohort(ds, fam.prefix, params.washout_days,
                     params.min_pre_observation_days,
                     params.min_post_observation_days);
    CHECK(cohort.entries.size() > 50);
  }

  // Ground truth mirrors the reference rows pair for pair.
  auto truth = nlohmann::json::parse(slurp(paths.ground_truth));
  CHECK(truth.at("seed").get<std::uint64_t>() == 7);
  CHECK(truth.at("n_patients").get<std::int32_t>() == 1500);
  REQUIRE(truth.at("pairs").size() == reference.size());
  std::set<std::tuple<std::string, std::string, std::int32_t>> from_truth,
      from_reference;
  for (const auto& row : truth.at("pairs"))
    from_truth.insert({row.at("family").get<std::string>(),
                       row.at("event_code").get<std::string>(),
                       row.at("label").get<std::int32_t>()});
  for (const LabeledPair& pair : reference)
    from_reference.insert({to_string(pair.family), pair.event_code,
                           pair.label});
  CHECK(from_truth == from_reference);
  for (const auto& row : truth.at("pairs")) {
    std::string kind = row.at("kind").get<std::string>();
    bool known = kind == "ADR" || kind == "IndicationConfounder" ||
                 kind == "ProgressiveEvent" || kind == "CodingNoise" ||
                 kind == "Background";
    CHECK(known);
    if (kind == "ADR" || kind == "CodingNoise")
      CHECK(row.at("label").get<std::int32_t>() == 1);
    else
      CHECK(row.at("label").get<std::int32_t>() == 0);
  }
}

TEST_CASE("generation is a pure function of config and seed") {
  GeneratorConfig cfg = two_family_config(400);
  cfg.background["E2.1.1.1.1"] = 0.03;
  cfg.decoys.push_back({parse_bnf("05-01-01-01"), "E2.1.1.1.1"});
  cfg.seed = 99;

  auto dir_a = fresh_dir("det_a");
  auto dir_b = fresh_dir("det_b");
  GeneratedPaths pa = generate(cfg, dir_a);
  GeneratedPaths pb = generate(cfg, dir_b);
  CHECK(slurp(pa.patients) == slurp(pb.patients));
  CHECK(slurp(pa.events) == slurp(pb.events));
  CHECK(slurp(pa.prescriptions) == slurp(pb.prescriptions));
  CHECK(slurp(pa.tree) == slurp(pb.tree));
  CHECK(slurp(pa.reference) == slurp(pb.reference));
  CHECK(slurp(pa.ground_truth) == slurp(pb.ground_truth));

  cfg.seed = 100;
  auto dir_c = fresh_dir("det_c");
  GeneratedPaths pc = generate(cfg, dir_c);
  CHECK(slurp(pa.events) != slurp(pc.events));

  // No stray temp files once generation has finished.
  for (const auto& entry : std::filesystem::directory_iterator(dir_a))
    CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("pure background pairs carry no month-one excess") {
  GeneratorConfig cfg = two_family_config(6000);
  cfg.background["E2.1.1.1.1"] = 0.02;
  cfg.decoys.push_back({parse_bnf("05-01-01-01"), "E2.1.1.1.1"});
  cfg.seed = 31;
  auto dir = fresh_dir("neutral");
  GeneratedPaths paths = generate(cfg, dir);
  Dataset ds = load_generated(paths);

  FamilySpec spec;
  spec.family = parse_bnf("05-01-01-01");
  spec.comparator = parse_bnf("05-01-01-02");
  FeatureParams params;
  FamilyArtifacts art = build_family_artifacts(ds, spec, params, 5);
  CHECK(art.cohort.entries.size() > 1500);
  auto x = feature_vector(ds, art, ds.tree.require("E2.1.1.1.1"));
  CHECK(std::abs(x[0]) < 0.012);  // ssd1: crude before/after
  CHECK(std::abs(x[3]) < 0.012);  // ssd4: against the comparator
}

TEST_CASE("a planted effect at the cap hits every cohort member") {
  GeneratorConfig cfg = two_family_config(500);
  cfg.background["E3.1.1.1.1"] = 0.02;
  PlantedEffect adr;
  adr.kind = EffectKind::adr;
  adr.family = parse_bnf("05-01-01-01");
  adr.event_code = "E3.1.1.1.1";
  adr.relative_risk = 50.0;  // 50 x 0.02 caps the month-one risk at one
  adr.window_days = 30;
  cfg.effects.push_back(adr);
  cfg.seed = 17;
  auto dir = fresh_dir("cap");
  GeneratedPaths paths = generate(cfg, dir);
  Dataset ds = load_generated(paths);

  FeatureParams params;
  CohortIndex cohort = build_cohort(ds, adr.family, params.washout_days,
                                    params.min_pre_observation_days,
                                    params.min_post_observation_days);
  REQUIRE(cohort.entries.size() > 100);
  EventNodeId event = ds.tree.require("E3.1.1.1.1");
  CHECK(risk(ds, cohort.entries, event, 1, 30) == 1.0);
  // The unexposed family sees only background in the same window.
  CohortIndex other = build_cohort(ds, parse_bnf("05-01-01-02"),
                                   params.washout_days,
                                   params.min_pre_observation_days,
                                   params.min_post_observation_days);
  CHECK(risk(ds, other.entries, event, 1, 30) < 0.1);
}

TEST_CASE("coding noise scatters events across depth-five siblings") {
  GeneratorConfig cfg = two_family_config(3000);
  cfg.background["E4.2.1.1.1"] = 0.025;
  PlantedEffect noise;
  noise.kind = EffectKind::coding_noise;
  noise.family = parse_bnf("05-01-01-01");
  noise.event_code = "E4.2.1.1.1";
  noise.relative_risk = 8.0;
  cfg.effects.push_back(noise);
  cfg.coding_noise_prob = 0.5;
  cfg.seed = 23;
  auto dir = fresh_dir("noise");
  GeneratedPaths paths = generate(cfg, dir);
  Dataset ds = load_generated(paths);

  FamilySpec spec;
  spec.family = parse_bnf("05-01-01-01");
  spec.comparator = parse_bnf("05-01-01-02");
  FeatureParams params;
  FamilyArtifacts art = build_family_artifacts(ds, spec, params, 5);

  // Siblings under the depth-3 parent E4.2.1 absorb scattered copies even
  // though only E4.2.1.1.1 has a background rate configured.
  std::uint64_t sibling_hits = 0;
  for (const CohortEntry& entry : art.cohort.entries) {
    auto events = ds.events_in_window(entry.patient, entry.index_date + 1,
                                      entry.index_date + 30);
    for (EventNodeId id : events) {
      const std::string& code = ds.tree.nodes[id].code;
      if (code.rfind("E4.2.1.", 0) == 0 && code != "E4.2.1.1.1")
        ++sibling_hits;
    }
  }
  CHECK(sibling_hits > 20);

  // The depth-3 rollup therefore sees a markedly larger excess than the
  // exact code.
  auto x = feature_vector(ds, art, ds.tree.require("E4.2.1.1.1"));
  CHECK(x[4] > x[0] + 0.02);
}

TEST_CASE("a generator config file reproduces the in-memory config") {
  auto dir = fresh_dir("cfgfile");
  std::string config_path = dir + "/gen.essd";
  {
    std::ofstream out(config_path, std::ios::binary);
    out << "generator.n_patients = 400\n"
        << "generator.span_years = 5\n"
        << "generator.tree.roots = 5\n"
        << "generator.tree.branching = 3 3 3 3\n"
        << "generator.family = 05-01-01-01 0.5 E1.1.1.1.1\n"
        << "generator.family = 05-01-01-02 0.2 E1.1.1.1.1\n"
        << "generator.background = E2.1.1.1.1 0.03\n"
        << "generator.background = E3.1.1.1.1 0.02\n"
        << "generator.effect = ADR 05-01-01-01 E2.1.1.1.1 6 30\n"
        << "generator.decoy = 05-01-01-02 E3.1.1.1.1\n"
        << "generator.repeat_rx_prob = 0.25\n";
  }
  ConfigMap cfg_map = read_config(config_path);
  GeneratorConfig cfg = parse_generator_config(cfg_map);
  CHECK(cfg.n_patients == 400);
  CHECK(cfg.span_years == 5);
  REQUIRE(cfg.families.size() == 2);
  CHECK(to_string(cfg.families[0].prefix) == "05-01-01-01");
  CHECK(cfg.families[1].exposure_prob == 0.2);
  REQUIRE(cfg.effects.size() == 1);
  CHECK(cfg.effects[0].kind == EffectKind::adr);
  CHECK(cfg.effects[0].relative_risk == 6.0);
  REQUIRE(cfg.decoys.size() == 1);
  CHECK(cfg.repeat_rx_prob == 0.25);

  cfg.seed = 3;
  GeneratedPaths paths = generate(cfg, dir);
  Dataset ds = load_generated(paths);
  CHECK(ds.provenance.n_patients == 400);
  auto reference = read_reference_csv(paths.reference);
  REQUIRE(reference.size() == 2);
  CHECK(reference[0].label == 1);  // 05-01-01-01 sorts before the decoy
  CHECK(reference[1].label == 0);
}

TEST_CASE("invalid generator configs are rejected up front") {
  GeneratorConfig cfg = two_family_config(100);
  SECTION("effect without a background rate") {
    PlantedEffect e;
    e.family = cfg.families[0].prefix;
    e.event_code = "E1.1.1.1.1";
    cfg.effects.push_back(e);
    CHECK_THROWS_AS(generate(cfg, fresh_dir("bad1")), Error);
  }
  SECTION("background code outside the tree") {
    cfg.background["E9.1.1.1.1"] = 0.02;
    CHECK_THROWS_AS(generate(cfg, fresh_dir("bad2")), Error);
  }
  SECTION("coding noise requires a depth-five code") {
    PlantedEffect e;
    e.kind = EffectKind::coding_noise;
    e.family = cfg.families[0].prefix;
    e.event_code = "E1.1";
    cfg.background["E1.1"] = 0.02;
    cfg.effects.push_back(e);
    CHECK_THROWS_AS(generate(cfg, fresh_dir("bad3")), Error);
  }
  SECTION("unknown preset name") {
    CHECK_THROWS_AS(benchmark_suite("galaxy"), Error);
  }
}
