#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "essd/bnf.hpp"
#include "essd/csv.hpp"
#include "essd/dataset.hpp"
#include "essd/date.hpp"
#include "essd/error.hpp"
#include "essd/event_tree.hpp"
#include "essd/reference.hpp"
#include "essd/rng.hpp"

namespace essd {

enum class EffectKind : std::uint8_t {
  adr,                    // label 1: excess acute risk after exposure
  indication_confounder,  // label 0: fires off the indication, not the drug
  progressive,            // label 0: rate ramps up through the index date
  coding_noise,           // label 1: ADR whose code scatters to siblings
};

inline const char* effect_kind_name(EffectKind kind) {
  switch (kind) {
    case EffectKind::adr: return "ADR";
    case EffectKind::indication_confounder: return "IndicationConfounder";
    case EffectKind::progressive: return "ProgressiveEvent";
    case EffectKind::coding_noise: return "CodingNoise";
  }
  return "?";
}

struct TreeSpec {
  std::int32_t roots = 5;
  std::array<std::int32_t, 4> branching = {3, 3, 3, 3};
};

struct FamilyGenConfig {
  DrugFamily prefix;
  double exposure_prob = 0.2;
  std::vector<std::string> indication_codes;
};

struct PlantedEffect {
  EffectKind kind = EffectKind::adr;
  DrugFamily family;
  std::string event_code;
  double relative_risk = 1.0;
  std::int32_t window_days = 30;
};

struct DecoyPair {
  DrugFamily family;
  std::string event_code;
};

struct GeneratorConfig {
  std::uint64_t seed = 0;
  std::int32_t n_patients = 0;
  std::int32_t span_years = 6;
  TreeSpec tree;
  std::vector<FamilyGenConfig> families;
  std::map<std::string, double> background;  // monthly rate per event code
  std::vector<PlantedEffect> effects;
  std::vector<DecoyPair> decoys;  // unlabelled-mechanism non-ADR pairs
  double indication_prob = 0.8;
  double indication_bg_monthly = 0.01;  // illness episodes without exposure
  double coding_noise_prob = 0.5;
  double repeat_rx_prob = 0.5;
};

// Synthetic code tree: roots E1..ER, child j of node C is "C.j".
inline EventCodeTree build_event_tree(const TreeSpec& spec) {
  EventCodeTree tree;
  struct Pending {
    EventNodeId id;
    std::int32_t depth;
  };
  std::vector<Pending> frontier;
  for (std::int32_t r = 1; r <= spec.roots; ++r) {
    EventNodeId id =
        tree.add_node("E" + std::to_string(r), kNoNode, "");
    frontier.push_back({id, 1});
  }
  for (std::size_t i = 0; i < frontier.size(); ++i) {
    Pending at = frontier[i];
    if (at.depth == 5) continue;
    std::int32_t fanout = spec.branching[static_cast<std::size_t>(at.depth - 1)];
    for (std::int32_t j = 1; j <= fanout; ++j) {
      EventNodeId id = tree.add_node(
          tree.nodes[at.id].code + "." + std::to_string(j), at.id, "");
      frontier.push_back({id, at.depth + 1});
    }
  }
  return tree;
}

namespace detail {

inline void validate_generator_config(const GeneratorConfig& cfg,
                                      const EventCodeTree& tree) {
  if (cfg.n_patients < 1)
    throw Error(Errc::ConfigError, "n_patients must be positive");
  if (cfg.span_years < 1)
    throw Error(Errc::ConfigError, "span_years must be positive");
  if (cfg.families.empty())
    throw Error(Errc::ConfigError, "at least one family required");
  auto check_prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
      throw Error(Errc::ConfigError,
                  std::string(name) + " must be a probability");
  };
  check_prob(cfg.indication_prob, "indication_prob");
  check_prob(cfg.coding_noise_prob, "coding_noise_prob");
  check_prob(cfg.repeat_rx_prob, "repeat_rx_prob");
  if (cfg.indication_bg_monthly < 0.0 || cfg.indication_bg_monthly > 1.0)
    throw Error(Errc::ConfigError, "indication_bg_monthly out of range");
  for (const FamilyGenConfig& fam : cfg.families) {
    check_prob(fam.exposure_prob, "exposure_prob");
    for (const std::string& code : fam.indication_codes)
      if (tree.find(code) == kNoNode)
        throw Error(Errc::ConfigError,
                    "indication code '" + code + "' not in generated tree");
  }
  for (const auto& [code, rate] : cfg.background) {
    if (tree.find(code) == kNoNode)
      throw Error(Errc::ConfigError,
                  "background code '" + code + "' not in generated tree");
    check_prob(rate, "background rate");
  }
  for (const PlantedEffect& effect : cfg.effects) {
    if (tree.find(effect.event_code) == kNoNode)
      throw Error(Errc::ConfigError,
                  "effect code '" + effect.event_code + "' not in tree");
    if (!(effect.relative_risk > 0.0))
      throw Error(Errc::ConfigError, "relative_risk must be positive");
    if (effect.window_days < 1 || effect.window_days > 40)
      throw Error(Errc::ConfigError, "effect window must be in [1,40] days");
    if (!cfg.background.count(effect.event_code))
      throw Error(Errc::ConfigError,
                  "effect code '" + effect.event_code +
                      "' needs a background rate");
    bool known = false;
    for (const FamilyGenConfig& fam : cfg.families)
      known = known || fam.prefix == effect.family;
    if (!known)
      throw Error(Errc::ConfigError,
                  "effect family " + to_string(effect.family) +
                      " not configured");
  }
  for (const DecoyPair& decoy : cfg.decoys)
    if (tree.find(decoy.event_code) == kNoNode)
      throw Error(Errc::ConfigError,
                  "decoy code '" + decoy.event_code + "' not in tree");
}

struct DateWindow {
  Date start;
  Date end;  // inclusive

  bool contains(Date d) const { return d >= start && d <= end; }
};

}  // namespace detail

struct GeneratedPaths {
  std::string patients;
  std::string events;
  std::string prescriptions;
  std::string tree;
  std::string reference;
  std::string ground_truth;
};

// Writes the four event-store files plus reference.csv and
// ground_truth.json into out_dir. Every random draw comes from a
// per-patient generator seeded by (seed, patient ordinal) and follows a
// fixed order (demographics, exposures, indication episodes, background,
// confounders, acute effects, progressive effects), so output is
// byte-identical for a given config and seed.
inline GeneratedPaths generate(const GeneratorConfig& cfg,
                               const std::string& out_dir) {
  EventCodeTree tree = build_event_tree(cfg.tree);
  detail::validate_generator_config(cfg, tree);

  const Date study_start = make_date(2005, 1, 1);
  const std::int32_t span_days = cfg.span_years * 365;
  const std::int32_t min_reg_days = std::min(span_days, 730);

  // Coding-noise scatter targets: depth-5 leaves under the same depth-3
  // parent, excluding the planted code itself.
  std::map<std::string, std::vector<std::string>> siblings_of;
  for (const PlantedEffect& effect : cfg.effects) {
    if (effect.kind != EffectKind::coding_noise) continue;
    if (siblings_of.count(effect.event_code)) continue;
    EventNodeId id = tree.require(effect.event_code);
    if (tree.nodes[id].depth != 5)
      throw Error(Errc::ConfigError,
                  "coding-noise code '" + effect.event_code +
                      "' must be a depth-5 leaf");
    EventNodeId parent3 = tree.ancestor_at_depth(id, 3);
    std::vector<std::string> sibs;
    for (const EventNode& node : tree.nodes) {
      if (node.depth != 5) continue;
      EventNodeId nid = tree.find(node.code);
      if (tree.ancestor_at_depth(nid, 3) == parent3 &&
          node.code != effect.event_code)
        sibs.push_back(node.code);
    }
    if (sibs.empty())
      throw Error(Errc::ConfigError,
                  "coding-noise code '" + effect.event_code +
                      "' has no depth-5 siblings");
    std::sort(sibs.begin(), sibs.end());
    siblings_of[effect.event_code] = std::move(sibs);
  }

  // Distinct indication codes across families, in sorted order.
  std::set<std::string> indication_codes;
  for (const FamilyGenConfig& fam : cfg.families)
    for (const std::string& code : fam.indication_codes)
      indication_codes.insert(code);

  auto full_bnf = [](const DrugFamily& prefix) {
    BnfCode code = prefix;
    while (code.length < 4) code.component[code.length++] = 1;
    return code;
  };

  GeneratedPaths paths;
  paths.patients = out_dir + "/patients.csv";
  paths.events = out_dir + "/events.csv";
  paths.prescriptions = out_dir + "/prescriptions.csv";
  paths.tree = out_dir + "/event_tree.csv";
  paths.reference = out_dir + "/reference.csv";
  paths.ground_truth = out_dir + "/ground_truth.json";

  // All files are written under temporary names and renamed once complete,
  // so a failed run never leaves a partial dataset behind.
  auto tmp_name = [](const std::string& p) { return p + ".tmp"; };

  write_event_tree_csv(tree, tmp_name(paths.tree));

  std::ofstream patients_out(tmp_name(paths.patients), std::ios::binary);
  std::ofstream events_out(tmp_name(paths.events), std::ios::binary);
  std::ofstream rx_out(tmp_name(paths.prescriptions), std::ios::binary);
  if (!patients_out || !events_out || !rx_out)
    throw Error(Errc::IoError, "cannot write dataset files in " + out_dir);
  patients_out << "patient_id,year_of_birth,gender,reg_start,reg_end\n";
  events_out << "patient_id,date,event_code\n";
  rx_out << "patient_id,date,drug_id,bnf_code\n";

  struct Emission {
    Date date;
    std::string code;
  };
  struct RxEmission {
    Date date;
    std::string drug_id;
    std::string bnf;
  };
  struct Episode {
    Date date;
    std::string code;
  };

  for (std::int32_t p = 0; p < cfg.n_patients; ++p) {
    Rng rng(derive_seed(cfg.seed, "patient",
                        static_cast<std::uint64_t>(p)));
    char id_buf[16];
    std::snprintf(id_buf, sizeof(id_buf), "P%07d", p + 1);
    std::string patient_id(id_buf);

    // 1. Demographics and registration.
    bool female = rng.bernoulli(0.5);
    std::int32_t yob = 1930 + static_cast<std::int32_t>(rng.below(71));
    std::int32_t start_off =
        static_cast<std::int32_t>(rng.below(
            static_cast<std::uint64_t>(span_days / 4 + 1)));
    std::int32_t max_len = span_days - start_off;
    std::int32_t len =
        max_len <= min_reg_days
            ? max_len
            : min_reg_days + static_cast<std::int32_t>(rng.below(
                                 static_cast<std::uint64_t>(
                                     max_len - min_reg_days + 1)));
    Date reg_start = study_start + start_off;
    Date reg_end = reg_start + len;

    std::vector<Emission> events;
    std::vector<RxEmission> prescriptions;
    std::vector<Episode> episodes;
    std::map<std::string, Date> index_of;  // family string -> index date

    // 2. Exposures, repeat prescriptions, indication episodes.
    for (const FamilyGenConfig& fam : cfg.families) {
      if (!rng.bernoulli(fam.exposure_prob)) continue;
      if (len < 80) continue;
      Date index = reg_start + 40 +
                   static_cast<std::int32_t>(rng.below(
                       static_cast<std::uint64_t>(len - 79)));
      std::string bnf = to_string(full_bnf(fam.prefix));
      prescriptions.push_back({index, "D-" + bnf, bnf});
      index_of[to_string(fam.prefix)] = index;
      if (rng.bernoulli(cfg.repeat_rx_prob)) {
        Date repeat = index + 20 +
                      static_cast<std::int32_t>(rng.below(71));
        if (repeat <= reg_end)
          prescriptions.push_back({repeat, "D-" + bnf, bnf});
      }
      for (const std::string& code : fam.indication_codes) {
        if (!rng.bernoulli(cfg.indication_prob)) continue;
        Date onset = index - static_cast<std::int32_t>(rng.below(8));
        events.push_back({onset, code});
        episodes.push_back({onset, code});
      }
    }

    // 3. Illness episodes that occur without any prescription.
    if (cfg.indication_bg_monthly > 0.0) {
      for (const std::string& code : indication_codes) {
        for (Date block = reg_start; block <= reg_end; block = block + 30) {
          std::int32_t d = std::min(30, reg_end - block + 1);
          if (!rng.bernoulli(cfg.indication_bg_monthly * d / 30.0)) continue;
          Date at = block + static_cast<std::int32_t>(rng.below(
                                static_cast<std::uint64_t>(d)));
          events.push_back({at, code});
          episodes.push_back({at, code});
        }
      }
    }

    // 4. Suppression windows: planted acute and progressive effects
    //    replace the background process for their code.
    std::map<std::string, std::vector<detail::DateWindow>> suppressed;
    for (const PlantedEffect& effect : cfg.effects) {
      auto it = index_of.find(to_string(effect.family));
      if (it == index_of.end()) continue;
      Date index = it->second;
      if (effect.kind == EffectKind::adr ||
          effect.kind == EffectKind::coding_noise) {
        suppressed[effect.event_code].push_back(
            {index + 1, index + effect.window_days});
      } else if (effect.kind == EffectKind::progressive) {
        Date onset = std::max(reg_start, index - 180);
        suppressed[effect.event_code].push_back({onset, reg_end});
      }
    }

    // 5. Background events, monthly Bernoulli per 30-day block.
    for (const auto& [code, rate] : cfg.background) {
      const std::vector<detail::DateWindow>* windows = nullptr;
      auto it = suppressed.find(code);
      if (it != suppressed.end()) windows = &it->second;
      for (Date block = reg_start; block <= reg_end; block = block + 30) {
        std::int32_t d = std::min(30, reg_end - block + 1);
        if (!rng.bernoulli(rate * d / 30.0)) continue;
        Date at = block + static_cast<std::int32_t>(rng.below(
                              static_cast<std::uint64_t>(d)));
        bool drop = false;
        if (windows)
          for (const detail::DateWindow& w : *windows)
            if (w.contains(at)) {
              drop = true;
              break;
            }
        if (!drop) events.push_back({at, code});
      }
    }

    // 6. Indication confounders fire off illness episodes, whichever drug
    //    (or none) the patient took.
    for (const PlantedEffect& effect : cfg.effects) {
      if (effect.kind != EffectKind::indication_confounder) continue;
      const FamilyGenConfig* fam = nullptr;
      for (const FamilyGenConfig& f : cfg.families)
        if (f.prefix == effect.family) fam = &f;
      double hit = std::min(1.0, effect.relative_risk *
                                     cfg.background.at(effect.event_code));
      for (const Episode& episode : episodes) {
        bool triggers = false;
        for (const std::string& code : fam->indication_codes)
          triggers = triggers || code == episode.code;
        if (!triggers) continue;
        if (!rng.bernoulli(hit)) continue;
        Date at = episode.date + 1 +
                  static_cast<std::int32_t>(rng.below(
                      static_cast<std::uint64_t>(effect.window_days)));
        if (at <= reg_end) events.push_back({at, effect.event_code});
      }
    }

    // 7. Acute planted effects (ADR and coding noise).
    for (const PlantedEffect& effect : cfg.effects) {
      if (effect.kind != EffectKind::adr &&
          effect.kind != EffectKind::coding_noise)
        continue;
      auto it = index_of.find(to_string(effect.family));
      if (it == index_of.end()) continue;
      double hit = std::min(1.0, effect.relative_risk *
                                     cfg.background.at(effect.event_code));
      if (!rng.bernoulli(hit)) continue;
      Date at = it->second + 1 +
                static_cast<std::int32_t>(rng.below(
                    static_cast<std::uint64_t>(effect.window_days)));
      std::string code = effect.event_code;
      if (effect.kind == EffectKind::coding_noise &&
          rng.bernoulli(cfg.coding_noise_prob)) {
        const std::vector<std::string>& sibs = siblings_of.at(code);
        code = sibs[rng.below(sibs.size())];
      }
      if (at <= reg_end) events.push_back({at, code});
    }

    // 8. Progressive effects: monthly rate ramps from the background level
    //    at onset (six months before the index) up to rr × background.
    for (const PlantedEffect& effect : cfg.effects) {
      if (effect.kind != EffectKind::progressive) continue;
      auto it = index_of.find(to_string(effect.family));
      if (it == index_of.end()) continue;
      double bg = cfg.background.at(effect.event_code);
      Date onset = std::max(reg_start, it->second - 180);
      std::int32_t m = 0;
      for (Date block = onset; block <= reg_end; block = block + 30, ++m) {
        std::int32_t d = std::min(30, reg_end - block + 1);
        double rate = std::min(
            bg * (1.0 + (effect.relative_risk - 1.0) * m / 12.0),
            bg * effect.relative_risk);
        rate = std::min(rate, 1.0);
        if (!rng.bernoulli(rate * d / 30.0)) continue;
        Date at = block + static_cast<std::int32_t>(rng.below(
                              static_cast<std::uint64_t>(d)));
        events.push_back({at, effect.event_code});
      }
    }

    std::sort(events.begin(), events.end(),
              [](const Emission& a, const Emission& b) {
                return a.date < b.date ||
                       (a.date == b.date && a.code < b.code);
              });
    std::sort(prescriptions.begin(), prescriptions.end(),
              [](const RxEmission& a, const RxEmission& b) {
                return a.date < b.date ||
                       (a.date == b.date && a.drug_id < b.drug_id);
              });

    patients_out << join_csv({patient_id, std::to_string(yob),
                              female ? "F" : "M", to_iso(reg_start),
                              to_iso(reg_end)})
                 << "\n";
    for (const Emission& e : events)
      events_out << join_csv({patient_id, to_iso(e.date), e.code}) << "\n";
    for (const RxEmission& rx : prescriptions)
      rx_out << join_csv({patient_id, to_iso(rx.date), rx.drug_id, rx.bnf})
             << "\n";
  }
  if (!patients_out || !events_out || !rx_out)
    throw Error(Errc::IoError, "write failed in " + out_dir);
  patients_out.close();
  events_out.close();
  rx_out.close();

  // Ground truth: planted effects carry their mechanism; decoys are pure
  // background pairs included to give the reference negative examples.
  std::vector<LabeledPair> reference;
  nlohmann::ordered_json truth;
  truth["seed"] = cfg.seed;
  truth["n_patients"] = cfg.n_patients;
  truth["pairs"] = nlohmann::ordered_json::array();
  auto add_pair = [&](const DrugFamily& family, const std::string& code,
                      const char* kind, double rr, std::int32_t window,
                      std::int32_t label) {
    reference.push_back({family, code, label});
    nlohmann::ordered_json row;
    row["family"] = to_string(family);
    row["event_code"] = code;
    row["kind"] = kind;
    row["relative_risk"] = rr;
    row["window_days"] = window;
    row["label"] = label;
    truth["pairs"].push_back(std::move(row));
  };
  for (const PlantedEffect& effect : cfg.effects) {
    std::int32_t label = effect.kind == EffectKind::adr ||
                                 effect.kind == EffectKind::coding_noise
                             ? 1
                             : 0;
    add_pair(effect.family, effect.event_code, effect_kind_name(effect.kind),
             effect.relative_risk, effect.window_days, label);
  }
  for (const DecoyPair& decoy : cfg.decoys)
    add_pair(decoy.family, decoy.event_code, "Background", 1.0, 0, 0);

  std::sort(reference.begin(), reference.end(),
            [](const LabeledPair& a, const LabeledPair& b) {
              if (!(a.family == b.family)) return a.family < b.family;
              return a.event_code < b.event_code;
            });
  for (std::size_t i = 1; i < reference.size(); ++i)
    if (reference[i].family == reference[i - 1].family &&
        reference[i].event_code == reference[i - 1].event_code)
      throw Error(Errc::ConfigError,
                  "pair " + to_string(reference[i].family) + "/" +
                      reference[i].event_code + " configured twice");
  write_reference_csv(reference, tmp_name(paths.reference));

  std::ofstream truth_out(tmp_name(paths.ground_truth), std::ios::binary);
  if (!truth_out)
    throw Error(Errc::IoError, "cannot write " + paths.ground_truth);
  truth_out << truth.dump(2) << "\n";
  truth_out.close();

  for (const std::string* path :
       {&paths.tree, &paths.patients, &paths.events, &paths.prescriptions,
        &paths.reference, &paths.ground_truth}) {
    std::error_code ec;
    std::filesystem::rename(tmp_name(*path), *path, ec);
    if (ec)
      throw Error(Errc::IoError, "cannot finalise " + *path + ": " +
                                     ec.message());
  }
  return paths;
}

}  // namespace essd
