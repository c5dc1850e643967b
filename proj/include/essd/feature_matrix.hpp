#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "essd/cohort.hpp"
#include "essd/csv.hpp"
#include "essd/dataset.hpp"
#include "essd/log.hpp"
#include "essd/measures.hpp"
#include "essd/parallel.hpp"
#include "essd/reference.hpp"
#include "essd/rng.hpp"

namespace essd {

struct FeatureParams {
  std::int32_t washout_days = 90;
  std::int32_t min_pre_observation_days = 30;
  std::int32_t min_post_observation_days = 30;
  std::int32_t rme_window_days = 30;
  std::int32_t rme_min_patients = 3;
  std::int32_t match_year_tolerance_max = 5;
};

struct FamilySpec {
  DrugFamily family;
  DrugFamily comparator;
};

// Per-family populations shared by every pair of that family.
struct FamilyArtifacts {
  CohortIndex cohort;
  RiskEventSet rme;
  SubstituteCohort matched;
  SubstituteCohort comparator;
};

inline FamilyArtifacts build_family_artifacts(const Dataset& ds,
                                              const FamilySpec& spec,
                                              const FeatureParams& params,
                                              std::uint64_t seed) {
  FamilyArtifacts art;
  art.cohort = build_cohort(ds, spec.family, params.washout_days,
                            params.min_pre_observation_days,
                            params.min_post_observation_days);
  art.rme = risk_medical_events(ds, art.cohort, params.rme_window_days,
                                params.rme_min_patients);
  std::uint64_t match_seed =
      derive_seed(seed, "match", fnv1a64(to_string(spec.family)));
  art.matched = match_nonuser_cohort(ds, art.cohort, match_seed,
                                     params.match_year_tolerance_max);
  art.comparator = comparator_cohort(ds, spec.comparator, art.cohort,
                                     params.washout_days,
                                     params.min_pre_observation_days,
                                     params.min_post_observation_days);
  return art;
}

struct FeatureRow {
  DrugFamily family;
  std::string event_code;
  std::array<double, 9> x{};
  std::optional<std::int32_t> label;
  std::size_t n_target = 0;
  std::size_t n_matched = 0;
  std::size_t n_comparator = 0;
};

namespace detail {

inline void check_bounded(double v, const char* name,
                          const std::string& pair) {
  if (!(v >= -1.0 && v <= 1.0))
    throw Error(Errc::IntegrityError, std::string(name) + " out of [-1,1] for " + pair);
}

}  // namespace detail

// All nine features of one (family, event) pair.
inline std::array<double, 9> feature_vector(const Dataset& ds,
                                            const FamilyArtifacts& art,
                                            EventNodeId event) {
  std::array<double, 9> x{};
  x[0] = ssd1(ds, art.cohort, event);
  x[1] = ssd2(ds, art.cohort, event);
  x[2] = ssd3(ds, art.cohort, art.matched, event);
  x[3] = ssd4(ds, art.cohort, art.comparator, event);
  x[4] = ssd5(ds, art.cohort, event);
  x[5] = ssd6(ds, art.cohort, event);
  std::string pair = to_string(art.cohort.family) + "/" +
                     ds.tree.nodes[event].code;
  detail::check_bounded(x[0], "x1", pair);
  detail::check_bounded(x[1], "x2", pair);
  detail::check_bounded(x[2], "x3", pair);
  detail::check_bounded(x[3], "x4", pair);
  detail::check_bounded(x[4], "x5", pair);
  detail::check_bounded(x[5], "x6", pair);
  RatioFeatures r = derive_ratios(x[0], x[1], x[3], x[4]);
  x[6] = r.x7;
  x[7] = r.x8;
  x[8] = r.x9;
  for (double v : x)
    if (!std::isfinite(v))
      throw Error(Errc::IntegrityError, "non-finite feature for " + pair);
  return x;
}

enum class PairScope : std::uint8_t { reference_only, all_rme };

// Builds the labelled feature table. With scope reference_only, one row per
// reference pair whose event is in its family's risk event set (others are
// dropped with a warning). With scope all_rme, one row per (family, RME
// event); labels come from the reference where available.
inline std::vector<FeatureRow> feature_matrix(
    const Dataset& ds, const std::vector<FamilySpec>& families,
    const std::vector<LabeledPair>& reference, const FeatureParams& params,
    std::uint64_t seed, unsigned workers, PairScope scope) {
  // Family order is canonicalised so output never depends on config order.
  std::vector<FamilySpec> ordered = families;
  std::sort(ordered.begin(), ordered.end(),
            [](const FamilySpec& a, const FamilySpec& b) {
              return a.family < b.family;
            });
  for (std::size_t i = 1; i < ordered.size(); ++i)
    if (ordered[i].family == ordered[i - 1].family)
      throw Error(Errc::ConfigError,
                  "family " + to_string(ordered[i].family) +
                      " configured twice");

  struct PendingPair {
    std::size_t artifact = 0;
    EventNodeId event = kNoNode;
    std::string event_code;
    std::optional<std::int32_t> label;
  };
  std::vector<FamilyArtifacts> artifacts;
  std::vector<PendingPair> pending;

  for (const FamilySpec& spec : ordered) {
    FamilyArtifacts art;
    try {
      art = build_family_artifacts(ds, spec, params, seed);
    } catch (const Error& e) {
      if (e.code() == Errc::EmptyCohort || e.code() == Errc::NoControls) {
        log_warn("skipping family " + to_string(spec.family) + ": " +
                 e.what());
        continue;
      }
      throw;
    }
    std::size_t art_id = artifacts.size();

    std::map<std::string, std::int32_t> labels;
    for (const LabeledPair& pair : reference)
      if (pair.family == spec.family) labels.emplace(pair.event_code, pair.label);

    if (scope == PairScope::reference_only) {
      for (const auto& [code, label] : labels) {
        EventNodeId id = ds.tree.find(code);
        if (id == kNoNode)
          throw Error(Errc::UnknownCode,
                      "reference event '" + code + "' not in the code tree");
        if (!art.rme.contains(id)) {
          log_warn("dropping pair " + to_string(spec.family) + "/" + code +
                   ": not a risk medical event of the family");
          continue;
        }
        pending.push_back({art_id, id, code, label});
      }
    } else {
      for (EventNodeId id : art.rme.event_codes) {
        const std::string& code = ds.tree.nodes[id].code;
        auto it = labels.find(code);
        std::optional<std::int32_t> label;
        if (it != labels.end()) label = it->second;
        pending.push_back({art_id, id, code, label});
      }
    }
    artifacts.push_back(std::move(art));
  }
  if (pending.empty())
    throw Error(Errc::EmptyDataset, "no (family, event) pairs to score");
  // Canonical row order: family ascending, then event code ascending.
  std::sort(pending.begin(), pending.end(),
            [](const PendingPair& a, const PendingPair& b) {
              if (a.artifact != b.artifact) return a.artifact < b.artifact;
              return a.event_code < b.event_code;
            });

  std::vector<FeatureRow> rows(pending.size());
  parallel_for(pending.size(), workers, [&](std::size_t i) {
    const PendingPair& p = pending[i];
    const FamilyArtifacts& art = artifacts[p.artifact];
    FeatureRow row;
    row.family = art.cohort.family;
    row.event_code = p.event_code;
    row.x = feature_vector(ds, art, p.event);
    row.label = p.label;
    row.n_target = art.cohort.entries.size();
    row.n_matched = art.matched.entries.size();
    row.n_comparator = art.comparator.entries.size();
    rows[i] = std::move(row);
  });
  return rows;
}

inline void write_features_csv(const std::vector<FeatureRow>& rows,
                               const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << "family_prefix,event_code,x1,x2,x3,x4,x5,x6,x7,x8,x9,label,"
         "n_target,n_matched,n_comparator\n";
  for (const FeatureRow& row : rows) {
    std::vector<std::string> fields;
    fields.push_back(to_string(row.family));
    fields.push_back(row.event_code);
    for (double v : row.x) fields.push_back(format_double(v));
    fields.push_back(row.label ? std::to_string(*row.label) : "");
    fields.push_back(std::to_string(row.n_target));
    fields.push_back(std::to_string(row.n_matched));
    fields.push_back(std::to_string(row.n_comparator));
    out << join_csv(fields) << "\n";
  }
}

inline std::vector<FeatureRow> read_features_csv(const std::string& path) {
  CsvTable table = read_csv_file(path, 15);
  std::vector<FeatureRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    std::string context = path + " line " + std::to_string(i + 2);
    FeatureRow row;
    row.family = parse_bnf(r[0]);
    row.event_code = r[1];
    for (std::size_t k = 0; k < 9; ++k)
      row.x[k] = parse_double_field(r[2 + k], context);
    if (!r[11].empty()) {
      if (r[11] != "0" && r[11] != "1")
        throw Error(Errc::MalformedRow, context + ": label must be 0 or 1");
      row.label = r[11] == "1" ? 1 : 0;
    }
    row.n_target = static_cast<std::size_t>(
        detail::parse_int_field(r[12], context));
    row.n_matched = static_cast<std::size_t>(
        detail::parse_int_field(r[13], context));
    row.n_comparator = static_cast<std::size_t>(
        detail::parse_int_field(r[14], context));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(Errc::EmptyDataset, path + ": no rows");
  return rows;
}

}  // namespace essd
