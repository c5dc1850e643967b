#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "essd/dataset.hpp"
#include "essd/log.hpp"
#include "essd/rng.hpp"

namespace essd {

struct CohortEntry {
  PatientRef patient = -1;
  Date index_date;
};

// Target population of a drug family: one index prescription per patient.
struct CohortIndex {
  DrugFamily family;
  std::vector<CohortEntry> entries;
  std::int32_t washout_days = 90;
};

struct RiskEventSet {
  DrugFamily family;
  std::vector<EventNodeId> event_codes;  // sorted
  std::int32_t min_patients = 3;
  std::int32_t window_days = 30;

  bool contains(EventNodeId id) const {
    return std::binary_search(event_codes.begin(), event_codes.end(), id);
  }
};

enum class SubstituteKind : std::uint8_t { matched_nonuser, comparator_drug };

struct SubstituteEntry {
  PatientRef patient = -1;
  Date window_start;
};

struct SubstituteCohort {
  SubstituteKind kind = SubstituteKind::matched_nonuser;
  std::vector<SubstituteEntry> entries;
  std::uint64_t source_seed = 0;   // matched_nonuser only
  DrugFamily comparator_family;    // comparator_drug only
};

// Index prescriptions: for each patient, the earliest family prescription
// with no same-family prescription in the preceding washout_days, kept only
// when registration extends far enough on both sides of the index date.
inline CohortIndex build_cohort(const Dataset& ds, const DrugFamily& family,
                                std::int32_t washout_days = 90,
                                std::int32_t min_pre_observation_days = 30,
                                std::int32_t min_post_observation_days = 30) {
  CohortIndex cohort;
  cohort.family = family;
  cohort.washout_days = washout_days;
  for (PatientRef p = 0; p < static_cast<PatientRef>(ds.patients.size());
       ++p) {
    std::vector<Date> dates = ds.family_prescription_dates(p, family);
    if (dates.empty()) continue;
    std::sort(dates.begin(), dates.end());
    const Date* index = nullptr;
    for (std::size_t i = 0; i < dates.size(); ++i) {
      bool clean = true;
      for (std::size_t j = 0; j < i; ++j) {
        std::int32_t gap = dates[i] - dates[j];
        if (gap >= 1 && gap <= washout_days) {
          clean = false;
          break;
        }
      }
      if (clean) {
        index = &dates[i];
        break;
      }
    }
    if (!index) continue;
    const Patient& patient = ds.patients[p];
    if (*index - patient.reg_start < min_pre_observation_days) continue;
    if (patient.reg_end - *index < min_post_observation_days) continue;
    cohort.entries.push_back({p, *index});
  }
  if (cohort.entries.empty())
    throw Error(Errc::EmptyCohort,
                "no qualifying patients for family " + to_string(family));
  return cohort;
}

// Event codes recorded for at least min_patients distinct cohort patients
// within days [1, window_days] after their index dates.
inline RiskEventSet risk_medical_events(const Dataset& ds,
                                        const CohortIndex& cohort,
                                        std::int32_t window_days = 30,
                                        std::int32_t min_patients = 3) {
  if (cohort.entries.empty())
    throw Error(Errc::EmptyCohort, "risk_medical_events on empty cohort");
  std::map<EventNodeId, std::int32_t> counts;
  for (const CohortEntry& entry : cohort.entries) {
    auto codes = ds.events_in_window(entry.patient, entry.index_date + 1,
                                     entry.index_date + window_days);
    for (EventNodeId id : codes) ++counts[id];
  }
  RiskEventSet rme;
  rme.family = cohort.family;
  rme.min_patients = min_patients;
  rme.window_days = window_days;
  for (const auto& [id, n] : counts)
    if (n >= min_patients) rme.event_codes.push_back(id);
  return rme;
}

// 1:1 match of never-users on gender and year of birth. The tolerance
// ladder tries exact year first, then widens one year at a time; targets
// with no available candidate are dropped. Controls are drawn without
// replacement and each gets a uniformly sampled 30-day observation window.
inline SubstituteCohort match_nonuser_cohort(
    const Dataset& ds, const CohortIndex& cohort, std::uint64_t seed,
    std::int32_t year_tolerance_max = 5,
    std::int32_t window_length_days = 30) {
  SubstituteCohort sub;
  sub.kind = SubstituteKind::matched_nonuser;
  sub.source_seed = seed;

  // Candidate pool: never prescribed the family, registered long enough to
  // hold one full window. Bucketed by (gender, year of birth).
  std::map<std::pair<char, std::int32_t>, std::vector<PatientRef>> pool;
  for (PatientRef p = 0; p < static_cast<PatientRef>(ds.patients.size());
       ++p) {
    if (!ds.family_prescription_dates(p, cohort.family).empty()) continue;
    const Patient& patient = ds.patients[p];
    if (patient.reg_end - patient.reg_start < window_length_days) continue;
    pool[{gender_char(patient.gender), patient.year_of_birth}].push_back(p);
  }

  Rng rng(seed);
  std::size_t unmatched = 0;
  for (const CohortEntry& target : cohort.entries) {
    const Patient& t = ds.patients[target.patient];
    std::vector<PatientRef>* chosen_bucket = nullptr;
    std::size_t chosen_pos = 0;
    for (std::int32_t tol = 0; tol <= year_tolerance_max; ++tol) {
      std::size_t total = 0;
      for (std::int32_t y = t.year_of_birth - tol; y <= t.year_of_birth + tol;
           ++y) {
        auto it = pool.find({gender_char(t.gender), y});
        if (it != pool.end()) total += it->second.size();
      }
      if (total == 0) continue;
      std::size_t k = rng.below(total);
      for (std::int32_t y = t.year_of_birth - tol; y <= t.year_of_birth + tol;
           ++y) {
        auto it = pool.find({gender_char(t.gender), y});
        if (it == pool.end()) continue;
        if (k < it->second.size()) {
          chosen_bucket = &it->second;
          chosen_pos = k;
          break;
        }
        k -= it->second.size();
      }
      break;
    }
    if (!chosen_bucket) {
      ++unmatched;
      continue;
    }
    PatientRef control = (*chosen_bucket)[chosen_pos];
    chosen_bucket->erase(chosen_bucket->begin() +
                         static_cast<std::ptrdiff_t>(chosen_pos));
    const Patient& c = ds.patients[control];
    std::int64_t span =
        (c.reg_end - c.reg_start) - window_length_days + 1;
    Date window_start = c.reg_start + static_cast<std::int32_t>(
                                          rng.below(static_cast<std::uint64_t>(span)));
    sub.entries.push_back({control, window_start});
  }
  if (unmatched)
    log_warn("family " + to_string(cohort.family) + ": " +
             std::to_string(unmatched) + " of " +
             std::to_string(cohort.entries.size()) +
             " targets had no matching never-user");
  if (sub.entries.empty())
    throw Error(Errc::NoControls,
                "no matched never-users for family " + to_string(cohort.family));
  return sub;
}

// New users of the comparator family under the same index rules as the
// target cohort. Patients indexed on both families the same day carry the
// shared indication signal on both sides and are excluded.
inline SubstituteCohort comparator_cohort(
    const Dataset& ds, const DrugFamily& comparator_family,
    const CohortIndex& target_cohort, std::int32_t washout_days = 90,
    std::int32_t min_pre_observation_days = 30,
    std::int32_t min_post_observation_days = 30) {
  if (comparator_family == target_cohort.family)
    throw Error(Errc::ConfigError,
                "comparator family equals target family " +
                    to_string(comparator_family));
  CohortIndex raw =
      build_cohort(ds, comparator_family, washout_days,
                   min_pre_observation_days, min_post_observation_days);
  std::map<PatientRef, Date> target_index;
  for (const CohortEntry& e : target_cohort.entries)
    target_index.emplace(e.patient, e.index_date);
  SubstituteCohort sub;
  sub.kind = SubstituteKind::comparator_drug;
  sub.comparator_family = comparator_family;
  for (const CohortEntry& e : raw.entries) {
    auto it = target_index.find(e.patient);
    if (it != target_index.end() && it->second == e.index_date) continue;
    sub.entries.push_back({e.patient, e.index_date});
  }
  if (sub.entries.empty())
    throw Error(Errc::EmptyCohort,
                "comparator family " + to_string(comparator_family) +
                    " has no usable new users");
  return sub;
}

}  // namespace essd
