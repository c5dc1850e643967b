#pragma once

#include <cstdint>
#include <vector>

#include "essd/cohort.hpp"
#include "essd/dataset.hpp"

namespace essd {

inline Date anchor_of(const CohortEntry& e) { return e.index_date; }
inline Date anchor_of(const SubstituteEntry& e) { return e.window_start; }

// Occurrence proportion: share of entries with ≥1 matching record in
// [anchor + offset_days, anchor + offset_days + length_days − 1].
// depth_map = 0 compares recorded codes exactly.
template <typename Entry>
double risk(const Dataset& ds, const std::vector<Entry>& population,
            EventNodeId event, std::int32_t offset_days,
            std::int32_t length_days, std::int32_t depth_map = 0) {
  if (population.empty())
    throw Error(Errc::EmptyPopulation, "risk over empty population");
  std::size_t hits = 0;
  for (const Entry& entry : population) {
    Date anchor = anchor_of(entry);
    Date start = anchor + offset_days;
    Date end = start + (length_days - 1);
    if (ds.has_event_in_window(entry.patient, event, start, end, depth_map))
      ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(population.size());
}

// x¹: month after the index prescription vs the month before it.
inline double ssd1(const Dataset& ds, const CohortIndex& cohort,
                   EventNodeId event, std::int32_t depth_map = 0) {
  return risk(ds, cohort.entries, event, 1, 30, depth_map) -
         risk(ds, cohort.entries, event, -30, 30, depth_map);
}

// x²: month after vs the mean monthly risk across the following year
// (12 slices, days [1+30s, 30+30s]). A patient contributes to the slices
// their registration fully covers; slices nobody covers are skipped.
inline double ssd2(const Dataset& ds, const CohortIndex& cohort,
                   EventNodeId event) {
  double after = risk(ds, cohort.entries, event, 1, 30);
  double total = 0.0;
  std::int32_t covered_slices = 0;
  std::vector<CohortEntry> slice_population;
  for (std::int32_t s = 1; s <= 12; ++s) {
    slice_population.clear();
    for (const CohortEntry& entry : cohort.entries) {
      const Patient& p = ds.patients[entry.patient];
      if (p.reg_end - entry.index_date >= 30 + 30 * s)
        slice_population.push_back(entry);
    }
    if (slice_population.empty()) continue;
    total += risk(ds, slice_population, event, 1 + 30 * s, 30);
    ++covered_slices;
  }
  if (covered_slices == 0)
    throw Error(Errc::InsufficientFollowUp,
                "no patient covers a full follow-up slice for family " +
                    to_string(cohort.family));
  return after - total / covered_slices;
}

// x³: month after for the target vs a sampled month for matched never-users.
inline double ssd3(const Dataset& ds, const CohortIndex& cohort,
                   const SubstituteCohort& matched, EventNodeId event) {
  return risk(ds, cohort.entries, event, 1, 30) -
         risk(ds, matched.entries, event, 0, 30);
}

// x⁴: month after for the target vs month after for comparator new users.
inline double ssd4(const Dataset& ds, const CohortIndex& cohort,
                   const SubstituteCohort& comparator, EventNodeId event) {
  return risk(ds, cohort.entries, event, 1, 30) -
         risk(ds, comparator.entries, event, 1, 30);
}

// x⁵/x⁶: x¹ with every code (recorded and queried) coarsened to the
// given tree depth before matching.
inline double ssd5(const Dataset& ds, const CohortIndex& cohort,
                   EventNodeId event) {
  return ssd1(ds, cohort, event, 3);
}

inline double ssd6(const Dataset& ds, const CohortIndex& cohort,
                   EventNodeId event) {
  return ssd1(ds, cohort, event, 4);
}

struct RatioFeatures {
  double x7 = 0.0;
  double x8 = 0.0;
  double x9 = 0.0;
};

// Deviation ratios. Each guard falls back to x¹ when its denominator has
// zero magnitude.
inline RatioFeatures derive_ratios(double x1, double x2, double x4,
                                   double x5) {
  RatioFeatures r;
  r.x7 = (x2 != 0.0) ? x1 / x2 : x1;
  r.x8 = (x4 != 0.0) ? x1 / x4 : x1;
  r.x9 = (x5 != 0.0) ? x1 / x5 : x1;
  return r;
}

}  // namespace essd
