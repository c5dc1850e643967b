#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "essd/bnf.hpp"
#include "essd/csv.hpp"
#include "essd/date.hpp"
#include "essd/error.hpp"
#include "essd/event_tree.hpp"

namespace essd {

enum class Gender : std::uint8_t { male, female };

inline char gender_char(Gender g) { return g == Gender::male ? 'M' : 'F'; }

struct Patient {
  std::string patient_id;
  std::int32_t year_of_birth = 0;
  Gender gender = Gender::male;
  Date reg_start;
  Date reg_end;
};

// Index into Dataset::patients.
using PatientRef = std::int32_t;

struct EventRecord {
  Date date;
  EventNodeId code = kNoNode;
};

struct Prescription {
  Date date;
  std::string drug_id;
  BnfCode bnf;
};

struct Provenance {
  std::string patient_path;
  std::string event_path;
  std::string prescription_path;
  std::string tree_path;
  std::string load_timestamp;
  std::size_t n_patients = 0;
  std::size_t n_events = 0;
  std::size_t n_prescriptions = 0;
};

// Immutable longitudinal record store. Patients are sorted by patient_id;
// per-patient events and prescriptions are sorted by date. All queries are
// read-only and safe to run concurrently.
class Dataset {
 public:
  std::vector<Patient> patients;
  std::vector<std::vector<EventRecord>> events;        // parallel to patients
  std::vector<std::vector<Prescription>> prescriptions;  // parallel
  EventCodeTree tree;
  Provenance provenance;

  PatientRef find_patient(const std::string& patient_id) const {
    auto it = patient_index_.find(patient_id);
    return it == patient_index_.end() ? -1 : it->second;
  }

  PatientRef require_patient(const std::string& patient_id) const {
    PatientRef p = find_patient(patient_id);
    if (p < 0) throw Error(Errc::UnknownPatient, "patient '" + patient_id + "'");
    return p;
  }

  // Records of `patient` dated within [start, end] inclusive.
  std::pair<const EventRecord*, const EventRecord*> records_in_window(
      PatientRef patient, Date start, Date end) const {
    const auto& recs = events[patient];
    auto lo = std::lower_bound(
        recs.begin(), recs.end(), start,
        [](const EventRecord& r, Date d) { return r.date < d; });
    auto hi = std::upper_bound(
        recs.begin(), recs.end(), end,
        [](Date d, const EventRecord& r) { return d < r.date; });
    return {recs.data() + (lo - recs.begin()), recs.data() + (hi - recs.begin())};
  }

  // True when the patient has ≥1 record in [start, end] whose code matches
  // `code`. With depth_map > 0 both sides are mapped to that depth first.
  bool has_event_in_window(PatientRef patient, EventNodeId code, Date start,
                           Date end, std::int32_t depth_map = 0) const {
    EventNodeId want =
        depth_map > 0 ? tree.ancestor_at_depth(code, depth_map) : code;
    auto [lo, hi] = records_in_window(patient, start, end);
    for (const EventRecord* r = lo; r != hi; ++r) {
      EventNodeId got =
          depth_map > 0 ? tree.ancestor_at_depth(r->code, depth_map) : r->code;
      if (got == want) return true;
    }
    return false;
  }

  // Distinct (optionally depth-mapped) codes recorded in [start, end].
  std::vector<EventNodeId> events_in_window(PatientRef patient, Date start,
                                            Date end,
                                            std::int32_t depth_map = 0) const {
    auto [lo, hi] = records_in_window(patient, start, end);
    std::vector<EventNodeId> out;
    for (const EventRecord* r = lo; r != hi; ++r) {
      EventNodeId id =
          depth_map > 0 ? tree.ancestor_at_depth(r->code, depth_map) : r->code;
      out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Dates of the patient's prescriptions whose bnf code extends `family`.
  std::vector<Date> family_prescription_dates(PatientRef patient,
                                              const DrugFamily& family) const {
    std::vector<Date> out;
    for (const Prescription& rx : prescriptions[patient])
      if (rx.bnf.has_prefix(family)) out.push_back(rx.date);
    return out;
  }

  void rebuild_index() {
    patient_index_.clear();
    patient_index_.reserve(patients.size());
    for (PatientRef i = 0; i < static_cast<PatientRef>(patients.size()); ++i) {
      auto [it, inserted] = patient_index_.emplace(patients[i].patient_id, i);
      if (!inserted)
        throw Error(Errc::IntegrityError,
                    "duplicate patient_id '" + patients[i].patient_id + "'");
    }
  }

 private:
  std::unordered_map<std::string, PatientRef> patient_index_;
};

namespace detail {

inline std::int32_t parse_int_field(const std::string& s,
                                    const std::string& context) {
  std::int32_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(Errc::MalformedRow, context + ": bad integer '" + s + "'");
  return v;
}

inline Date parse_date_field(const std::string& s,
                             const std::string& context) {
  auto d = parse_date(s);
  if (!d) throw Error(Errc::MalformedRow, context + ": bad date '" + s + "'");
  return *d;
}

}  // namespace detail

// Loads and validates the four-file dataset. Any malformed or dangling row
// aborts the load; silently dropping rows would corrupt risk denominators.
inline Dataset load_dataset(const std::string& patient_path,
                            const std::string& event_path,
                            const std::string& prescription_path,
                            const std::string& tree_path) {
  Dataset ds;
  ds.tree = read_event_tree_csv(tree_path);

  CsvTable pt = read_csv_file(patient_path, 5);
  if (pt.rows.empty())
    throw Error(Errc::EmptyDataset, patient_path + ": no patients");
  ds.patients.reserve(pt.rows.size());
  for (std::size_t i = 0; i < pt.rows.size(); ++i) {
    const auto& row = pt.rows[i];
    std::string context = patient_path + " line " + std::to_string(i + 2);
    Patient p;
    p.patient_id = row[0];
    if (p.patient_id.empty())
      throw Error(Errc::MalformedRow, context + ": empty patient_id");
    p.year_of_birth = detail::parse_int_field(row[1], context);
    if (row[2] == "M")
      p.gender = Gender::male;
    else if (row[2] == "F")
      p.gender = Gender::female;
    else
      throw Error(Errc::MalformedRow, context + ": bad gender '" + row[2] + "'");
    p.reg_start = detail::parse_date_field(row[3], context);
    p.reg_end = detail::parse_date_field(row[4], context);
    if (p.reg_start > p.reg_end)
      throw Error(Errc::IntegrityError,
                  context + ": reg_start after reg_end");
    if (p.year_of_birth > year_of(p.reg_end))
      throw Error(Errc::IntegrityError,
                  context + ": year_of_birth after registration end");
    ds.patients.push_back(std::move(p));
  }
  std::sort(ds.patients.begin(), ds.patients.end(),
            [](const Patient& a, const Patient& b) {
              return a.patient_id < b.patient_id;
            });
  ds.events.resize(ds.patients.size());
  ds.prescriptions.resize(ds.patients.size());
  ds.rebuild_index();

  CsvTable ev = read_csv_file(event_path, 3);
  for (std::size_t i = 0; i < ev.rows.size(); ++i) {
    const auto& row = ev.rows[i];
    std::string context = event_path + " line " + std::to_string(i + 2);
    PatientRef p = ds.find_patient(row[0]);
    if (p < 0)
      throw Error(Errc::IntegrityError,
                  context + ": unknown patient_id '" + row[0] + "'");
    EventRecord rec;
    rec.date = detail::parse_date_field(row[1], context);
    EventNodeId code = ds.tree.find(row[2]);
    if (code == kNoNode)
      throw Error(Errc::IntegrityError,
                  context + ": unknown event_code '" + row[2] + "'");
    rec.code = code;
    const Patient& patient = ds.patients[p];
    if (rec.date < patient.reg_start || rec.date > patient.reg_end)
      throw Error(Errc::IntegrityError,
                  context + ": date outside registration");
    ds.events[p].push_back(rec);
  }

  CsvTable rx = read_csv_file(prescription_path, 4);
  for (std::size_t i = 0; i < rx.rows.size(); ++i) {
    const auto& row = rx.rows[i];
    std::string context =
        prescription_path + " line " + std::to_string(i + 2);
    PatientRef p = ds.find_patient(row[0]);
    if (p < 0)
      throw Error(Errc::IntegrityError,
                  context + ": unknown patient_id '" + row[0] + "'");
    Prescription pres;
    pres.date = detail::parse_date_field(row[1], context);
    pres.drug_id = row[2];
    auto bnf = try_parse_bnf(row[3]);
    if (!bnf)
      throw Error(Errc::MalformedRow,
                  context + ": bad bnf_code '" + row[3] + "'");
    pres.bnf = *bnf;
    const Patient& patient = ds.patients[p];
    if (pres.date < patient.reg_start || pres.date > patient.reg_end)
      throw Error(Errc::IntegrityError,
                  context + ": date outside registration");
    ds.prescriptions[p].push_back(std::move(pres));
  }

  for (auto& recs : ds.events)
    std::sort(recs.begin(), recs.end(),
              [](const EventRecord& a, const EventRecord& b) {
                return a.date < b.date ||
                       (a.date == b.date && a.code < b.code);
              });
  for (auto& list : ds.prescriptions)
    std::sort(list.begin(), list.end(),
              [](const Prescription& a, const Prescription& b) {
                return a.date < b.date ||
                       (a.date == b.date && a.drug_id < b.drug_id);
              });

  ds.provenance.patient_path = patient_path;
  ds.provenance.event_path = event_path;
  ds.provenance.prescription_path = prescription_path;
  ds.provenance.tree_path = tree_path;
  ds.provenance.n_patients = ds.patients.size();
  ds.provenance.n_events = ev.rows.size();
  ds.provenance.n_prescriptions = rx.rows.size();
  return ds;
}

}  // namespace essd
