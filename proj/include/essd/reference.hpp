#pragma once

#include <string>
#include <vector>

#include "essd/bnf.hpp"
#include "essd/csv.hpp"

namespace essd {

// Ground-truth (drug family, event) pair: label 1 = known adverse
// reaction, 0 = known non-reaction.
struct LabeledPair {
  DrugFamily family;
  std::string event_code;
  std::int32_t label = 0;
};

// reference.csv: family_prefix,event_code,label
inline std::vector<LabeledPair> read_reference_csv(const std::string& path) {
  CsvTable table = read_csv_file(path, 3);
  std::vector<LabeledPair> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    std::string context = path + " line " + std::to_string(i + 2);
    LabeledPair pair;
    pair.family = parse_bnf(row[0]);
    pair.event_code = row[1];
    if (row[2] == "1")
      pair.label = 1;
    else if (row[2] == "0")
      pair.label = 0;
    else
      throw Error(Errc::MalformedRow, context + ": label must be 0 or 1");
    out.push_back(std::move(pair));
  }
  if (out.empty()) throw Error(Errc::EmptyDataset, path + ": no pairs");
  return out;
}

inline void write_reference_csv(const std::vector<LabeledPair>& pairs,
                                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << "family_prefix,event_code,label\n";
  for (const auto& pair : pairs)
    out << join_csv({to_string(pair.family), pair.event_code,
                     std::to_string(pair.label)})
        << "\n";
}

}  // namespace essd
