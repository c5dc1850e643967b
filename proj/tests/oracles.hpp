#pragma once

// Brute-force reference implementations used only by tests. These are
// written against the raw fixture files and deliberately share no parsing,
// date handling, or traversal code with the library: dates go through
// std::chrono, hierarchies through a parent map, and every measure is a
// direct scan over all records.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

struct RawPatient {
  int year_of_birth = 0;
  char gender = '?';
  int reg_start = 0;  // days since 1970-01-01
  int reg_end = 0;
};

struct RawEvent {
  std::string patient;
  int day = 0;
  std::string code;
};

struct RawFixture {
  std::map<std::string, RawPatient> patients;
  std::vector<RawEvent> events;
  std::map<std::string, std::string> parent;  // code -> parent code
};

inline int parse_day(const std::string& iso) {
  int y = std::stoi(iso.substr(0, 4));
  unsigned m = static_cast<unsigned>(std::stoi(iso.substr(5, 2)));
  unsigned d = static_cast<unsigned>(std::stoi(iso.substr(8, 2)));
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                  std::chrono::day{d}};
  return static_cast<int>(
      std::chrono::sys_days(ymd).time_since_epoch().count());
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::vector<std::vector<std::string>> read_rows(
    const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      first = false;
      continue;
    }
    if (!line.empty()) rows.push_back(split_line(line));
  }
  return rows;
}

inline RawFixture load_raw(const std::string& dir) {
  RawFixture fx;
  for (const auto& row : read_rows(dir + "/patients.csv")) {
    RawPatient p;
    p.year_of_birth = std::stoi(row[1]);
    p.gender = row[2][0];
    p.reg_start = parse_day(row[3]);
    p.reg_end = parse_day(row[4]);
    fx.patients[row[0]] = p;
  }
  for (const auto& row : read_rows(dir + "/events.csv"))
    fx.events.push_back({row[0], parse_day(row[1]), row[2]});
  for (const auto& row : read_rows(dir + "/event_tree.csv"))
    fx.parent[row[0]] = row[1];
  return fx;
}

// Code coarsened to the given depth, via the root-to-code parent chain.
// Codes at or above that depth are unchanged. depth 0 disables mapping.
inline std::string map_code(const RawFixture& fx, const std::string& code,
                            int depth) {
  if (depth == 0) return code;
  std::vector<std::string> chain;
  std::string at = code;
  while (true) {
    chain.push_back(at);
    auto it = fx.parent.find(at);
    if (it == fx.parent.end() || it->second.empty()) break;
    at = it->second;
  }
  std::reverse(chain.begin(), chain.end());
  if (static_cast<int>(chain.size()) >= depth) return chain[depth - 1];
  return code;
}

struct Member {
  std::string patient;
  int anchor = 0;  // day number
};

// Share of members with at least one matching event in
// [anchor + offset, anchor + offset + length - 1], by full scan.
inline double risk(const RawFixture& fx, const std::vector<Member>& members,
                   const std::string& code, int offset, int length,
                   int depth = 0) {
  std::string want = map_code(fx, code, depth);
  std::size_t hits = 0;
  for (const Member& m : members) {
    int lo = m.anchor + offset;
    int hi = lo + (length - 1);
    bool hit = false;
    for (const RawEvent& e : fx.events)
      if (e.patient == m.patient && e.day >= lo && e.day <= hi &&
          map_code(fx, e.code, depth) == want) {
        hit = true;
        break;
      }
    if (hit) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(members.size());
}

// The nine features from first principles, given the three populations.
inline std::array<double, 9> features(const RawFixture& fx,
                                      const std::vector<Member>& target,
                                      const std::vector<Member>& matched,
                                      const std::vector<Member>& comparator,
                                      const std::string& code) {
  std::array<double, 9> x{};
  double after = risk(fx, target, code, 1, 30);
  x[0] = after - risk(fx, target, code, -30, 30);

  double total = 0.0;
  int covered = 0;
  for (int s = 1; s <= 12; ++s) {
    std::vector<Member> slice;
    for (const Member& m : target)
      if (fx.patients.at(m.patient).reg_end - m.anchor >= 30 + 30 * s)
        slice.push_back(m);
    if (slice.empty()) continue;
    total += risk(fx, slice, code, 1 + 30 * s, 30);
    ++covered;
  }
  x[1] = after - total / covered;

  x[2] = after - risk(fx, matched, code, 0, 30);
  x[3] = after - risk(fx, comparator, code, 1, 30);
  x[4] = risk(fx, target, code, 1, 30, 3) - risk(fx, target, code, -30, 30, 3);
  x[5] = risk(fx, target, code, 1, 30, 4) - risk(fx, target, code, -30, 30, 4);
  x[6] = (x[1] != 0.0) ? x[0] / x[1] : x[0];
  x[7] = (x[3] != 0.0) ? x[0] / x[3] : x[0];
  x[8] = (x[4] != 0.0) ? x[0] / x[4] : x[0];
  return x;
}

// Exact AUC by exhaustive pair counting. Doubled numerator stays integral,
// so the one division is the only rounding step.
inline double auc(const std::vector<double>& scores,
                  const std::vector<int>& labels) {
  std::uint64_t numer2 = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++pos;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      if (scores[i] > scores[j])
        numer2 += 2;
      else if (scores[i] == scores[j])
        numer2 += 1;
    }
  }
  for (int l : labels)
    if (l != 1) ++neg;
  return static_cast<double>(numer2) /
         (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// Non-interpolated average precision, ranking by score descending with
// input position as the tie breaker.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  double sum = 0.0;
  std::size_t seen_pos = 0, n_pos = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] == 1) {
      ++seen_pos;
      sum += static_cast<double>(seen_pos) / static_cast<double>(rank + 1);
    }
  }
  for (int l : labels)
    if (l == 1) ++n_pos;
  return sum / static_cast<double>(n_pos);
}

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

// Weighted Gini impurity of one side, in the library's canonical form;
// any reformulation would break bitwise comparison of split scores.
inline double gini_side(std::uint64_t pos, std::uint64_t n) {
  double p1 = static_cast<double>(pos) / static_cast<double>(n);
  double p0 = static_cast<double>(n - pos) / static_cast<double>(n);
  return static_cast<double>(n) * (1.0 - p1 * p1 - p0 * p0);
}

// Exhaustive best split over the given feature subset: every midpoint
// between consecutive distinct values, scanned feature-ascending then
// threshold-ascending, first strict improvement wins.
inline SplitChoice best_split(
    const std::vector<std::array<double, 9>>& xs,
    const std::vector<int>& labels, const std::vector<int>& features,
    std::size_t min_leaf = 1) {
  SplitChoice best;
  std::vector<int> sorted_features = features;
  std::sort(sorted_features.begin(), sorted_features.end());
  for (int f : sorted_features) {
    std::vector<double> values;
    for (const auto& x : xs) values.push_back(x[static_cast<std::size_t>(f)]);
    std::vector<double> distinct = values;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
      double t = (distinct[i] + distinct[i + 1]) / 2.0;
      if (t == distinct[i + 1]) continue;  // rounding collapsed the midpoint
      std::uint64_t n_left = 0, pos_left = 0, n_right = 0, pos_right = 0;
      for (std::size_t r = 0; r < xs.size(); ++r) {
        if (values[r] <= t) {
          ++n_left;
          pos_left += labels[r] == 1 ? 1u : 0u;
        } else {
          ++n_right;
          pos_right += labels[r] == 1 ? 1u : 0u;
        }
      }
      if (n_left < min_leaf || n_right < min_leaf) continue;
      double score = gini_side(pos_left, n_left) + gini_side(pos_right, n_right);
      if (!best.found || score < best.score) {
        best.found = true;
        best.feature = f;
        best.threshold = t;
        best.score = score;
      }
    }
  }
  return best;
}

}  // namespace oracle
