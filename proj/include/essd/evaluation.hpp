#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "essd/csv.hpp"
#include "essd/feature_matrix.hpp"
#include "essd/forest.hpp"
#include "essd/metrics.hpp"

namespace essd {

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {
      "ESSD", "SSD1", "SSD2", "SSD3", "SSD4", "SSD5", "SSD6"};
  return names;
}

struct MethodResult {
  ConfusionCounts counts;
  Rates rate;
  double auc = 0.0;
  double ap = 0.0;
};

struct EvaluationCell {
  std::string held_out_family;
  std::int32_t best_mtry = 0;
  double cv_auc = 0.0;  // mean CV AUC of the winning mtry
  std::map<std::string, MethodResult> methods;
};

struct EvaluationReport {
  std::vector<EvaluationCell> evaluations;
  std::map<std::string, MethodResult> pooled;
  std::map<std::string, std::vector<std::pair<double, double>>> pooled_roc;
};

struct EvalParams {
  std::vector<int> mtry_candidates = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::int32_t folds = 20;
  std::int32_t n_trees = 500;
  double essd_threshold = 0.5;
};

namespace detail {

struct ScoredSet {
  std::vector<double> scores;
  std::vector<std::int32_t> labels;
  std::vector<std::string> keys;  // event codes, AP tie-break
};

inline MethodResult score_method(const ScoredSet& s, double threshold,
                                 SignalRule rule) {
  MethodResult m;
  m.counts = confusion(s.scores, s.labels, threshold, rule);
  m.rate = rates(m.counts);
  m.auc = auc(s.scores, s.labels);
  m.ap = average_precision(s.scores, s.labels, s.keys);
  return m;
}

}  // namespace detail

// One evaluation per family: hold its pairs out, tune and train on the
// remaining families, then score the held-out pairs with the forest (ESSD)
// and with each raw feature xⁱ (SSDᵢ) at their natural thresholds
// (probability ≥ 0.5, excess risk > 0). Pooled results concatenate the
// held-out scores of all evaluations.
inline EvaluationReport leave_one_family_out(
    const std::vector<FeatureRow>& matrix, const EvalParams& params,
    std::uint64_t seed, unsigned workers = 1) {
  // Labeled rows grouped by family, canonical order throughout.
  std::vector<const FeatureRow*> rows;
  for (const FeatureRow& row : matrix)
    if (row.label) rows.push_back(&row);
  std::sort(rows.begin(), rows.end(),
            [](const FeatureRow* a, const FeatureRow* b) {
              if (a->family != b->family) return a->family < b->family;
              return a->event_code < b->event_code;
            });

  std::vector<DrugFamily> families;
  for (const FeatureRow* row : rows)
    if (families.empty() || !(families.back() == row->family))
      families.push_back(row->family);
  if (families.size() < 3)
    throw Error(Errc::TooFewRows,
                "leave-one-family-out needs at least 3 labelled families, "
                "got " +
                    std::to_string(families.size()));
  for (const DrugFamily& family : families) {
    bool pos = false, neg = false;
    for (const FeatureRow* row : rows)
      if (row->family == family) (*row->label == 1 ? pos : neg) = true;
    if (!pos || !neg)
      throw Error(Errc::SingleClassTraining,
                  "family " + to_string(family) +
                      " lacks one class in the reference");
  }

  EvaluationReport report;
  std::map<std::string, detail::ScoredSet> pooled;
  for (const DrugFamily& held_out : families) {
    std::vector<TrainingRow> train_rows;
    std::vector<const FeatureRow*> test_rows;
    for (const FeatureRow* row : rows) {
      if (row->family == held_out) {
        test_rows.push_back(row);
      } else {
        TrainingRow tr;
        tr.x = row->x;
        tr.label = *row->label;
        train_rows.push_back(tr);
      }
    }
    std::uint64_t eval_seed =
        derive_seed(seed, "eval", fnv1a64(to_string(held_out)));
    TuneResult tuned = tune_mtry(train_rows, params.mtry_candidates,
                                 params.folds, params.n_trees, eval_seed,
                                 workers);

    EvaluationCell cell;
    cell.held_out_family = to_string(held_out);
    cell.best_mtry = tuned.best_mtry;
    for (const auto& [mtry, mean] : tuned.mean_auc)
      if (mtry == tuned.best_mtry) cell.cv_auc = mean;

    for (const std::string& method : method_names()) {
      detail::ScoredSet set;
      for (const FeatureRow* row : test_rows) {
        double score;
        if (method == "ESSD")
          score = predict_proba(tuned.forest, row->x);
        else
          score = row->x[static_cast<std::size_t>(method[3] - '1')];
        set.scores.push_back(score);
        set.labels.push_back(*row->label);
        set.keys.push_back(row->event_code);
      }
      bool is_essd = method == "ESSD";
      cell.methods[method] = detail::score_method(
          set, is_essd ? params.essd_threshold : 0.0,
          is_essd ? SignalRule::greater_equal : SignalRule::greater);
      detail::ScoredSet& pool = pooled[method];
      pool.scores.insert(pool.scores.end(), set.scores.begin(),
                         set.scores.end());
      pool.labels.insert(pool.labels.end(), set.labels.begin(),
                         set.labels.end());
      pool.keys.insert(pool.keys.end(), set.keys.begin(), set.keys.end());
    }
    report.evaluations.push_back(std::move(cell));
  }

  for (const std::string& method : method_names()) {
    bool is_essd = method == "ESSD";
    const detail::ScoredSet& pool = pooled[method];
    report.pooled[method] = detail::score_method(
        pool, is_essd ? params.essd_threshold : 0.0,
        is_essd ? SignalRule::greater_equal : SignalRule::greater);
    report.pooled_roc[method] = roc_points(pool.scores, pool.labels);
  }
  return report;
}

namespace detail {

inline nlohmann::ordered_json method_json(const MethodResult& m) {
  nlohmann::ordered_json j;
  j["tp"] = m.counts.tp;
  j["fp"] = m.counts.fp;
  j["fn"] = m.counts.fn;
  j["tn"] = m.counts.tn;
  auto put = [&](const char* name, const std::optional<double>& v) {
    if (v)
      j[name] = *v;
    else
      j[name] = nullptr;
  };
  put("sensitivity", m.rate.sensitivity);
  put("specificity", m.rate.specificity);
  put("fpr", m.rate.fpr);
  j["auc"] = m.auc;
  j["ap"] = m.ap;
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["evaluations"] = nlohmann::ordered_json::object();
  for (const EvaluationCell& cell : report.evaluations) {
    nlohmann::ordered_json e;
    e["model"] = {{"best_mtry", cell.best_mtry}, {"cv_auc", cell.cv_auc}};
    e["methods"] = nlohmann::ordered_json::object();
    for (const std::string& method : method_names())
      e["methods"][method] = detail::method_json(cell.methods.at(method));
    j["evaluations"][cell.held_out_family] = std::move(e);
  }
  j["pooled"] = nlohmann::ordered_json::object();
  for (const std::string& method : method_names()) {
    auto m = detail::method_json(report.pooled.at(method));
    nlohmann::ordered_json roc = nlohmann::ordered_json::array();
    for (const auto& [fpr, sens] : report.pooled_roc.at(method))
      roc.push_back({fpr, sens});
    m["roc"] = std::move(roc);
    j["pooled"][method] = std::move(m);
  }
  return j;
}

inline void write_report_json(const EvaluationReport& report,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << report_to_json(report).dump(2) << "\n";
}

inline void write_report_csv(const EvaluationReport& report,
                             const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << "evaluation,method,tp,fp,fn,tn,sensitivity,specificity,fpr,auc,"
         "ap\n";
  auto line = [&](const std::string& evaluation, const std::string& method,
                  const MethodResult& m) {
    auto opt = [](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string();
    };
    out << join_csv({evaluation, method, std::to_string(m.counts.tp),
                     std::to_string(m.counts.fp), std::to_string(m.counts.fn),
                     std::to_string(m.counts.tn), opt(m.rate.sensitivity),
                     opt(m.rate.specificity), opt(m.rate.fpr),
                     format_double(m.auc), format_double(m.ap)})
        << "\n";
  };
  for (const EvaluationCell& cell : report.evaluations)
    for (const std::string& method : method_names())
      line(cell.held_out_family, method, cell.methods.at(method));
  for (const std::string& method : method_names())
    line("pooled", method, report.pooled.at(method));
}

}  // namespace essd
