#pragma once

#include <string>

#include "essd/generator.hpp"

namespace essd {

namespace detail {

inline std::string leaf(int root, int a, int b, int c, int d) {
  return "E" + std::to_string(root) + "." + std::to_string(a) + "." +
         std::to_string(b) + "." + std::to_string(c) + "." +
         std::to_string(d);
}

// Shared layout of the three-family benchmark. The subtrees have fixed
// roles so each simple design has a planted blind spot:
//   E1: indication code (E1.1.1.1.1, no background) and pure-background
//       decoy pairs;
//   E2: family-exclusive ADRs plus decoy siblings under the same parents,
//       which contaminate the depth-3/4 rollups of SSD₅/SSD₆;
//   E3: ADRs shared by all three families, invisible to the
//       comparator-controlled SSD₄;
//   E4: ADRs whose codes scatter across siblings (coding noise), hiding
//       part of the signal from the exact-code designs;
//   E5: indication confounders (fooling SSD₁–SSD₃ and the rollups) and
//       progressive events (fooling the before/after designs).
struct BenchmarkBuilder {
  GeneratorConfig cfg;

  void base(std::int32_t n_patients, std::int32_t span_years,
            double exposure) {
    cfg.n_patients = n_patients;
    cfg.span_years = span_years;
    cfg.tree.roots = 5;
    cfg.tree.branching = {3, 3, 3, 3};
    for (int k = 1; k <= 3; ++k) {
      FamilyGenConfig fam;
      fam.prefix = parse_bnf("05-01-01-0" + std::to_string(k));
      fam.exposure_prob = exposure;
      fam.indication_codes = {"E1.1.1.1.1"};
      cfg.families.push_back(fam);
    }
  }

  void effect(EffectKind kind, int family, const std::string& code,
              double rr, double bg, std::int32_t window = 30) {
    PlantedEffect e;
    e.kind = kind;
    e.family = cfg.families[static_cast<std::size_t>(family - 1)].prefix;
    e.event_code = code;
    e.relative_risk = rr;
    e.window_days = window;
    cfg.effects.push_back(e);
    auto [it, inserted] = cfg.background.emplace(code, bg);
    (void)it;
    (void)inserted;
  }

  void decoy(int family, const std::string& code, double bg) {
    DecoyPair d;
    d.family = cfg.families[static_cast<std::size_t>(family - 1)].prefix;
    d.event_code = code;
    cfg.decoys.push_back(d);
    cfg.background.emplace(code, bg);
  }
};

inline void add_exclusive_adrs(BenchmarkBuilder& b) {
  const double rr[8] = {6, 5, 5, 4, 4, 3, 3, 3};
  const double bg[8] = {0.02, 0.016, 0.012, 0.012,
                        0.008, 0.008, 0.006, 0.004};
  const int ab[8][2] = {{1, 1}, {1, 2}, {1, 3}, {2, 1},
                        {2, 2}, {2, 3}, {3, 1}, {3, 2}};
  for (int k = 1; k <= 3; ++k)
    for (int i = 0; i < 8; ++i)
      b.effect(EffectKind::adr, k, leaf(2, k, ab[i][0], ab[i][1], 1), rr[i],
               bg[i]);
}

inline void add_sibling_decoys(BenchmarkBuilder& b) {
  // Depth-5 siblings of the strongest exclusive ADRs: share the depth-4
  // parent, so the rollup designs inherit the ADR's excess.
  const int ab[4][2] = {{1, 1}, {1, 2}, {2, 1}, {3, 1}};
  for (int k = 1; k <= 3; ++k)
    for (int i = 0; i < 4; ++i)
      b.decoy(k, leaf(2, k, ab[i][0], ab[i][1], 2), 0.008);
}

inline void add_shared_adrs(BenchmarkBuilder& b) {
  const double rr[5] = {5, 4, 4, 3, 3};
  const double bg[5] = {0.012, 0.012, 0.008, 0.008, 0.006};
  const int ab[5][2] = {{1, 1}, {1, 2}, {2, 1}, {2, 2}, {3, 1}};
  for (int i = 0; i < 5; ++i)
    for (int k = 1; k <= 3; ++k)
      b.effect(EffectKind::adr, k, leaf(3, 1, ab[i][0], ab[i][1], 1), rr[i],
               bg[i]);
}

inline void add_coding_noise(BenchmarkBuilder& b) {
  const double rr[3] = {6, 5, 4};
  const double bg[3] = {0.016, 0.012, 0.008};
  for (int k = 1; k <= 3; ++k)
    for (int i = 0; i < 3; ++i)
      b.effect(EffectKind::coding_noise, k, leaf(4, k, i + 1, 1, 1), rr[i],
               bg[i]);
}

inline void add_indication_confounders(BenchmarkBuilder& b) {
  // The strongest confounders outrank every planted ADR on raw excess
  // risk, so before/after and matched-control designs flag them.
  const double rr[6] = {8, 8, 7, 6, 5, 4};
  const double bg[6] = {0.025, 0.02, 0.02, 0.016, 0.012, 0.01};
  const int ab[6][2] = {{1, 1}, {1, 2}, {1, 3}, {2, 1}, {2, 2}, {2, 3}};
  for (int k = 1; k <= 3; ++k)
    for (int i = 0; i < 6; ++i)
      b.effect(EffectKind::indication_confounder, k,
               leaf(5, k, ab[i][0], ab[i][1], 1), rr[i], bg[i]);
}

inline void add_progressive(BenchmarkBuilder& b) {
  const double rr[4] = {6, 6, 5, 4};
  const double bg[4] = {0.02, 0.012, 0.016, 0.01};
  const char* tail[4] = {"1.1", "2.1", "3.1", "1.2"};
  for (int k = 1; k <= 3; ++k)
    for (int i = 0; i < 4; ++i)
      b.effect(EffectKind::progressive, k,
               "E5." + std::to_string(k) + ".3." + tail[i], rr[i], bg[i]);
}

inline void add_pure_decoys(BenchmarkBuilder& b, bool extra) {
  // The same background-only codes serve as decoy pairs for every family.
  std::vector<std::pair<std::string, double>> codes;
  const double bg[12] = {0.02,  0.016, 0.012, 0.012, 0.01,  0.008,
                         0.008, 0.006, 0.006, 0.005, 0.004, 0.004};
  int i = 0;
  for (int a = 1; a <= 3; ++a)
    for (int c = 1; c <= 3; ++c) codes.emplace_back(leaf(1, 2, a, c, 1), bg[i++]);
  for (int a = 1; a <= 3; ++a) codes.emplace_back(leaf(1, 3, a, 1, 1), bg[i++]);
  if (extra) {
    const double extra_bg[6] = {0.006, 0.006, 0.005, 0.005, 0.004, 0.004};
    int j = 0;
    for (int a = 1; a <= 3; ++a)
      for (int c = 2; c <= 3; ++c)
        codes.emplace_back(leaf(1, 3, a, c, 1), extra_bg[j++]);
  }
  for (int k = 1; k <= 3; ++k)
    for (const auto& [code, rate] : codes) b.decoy(k, code, rate);
}

}  // namespace detail

// Checked-in benchmark configurations. "smoke" runs end-to-end in seconds;
// "standard" has only genuine ADRs and background decoys at full scale;
// "confounded" adds every confounding mechanism and is the acceptance
// benchmark.
inline GeneratorConfig benchmark_suite(const std::string& preset) {
  detail::BenchmarkBuilder b;
  if (preset == "smoke") {
    b.base(1500, 4, 0.25);
    const double rr[3] = {6, 5, 4};
    const double bg[3] = {0.03, 0.025, 0.02};
    for (int k = 1; k <= 3; ++k) {
      for (int i = 0; i < 3; ++i)
        b.effect(EffectKind::adr, k, detail::leaf(2, k, i + 1, 1, 1), rr[i],
                 bg[i]);
      b.effect(EffectKind::adr, k, detail::leaf(3, 1, 1, 1, 1), 5, 0.025);
      b.effect(EffectKind::indication_confounder, k,
               detail::leaf(5, k, 1, 1, 1), 7, 0.03);
      b.effect(EffectKind::progressive, k, detail::leaf(5, k, 3, 1, 1), 6,
               0.025);
      b.effect(EffectKind::coding_noise, k, detail::leaf(4, k, 1, 1, 1), 6,
               0.025);
      b.decoy(k, detail::leaf(2, k, 1, 1, 2), 0.02);
      for (int j = 0; j < 4; ++j)
        b.decoy(k, detail::leaf(1, 2, j / 2 + 1, j % 2 + 1, 1),
                0.025 - 0.003 * j);
    }
    return b.cfg;
  }
  if (preset == "standard") {
    b.base(20000, 6, 0.2);
    detail::add_exclusive_adrs(b);
    detail::add_shared_adrs(b);
    detail::add_sibling_decoys(b);
    detail::add_pure_decoys(b, true);
    return b.cfg;
  }
  if (preset == "confounded") {
    b.base(24000, 6, 0.2);
    detail::add_exclusive_adrs(b);
    detail::add_shared_adrs(b);
    detail::add_coding_noise(b);
    detail::add_indication_confounders(b);
    detail::add_progressive(b);
    detail::add_sibling_decoys(b);
    detail::add_pure_decoys(b, false);
    return b.cfg;
  }
  throw Error(Errc::UnknownPreset, "preset '" + preset + "'");
}

}  // namespace essd
