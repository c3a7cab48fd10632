#pragma once

// Cohort report: bootstrapped average recall, object Dice and the same
// metrics per lesion-size group.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iwseg/bootstrap.hpp"
#include "iwseg/detection.hpp"

namespace iwseg {

enum class SizeMode { tertiles, clinical };
enum class SizeGroup { small, medium, large };

inline std::string_view to_string(SizeGroup g) {
  switch (g) {
    case SizeGroup::small: return "small";
    case SizeGroup::medium: return "medium";
    case SizeGroup::large: return "large";
  }
  return "?";
}

inline std::string_view to_string(SizeMode m) { return m == SizeMode::tertiles ? "tertiles" : "clinical"; }

inline SizeMode parse_size_mode(std::string_view s) {
  if (s == "tertiles") return SizeMode::tertiles;
  if (s == "clinical") return SizeMode::clinical;
  throw ValidationError("unknown size mode \"" + std::string(s) + "\"");
}

/// Tertiles: the ceil(n/3) smallest are small, up to rank ceil(2n/3) medium,
/// the rest large; ties keep input order. Clinical: small iff strictly under
/// `threshold_mm`, otherwise large.
inline std::vector<SizeGroup> split_size_groups(std::span<const double> diameters, SizeMode mode = SizeMode::tertiles,
                                                double threshold_mm = 10.0) {
  detail::require(!diameters.empty(), "size grouping needs at least one lesion");
  std::vector<SizeGroup> out(diameters.size(), SizeGroup::large);
  if (mode == SizeMode::clinical) {
    for (std::size_t i = 0; i < diameters.size(); ++i) {
      out[i] = diameters[i] < threshold_mm ? SizeGroup::small : SizeGroup::large;
    }
    return out;
  }
  std::vector<std::size_t> order(diameters.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return diameters[a] < diameters[b]; });
  const std::size_t n = diameters.size();
  const std::size_t first = (n + 2) / 3;
  const std::size_t second = (2 * n + 2) / 3;
  for (std::size_t rank = 0; rank < n; ++rank) {
    out[order[rank]] = rank < first ? SizeGroup::small : (rank < second ? SizeGroup::medium : SizeGroup::large);
  }
  return out;
}

struct EvalConfig {
  DetectionConfig detection;
  std::vector<double> fp_targets = default_fp_targets();
  BootstrapConfig bootstrap;
  SizeMode size_mode = SizeMode::tertiles;
  double size_threshold_mm = 10.0;
  bool dice_per_patient = false;  // mean of per-patient means instead of pooling lesions
};

struct DiceSummary {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

struct GroupReport {
  SizeGroup group = SizeGroup::small;
  std::size_t n_lesions = 0;
  BootstrapSummary avg_recall;
  std::optional<AverageRecall> recall;  // on the full cohort; absent for an empty group
  DiceSummary object_dice;
};

struct EvalReport {
  BootstrapSummary avg_recall;
  AverageRecall recall;  // full cohort
  DiceSummary object_dice;
  std::vector<GroupReport> size_groups;
  std::size_t n_patients = 0;
  std::size_t n_lesions = 0;
  FrocBuild froc;
};

namespace detail {

inline DiceSummary summarize(const std::vector<double>& v) {
  DiceSummary s;
  s.n = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(v.size()));
  return s;
}

inline DiceSummary dice_summary(std::span<const PatientDetections> patients, const LesionSelection* selection,
                                bool per_patient) {
  std::vector<double> pooled;
  std::vector<double> patient_means;
  for (std::size_t pi = 0; pi < patients.size(); ++pi) {
    std::vector<double> mine;
    for (std::size_t l = 0; l < patients[pi].lesion_count(); ++l) {
      if (selection != nullptr && (*selection)[pi][l] == 0) continue;
      if (const auto& d = patients[pi].lesion_dice[l]) mine.push_back(*d);
    }
    pooled.insert(pooled.end(), mine.begin(), mine.end());
    if (!mine.empty()) patient_means.push_back(summarize(mine).mean);
  }
  if (!per_patient) return summarize(pooled);
  DiceSummary s = summarize(patient_means);
  s.n = pooled.size();
  return s;
}

}  // namespace detail

inline EvalReport evaluate(std::vector<PatientDetections> patients, const EvalConfig& config) {
  detail::require(!patients.empty(), "evaluation needs at least one patient");
  validate_thresholds(config.detection.thresholds);
  std::sort(patients.begin(), patients.end(),
            [](const PatientDetections& a, const PatientDetections& b) { return a.patient_id < b.patient_id; });
  for (std::size_t i = 1; i < patients.size(); ++i) {
    detail::require(patients[i].patient_id != patients[i - 1].patient_id, "duplicate patient_id " + patients[i].patient_id);
  }

  EvalReport r;
  r.n_patients = patients.size();
  for (const auto& p : patients) r.n_lesions += p.lesion_count();
  detail::require(r.n_lesions > 0, "recall undefined: no ground-truth lesions in any case");

  const auto& thresholds = config.detection.thresholds;
  r.froc = froc_curve(patients, thresholds);
  r.recall = average_recall(r.froc.curve, config.fp_targets);

  auto recall_metric = [&](const LesionSelection* selection) -> BootstrapMetric {
    return [&, selection](std::span<const std::size_t> subset) -> std::optional<double> {
      auto b = try_froc_curve(patients, thresholds, subset, selection);
      if (!b) return std::nullopt;
      return average_recall(b->curve, config.fp_targets).average;
    };
  };
  r.avg_recall = bootstrap_summary(patients.size(), recall_metric(nullptr), config.bootstrap);
  r.object_dice = detail::dice_summary(patients, nullptr, config.dice_per_patient);

  std::vector<double> diameters;
  for (const auto& p : patients) diameters.insert(diameters.end(), p.lesion_diameters.begin(), p.lesion_diameters.end());
  const auto groups = split_size_groups(diameters, config.size_mode, config.size_threshold_mm);

  const std::vector<SizeGroup> reported = config.size_mode == SizeMode::tertiles
                                              ? std::vector<SizeGroup>{SizeGroup::small, SizeGroup::medium, SizeGroup::large}
                                              : std::vector<SizeGroup>{SizeGroup::small, SizeGroup::large};
  for (SizeGroup g : reported) {
    LesionSelection sel(patients.size());
    GroupReport gr;
    gr.group = g;
    std::size_t flat = 0;
    for (std::size_t pi = 0; pi < patients.size(); ++pi) {
      for (std::size_t l = 0; l < patients[pi].lesion_count(); ++l) {
        const bool in = groups[flat++] == g;
        sel[pi].push_back(in ? 1 : 0);
        gr.n_lesions += in ? 1 : 0;
      }
    }
    if (gr.n_lesions > 0) {
      const auto b = froc_curve(patients, thresholds, {}, &sel);
      gr.recall = average_recall(b.curve, config.fp_targets);
      gr.avg_recall = bootstrap_summary(patients.size(), recall_metric(&sel), config.bootstrap);
    }
    gr.object_dice = detail::dice_summary(patients, &sel, config.dice_per_patient);
    r.size_groups.push_back(std::move(gr));
  }

  std::size_t grouped = 0;
  for (const auto& g : r.size_groups) grouped += g.n_lesions;
  detail::ensure(grouped == r.n_lesions, "size groups do not cover every lesion");
  return r;
}

// ---- serialization ---------------------------------------------------------

inline std::string format_fp_key(double fp) {
  std::ostringstream os;
  os << fp;
  return os.str();
}

namespace detail {

inline nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline nlohmann::ordered_json recall_json(const AverageRecall& r) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [fp, rec] : r.recall_at_fp) j[format_fp_key(fp)] = rec;
  return j;
}

inline nlohmann::ordered_json bootstrap_json(const BootstrapSummary& s) {
  return {{"mean", number_or_null(s.mean)}, {"std", number_or_null(s.std)}, {"n_iter_used", s.n_used}};
}

inline nlohmann::ordered_json dice_json(const DiceSummary& s) {
  return {{"mean", number_or_null(s.mean)}, {"std", number_or_null(s.std)}, {"n", s.n}};
}

}  // namespace detail

inline nlohmann::ordered_json config_json(const EvalConfig& c) {
  nlohmann::ordered_json j;
  j["thresholds"] = c.detection.thresholds;
  j["fp_targets"] = c.fp_targets;
  j["connectivity"] = static_cast<int>(c.detection.connectivity);
  j["criterion"] = to_string(c.detection.criterion);
  if (c.detection.criterion.kind == MatchCriterion::Kind::iou) j["iou_threshold"] = c.detection.criterion.iou_threshold;
  j["dice_threshold"] = c.detection.dice_threshold;
  j["dice_per_patient"] = c.dice_per_patient;
  j["bootstrap"] = {{"n_iter", c.bootstrap.n_iter},
                    {"frac", c.bootstrap.frac},
                    {"seed", c.bootstrap.seed},
                    {"with_replacement", c.bootstrap.with_replacement}};
  j["size_mode"] = to_string(c.size_mode);
  if (c.size_mode == SizeMode::clinical) j["threshold_mm"] = c.size_threshold_mm;
  return j;
}

inline nlohmann::ordered_json to_json(const EvalReport& r, const EvalConfig& c) {
  nlohmann::ordered_json j;
  j["avg_recall"] = detail::bootstrap_json(r.avg_recall);
  j["recall_at_fp"] = detail::recall_json(r.recall);
  j["object_dice"] = detail::dice_json(r.object_dice);
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  for (const auto& g : r.size_groups) {
    nlohmann::ordered_json gj;
    gj["n_lesions"] = g.n_lesions;
    gj["avg_recall"] = detail::bootstrap_json(g.avg_recall);
    gj["recall_at_fp"] = g.recall ? detail::recall_json(*g.recall) : nlohmann::ordered_json(nullptr);
    gj["object_dice"] = detail::dice_json(g.object_dice);
    groups[std::string(to_string(g.group))] = gj;
  }
  j["size_groups"] = groups;
  j["n_patients"] = r.n_patients;
  j["n_lesions"] = r.n_lesions;
  j["config"] = config_json(c);
  return j;
}

/// Raw per-threshold rows (on_envelope = 0) followed by the envelope points (on_envelope = 1).
inline std::string froc_csv(const FrocBuild& b) {
  std::string out = "threshold,avg_fp_per_image,recall,on_envelope\n";
  char line[128];
  auto row = [&](const FrocPoint& p, int flag) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%d\n", p.threshold, p.avg_fp_per_image, p.recall, flag);
    out += line;
  };
  for (const auto& p : b.raw) row(p, 0);
  for (const auto& p : b.curve.points) row(p, 1);
  return out;
}

}  // namespace iwseg
