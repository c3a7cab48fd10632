#pragma once

// Object-level evaluation: lesion matching, object Dice, FROC curves and the
// average recall summary over fixed false-positive rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iwseg/components.hpp"
#include "iwseg/volume.hpp"

namespace iwseg {

/// When a ground-truth lesion counts as found by a predicted component.
struct MatchCriterion {
  enum class Kind { overlap, iou };
  Kind kind = Kind::overlap;
  double iou_threshold = 0.5;

  static MatchCriterion overlap() { return {}; }
  static MatchCriterion iou(double tau) {
    detail::require(tau > 0 && tau <= 1, "IoU threshold must lie in (0, 1]");
    return {Kind::iou, tau};
  }
};

inline std::string to_string(const MatchCriterion& c) {
  return c.kind == MatchCriterion::Kind::overlap ? "overlap" : "iou";
}

struct DetectionOutcome {
  std::vector<bool> found;                          // per GT lesion, index = label - 1
  std::vector<std::vector<std::int32_t>> matched;   // predicted labels validating each GT lesion
  std::vector<bool> pred_is_fp;                     // per predicted component, index = label - 1
  std::size_t tp = 0;
  std::size_t fn = 0;
  std::size_t fp = 0;
};

namespace detail {

struct PairOverlap {
  std::int32_t gt;
  std::int32_t pred;
  std::size_t voxels;
};

// Intersection sizes of every (GT lesion, predicted component) pair that touches.
inline std::vector<PairOverlap> pair_overlaps(const ComponentSet& gt, const ComponentSet& pred) {
  const std::uint64_t stride = pred.K + 1;
  std::vector<std::uint64_t> keys;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const auto g = gt.labels[i];
    const auto p = pred.labels[i];
    if (g > 0 && p > 0) keys.push_back(static_cast<std::uint64_t>(g) * stride + static_cast<std::uint64_t>(p));
  }
  std::sort(keys.begin(), keys.end());
  std::vector<PairOverlap> out;
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    out.push_back({static_cast<std::int32_t>(keys[i] / stride), static_cast<std::int32_t>(keys[i] % stride), j - i});
    i = j;
  }
  return out;
}

}  // namespace detail

/// Matches predicted components to GT lesions. A predicted component that
/// validates any lesion is never a false positive, even if it spans several.
inline DetectionOutcome match_lesions(const ComponentSet& gt, const ComponentSet& pred,
                                      const MatchCriterion& criterion = MatchCriterion::overlap()) {
  require_same_shape(gt.labels.shape(), pred.labels.shape(), "ground truth vs prediction");
  DetectionOutcome out;
  out.found.assign(gt.K, false);
  out.matched.assign(gt.K, {});
  out.pred_is_fp.assign(pred.K, true);

  for (const auto& o : detail::pair_overlaps(gt, pred)) {
    bool hit = true;
    if (criterion.kind == MatchCriterion::Kind::iou) {
      const double uni = static_cast<double>(gt.sizes[static_cast<std::size_t>(o.gt)] +
                                             pred.sizes[static_cast<std::size_t>(o.pred)] - o.voxels);
      hit = static_cast<double>(o.voxels) / uni >= criterion.iou_threshold;
    }
    if (!hit) continue;
    out.found[static_cast<std::size_t>(o.gt - 1)] = true;
    out.matched[static_cast<std::size_t>(o.gt - 1)].push_back(o.pred);
    out.pred_is_fp[static_cast<std::size_t>(o.pred - 1)] = false;
  }
  out.tp = static_cast<std::size_t>(std::count(out.found.begin(), out.found.end(), true));
  out.fn = gt.K - out.tp;
  out.fp = static_cast<std::size_t>(std::count(out.pred_is_fp.begin(), out.pred_is_fp.end(), true));
  return out;
}

/// Dice of each found lesion against the union of its matched components, in
/// GT label order. Missed lesions are left out.
inline std::vector<double> object_dice(const ComponentSet& gt, const ComponentSet& pred,
                                       const DetectionOutcome& outcome) {
  require_same_shape(gt.labels.shape(), pred.labels.shape(), "ground truth vs prediction");
  detail::require(outcome.found.size() == gt.K && outcome.matched.size() == gt.K && outcome.pred_is_fp.size() == pred.K,
                  "detection outcome does not belong to these component sets");
  std::vector<std::vector<std::int32_t>> matched = outcome.matched;
  std::vector<std::size_t> union_size(gt.K, 0);
  for (std::size_t g = 0; g < gt.K; ++g) {
    detail::require(outcome.found[g] == !matched[g].empty(), "detection outcome is inconsistent");
    std::sort(matched[g].begin(), matched[g].end());
    for (auto q : matched[g]) {
      detail::require(q >= 1 && static_cast<std::size_t>(q) <= pred.K, "detection outcome references unknown component");
      union_size[g] += pred.sizes[static_cast<std::size_t>(q)];
    }
  }
  std::vector<std::size_t> inter(gt.K, 0);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const auto g = gt.labels[i];
    const auto q = pred.labels[i];
    if (g <= 0 || q <= 0) continue;
    const auto& m = matched[static_cast<std::size_t>(g - 1)];
    if (std::binary_search(m.begin(), m.end(), q)) ++inter[static_cast<std::size_t>(g - 1)];
  }
  std::vector<double> out;
  for (std::size_t g = 0; g < gt.K; ++g) {
    if (!outcome.found[g]) continue;
    out.push_back(2.0 * static_cast<double>(inter[g]) / static_cast<double>(gt.sizes[g + 1] + union_size[g]));
  }
  return out;
}

inline Mask binarize(const Grid<double>& prob, double threshold) {
  std::vector<std::uint8_t> m(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) m[i] = prob[i] >= threshold ? 1 : 0;
  return Mask(prob.shape(), prob.spacing(), std::move(m));
}

/// Thresholds i / 50 for i = 1..49.
inline std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 49; ++i) t.push_back(i / 50.0);
  return t;
}

inline const std::vector<double>& default_fp_targets() {
  static const std::vector<double> targets{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  return targets;
}

struct FrocPoint {
  double avg_fp_per_image = 0.0;
  double recall = 0.0;
  double threshold = 0.0;  // probability threshold that produced the point
};

/// Envelope of raw FROC points: fp strictly increasing, recall non-decreasing.
struct FrocCurve {
  std::vector<FrocPoint> points;
};

struct DetectionConfig {
  std::vector<double> thresholds = default_thresholds();
  Connectivity connectivity = Connectivity::vertex;
  MatchCriterion criterion = MatchCriterion::overlap();
  double dice_threshold = 0.5;  // binarization used for object Dice
};

inline void validate_thresholds(std::span<const double> thresholds) {
  detail::require(!thresholds.empty(), "at least one threshold is required");
  for (double t : thresholds) detail::require(t > 0 && t < 1, "thresholds must lie in (0, 1)");
}

/// Everything the cohort-level metrics need from one patient.
struct PatientDetections {
  std::string patient_id;
  std::vector<double> lesion_diameters;                 // per GT lesion, label order
  std::vector<std::size_t> fp_per_threshold;            // predicted components matching nothing
  std::vector<std::vector<std::uint8_t>> found;         // [threshold][lesion]
  std::vector<std::optional<double>> lesion_dice;       // at the Dice threshold; empty when missed

  std::size_t lesion_count() const noexcept { return lesion_diameters.size(); }
};

inline PatientDetections analyze_patient(std::string patient_id, const Mask& gt, const Grid<double>& prob,
                                         const DetectionConfig& config, std::optional<Spacing> spacing = {}) {
  require_same_shape(gt.shape(), prob.shape(), "target vs prediction of " + patient_id);
  validate_thresholds(config.thresholds);
  detail::require(config.dice_threshold > 0 && config.dice_threshold < 1, "Dice threshold must lie in (0, 1)");
  const ComponentSet gt_cs = label_components(gt, config.connectivity);

  PatientDetections d;
  d.patient_id = std::move(patient_id);
  const Spacing sp = spacing.value_or(gt.spacing());
  for (std::size_t k = 1; k <= gt_cs.K; ++k) d.lesion_diameters.push_back(equivalent_diameter(gt_cs.sizes[k], sp));

  for (double t : config.thresholds) {
    const ComponentSet pred_cs = label_components(binarize(prob, t), config.connectivity);
    const DetectionOutcome o = match_lesions(gt_cs, pred_cs, config.criterion);
    d.fp_per_threshold.push_back(o.fp);
    d.found.emplace_back(o.found.begin(), o.found.end());
  }

  const ComponentSet pred_cs = label_components(binarize(prob, config.dice_threshold), config.connectivity);
  const DetectionOutcome o = match_lesions(gt_cs, pred_cs, config.criterion);
  const std::vector<double> dice = object_dice(gt_cs, pred_cs, o);
  d.lesion_dice.assign(gt_cs.K, std::nullopt);
  std::size_t next = 0;
  for (std::size_t g = 0; g < gt_cs.K; ++g) {
    if (o.found[g]) d.lesion_dice[g] = dice[next++];
  }
  return d;
}

/// Per patient, per lesion inclusion flags restricting recall to a lesion subset.
using LesionSelection = std::vector<std::vector<std::uint8_t>>;

struct FrocBuild {
  std::vector<FrocPoint> raw;  // one per threshold, in threshold order
  FrocCurve curve;
};

namespace detail {

inline void check_curve(const FrocCurve& c) {
  ensure(!c.points.empty(), "FROC curve is empty");
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    ensure(p.avg_fp_per_image >= 0 && p.recall >= 0 && p.recall <= 1, "FROC point out of range");
    if (i > 0) {
      ensure(p.avg_fp_per_image > c.points[i - 1].avg_fp_per_image, "FROC fp not strictly increasing");
      ensure(p.recall >= c.points[i - 1].recall, "FROC recall decreases");
    }
  }
}

}  // namespace detail

/// Sorts raw points by fp, keeps the best recall per fp and replaces recall
/// by its running maximum.
inline FrocCurve froc_envelope(std::span<const FrocPoint> raw) {
  std::vector<FrocPoint> pts(raw.begin(), raw.end());
  std::stable_sort(pts.begin(), pts.end(), [](const FrocPoint& a, const FrocPoint& b) {
    if (a.avg_fp_per_image != b.avg_fp_per_image) return a.avg_fp_per_image < b.avg_fp_per_image;
    return a.recall > b.recall;
  });
  FrocCurve c;
  for (const auto& p : pts) {
    if (!c.points.empty() && c.points.back().avg_fp_per_image == p.avg_fp_per_image) continue;
    FrocPoint q = p;
    if (!c.points.empty()) q.recall = std::max(q.recall, c.points.back().recall);
    c.points.push_back(q);
  }
  detail::check_curve(c);
  return c;
}

/// FROC over the patients in `subset` (all when empty); nullopt if the chosen
/// lesions are zero, where recall is undefined.
inline std::optional<FrocBuild> try_froc_curve(std::span<const PatientDetections> patients,
                                               std::span<const double> thresholds,
                                               std::span<const std::size_t> subset = {},
                                               const LesionSelection* selection = nullptr) {
  std::vector<std::size_t> all;
  if (subset.empty()) {
    all.resize(patients.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    subset = all;
  }
  auto included = [&](std::size_t patient, std::size_t lesion) {
    return selection == nullptr || (*selection)[patient][lesion] != 0;
  };

  std::size_t lesions = 0;
  for (std::size_t pi : subset) {
    for (std::size_t l = 0; l < patients[pi].lesion_count(); ++l) lesions += included(pi, l) ? 1 : 0;
  }
  if (lesions == 0) return std::nullopt;

  FrocBuild b;
  const double n_images = static_cast<double>(subset.size());
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    std::size_t fp = 0;
    std::size_t hits = 0;
    for (std::size_t pi : subset) {
      const auto& p = patients[pi];
      detail::require(p.found.size() == thresholds.size(), "patient " + p.patient_id + " was analyzed on another threshold grid");
      fp += p.fp_per_threshold[t];
      for (std::size_t l = 0; l < p.lesion_count(); ++l) hits += (included(pi, l) && p.found[t][l]) ? 1 : 0;
    }
    b.raw.push_back({static_cast<double>(fp) / n_images, static_cast<double>(hits) / static_cast<double>(lesions),
                     thresholds[t]});
  }
  b.curve = froc_envelope(b.raw);
  return b;
}

inline FrocBuild froc_curve(std::span<const PatientDetections> patients, std::span<const double> thresholds,
                            std::span<const std::size_t> subset = {}, const LesionSelection* selection = nullptr) {
  detail::require(!patients.empty(), "FROC needs at least one case");
  auto b = try_froc_curve(patients, thresholds, subset, selection);
  if (!b) throw ValidationError("recall undefined: no ground-truth lesions in any case");
  return std::move(*b);
}

struct Case {
  std::string patient_id;
  Mask gt;
  Grid<double> prob;
};

/// Binarizes each probability map at every threshold, labels, matches and
/// pools the counts into a FROC curve.
inline FrocBuild froc_curve(std::span<const Case> cases, const DetectionConfig& config) {
  detail::require(!cases.empty(), "FROC needs at least one case");
  std::vector<PatientDetections> patients;
  for (const auto& c : cases) patients.push_back(analyze_patient(c.patient_id, c.gt, c.prob, config));
  std::sort(patients.begin(), patients.end(),
            [](const PatientDetections& a, const PatientDetections& b) { return a.patient_id < b.patient_id; });
  return froc_curve(patients, config.thresholds);
}

struct AverageRecall {
  double average = 0.0;
  std::vector<std::pair<double, double>> recall_at_fp;  // (fp target, recall)
};

/// Linear interpolation of recall at an fp rate: from (0, 0) up to the first
/// stored point, constant past the last one.
inline double recall_at(const FrocCurve& curve, double fp) {
  const auto& pts = curve.points;
  detail::require(!pts.empty(), "FROC curve is empty");
  if (fp >= pts.back().avg_fp_per_image) return pts.back().recall;
  double f0 = 0.0, r0 = 0.0;
  for (const auto& p : pts) {
    if (fp < p.avg_fp_per_image) {
      return r0 + (p.recall - r0) * (fp - f0) / (p.avg_fp_per_image - f0);
    }
    f0 = p.avg_fp_per_image;
    r0 = p.recall;
  }
  return pts.back().recall;
}

inline AverageRecall average_recall(const FrocCurve& curve,
                                    std::span<const double> fp_targets = default_fp_targets()) {
  detail::require(!curve.points.empty(), "FROC curve is empty");
  detail::require(!fp_targets.empty(), "at least one fp target is required");
  AverageRecall r;
  double total = 0.0;
  for (double t : fp_targets) {
    const double rec = recall_at(curve, t);
    r.recall_at_fp.emplace_back(t, rec);
    total += rec;
  }
  r.average = total / static_cast<double>(fp_targets.size());
  return r;
}

}  // namespace iwseg
