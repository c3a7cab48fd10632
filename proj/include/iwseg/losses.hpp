#pragma once

// Segmentation losses with analytic gradients w.r.t. the probability map.
// Pointwise losses (BCE, Focal, WCE and their iw forms) are reduced by mean or
// sum; the Dice family (Dice, ASL, GDL and iw forms) are global ratios.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iwseg/components.hpp"
#include "iwseg/volume.hpp"
#include "iwseg/weighting.hpp"

namespace iwseg {

enum class LossKind { bce, iw_bce, focal, iw_focal, wce, dice, iw_dice, asl, iw_asl, gdl };

inline constexpr LossKind kAllLossKinds[] = {LossKind::bce,  LossKind::iw_bce,  LossKind::focal, LossKind::iw_focal,
                                             LossKind::wce,  LossKind::dice,    LossKind::iw_dice, LossKind::asl,
                                             LossKind::iw_asl, LossKind::gdl};

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::bce: return "bce";
    case LossKind::iw_bce: return "iw_bce";
    case LossKind::focal: return "focal";
    case LossKind::iw_focal: return "iw_focal";
    case LossKind::wce: return "wce";
    case LossKind::dice: return "dice";
    case LossKind::iw_dice: return "iw_dice";
    case LossKind::asl: return "asl";
    case LossKind::iw_asl: return "iw_asl";
    case LossKind::gdl: return "gdl";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  for (LossKind k : kAllLossKinds) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown loss kind \"" + std::string(s) + "\"");
}

constexpr bool uses_weights(LossKind k) {
  return k == LossKind::iw_bce || k == LossKind::iw_focal || k == LossKind::iw_dice || k == LossKind::iw_asl;
}

constexpr bool is_pointwise(LossKind k) {
  return k == LossKind::bce || k == LossKind::iw_bce || k == LossKind::focal || k == LossKind::iw_focal ||
         k == LossKind::wce;
}

constexpr bool uses_focal_params(LossKind k) { return k == LossKind::focal || k == LossKind::iw_focal; }
constexpr bool uses_beta(LossKind k) { return k == LossKind::asl || k == LossKind::iw_asl; }

/// The loss without its inverse weighting (iw_dice -> dice); identity otherwise.
constexpr LossKind base_kind(LossKind k) {
  switch (k) {
    case LossKind::iw_bce: return LossKind::bce;
    case LossKind::iw_focal: return LossKind::focal;
    case LossKind::iw_dice: return LossKind::dice;
    case LossKind::iw_asl: return LossKind::asl;
    default: return k;
  }
}

enum class Reduction { mean, sum };

inline std::string_view to_string(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

inline Reduction parse_reduction(std::string_view s) {
  if (s == "mean") return Reduction::mean;
  if (s == "sum") return Reduction::sum;
  throw ValidationError("unknown reduction \"" + std::string(s) + "\"");
}

// Which sum the WCE positive-class weight (n - S) / S is built from.
enum class WceWeightSource { pred, gt };

inline std::string_view to_string(WceWeightSource s) { return s == WceWeightSource::pred ? "pred" : "gt"; }

inline WceWeightSource parse_wce_source(std::string_view s) {
  if (s == "pred") return WceWeightSource::pred;
  if (s == "gt") return WceWeightSource::gt;
  throw ValidationError("unknown WCE weight source \"" + std::string(s) + "\"");
}

struct LossSpec {
  LossKind kind = LossKind::bce;
  std::optional<double> gamma;  // focal
  std::optional<double> alpha;  // focal
  std::optional<double> beta;   // asl
  Reduction reduction = Reduction::mean;
  double prob_clamp_eps = 1e-7;
  double dice_eps = 1e-6;
  WceWeightSource wce_weight_source = WceWeightSource::pred;

  static LossSpec of(LossKind kind) {
    LossSpec s;
    s.kind = kind;
    return s;
  }
  static LossSpec focal(double gamma, double alpha, bool iw = false) {
    LossSpec s = of(iw ? LossKind::iw_focal : LossKind::focal);
    s.gamma = gamma;
    s.alpha = alpha;
    return s;
  }
  static LossSpec asl(double beta, bool iw = false) {
    LossSpec s = of(iw ? LossKind::iw_asl : LossKind::asl);
    s.beta = beta;
    return s;
  }
};

inline void validate(const LossSpec& s) {
  const std::string name(to_string(s.kind));
  auto check = [&](const std::optional<double>& v, const char* param, bool used) {
    if (used && !v) throw ValidationError("missing hyperparameter " + std::string(param) + " for " + name);
    if (!used && v) throw ValidationError("hyperparameter " + std::string(param) + " not used by " + name);
  };
  check(s.gamma, "gamma", uses_focal_params(s.kind));
  check(s.alpha, "alpha", uses_focal_params(s.kind));
  check(s.beta, "beta", uses_beta(s.kind));
  if (s.gamma) detail::require(std::isfinite(*s.gamma) && *s.gamma >= 0, "gamma must be >= 0");
  if (s.alpha) detail::require(*s.alpha > 0 && *s.alpha < 1, "alpha must lie in (0, 1)");
  if (s.beta) detail::require(std::isfinite(*s.beta) && *s.beta > 0, "beta must be > 0");
  detail::require(s.prob_clamp_eps > 0 && s.prob_clamp_eps < 0.5, "prob_clamp_eps must lie in (0, 0.5)");
  detail::require(std::isfinite(s.dice_eps) && s.dice_eps >= 0, "dice_eps must be >= 0");
}

struct LossResult {
  double value = 0.0;
  Grid<double> grad;  // d value / d p_i
};

namespace detail {

struct ClampedProb {
  double p;
  double slope;  // derivative of the clamp: 1 inside [eps, 1 - eps], 0 outside
};

inline ClampedProb clamp_prob(double p, double eps) {
  if (p < eps) return {eps, 0.0};
  if (p > 1.0 - eps) return {1.0 - eps, 0.0};
  return {p, 1.0};
}

struct Term {
  double value;
  double deriv;
};

inline Term bce_term(double p, double y, double eps) {
  const auto c = clamp_prob(p, eps);
  return {-(y * std::log(c.p) + (1 - y) * std::log(1 - c.p)), (-y / c.p + (1 - y) / (1 - c.p)) * c.slope};
}

inline Term focal_term(double p, double y, double gamma, double alpha, double eps) {
  const auto c = clamp_prob(p, eps);
  const double q = 1 - c.p;
  const double log_p = std::log(c.p);
  const double log_q = std::log(q);
  const double pos = alpha * std::pow(q, gamma) * log_p;
  const double neg = (1 - alpha) * std::pow(c.p, gamma) * log_q;
  const double dpos = alpha * ((gamma == 0 ? 0.0 : -gamma * std::pow(q, gamma - 1) * log_p) + std::pow(q, gamma) / c.p);
  const double dneg =
      (1 - alpha) * ((gamma == 0 ? 0.0 : gamma * std::pow(c.p, gamma - 1) * log_q) - std::pow(c.p, gamma) / q);
  return {-(y * pos + (1 - y) * neg), -(y * dpos + (1 - y) * dneg) * c.slope};
}

inline void check_probabilities(const Grid<double>& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) {
      throw ValidationError("probability at voxel " + std::to_string(i) + " is outside [0, 1]");
    }
  }
}

inline void check_inputs(const LossSpec& spec, const Grid<double>& p, const Mask& y, const Grid<double>* w) {
  validate(spec);
  require_same_shape(p.shape(), y.shape(), "prediction vs target");
  require_binary(y);
  check_probabilities(p);
  if (uses_weights(spec.kind)) {
    if (w == nullptr) throw ValidationError("missing weight map for " + std::string(to_string(spec.kind)));
    require_same_shape(p.shape(), w->shape(), "prediction vs weights");
    for (double v : w->data()) require(std::isfinite(v) && v >= 0, "weights must be finite and >= 0");
  } else if (w != nullptr) {
    throw ValidationError("weight map not allowed for " + std::string(to_string(spec.kind)));
  }
}

inline double wce_positive_weight(const LossSpec& spec, const Grid<double>& p, const Mask& y, double* sum_out) {
  double s = 0.0;
  if (spec.wce_weight_source == WceWeightSource::pred) {
    for (double v : p.data()) s += v;
  } else {
    for (auto v : y.data()) s += v;
  }
  if (!(s > 0)) throw ValidationError("degenerate WCE weight: sum of " + std::string(to_string(spec.wce_weight_source)) + " is 0");
  if (sum_out) *sum_out = s;
  return (static_cast<double>(p.size()) - s) / s;
}

// Unreduced per-voxel terms of a pointwise loss; `deriv` holds only the local
// derivative (WCE's dependence of its weight on all p is added by the caller).
inline std::vector<Term> pointwise_terms(const LossSpec& spec, const Grid<double>& p, const Mask& y,
                                         const Grid<double>* w, double wce_weight) {
  std::vector<Term> terms(p.size());
  const double eps = spec.prob_clamp_eps;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double yi = y[i];
    Term t{};
    switch (spec.kind) {
      case LossKind::bce:
      case LossKind::iw_bce: t = bce_term(p[i], yi, eps); break;
      case LossKind::focal:
      case LossKind::iw_focal: t = focal_term(p[i], yi, *spec.gamma, *spec.alpha, eps); break;
      case LossKind::wce: {
        const auto c = clamp_prob(p[i], eps);
        t = {-wce_weight * yi * std::log(c.p) - (1 - yi) * std::log(1 - c.p),
             (-wce_weight * yi / c.p + (1 - yi) / (1 - c.p)) * c.slope};
        break;
      }
      default: throw InvariantError("pointwise_terms called for a ratio loss");
    }
    if (w != nullptr) {
      t.value *= (*w)[i];
      t.deriv *= (*w)[i];
    }
    terms[i] = t;
  }
  return terms;
}

inline LossResult evaluate_pointwise(const LossSpec& spec, const Grid<double>& p, const Mask& y,
                                     const Grid<double>* w) {
  double sum_p = 0.0;
  const double wce_weight = spec.kind == LossKind::wce ? wce_positive_weight(spec, p, y, &sum_p) : 0.0;
  const auto terms = pointwise_terms(spec, p, y, w, wce_weight);

  const double n = static_cast<double>(p.size());
  const double scale = spec.reduction == Reduction::mean ? 1.0 / n : 1.0;
  double total = 0.0;
  for (const auto& t : terms) total += t.value;

  double shared = 0.0;
  if (spec.kind == LossKind::wce && spec.wce_weight_source == WceWeightSource::pred) {
    // d/dp_j of w = (n - S) / S is -n / S^2 for every voxel j.
    double positive_nll = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (y[i] != 0) positive_nll -= std::log(clamp_prob(p[i], spec.prob_clamp_eps).p);
    }
    shared = -n / (sum_p * sum_p) * positive_nll;
  }

  LossResult r{total * scale, Grid<double>(p.shape(), p.spacing(), 0.0)};
  for (std::size_t i = 0; i < p.size(); ++i) r.grad[i] = (terms[i].deriv + shared) * scale;
  return r;
}

inline LossResult evaluate_ratio(const LossSpec& spec, const Grid<double>& p, const Mask& y, const Grid<double>* w) {
  const double e = spec.dice_eps;
  LossResult r{0.0, Grid<double>(p.shape(), p.spacing(), 0.0)};
  auto weight = [&](std::size_t i) { return w != nullptr ? (*w)[i] : 1.0; };

  switch (spec.kind) {
    case LossKind::dice:
    case LossKind::iw_dice: {
      double inter = 0.0, denom = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double wi = weight(i), yi = y[i];
        inter += wi * p[i] * yi;
        denom += wi * (p[i] * p[i] + yi * yi);
      }
      const double num = 2 * inter + e;
      const double den = denom + e;
      if (den == 0) return r;
      r.value = 1 - num / den;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double wi = weight(i);
        r.grad[i] = -(2 * wi * y[i] * den - num * 2 * wi * p[i]) / (den * den);
      }
      return r;
    }
    case LossKind::asl:
    case LossKind::iw_asl: {
      const double b2 = *spec.beta * *spec.beta;
      double inter = 0.0, denom = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double wi = weight(i), yi = y[i];
        inter += wi * p[i] * yi;
        denom += wi * (b2 * yi + p[i]);
      }
      const double num = (1 + b2) * inter + e;
      const double den = denom + e;
      if (den == 0) return r;
      r.value = 1 - num / den;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double wi = weight(i);
        r.grad[i] = -((1 + b2) * wi * y[i] * den - num * wi) / (den * den);
      }
      return r;
    }
    case LossKind::gdl: {
      // Two classes: lesion (p, y) and background (1 - p, 1 - y), w_c = 1 / (sum y_c + eps).
      double fg_count = 0.0;
      for (auto v : y.data()) fg_count += v;
      const double bg_count = static_cast<double>(y.size()) - fg_count;
      const double w_fg = 1.0 / (fg_count + e);
      const double w_bg = 1.0 / (bg_count + e);
      const double a = w_fg * w_fg;
      const double b = w_bg * w_bg;
      double i_fg = 0.0, i_bg = 0.0, u_fg = 0.0, u_bg = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i], yi = y[i];
        i_fg += pi * yi;
        i_bg += (1 - pi) * (1 - yi);
        u_fg += pi * pi + yi * yi;
        u_bg += (1 - pi) * (1 - pi) + (1 - yi) * (1 - yi);
      }
      const double num = 2 * (a * i_fg + b * i_bg) + e;
      const double den = a * u_fg + b * u_bg + e;
      if (den == 0) return r;
      r.value = 1 - num / den;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double dnum = 2 * (a * y[i] - b * (1 - y[i]));
        const double dden = 2 * a * p[i] - 2 * b * (1 - p[i]);
        r.grad[i] = -(dnum * den - num * dden) / (den * den);
      }
      return r;
    }
    default: throw InvariantError("evaluate_ratio called for a pointwise loss");
  }
}

inline LossResult evaluate_loss_impl(const LossSpec& spec, const Grid<double>& p, const Mask& y,
                                     const Grid<double>* w) {
  check_inputs(spec, p, y, w);
  LossResult r = is_pointwise(spec.kind) ? evaluate_pointwise(spec, p, y, w) : evaluate_ratio(spec, p, y, w);
  ensure(std::isfinite(r.value), "loss value is not finite");
  return r;
}

}  // namespace detail

inline LossResult evaluate_loss(const LossSpec& spec, const Grid<double>& p, const Mask& y) {
  return detail::evaluate_loss_impl(spec, p, y, nullptr);
}

inline LossResult evaluate_loss(const LossSpec& spec, const Grid<double>& p, const Mask& y, const Grid<double>& weights) {
  return detail::evaluate_loss_impl(spec, p, y, &weights);
}

inline LossResult evaluate_loss(const LossSpec& spec, const Grid<double>& p, const Mask& y, const WeightMap& weights) {
  return detail::evaluate_loss_impl(spec, p, y, &weights.weights);
}

/// Unreduced loss mass of a pointwise loss summed inside each component
/// L_0..L_K of `components`. With iw weights and a constant prediction every
/// entry is the same.
inline std::vector<double> component_contributions(const LossSpec& spec, const Grid<double>& p, const Mask& y,
                                                   const ComponentSet& components,
                                                   const WeightMap* weights = nullptr) {
  const Grid<double>* w = weights != nullptr ? &weights->weights : nullptr;
  detail::check_inputs(spec, p, y, w);
  detail::require(is_pointwise(spec.kind), "component contributions need a pointwise loss, got " +
                                               std::string(to_string(spec.kind)));
  require_same_shape(p.shape(), components.labels.shape(), "prediction vs components");
  const double wce_weight = spec.kind == LossKind::wce ? detail::wce_positive_weight(spec, p, y, nullptr) : 0.0;
  const auto terms = detail::pointwise_terms(spec, p, y, w, wce_weight);
  std::vector<double> out(components.sizes.size(), 0.0);
  for (std::size_t i = 0; i < terms.size(); ++i) out[static_cast<std::size_t>(components.labels[i])] += terms[i].value;
  return out;
}

}  // namespace iwseg
