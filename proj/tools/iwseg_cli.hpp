#pragma once

// Command-line front end. Every subcommand prints JSON (or CSV) on `out` and
// one-line diagnostics on `err`. Exit codes: 0 success, 2 usage or validation
// failure, 3 internal invariant violation.

#include <glob.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "iwseg/iwseg.hpp"
#include "iwseg/parallel.hpp"

namespace iwseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInternal = 3;

using Json = nlohmann::ordered_json;

namespace detail {

inline Json shape_json(const Shape& s) { return Json::array({s.z, s.y, s.x}); }
inline Json spacing_json(const Spacing& s) { return Json::array({s.z, s.y, s.x}); }

inline Shape shape_from(const std::vector<int>& v, const char* flag) {
  iwseg::detail::require(v.size() == 3, std::string(flag) + " needs three values");
  for (int d : v) iwseg::detail::require(d >= 1, std::string(flag) + " components must be >= 1");
  return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2])};
}

inline Mask load_mask(const std::string& path) { return to_mask(load_vol(path)); }

// ---- weights ---------------------------------------------------------------

struct WeightsArgs {
  std::string mask;
  std::string out;
  int connectivity = 26;
  bool whole_image = false;
  std::vector<int> patch_origin;
  std::vector<int> patch_size;
};

inline int cmd_weights(const WeightsArgs& a, std::ostream& out) {
  const Mask mask = load_mask(a.mask);
  const Connectivity conn = parse_connectivity(a.connectivity);
  const bool patch = !a.patch_size.empty();
  iwseg::detail::require(patch || a.patch_origin.empty(), "--patch-origin needs --patch-size");

  WeightMap wm;
  ComponentSet cs;
  if (patch) {
    const Shape extent = shape_from(a.patch_size, "--patch-size");
    Offset origin{};
    if (!a.patch_origin.empty()) {
      iwseg::detail::require(a.patch_origin.size() == 3, "--patch-origin needs three values");
      origin = {a.patch_origin[0], a.patch_origin[1], a.patch_origin[2]};
    }
    const Mask cropped = crop(mask, origin, extent);
    wm = patch_weight_map(mask, origin, extent, conn, a.whole_image ? WeightScope::whole_image : WeightScope::patch);
    cs = label_components(a.whole_image ? mask : cropped, conn);
  } else {
    cs = label_components(mask, conn);
    wm = inverse_weight_map(cs);
  }

  double sum = 0.0;
  for (double w : wm.weights.data()) sum += w;
  if (!a.whole_image || !patch) {
    const double n = static_cast<double>(wm.weights.size());
    iwseg::detail::ensure(std::abs(sum - n) <= 1e-9 * n, "weights do not sum to the voxel count");
  }

  save_vol(wm.weights, a.out);

  Json j;
  j["mask"] = a.mask;
  j["out"] = vol_paths(a.out).header;
  j["connectivity"] = a.connectivity;
  j["scope"] = a.whole_image ? "whole_image" : "patch";
  j["shape"] = shape_json(wm.weights.shape());
  j["n_voxels"] = wm.weights.size();
  j["n_lesions"] = cs.K;
  Json sizes = Json::object();
  Json weights = Json::object();
  for (std::size_t k = 0; k < cs.sizes.size(); ++k) {
    sizes[std::to_string(k)] = cs.sizes[k];
    weights[std::to_string(k)] = wm.component_weights[k];
  }
  j["component_sizes"] = sizes;
  j["component_weights"] = weights;
  j["weight_sum"] = sum;

  std::string stem = vol_paths(a.out).header;
  stem.resize(stem.size() - std::string(".volhdr").size());
  iwseg::detail::write_text(stem + ".components.json", j.dump(2) + "\n");
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---- loss ------------------------------------------------------------------

struct LossArgs {
  std::string pred;
  std::string target;
  std::string loss;
  std::optional<double> gamma;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::string reduction = "mean";
  double eps = 1e-7;
  double dice_eps = 1e-6;
  std::string wce_source = "pred";
  int connectivity = 26;
  std::string grad_out;
};

inline int cmd_loss(const LossArgs& a, std::ostream& out) {
  LossSpec spec;
  spec.kind = parse_loss_kind(a.loss);
  spec.gamma = a.gamma;
  spec.alpha = a.alpha;
  spec.beta = a.beta;
  spec.reduction = parse_reduction(a.reduction);
  spec.prob_clamp_eps = a.eps;
  spec.dice_eps = a.dice_eps;
  spec.wce_weight_source = parse_wce_source(a.wce_source);
  validate(spec);

  const Grid<double> p = convert<double>(load_vol(a.pred));
  const Mask y = load_mask(a.target);
  require_same_shape(p.shape(), y.shape(), "--pred vs --target");

  const Connectivity conn = parse_connectivity(a.connectivity);
  const ComponentSet cs = label_components(y, conn);
  std::optional<WeightMap> wm;
  if (uses_weights(spec.kind)) wm = inverse_weight_map(cs);

  const LossResult r = wm ? evaluate_loss(spec, p, y, *wm) : evaluate_loss(spec, p, y);

  Json hp;
  if (spec.gamma) hp["gamma"] = *spec.gamma;
  if (spec.alpha) hp["alpha"] = *spec.alpha;
  if (spec.beta) hp["beta"] = *spec.beta;
  if (is_pointwise(spec.kind)) {
    hp["reduction"] = to_string(spec.reduction);
    hp["prob_clamp_eps"] = spec.prob_clamp_eps;
  } else {
    hp["dice_eps"] = spec.dice_eps;
  }
  if (spec.kind == LossKind::wce) hp["wce_weight_source"] = to_string(spec.wce_weight_source);
  if (wm) hp["connectivity"] = a.connectivity;

  Json j;
  j["kind"] = to_string(spec.kind);
  j["hyperparams"] = hp;
  j["value"] = r.value;
  j["n_voxels"] = p.size();
  if (is_pointwise(spec.kind)) {
    const auto contrib = component_contributions(spec, p, y, cs, wm ? &*wm : nullptr);
    Json c = Json::object();
    for (std::size_t k = 0; k < contrib.size(); ++k) c[std::to_string(k)] = contrib[k];
    j["component_contributions"] = c;
  }
  if (!a.grad_out.empty()) {
    save_vol(r.grad, a.grad_out);
    j["grad_path"] = vol_paths(a.grad_out).header;
  }
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct ManifestEntry {
  std::string patient_id;
  std::string pred;
  std::string target;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::optional<Spacing> spacing;
};

/// {"entries":[{"patient_id","pred","target"}...], "spacing_mm":[z,y,x]?}; relative
/// paths resolve against the manifest's directory.
inline Manifest load_manifest(const std::string& path) {
  const auto bytes = iwseg::detail::read_file(path);
  Json j;
  try {
    j = Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::exception& e) {
    throw ValidationError("garbled manifest " + path + ": " + e.what());
  }
  iwseg::detail::require(j.is_object() && j.contains("entries") && j["entries"].is_array(),
                         "manifest " + path + " needs an \"entries\" array");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp.string() : (base / fp).string();
  };
  Manifest m;
  std::set<std::string> ids;
  for (const auto& e : j["entries"]) {
    for (const char* key : {"patient_id", "pred", "target"}) {
      iwseg::detail::require(e.is_object() && e.contains(key) && e[key].is_string(),
                             std::string("manifest entry lacks string field \"") + key + "\"");
    }
    ManifestEntry me{e["patient_id"].get<std::string>(), resolve(e["pred"].get<std::string>()),
                     resolve(e["target"].get<std::string>())};
    iwseg::detail::require(ids.insert(me.patient_id).second, "duplicate patient_id " + me.patient_id);
    m.entries.push_back(std::move(me));
  }
  iwseg::detail::require(!m.entries.empty(), "manifest " + path + " has no entries");
  if (j.contains("spacing_mm")) m.spacing = iwseg::detail::parse_spacing(j["spacing_mm"]);
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.patient_id < b.patient_id; });
  return m;
}

struct EvalArgs {
  std::string manifest;
  std::string out;
  std::string froc_csv;
  std::vector<double> thresholds;
  std::string criterion = "overlap";
  double iou_threshold = 0.5;
  int connectivity = 26;
  double dice_threshold = 0.5;
  bool dice_per_patient = false;
  std::uint64_t bootstrap_seed = 0;
  std::size_t bootstrap_iters = 100;
  double bootstrap_frac = 0.8;
  bool with_replacement = false;
  std::string size_mode = "tertiles";
  double threshold_mm = 10.0;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  EvalConfig cfg;
  if (!a.thresholds.empty()) cfg.detection.thresholds = a.thresholds;
  validate_thresholds(cfg.detection.thresholds);
  cfg.detection.connectivity = parse_connectivity(a.connectivity);
  if (a.criterion == "overlap") cfg.detection.criterion = MatchCriterion::overlap();
  else if (a.criterion == "iou") cfg.detection.criterion = MatchCriterion::iou(a.iou_threshold);
  else throw ValidationError("unknown criterion \"" + a.criterion + "\"");
  cfg.detection.dice_threshold = a.dice_threshold;
  cfg.dice_per_patient = a.dice_per_patient;
  cfg.bootstrap = {a.bootstrap_iters, a.bootstrap_frac, a.bootstrap_seed, a.with_replacement};
  cfg.size_mode = parse_size_mode(a.size_mode);
  cfg.size_threshold_mm = a.threshold_mm;

  const Manifest m = load_manifest(a.manifest);
  std::vector<PatientDetections> patients(m.entries.size());
  parallel_for(m.entries.size(), worker_count(), [&](std::size_t i) {
    const auto& e = m.entries[i];
    const Mask gt = load_mask(e.target);
    const Grid<double> prob = convert<double>(load_vol(e.pred));
    patients[i] = analyze_patient(e.patient_id, gt, prob, cfg.detection, m.spacing);
  });

  const EvalReport report = evaluate(std::move(patients), cfg);
  const Json j = to_json(report, cfg);
  if (!a.out.empty()) iwseg::detail::write_text(a.out, j.dump(2) + "\n");
  if (!a.froc_csv.empty()) iwseg::detail::write_text(a.froc_csv, froc_csv(report.froc));
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---- convert ---------------------------------------------------------------

struct ConvertArgs {
  std::string nifti;
  std::string out;
  std::vector<double> clip;
  std::string mask;
  std::optional<double> fill;
  bool scale = false;
};

inline int cmd_convert(const ConvertArgs& a, std::ostream& out) {
  Volume v = load_nifti(a.nifti);
  const bool process = !a.clip.empty() || a.scale || !a.mask.empty();
  if (process) {
    PreprocessConfig cfg;
    cfg.clip_lo = -std::numeric_limits<double>::infinity();
    cfg.clip_hi = std::numeric_limits<double>::infinity();
    if (!a.clip.empty()) {
      iwseg::detail::require(a.clip.size() == 2, "--clip needs two values");
      cfg.clip_lo = a.clip[0];
      cfg.clip_hi = a.clip[1];
    }
    cfg.rescale = a.scale;
    std::optional<Mask> organ;
    if (!a.mask.empty()) {
      iwseg::detail::require(a.fill.has_value(), "--mask needs --fill");
      const std::string ext = std::filesystem::path(a.mask).extension().string();
      organ = to_mask(ext == ".nii" ? load_nifti(a.mask) : load_vol(a.mask));
      cfg.outside_fill = a.fill;
    }
    v = preprocess(v, cfg, organ ? &*organ : nullptr);
  }
  save_vol(v, a.out);

  const Grid<double> d = convert<double>(v);
  const auto [lo, hi] = std::minmax_element(d.data().begin(), d.data().end());
  Json j;
  j["out"] = vol_paths(a.out).header;
  j["shape"] = shape_json(shape_of(v));
  j["dtype"] = to_string(dtype_of(v));
  j["spacing_mm"] = spacing_json(spacing_of(v));
  j["min"] = *lo;
  j["max"] = *hi;
  out << j.dump(2) << "\n";
  return kExitOk;
}

// ---- sizes -----------------------------------------------------------------

struct SizesArgs {
  std::string masks;
  std::string mode = "tertiles";
  double threshold_mm = 10.0;
  int connectivity = 26;
};

inline std::vector<std::string> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::string> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  ::globfree(&g);
  std::sort(out.begin(), out.end());
  return out;
}

inline int cmd_sizes(const SizesArgs& a, std::ostream& out) {
  const SizeMode mode = parse_size_mode(a.mode);
  const Connectivity conn = parse_connectivity(a.connectivity);
  const auto files = expand_glob(a.masks);
  if (files.empty()) throw ValidationError("no masks match " + a.masks);

  struct Row {
    std::string mask;
    std::size_t lesion;
    std::size_t voxels;
    double volume;
    double diameter;
  };
  std::vector<Row> rows;
  for (const auto& f : files) {
    const ComponentSet cs = label_components(load_mask(f), conn);
    const Spacing& sp = cs.labels.spacing();
    for (std::size_t k = 1; k <= cs.K; ++k) {
      rows.push_back({f, k, cs.sizes[k], static_cast<double>(cs.sizes[k]) * sp.voxel_volume(),
                      equivalent_diameter(cs.sizes[k], sp)});
    }
  }
  std::vector<SizeGroup> groups;
  if (!rows.empty()) {
    std::vector<double> d;
    for (const auto& r : rows) d.push_back(r.diameter);
    groups = split_size_groups(d, mode, a.threshold_mm);
  }
  out << "mask,lesion,voxels,volume_mm3,diameter_mm,group\n";
  char buf[128];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%zu,%zu,%.17g,%.17g,", rows[i].lesion, rows[i].voxels, rows[i].volume,
                  rows[i].diameter);
    out << rows[i].mask << buf << to_string(groups[i]) << "\n";
  }
  return kExitOk;
}

// ---- sample ----------------------------------------------------------------

struct SampleArgs {
  std::string image;
  std::string mask;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  std::vector<int> size{128, 128, 128};
  double lesion_prob = 0.5;
  double pad_value = 0.0;
  std::string prefix;
};

inline int cmd_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
  PatchSpec spec;
  spec.size = shape_from(a.size, "--size");
  spec.lesion_prob = a.lesion_prob;
  spec.pad_value = a.pad_value;
  validate(spec);
  iwseg::detail::require(!a.prefix.empty(), "--prefix must not be empty");

  const Volume image = load_vol(a.image);
  const Mask mask = load_mask(a.mask);

  Json index;
  index["image"] = a.image;
  index["mask"] = a.mask;
  index["patch_size"] = shape_json(spec.size);
  index["lesion_prob"] = spec.lesion_prob;
  index["pad_value"] = spec.pad_value;
  index["seed"] = a.seed;
  Json samples = Json::array();
  for (std::size_t k = 0; k < a.n; ++k) {
    spec.seed = a.seed + k;
    PatchSampler sampler(spec);
    const std::string img_path = a.prefix + "_img_" + std::to_string(k);
    const std::string msk_path = a.prefix + "_msk_" + std::to_string(k);
    Json s;
    std::visit(
        [&](const auto& g) {
          const auto patch = sampler.sample(g, mask);
          if (patch.fell_back) err << "sample " << k << ": mask has no lesion voxels, drew uniformly\n";
          save_vol(patch.image, img_path);
          save_vol(patch.mask, msk_path);
          s["k"] = k;
          s["seed"] = spec.seed;
          s["origin"] = Json::array({patch.origin.z, patch.origin.y, patch.origin.x});
          s["lesion_biased"] = patch.lesion_biased;
          s["fell_back"] = patch.fell_back;
        },
        image);
    s["image"] = vol_paths(img_path).header;
    s["mask"] = vol_paths(msk_path).header;
    samples.push_back(s);
  }
  index["samples"] = samples;
  iwseg::detail::write_text(a.prefix + "_index.json", index.dump(2) + "\n");
  out << index.dump(2) << "\n";
  return kExitOk;
}

}  // namespace detail

/// Parses `args` (args[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Inverse-weighted segmentation losses and lesion-level evaluation", "iwseg"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  detail::WeightsArgs wa;
  auto* weights = app.add_subcommand("weights", "Write the inverse-weight map of a binary mask");
  weights->add_option("--mask", wa.mask, "Binary mask VOL")->required();
  weights->add_option("--out", wa.out, "Output weight VOL (f64)")->required();
  weights->add_option("--connectivity", wa.connectivity, "6, 18 or 26")->capture_default_str();
  weights->add_flag("--whole-image", wa.whole_image, "Weight on the full mask, then crop the patch");
  weights->add_option("--patch-origin", wa.patch_origin, "Patch origin z y x")->expected(3);
  weights->add_option("--patch-size", wa.patch_size, "Patch extent z y x")->expected(3);

  detail::LossArgs la;
  auto* loss = app.add_subcommand("loss", "Evaluate a loss and its gradient");
  loss->add_option("--pred", la.pred, "Probability map VOL")->required();
  loss->add_option("--target", la.target, "Binary target VOL")->required();
  loss->add_option("--loss", la.loss, "bce|iw_bce|focal|iw_focal|wce|dice|iw_dice|asl|iw_asl|gdl")->required();
  loss->add_option("--gamma", la.gamma, "Focal gamma");
  loss->add_option("--alpha", la.alpha, "Focal alpha");
  loss->add_option("--beta", la.beta, "ASL beta");
  loss->add_option("--reduction", la.reduction, "mean|sum")->capture_default_str();
  loss->add_option("--eps", la.eps, "Probability clamp before logarithms")->capture_default_str();
  loss->add_option("--dice-eps", la.dice_eps, "Dice-family smoothing")->capture_default_str();
  loss->add_option("--wce-source", la.wce_source, "pred|gt")->capture_default_str();
  loss->add_option("--connectivity", la.connectivity, "Connectivity for iw weights")->capture_default_str();
  loss->add_option("--grad-out", la.grad_out, "Write the gradient as f64 VOL");

  detail::EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "FROC, average recall and object Dice over a manifest");
  eval->add_option("--manifest", ea.manifest, "Manifest JSON")->required();
  eval->add_option("--out", ea.out, "Report JSON path");
  eval->add_option("--froc-csv", ea.froc_csv, "FROC CSV path");
  eval->add_option("--thresholds", ea.thresholds, "Probability thresholds in (0, 1)");
  eval->add_option("--criterion", ea.criterion, "overlap|iou")->capture_default_str();
  eval->add_option("--iou-threshold", ea.iou_threshold, "IoU needed under --criterion iou")->capture_default_str();
  eval->add_option("--connectivity", ea.connectivity, "6, 18 or 26")->capture_default_str();
  eval->add_option("--dice-threshold", ea.dice_threshold, "Binarization for object Dice")->capture_default_str();
  eval->add_flag("--dice-per-patient", ea.dice_per_patient, "Average object Dice per patient first");
  eval->add_option("--bootstrap-seed", ea.bootstrap_seed, "Bootstrap master seed")->capture_default_str();
  eval->add_option("--bootstrap-iters", ea.bootstrap_iters, "Bootstrap iterations")->capture_default_str();
  eval->add_option("--bootstrap-frac", ea.bootstrap_frac, "Fraction of patients per iteration")->capture_default_str();
  eval->add_flag("--with-replacement", ea.with_replacement, "Resample patients with replacement");
  eval->add_option("--size-mode", ea.size_mode, "tertiles|clinical")->capture_default_str();
  eval->add_option("--threshold-mm", ea.threshold_mm, "Small-lesion diameter bound for clinical mode")
      ->capture_default_str();

  detail::ConvertArgs ca;
  auto* conv = app.add_subcommand("convert", "NIfTI-1 to VOL with optional clipping and scaling");
  conv->add_option("--nifti", ca.nifti, "Input .nii")->required();
  conv->add_option("--out", ca.out, "Output VOL")->required();
  conv->add_option("--clip", ca.clip, "Clip range lo hi")->expected(2);
  conv->add_option("--mask", ca.mask, "Organ mask (.nii or VOL)");
  conv->add_option("--fill", ca.fill, "Value written outside the organ mask");
  conv->add_flag("--scale", ca.scale, "Min-max scale to [0, 1]");

  detail::SizesArgs sa;
  auto* sizes = app.add_subcommand("sizes", "Lesion sizes and size groups as CSV");
  sizes->add_option("--masks", sa.masks, "Glob of mask VOL headers")->required();
  sizes->add_option("--mode", sa.mode, "tertiles|clinical")->capture_default_str();
  sizes->add_option("--threshold-mm", sa.threshold_mm, "Small-lesion bound for clinical mode")->capture_default_str();
  sizes->add_option("--connectivity", sa.connectivity, "6, 18 or 26")->capture_default_str();

  detail::SampleArgs pa;
  auto* sample = app.add_subcommand("sample", "Draw lesion-biased training patches");
  sample->add_option("--image", pa.image, "Image VOL")->required();
  sample->add_option("--mask", pa.mask, "Mask VOL")->required();
  sample->add_option("--n", pa.n, "Number of patches")->capture_default_str();
  sample->add_option("--seed", pa.seed, "Seed of patch 0; patch k uses seed + k")->capture_default_str();
  sample->add_option("--size", pa.size, "Patch size z y x")->expected(3);
  sample->add_option("--lesion-prob", pa.lesion_prob, "Probability of a lesion-centered draw")->capture_default_str();
  sample->add_option("--pad-value", pa.pad_value, "Image padding value")->capture_default_str();
  sample->add_option("--prefix", pa.prefix, "Output path prefix")->required();

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "iwseg: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*weights) return detail::cmd_weights(wa, out);
    if (*loss) return detail::cmd_loss(la, out);
    if (*eval) return detail::cmd_eval(ea, out);
    if (*conv) return detail::cmd_convert(ca, out);
    if (*sizes) return detail::cmd_sizes(sa, out);
    if (*sample) return detail::cmd_sample(pa, out, err);
  } catch (const ValidationError& e) {
    err << "iwseg: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "iwseg: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvariantError& e) {
    err << "iwseg: internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "iwseg: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace iwseg::cli
