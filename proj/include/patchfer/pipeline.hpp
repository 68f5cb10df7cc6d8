#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchfer/classes.hpp"
#include "patchfer/error.hpp"
#include "patchfer/eval.hpp"
#include "patchfer/image.hpp"
#include "patchfer/image_io.hpp"
#include "patchfer/landmarks.hpp"
#include "patchfer/lbp.hpp"
#include "patchfer/phog.hpp"
#include "patchfer/reduce.hpp"
#include "patchfer/svm.hpp"

namespace patchfer {

enum class FeatureSet { Both, PhogOnly, LbpOnly };

inline std::string to_string(FeatureSet f) {
  switch (f) {
    case FeatureSet::Both: return "both";
    case FeatureSet::PhogOnly: return "phog";
    case FeatureSet::LbpOnly: return "lbp";
  }
  return "?";
}

inline FeatureSet feature_set_from_string(const std::string& s) {
  if (s == "both") return FeatureSet::Both;
  if (s == "phog") return FeatureSet::PhogOnly;
  if (s == "lbp") return FeatureSet::LbpOnly;
  throw InvalidArgument("unknown feature set '" + s + "' (expected phog, lbp or both)");
}

struct PipelineConfig {
  double smooth_sigma = 1.0;
  int smooth_ksize = 5;
  LayoutConfig layout;
  int lbp_bins = 64;
  int phog_bins = 9;
  int phog_levels = 3;
  FeatureSet features = FeatureSet::Both;
  svm::KernelSpec kernel{svm::KernelKind::Rbf, 0.0, 3, 1.0};  // gamma 0 = 1 / reduced dimension
  double svm_c = 1.0;
  double svm_tol = 1e-3;
  std::uint64_t seed = 0;
  long long pca_dim = 0;  // 0 = min(N - C, D)
  long long lda_dim = 0;  // 0 = min(C - 1, pca)

  bool uses_phog() const { return features != FeatureSet::LbpOnly; }
  bool uses_lbp() const { return features != FeatureSet::PhogOnly; }

  std::size_t phog_length() const { return uses_phog() ? phog::descriptor_length(phog_bins, phog_levels) : 0; }
  std::size_t lbp_length() const { return uses_lbp() ? std::size_t(lbp_bins) : 0; }
  std::size_t patch_length() const { return phog_length() + lbp_length(); }
  std::size_t feature_length() const { return kPatchCount * patch_length(); }

  void validate() const {
    gaussian_kernel(smooth_sigma, smooth_ksize);
    if (layout.side <= 0 || layout.side % 8 != 0) throw InvalidArgument("patch size must be a positive multiple of 8");
    if (layout.side > layout.raster) throw InvalidArgument("patch size exceeds the aligned raster");
    if (!lbp::supported_bin_count(lbp_bins)) throw InvalidArgument("LBP bins must be one of 256/128/64/32/16");
    if (phog_bins < 2) throw InvalidArgument("PHOG needs at least 2 orientation bins");
    if (phog_levels < 1 || layout.side % (1 << (phog_levels - 1)) != 0) {
      throw InvalidArgument("patch size is not divisible by the finest PHOG grid");
    }
    if (!(svm_c > 0.0)) throw InvalidArgument("SVM C must be positive");
    if (!(svm_tol > 0.0)) throw InvalidArgument("SVM tolerance must be positive");
    if (kernel.kind == svm::KernelKind::Polynomial && kernel.degree < 1) {
      throw InvalidArgument("polynomial degree must be >= 1");
    }
    if (kernel.gamma < 0.0) throw InvalidArgument("rbf gamma must be positive (0 selects the default)");
  }

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

inline nlohmann::json to_json(const LayoutConfig& l) {
  nlohmann::json offsets = nlohmann::json::object();
  for (std::size_t i = 0; i < kPatchCount; ++i) {
    offsets[std::string(kPatchNames[i])] = {{"anchor", std::string(to_string(l.offsets[i].anchor))},
                                            {"dx_frac", l.offsets[i].dx_frac},
                                            {"dy_frac", l.offsets[i].dy_frac}};
  }
  return {{"raster", l.raster}, {"side", l.side}, {"offsets", offsets}};
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {
      {"smooth_sigma", c.smooth_sigma},
      {"smooth_ksize", c.smooth_ksize},
      {"layout", to_json(c.layout)},
      {"lbp_bins", c.lbp_bins},
      {"phog_bins", c.phog_bins},
      {"phog_levels", c.phog_levels},
      {"features", to_string(c.features)},
      {"kernel",
       {{"kind", svm::to_string(c.kernel.kind)},
        {"gamma", c.kernel.gamma},
        {"degree", c.kernel.degree},
        {"coef0", c.kernel.coef0}}},
      {"svm_c", c.svm_c},
      {"svm_tol", c.svm_tol},
      {"seed", c.seed},
      {"pca_dim", c.pca_dim},
      {"lda_dim", c.lda_dim},
  };
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.smooth_sigma = j.at("smooth_sigma").get<double>();
  c.smooth_ksize = j.at("smooth_ksize").get<int>();
  const auto& l = j.at("layout");
  c.layout.raster = l.at("raster").get<int>();
  c.layout.side = l.at("side").get<int>();
  c.layout = apply_layout_overrides(c.layout, l.at("offsets"));
  c.lbp_bins = j.at("lbp_bins").get<int>();
  c.phog_bins = j.at("phog_bins").get<int>();
  c.phog_levels = j.at("phog_levels").get<int>();
  c.features = feature_set_from_string(j.at("features").get<std::string>());
  const auto& k = j.at("kernel");
  c.kernel.kind = svm::kernel_kind_from_string(k.at("kind").get<std::string>());
  c.kernel.gamma = k.at("gamma").get<double>();
  c.kernel.degree = k.at("degree").get<int>();
  c.kernel.coef0 = k.at("coef0").get<double>();
  c.svm_c = j.at("svm_c").get<double>();
  c.svm_tol = j.at("svm_tol").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.pca_dim = j.at("pca_dim").get<long long>();
  c.lda_dim = j.at("lda_dim").get<long long>();
  return c;
}

// ---------------------------------------------------------------------------
// Hybrid features

enum class Family { Phog, Lbp };

struct FeatureSlice {
  PatchId patch;
  Family family;
  std::size_t offset;
  std::size_t length;
};

/// Per patch, in layout order: PHOG block then LBP block.
struct HybridFeature {
  std::vector<double> values;
  std::vector<FeatureSlice> slices;
};

/// The per-stage products of feature extraction, kept for inspection.
struct FaceFrame {
  GrayImage aligned;
  LandmarkSet landmarks;  // in the aligned frame
  PatchLayout layout;
};

/// Smooth, align by the eyes, and place the active patches.
inline FaceFrame prepare_face(const GrayImage& img, const LandmarkSet& lm, const PipelineConfig& cfg) {
  validate(lm);
  const GrayImage smooth = gaussian_smooth(img, cfg.smooth_sigma, cfg.smooth_ksize);
  AlignedFace aligned = align_face(smooth, lm.left_eye, lm.right_eye, cfg.layout.raster);
  const LandmarkSet mapped = transform_landmarks(aligned.transform, lm);
  return {std::move(aligned.image), mapped, localize_patches(mapped, cfg.layout)};
}

inline HybridFeature extract_hybrid(const GrayImage& img, const LandmarkSet& lm, const PipelineConfig& cfg) {
  const FaceFrame face = prepare_face(img, lm, cfg);
  HybridFeature out;
  out.values.reserve(cfg.feature_length());
  for (const PatchSpec& spec : face.layout) {
    const GrayImage patch = extract_patch(face.aligned, spec);
    if (cfg.uses_phog()) {
      const auto d = phog::descriptor(patch, cfg.phog_bins, cfg.phog_levels);
      out.slices.push_back({spec.id, Family::Phog, out.values.size(), d.size()});
      out.values.insert(out.values.end(), d.begin(), d.end());
    }
    if (cfg.uses_lbp()) {
      const auto h = lbp::histogram(lbp::image(patch), cfg.lbp_bins);
      out.slices.push_back({spec.id, Family::Lbp, out.values.size(), h.bins.size()});
      for (auto v : h.bins) out.values.push_back(double(v));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct ManifestEntry {
  std::filesystem::path image;  // resolved against the manifest directory
  int label = -1;
  LandmarkSet landmarks;
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::vector<int> labels() const {
    std::vector<int> out;
    for (const auto& e : entries) out.push_back(e.label);
    return out;
  }
};

inline constexpr std::string_view kManifestHeader = "image,label,lex,ley,rex,rey,nx,ny,llx,lly,lrx,lry";

/// Rows are numbered from 1 at the header line.
inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  DatasetManifest m{base_dir, {}};
  std::string line;
  std::size_t row = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++row;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    if (!header_seen) {
      if (trimmed != kManifestHeader) {
        throw ParseError("manifest row " + std::to_string(row) + ": expected header '" + std::string(kManifestHeader) +
                         "'");
      }
      header_seen = true;
      continue;
    }
    const std::size_t c1 = trimmed.find(',');
    const std::size_t c2 = c1 == std::string_view::npos ? c1 : trimmed.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
      throw ParseError("manifest row " + std::to_string(row) + ": missing image/label fields");
    }
    ManifestEntry e;
    e.image = base_dir / std::string(detail::trim(trimmed.substr(0, c1)));
    try {
      e.label = expression_id(detail::trim(trimmed.substr(c1 + 1, c2 - c1 - 1)));
    } catch (const ParseError& err) {
      throw ParseError("manifest row " + std::to_string(row) + ": " + err.what());
    }
    e.landmarks = parse_landmarks(trimmed.substr(c2 + 1), row);
    m.entries.push_back(std::move(e));
  }
  if (!header_seen) throw ParseError("manifest is empty");
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return parse_manifest(in, path.parent_path());
}

inline std::string format_landmarks(const LandmarkSet& lm) {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const Point& p : lm.points()) {
    os << (first ? "" : ",") << p.x << ',' << p.y;
    first = false;
  }
  return os.str();
}

inline void write_manifest(std::ostream& os, const std::vector<std::string>& images, const std::vector<int>& labels,
                           const std::vector<LandmarkSet>& landmarks) {
  os << kManifestHeader << '\n';
  for (std::size_t i = 0; i < images.size(); ++i) {
    os << images[i] << ',' << expression_name(labels[i]) << ',' << format_landmarks(landmarks[i]) << '\n';
  }
}

/// Features for every manifest row, in row order.
inline reduce::FeatureMatrix extract_dataset(const DatasetManifest& m, const PipelineConfig& cfg) {
  cfg.validate();
  reduce::FeatureMatrix fm{reduce::Matrix(Eigen::Index(m.entries.size()), Eigen::Index(cfg.feature_length())), {}};
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const ManifestEntry& e = m.entries[i];
    try {
      const HybridFeature f = extract_hybrid(read_image(e.image), e.landmarks, cfg);
      fm.values.row(Eigen::Index(i)) = Eigen::Map<const reduce::Vector>(f.values.data(), Eigen::Index(f.values.size()));
    } catch (const Error& err) {
      rethrow_with_context(err, e.image.string());
    }
    fm.labels.push_back(e.label);
  }
  return fm;
}

// ---------------------------------------------------------------------------
// Training and prediction

struct TrainedModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  PipelineConfig config;
  std::vector<std::string> class_names;  // index = class id
  reduce::Projection projection;
  svm::OvoEnsemble ensemble;
};

inline std::vector<std::string> default_class_names() {
  return {kExpressionNames.begin(), kExpressionNames.end()};
}

/// Scaler, PCA, LDA, and the pairwise SVMs, fitted on `data` only.
inline TrainedModel fit_model(const reduce::FeatureMatrix& data, const PipelineConfig& cfg,
                              std::vector<std::string> class_names = default_class_names()) {
  cfg.validate();
  TrainedModel model{cfg, std::move(class_names), {}, {}};
  model.projection = reduce::fit_projection(data, {Eigen::Index(cfg.pca_dim), Eigen::Index(cfg.lda_dim)});
  const reduce::Matrix reduced = model.projection(data.values);
  svm::KernelSpec kernel = cfg.kernel;
  if (kernel.kind == svm::KernelKind::Rbf && kernel.gamma == 0.0) kernel.gamma = 1.0 / double(reduced.cols());
  model.ensemble = svm::train_ovo(reduced, data.labels, kernel, {cfg.svm_c, cfg.svm_tol, cfg.seed, 0});
  return model;
}

inline svm::Prediction predict_features(const TrainedModel& model, const reduce::Vector& features) {
  if (features.size() != model.projection.input_dims()) {
    throw ModelError("feature length " + std::to_string(features.size()) + " does not match the model's " +
                     std::to_string(model.projection.input_dims()));
  }
  return svm::predict_ovo(model.ensemble, model.projection(features));
}

inline svm::Prediction predict(const TrainedModel& model, const GrayImage& img, const LandmarkSet& lm) {
  const HybridFeature f = extract_hybrid(img, lm, model.config);
  return predict_features(model, Eigen::Map<const reduce::Vector>(f.values.data(), Eigen::Index(f.values.size())));
}

/// Requires every expression class to be present with at least two samples.
inline void check_training_classes(std::span<const int> labels) {
  std::vector<int> counts(kExpressionCount, 0);
  for (int l : labels) ++counts[std::size_t(l)];
  for (int k = 0; k < kExpressionCount; ++k) {
    if (counts[std::size_t(k)] < 2) {
      throw StratificationError("class '" + std::string(expression_name(k)) + "' has " +
                                std::to_string(counts[std::size_t(k)]) + " samples; training needs at least 2");
    }
  }
}

inline TrainedModel train(const DatasetManifest& manifest, const PipelineConfig& cfg) {
  check_training_classes(manifest.labels());
  return fit_model(extract_dataset(manifest, cfg), cfg);
}

inline reduce::FeatureMatrix select_rows(const reduce::FeatureMatrix& data, std::span<const std::size_t> rows) {
  reduce::FeatureMatrix out{reduce::Matrix(Eigen::Index(rows.size()), data.dims()), {}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(Eigen::Index(i)) = data.values.row(Eigen::Index(rows[i]));
    out.labels.push_back(data.labels[rows[i]]);
  }
  return out;
}

/// k-fold evaluation on precomputed features; every statistic is refitted per
/// fold from that fold's training rows.
inline eval::CrossValidationResult cross_validate(const reduce::FeatureMatrix& data, const PipelineConfig& cfg,
                                                  std::size_t k = 5, std::uint64_t seed = 0,
                                                  int n_classes = kExpressionCount) {
  auto fit_predict = [&](std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows) {
    const TrainedModel model = fit_model(select_rows(data, train_rows), cfg);
    std::vector<int> pred;
    for (std::size_t r : test_rows) pred.push_back(predict_features(model, data.values.row(Eigen::Index(r)).transpose()).label);
    return pred;
  };
  return eval::cross_validate(data.labels, n_classes, fit_predict, k, seed);
}

}  // namespace patchfer
