#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "patchfer/classes.hpp"
#include "patchfer/image.hpp"
#include "patchfer/image_io.hpp"
#include "patchfer/landmarks.hpp"
#include "patchfer/pipeline.hpp"

// Synthetic face-like dataset with expression classes encoded as textures
// inside the active patch regions. Each class is a combination of a grating
// orientation (shape cue) and a micro-texture tile (appearance cue); neither
// cue alone separates all six classes.

namespace patchfer::synth {

struct Sample {
  GrayImage image;
  LandmarkSet landmarks;
  int label = 0;
};

inline constexpr int kSide = 96;

inline const LandmarkSet& base_landmarks() {
  static const LandmarkSet lm{{29.0, 34.0}, {67.0, 34.0}, {48.0, 53.0}, {37.0, 69.0}, {59.0, 69.0}};
  return lm;
}

// Orientation group = class / 2, texture group = class % 3. The pairs
// (0,0) (0,1) (1,2) (1,0) (2,1) (2,2) are distinct.
inline int orientation_group(int label) { return label / 2; }
inline int texture_group(int label) { return label % 3; }

inline constexpr std::array<double, 3> kGratingDegrees{15.0, 75.0, 135.0};

struct Params {
  double grating_period = 7.0;
  double grating_amplitude = 6.0;
  double texture_amplitude = 6.0;
  double noise_sigma = 8.0;
  double landmark_jitter = 2.0;
};

/// 4x4 binary tile for a texture group, each cell rendered as a 2x2 block.
inline std::array<int, 16> texture_tile(int group) {
  std::mt19937 rng(0x5eedu + 7919u * unsigned(group));
  std::array<int, 16> t{};
  // Balanced tiles: exactly eight set cells.
  std::array<int, 16> idx{};
  for (int i = 0; i < 16; ++i) idx[std::size_t(i)] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  for (int i = 0; i < 8; ++i) t[std::size_t(idx[std::size_t(i)])] = 1;
  return t;
}

inline double ellipse_value(double x, double y, Point c, double rx, double ry) {
  const double dx = (x - c.x) / rx;
  const double dy = (y - c.y) / ry;
  return dx * dx + dy * dy;
}

/// Renders one face. `rng` drives every nuisance variable.
inline Sample render(int label, std::mt19937_64& rng, const Params& prm = {}) {
  std::uniform_real_distribution<double> jitter(-prm.landmark_jitter, prm.landmark_jitter);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, prm.noise_sigma);

  LandmarkSet lm = base_landmarks();
  for (Point* p : {&lm.left_eye, &lm.right_eye, &lm.nose_tip, &lm.lip_left, &lm.lip_right}) {
    p->x += jitter(rng);
    p->y += jitter(rng);
  }

  // Signature region: union of the active patch squares placed on the true landmarks.
  LayoutConfig layout;
  const PatchLayout patches = localize_patches(lm, layout);

  const double theta = (kGratingDegrees[std::size_t(orientation_group(label))] + 6.0 * (unit(rng) - 0.5)) *
                       std::numbers::pi / 180.0;
  const double phase = 2.0 * std::numbers::pi * unit(rng);
  const auto tile = texture_tile(texture_group(label));
  const int tile_dx = int(unit(rng) * 8.0);
  const int tile_dy = int(unit(rng) * 8.0);
  const double gamma = 0.8 + 0.45 * unit(rng);
  const double gain = 0.85 + 0.25 * unit(rng);
  const double offset = -10.0 + 20.0 * unit(rng);

  const Point face_center{48.0, 52.0};
  const Point lip_mid = midpoint(lm.lip_left, lm.lip_right);
  RealImage canvas(kSide, kSide);
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      double v = 30.0;
      if (ellipse_value(x, y, face_center, 38.0, 47.0) <= 1.0) {
        v = 150.0 + 0.25 * (y - face_center.y);
        bool in_patch = false;
        for (const PatchSpec& s : patches) {
          const double h = s.side / 2.0 - 2.0;
          if (std::abs(x - s.center.x) <= h && std::abs(y - s.center.y) <= h) in_patch = true;
        }
        if (in_patch) {
          const double u = x * std::cos(theta) + y * std::sin(theta);
          v += prm.grating_amplitude * std::sin(2.0 * std::numbers::pi * u / prm.grating_period + phase);
          const int tx = ((x + tile_dx) / 2) % 4;
          const int ty = ((y + tile_dy) / 2) % 4;
          v += tile[std::size_t(ty * 4 + tx)] ? prm.texture_amplitude : -prm.texture_amplitude;
        }
        for (Point eye : {lm.left_eye, lm.right_eye}) {
          if (ellipse_value(x, y, eye, 6.0, 3.0) <= 1.0) v = 45.0;
          if (ellipse_value(x, y, eye + Point{0.0, -7.0}, 7.0, 1.5) <= 1.0) v = 70.0;
        }
        if (ellipse_value(x, y, lm.nose_tip, 3.0, 2.0) <= 1.0) v = 90.0;
        const double half = 0.5 * (lm.lip_right.x - lm.lip_left.x);
        if (std::abs(x - lip_mid.x) <= half && std::abs(y - lip_mid.y) <= 1.5) v = 60.0;
      }
      v += noise(rng);
      // Monotone contrast map.
      const double t = std::clamp(v, 0.0, 255.0) / 255.0;
      canvas(x, y) = gain * 255.0 * std::pow(t, gamma) + offset;
    }
  }
  GrayImage img(kSide, kSide);
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) img(x, y) = saturate_u8(canvas(x, y));
  }
  return {std::move(img), lm, label};
}

/// per_class faces for each expression, class-major order.
inline std::vector<Sample> generate(std::uint64_t seed, int per_class, const Params& prm = {}) {
  if (per_class < 10) throw InvalidArgument("synthetic generation needs at least 10 images per class");
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  out.reserve(std::size_t(per_class) * kExpressionCount);
  for (int c = 0; c < kExpressionCount; ++c) {
    for (int i = 0; i < per_class; ++i) out.push_back(render(c, rng, prm));
  }
  return out;
}

/// Writes PGM images plus manifest.csv into `dir`; returns the manifest path.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, std::uint64_t seed, int per_class,
                                           const Params& prm = {}) {
  const auto samples = generate(seed, per_class, prm);
  std::filesystem::create_directories(dir);
  std::vector<std::string> names;
  std::vector<int> labels;
  std::vector<LandmarkSet> lms;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04zu.pgm", std::string(expression_name(samples[i].label)).c_str(), i);
    write_pgm(samples[i].image, dir / name);
    names.emplace_back(name);
    labels.push_back(samples[i].label);
    lms.push_back(samples[i].landmarks);
  }
  const auto manifest = dir / "manifest.csv";
  std::ofstream os(manifest);
  if (!os) throw IoError("cannot write " + manifest.string());
  write_manifest(os, names, labels, lms);
  return manifest;
}

/// Feature matrix straight from in-memory samples (no disk round trip).
inline reduce::FeatureMatrix extract_samples(const std::vector<Sample>& samples, const PipelineConfig& cfg) {
  cfg.validate();
  reduce::FeatureMatrix fm{reduce::Matrix(Eigen::Index(samples.size()), Eigen::Index(cfg.feature_length())), {}};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const HybridFeature f = extract_hybrid(samples[i].image, samples[i].landmarks, cfg);
    fm.values.row(Eigen::Index(i)) = Eigen::Map<const reduce::Vector>(f.values.data(), Eigen::Index(f.values.size()));
    fm.labels.push_back(samples[i].label);
  }
  return fm;
}

}  // namespace patchfer::synth
