#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "patchfer/error.hpp"
#include "patchfer/image.hpp"

namespace patchfer {

struct LandmarkSet {
  Point left_eye;
  Point right_eye;
  Point nose_tip;
  Point lip_left;
  Point lip_right;

  std::array<Point, 5> points() const { return {left_eye, right_eye, nose_tip, lip_left, lip_right}; }

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

/// Throws GeometryError unless the eye and lip pairs are ordered left-to-right
/// and every coordinate is finite.
inline const LandmarkSet& validate(const LandmarkSet& lm) {
  for (const Point& p : lm.points()) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("landmark coordinate is not finite");
  }
  if (!(lm.left_eye.x < lm.right_eye.x)) throw GeometryError("left eye must lie left of right eye");
  if (!(lm.lip_left.x < lm.lip_right.x)) throw GeometryError("left lip corner must lie left of right lip corner");
  return lm;
}

inline LandmarkSet transform_landmarks(const AffineTransform& t, const LandmarkSet& lm) {
  return {apply_transform(t, lm.left_eye), apply_transform(t, lm.right_eye), apply_transform(t, lm.nose_tip),
          apply_transform(t, lm.lip_left), apply_transform(t, lm.lip_right)};
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view row) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = row.find(',', start);
    out.push_back(trim(row.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses "lex,ley,rex,rey,nx,ny,llx,lly,lrx,lry".
inline LandmarkSet parse_landmarks(std::string_view record, std::size_t row_number = 0) {
  const auto fields = detail::split_csv(record);
  const std::string where = "row " + std::to_string(row_number);
  if (fields.size() != 10) {
    throw ParseError(where + ": expected 10 landmark coordinates, found " + std::to_string(fields.size()));
  }
  std::array<double, 10> v{};
  for (std::size_t i = 0; i < 10; ++i) {
    const auto parsed = detail::parse_double(fields[i]);
    if (!parsed) throw ParseError(where + ": landmark field " + std::to_string(i + 1) + " is not a finite number");
    v[i] = *parsed;
  }
  LandmarkSet lm{{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}, {v[8], v[9]}};
  try {
    validate(lm);
  } catch (const GeometryError& e) {
    throw GeometryError(where + ": " + e.what());
  }
  return lm;
}

// ---------------------------------------------------------------------------
// Active patch layout

enum class PatchId { LipL, LipR, BelowLip, CheekUL, CheekUR, CheekLL, CheekLR, ForeheadL, ForeheadR, UpperNose };

inline constexpr std::size_t kPatchCount = 10;

inline constexpr std::array<PatchId, kPatchCount> kPatchOrder{
    PatchId::LipL,    PatchId::LipR,    PatchId::BelowLip,  PatchId::CheekUL,   PatchId::CheekUR,
    PatchId::CheekLL, PatchId::CheekLR, PatchId::ForeheadL, PatchId::ForeheadR, PatchId::UpperNose};

inline constexpr std::array<std::string_view, kPatchCount> kPatchNames{
    "LipL", "LipR", "BelowLip", "CheekUL", "CheekUR", "CheekLL", "CheekLR", "ForeheadL", "ForeheadR", "UpperNose"};

inline std::string_view to_string(PatchId id) { return kPatchNames[static_cast<std::size_t>(id)]; }

inline PatchId patch_id_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kPatchCount; ++i) {
    if (kPatchNames[i] == s) return kPatchOrder[i];
  }
  throw ParseError("unknown patch id '" + std::string(s) + "'");
}

/// Landmark-derived reference point a patch offset is measured from.
enum class Anchor { LeftEye, RightEye, NoseTip, LipLeft, LipRight, EyeMid, LipMid, LeftEyeLipMid, RightEyeLipMid };

inline constexpr std::array<std::string_view, 9> kAnchorNames{
    "left_eye", "right_eye", "nose_tip", "lip_left", "lip_right", "eye_mid", "lip_mid", "left_eye_lip_mid",
    "right_eye_lip_mid"};

inline std::string_view to_string(Anchor a) { return kAnchorNames[static_cast<std::size_t>(a)]; }

inline Anchor anchor_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kAnchorNames.size(); ++i) {
    if (kAnchorNames[i] == s) return static_cast<Anchor>(i);
  }
  throw ParseError("unknown patch anchor '" + std::string(s) + "'");
}

inline Point anchor_point(const LandmarkSet& lm, Anchor a) {
  switch (a) {
    case Anchor::LeftEye: return lm.left_eye;
    case Anchor::RightEye: return lm.right_eye;
    case Anchor::NoseTip: return lm.nose_tip;
    case Anchor::LipLeft: return lm.lip_left;
    case Anchor::LipRight: return lm.lip_right;
    case Anchor::EyeMid: return midpoint(lm.left_eye, lm.right_eye);
    case Anchor::LipMid: return midpoint(lm.lip_left, lm.lip_right);
    case Anchor::LeftEyeLipMid: return midpoint(lm.left_eye, lm.lip_left);
    case Anchor::RightEyeLipMid: return midpoint(lm.right_eye, lm.lip_right);
  }
  return {};
}

/// Patch centre = anchor + (dx_frac, dy_frac) * raster width.
struct PatchOffset {
  Anchor anchor = Anchor::EyeMid;
  double dx_frac = 0.0;
  double dy_frac = 0.0;

  friend bool operator==(const PatchOffset&, const PatchOffset&) = default;
};

struct LayoutConfig {
  int raster = 96;
  int side = 32;
  std::array<PatchOffset, kPatchCount> offsets{{
      {Anchor::LipLeft, -0.08, 0.0},
      {Anchor::LipRight, +0.08, 0.0},
      {Anchor::LipMid, 0.0, +0.15},
      {Anchor::LeftEyeLipMid, 0.0, 0.0},
      {Anchor::RightEyeLipMid, 0.0, 0.0},
      {Anchor::NoseTip, -0.18, +0.05},
      {Anchor::NoseTip, +0.18, +0.05},
      {Anchor::LeftEye, +0.10, -0.14},
      {Anchor::RightEye, -0.10, -0.14},
      {Anchor::EyeMid, 0.0, +0.06},
  }};

  friend bool operator==(const LayoutConfig&, const LayoutConfig&) = default;
};

/// Applies `{ "<PatchId>": {"dx_frac": .., "dy_frac": .., "anchor": ".."}, ... }`
/// on top of `base`. Unmentioned patches keep their offsets; absent keys in an
/// entry keep the previous value.
inline LayoutConfig apply_layout_overrides(LayoutConfig base, const nlohmann::json& overrides) {
  if (!overrides.is_object()) throw ParseError("layout override must be a JSON object");
  for (const auto& [key, entry] : overrides.items()) {
    const auto idx = static_cast<std::size_t>(patch_id_from_string(key));
    if (!entry.is_object()) throw ParseError("layout override for " + key + " must be an object");
    PatchOffset& off = base.offsets[idx];
    if (entry.contains("anchor")) off.anchor = anchor_from_string(entry.at("anchor").get<std::string>());
    if (entry.contains("dx_frac")) off.dx_frac = entry.at("dx_frac").get<double>();
    if (entry.contains("dy_frac")) off.dy_frac = entry.at("dy_frac").get<double>();
  }
  return base;
}

struct PatchSpec {
  PatchId id = PatchId::LipL;
  Point center;
  int side = 32;
  bool clamped = false;  // centre was moved to keep the square inside the raster

  /// Integer top-left corner of the side x side crop.
  int left() const { return static_cast<int>(std::lround(center.x - side / 2.0)); }
  int top() const { return static_cast<int>(std::lround(center.y - side / 2.0)); }
};

using PatchLayout = std::array<PatchSpec, kPatchCount>;

inline PatchLayout localize_patches(const LandmarkSet& lm, const LayoutConfig& cfg = {}) {
  validate(lm);
  const double W = cfg.raster;
  if (cfg.side <= 0 || cfg.side % 8 != 0) throw InvalidArgument("patch side must be a positive multiple of 8");
  if (cfg.side > cfg.raster) throw InvalidArgument("patch side exceeds raster size");
  for (const Point& p : lm.points()) {
    if (p.x < 0.0 || p.y < 0.0 || p.x > W - 1 || p.y > W - 1) {
      throw GeometryError("landmark lies outside the aligned raster");
    }
  }
  const double lo = cfg.side / 2.0;
  const double hi = W - cfg.side / 2.0;
  PatchLayout layout{};
  for (std::size_t i = 0; i < kPatchCount; ++i) {
    const PatchOffset& off = cfg.offsets[i];
    const Point raw = anchor_point(lm, off.anchor) + Point{off.dx_frac * W, off.dy_frac * W};
    const Point c{std::clamp(raw.x, lo, hi), std::clamp(raw.y, lo, hi)};
    layout[i] = PatchSpec{kPatchOrder[i], c, cfg.side, c != raw};
  }
  return layout;
}

/// Pure side x side crop, no resampling.
inline GrayImage extract_patch(const GrayImage& img, const PatchSpec& spec) {
  const int x0 = spec.left();
  const int y0 = spec.top();
  if (x0 < 0 || y0 < 0 || x0 + spec.side > img.width() || y0 + spec.side > img.height()) {
    throw GeometryError("patch " + std::string(to_string(spec.id)) + " rectangle leaves the image");
  }
  GrayImage out(spec.side, spec.side);
  for (int y = 0; y < spec.side; ++y) {
    for (int x = 0; x < spec.side; ++x) out(x, y) = img(x0 + x, y0 + y);
  }
  return out;
}

}  // namespace patchfer
