#pragma once

#include <array>
#include <string>
#include <string_view>

#include "patchfer/error.hpp"

namespace patchfer {

/// The six universal expressions. Ids follow the row order of the published
/// confusion tables, which is also the order every report prints.
inline constexpr std::array<std::string_view, 6> kExpressionNames{"anger",   "fear",    "disgust",
                                                                  "happiness", "sadness", "surprise"};

inline constexpr int kExpressionCount = 6;

inline int expression_id(std::string_view name) {
  for (int i = 0; i < kExpressionCount; ++i) {
    if (kExpressionNames[std::size_t(i)] == name) return i;
  }
  throw ParseError("unknown expression label '" + std::string(name) + "'");
}

inline std::string_view expression_name(int id) {
  if (id < 0 || id >= kExpressionCount) throw InvalidArgument("expression id out of range");
  return kExpressionNames[std::size_t(id)];
}

}  // namespace patchfer
