#pragma once

#include <cstddef>
#include <cstdint>

#include "segsemi/kernels.hpp"

namespace segsemi::kernels::detail {

inline std::ptrdiff_t tap_offset(const ConvGeometry& g, std::size_t tap) {
  return (static_cast<std::ptrdiff_t>(tap) - static_cast<std::ptrdiff_t>((g.taps - 1) / 2)) *
         static_cast<std::ptrdiff_t>(g.dilation);
}

// Frames t whose source frame t + offset lies inside [0, frames).
struct TapRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline TapRange valid_range(const ConvGeometry& g, std::ptrdiff_t offset) {
  const auto frames = static_cast<std::ptrdiff_t>(g.frames);
  std::ptrdiff_t lo = offset < 0 ? -offset : 0;
  std::ptrdiff_t hi = offset > 0 ? frames - offset : frames;
  if (hi < lo) hi = lo;
  if (lo > frames) lo = hi = frames;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace segsemi::kernels::detail
