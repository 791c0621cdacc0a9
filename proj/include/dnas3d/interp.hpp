#pragma once

#include <array>
#include <cstddef>

#include "dnas3d/array.hpp"

namespace dnas3d {

using Dims3 = std::array<std::size_t, 3>;

// Resamples a [C, D, H, W] array with half-pixel (align_corners = false)
// sample centers; source coordinates are clamped to the valid range.
Array trilinear_upsample(const Array& input, const Dims3& target);
Array nearest_upsample(const Array& input, const Dims3& target);

// Resizes a [H, W] plane bilinearly with the same convention.
Array bilinear_resize(const Array& plane, std::size_t height, std::size_t width);

}  // namespace dnas3d
