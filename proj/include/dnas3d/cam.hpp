#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dnas3d/array.hpp"
#include "dnas3d/interp.hpp"

namespace dnas3d {

class ChildNet;

/// Last-cell features of one volume and the classifier it feeds.
struct FeatureCapture {
  Array features;       // [C, D, H, W]
  Array class_weights;  // [num_classes, C]
  Array class_bias;     // [num_classes]
  Array logits;         // [num_classes]
};

struct ActivationMap {
  Array raw;         // [D, H, W], sum_k w_k^c f_k
  Array normalized;  // min-max scaled to [0, 1]; all zeros when constant
  int class_index = 0;
  std::string volume_id;
};

// Eval-mode forward of a single [1, d, h, w] volume.
FeatureCapture capture_features(ChildNet& net, const Array& volume);

ActivationMap compute_cam(const FeatureCapture& capture, int class_index);

enum class UpsampleMode { trilinear, nearest };
ActivationMap upsample_cam(const ActivationMap& map, const Dims3& input_dims,
                           UpsampleMode mode = UpsampleMode::trilinear);

Array min_max_normalize(const Array& a);

/// Writes <id>_slice<k>.ppm for each depth index (gray slice with a red
/// heat overlay, alpha 0.5 scaled by the map) and <id>_cam.v3d holding the
/// normalized map. Returns the written paths.
std::vector<std::filesystem::path> export_overlays(const ActivationMap& map, const Array& volume,
                                                   const std::filesystem::path& out_dir);

// Overlay RGB bytes for slice k, row-major, 3 bytes per pixel.
std::vector<unsigned char> overlay_slice(const Array& map, const Array& volume, std::size_t k);

}  // namespace dnas3d
