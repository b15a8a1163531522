#pragma once

// PNG persistence for images and maps.
//
// Channel semantics on disk (8-bit):
//   image   RGB, value v in [-1,1] stored as round((v + 1) / 2 * 255)
//   mask    gray, 0 or 255
//   parse   gray, the ParseLabel value itself (0..4)
//   dense   RGB, R = u * 255, G = v * 255, B = 0; u, v in [0,1]

#include <string>

#include "garmentgen/tensor.hpp"

namespace garmentgen {

enum class PngKind { image, mask, parse, dense };

void write_png(const std::string& path, const Tensor& t, PngKind kind);
Tensor read_png(const std::string& path, PngKind kind);

/// What a tensor looks like after a write/read cycle.
Tensor quantize(const Tensor& t, PngKind kind);

}  // namespace garmentgen
