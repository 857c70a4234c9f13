#pragma once

#include <string>

#include "reprobe/tensor.hpp"

namespace reprobe {

// Portable anymap I/O. Readers accept plain P2/P3 and binary P5/P6 with
// maxval <= 255; values are scaled to [0,1] and returned as [C,H,W] with
// C = 1 (graymap) or 3 (pixmap). Writers emit plain P2 (one channel) or P3
// (three channels) with values clamp(v,0,1) mapped to round(v*255).
Tensor read_pnm(const std::string& path, Precision prec = Precision::f64);
std::string pnm_to_string(const Tensor& image);
void write_pnm(const Tensor& image, const std::string& path);

}  // namespace reprobe
