#pragma once

#include <string>

#include "tecswin/tensor.hpp"

namespace tecswin {

// Writes [H,W,3] in [-1,1] as an 8-bit RGB PNG (zlib-compressed, filter 0).
void write_png(const std::string& path, const Tensor& image);

}  // namespace tecswin
