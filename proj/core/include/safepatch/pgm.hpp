#pragma once

#include <string>

#include "safepatch/tensor.hpp"
#include "safepatch/tokens.hpp"

namespace safepatch {

// Plain-text PGM (P2), 16x16, [-1,1] mapped to 0..255.
std::string image_to_pgm(const Tensor& image);
void write_pgm(const std::string& path, const Tensor& image);

// Terminal preview, one character per pixel.
std::string image_to_ascii(const Tensor& image);

} // namespace safepatch
