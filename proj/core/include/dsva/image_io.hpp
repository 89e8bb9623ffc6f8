#pragma once

#include <filesystem>

#include "dsva/types.hpp"

namespace dsva {

// Binary PPM (P6, maxval 255) is the on-disk image format. 8-bit values
// map to [0, 1] by division with 255; writing rounds to nearest.
ImageTensor read_ppm(const std::filesystem::path& path);
void write_ppm(const ImageTensor& image, const std::filesystem::path& path);

// Bilinear resize with half-pixel sample centers. Resizing to the source
// size reproduces the input exactly.
ImageTensor resize_bilinear(const ImageTensor& image, int out_height, int out_width);

}  // namespace dsva
