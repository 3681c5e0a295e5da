#pragma once

#include <filesystem>

#include "depthsim/image.hpp"

namespace depthsim {

// PFM: "PF" (3 channels) or "Pf" (1 channel) header, "<w> <h>", scale line.
// We always write scale -1.0 (little-endian) and scanlines bottom-to-top, the
// layout every common reader expects. Invalid samples are stored as NaN.
// Reading honours the scale sign for byte order.
ImageF read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const ImageF& img);

// 8-bit binary netpbm: P5 (grayscale) and P6 (RGB), maxval <= 255.
Image8 read_pnm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image8& img);
void write_ppm(const std::filesystem::path& path, const Image8& img);
// Picks P5 or P6 from the channel count.
void write_pnm(const std::filesystem::path& path, const Image8& img);

// Reads PFM, PGM or PPM by extension/magic; 8-bit data is mapped to [0,1].
ImageF read_image_normalized(const std::filesystem::path& path);

}  // namespace depthsim
