#pragma once

#include <string>

#include "fusiform/tensor.hpp"

namespace fusiform {

/// Reads a binary or ASCII PNM file (P2, P3, P5, P6) into a CHW tensor with
/// the raw sample values (0..maxval). Grey images have one channel.
Tensor read_pnm(const std::string& path);

/// Writes a CHW image with values in [0, 1] as binary PPM (P6).
/// One-channel images are written as PGM (P5).
void write_pnm(const std::string& path, const Tensor& image);

}  // namespace fusiform
