#pragma once

#include <cstddef>

#include "fusiform/tensor.hpp"

namespace fusiform {

/// Half-pixel-centred bilinear resize of a CHW image.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

/// Separable Gaussian blur of a CHW image with replicate borders.
Tensor gaussian_blur(const Tensor& image, double sigma);

struct BandSplit {
    Tensor low;   // gaussian_blur(image)
    Tensor high;  // image - low
};

BandSplit band_split(const Tensor& image, double sigma);

/// Mean squared value over all elements.
double mean_energy(const Tensor& t);

/// Mean squared 4-neighbour Laplacian response over a CHW image
/// (replicate borders). A proxy for high-frequency content.
double laplacian_energy(const Tensor& image);

/// Default blur width used to split low and high frequency bands at the toy
/// canvas size.
inline constexpr double kBandSigma = 1.0;

}  // namespace fusiform
