#pragma once

#include <span>
#include <vector>

#include "fusiform/autoencoder.hpp"
#include "fusiform/perceptual.hpp"
#include "fusiform/tensor.hpp"

namespace fusiform {

/// The two-level feature pair for one image.
struct FeatureBundle {
    Tensor vc;  // compressed vector: bottleneck latent
    Tensor vd;  // differential vector: perceive(I) - perceive(I')
};

/// A bundle plus the raw perceptual features of the original image, which
/// the perceptual-only baseline consumes.
struct FeatureRecord {
    FeatureBundle bundle;
    Tensor raw;
};

struct ExtractOptions {
    /// Scale v_c and v_d to unit L2 norm. Off by default.
    bool l2_normalize = false;
};

/// Reconstructs the image through the codec and differences the perceptual
/// features of original and reconstruction (original minus reconstruction).
/// Both models must be frozen.
FeatureBundle extract(const Tensor& image, const ImageCodec& codec, const PerceptualModel& perceptual,
                      const ExtractOptions& options = {});

/// Element-wise identical to extract() per image, computed in batches.
std::vector<FeatureRecord> extract_batch(std::span<const Tensor> images, const ImageCodec& codec,
                                         const PerceptualModel& perceptual, const ExtractOptions& options = {});

}  // namespace fusiform
