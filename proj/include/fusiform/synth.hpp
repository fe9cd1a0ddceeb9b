#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fusiform/rng.hpp"
#include "fusiform/tensor.hpp"

namespace fusiform {

using Rgb = std::array<double, 3>;

/// Closed interval used for every sampled trait.
struct Range {
    double lo;
    double hi;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Coarse facial layout and colour. Geometry is in face coordinates where the
/// canvas half-width is 1; these traits survive a narrow bottleneck.
struct GeneralTraits {
    double oval_ax = 0.65;     // face-oval semi-axes
    double oval_ay = 0.8;
    double eye_y = -0.25;      // eye row, negative is up
    double eye_dx = 0.3;       // half the inter-eye distance
    double eye_radius = 0.11;
    double nose_length = 0.22;
    double nose_width = 0.1;
    double mouth_y = 0.4;
    double mouth_width = 0.3;
    double mouth_curvature = 0.0;
    Rgb skin{0.8, 0.6, 0.5};
    Rgb eye{0.2, 0.15, 0.1};
    Rgb lip{0.7, 0.25, 0.25};
};

/// Fine detail that a pixel-wise reconstruction blurs away.
struct LocalTraits {
    double eye_corner_angle = 0.0;    // radians, mirrored between eyes
    double brow_offset_px = 0.0;      // eyebrow micro-offset at the 32 px scale
    std::uint64_t freckle_seed = 0;
    double freckle_density = 0.0;     // fraction of the maximum freckle count
    double texture_frequency = 0.35;  // skin texture, cycles per pixel at 32 px
    double texture_amplitude = 0.0;
};

struct IdentitySpec {
    int id = 0;
    GeneralTraits general;
    LocalTraits local;
};

/// Per-image variation that is independent of identity.
struct Nuisance {
    double shift_x_px = 0.0;   // at the 32 px scale
    double shift_y_px = 0.0;
    double scale = 1.0;
    double brightness = 0.0;
    double light_angle = 0.0;  // direction of the illumination gradient
    Rgb background{0.5, 0.5, 0.5};
};

/// Documented closed sampling ranges.
struct TraitRanges {
    Range oval_ax{0.55, 0.75};
    Range oval_ay{0.70, 0.90};
    Range eye_y{-0.34, -0.16};
    Range eye_dx{0.22, 0.36};
    Range eye_radius{0.09, 0.15};
    Range nose_length{0.14, 0.30};
    Range nose_width{0.06, 0.14};
    Range mouth_y{0.32, 0.50};
    Range mouth_width{0.18, 0.42};
    Range mouth_curvature{-0.12, 0.12};
    std::array<Range, 3> skin{Range{0.45, 0.95}, Range{0.30, 0.80}, Range{0.20, 0.70}};
    std::array<Range, 3> eye{Range{0.0, 0.5}, Range{0.0, 0.5}, Range{0.0, 0.5}};
    std::array<Range, 3> lip{Range{0.50, 0.90}, Range{0.10, 0.40}, Range{0.10, 0.45}};

    Range eye_corner_angle{-0.15, 0.15};
    Range brow_offset_px{-2.0, 2.0};
    Range freckle_density{0.0, 1.0};
    Range texture_frequency{0.22, 0.45};
    Range texture_amplitude{0.0, 0.08};

    Range shift_px{-3.0, 3.0};
    Range scale{0.9, 1.1};
    Range brightness{-0.1, 0.1};
    Range light_angle{-3.14159265358979323846, 3.14159265358979323846};
    Range background{0.0, 1.0};
};

inline constexpr TraitRanges kTraitRanges{};
inline constexpr std::size_t kMaxFreckles = 14;
inline constexpr double kLightStrength = 0.08;
inline constexpr std::size_t kMinRenderSize = 16;

/// Draws an identity uniformly within kTraitRanges; ids are handed out
/// sequentially by the caller.
IdentitySpec sample_identity(Rng& rng, int id);

/// Sequential id counter around sample_identity.
class IdentitySampler {
public:
    explicit IdentitySampler(std::uint64_t seed, int first_id = 0) : rng_(seed), next_id_(first_id) {}
    IdentitySpec operator()() { return sample_identity(rng_, next_id_++); }

private:
    Rng rng_;
    int next_id_;
};

Nuisance sample_nuisance(Rng& rng);

bool within_ranges(const IdentitySpec& spec);
bool within_ranges(const Nuisance& nuisance);

struct RenderOptions {
    bool texture = true;  // false renders the smooth (noise-free) face
};

/// Rasterises a face into a 3 x size x size tensor with values in [0, 1].
/// Pure function of its arguments.
Tensor render(const IdentitySpec& spec, const Nuisance& nuisance, std::size_t size, RenderOptions options = {});

/// Rescales pixel values into [0, 1] and bilinearly resizes to size x size.
/// Accepts 1- or 3-channel CHW input; grey images are replicated to RGB.
/// Values already in [0, 1] are kept; values in [0, 255] are divided by 255;
/// anything else is min-max normalised. No augmentation is applied.
Tensor preprocess(const Tensor& image, std::size_t size);

// ---------------------------------------------------------------------------
// Verification pairs

struct FaceImage {
    int identity = 0;
    Nuisance nuisance;
    Tensor pixels;
};

/// A verification pair. Images are stored once in the owning PairSet and
/// referenced by index.
struct LabeledPair {
    std::size_t image_a = 0;
    std::size_t image_b = 0;
    int label = 0;  // 1 iff id_a == id_b
    int id_a = 0;
    int id_b = 0;
};

struct PairSet {
    std::vector<IdentitySpec> identities;
    std::vector<FaceImage> images;
    std::vector<LabeledPair> pairs;

    const Tensor& image_a(const LabeledPair& p) const { return images.at(p.image_a).pixels; }
    const Tensor& image_b(const LabeledPair& p) const { return images.at(p.image_b).pixels; }
};

struct PairSetOptions {
    std::size_t image_size = 32;
    /// Mismatched pairs only join identities from the same block, which keeps
    /// identity-disjoint cross-validation folds feasible.
    std::size_t blocks = 20;
    int first_id = 0;
};

/// Balanced pair set: every identity gets `images_per_id` renders (fresh
/// nuisance each), `images_per_id` matched pairs and `images_per_id`
/// mismatched pairs, so the total is 2 * identities * images_per_id.
PairSet build_pair_set(std::size_t identities, std::size_t images_per_id, Rng& rng, const PairSetOptions& options = {});

/// Rebuilds `set.pairs` from `set.images`: per identity, one matched pair per
/// image (cyclic neighbour) and one mismatched pair per image against a
/// random identity of the same block. Works for uneven image counts, e.g.
/// imported directories.
void pair_images(PairSet& set, Rng& rng, std::size_t blocks);

// ---------------------------------------------------------------------------
// Proxy classification set used to pretrain the perceptual extractor.

inline constexpr int kProxyShapes = 5;
inline constexpr int kProxyTextures = 4;
inline constexpr int kProxyClasses = kProxyShapes * kProxyTextures;

/// One image of class `label` in [0, kProxyClasses): shape = label / 4,
/// texture = label % 4 (smooth, fine stripes, speckles, fine noise).
Tensor render_proxy(int label, Rng& rng, std::size_t size);

struct ClassSet {
    std::vector<Tensor> images;
    std::vector<int> labels;
};

/// Class-balanced proxy set (labels cycle through all classes).
ClassSet build_proxy_set(std::size_t count, std::size_t size, Rng& rng);

/// Unpaired face renders for autoencoder training: `count` images of
/// identities drawn fresh (one identity per `images_per_identity` images).
std::vector<Tensor> build_face_images(std::size_t count, std::size_t images_per_identity, std::size_t size, Rng& rng);

}  // namespace fusiform
