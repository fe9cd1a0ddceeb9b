#include "fusiform/fusiform.hpp"

#include <cmath>

namespace fusiform {

namespace {

void check_models(const ImageCodec& codec, const PerceptualModel& perceptual)
{
    if (!codec.frozen() || !perceptual.frozen()) {
        throw UsageError("feature extraction requires frozen autoencoder and perceptual models");
    }
    if (codec.image_size() != perceptual.config().image_size) {
        throw ShapeError("autoencoder and perceptual model disagree on input size: " +
                         std::to_string(codec.image_size()) + " vs " +
                         std::to_string(perceptual.config().image_size));
    }
}

void normalize_in_place(Tensor& t)
{
    double ss = 0.0;
    for (float v : t.data()) ss += static_cast<double>(v) * v;
    if (ss <= 0.0) return;
    const double inv = 1.0 / std::sqrt(ss);
    for (float& v : t.data()) v = static_cast<float>(v * inv);
}

}  // namespace

FeatureBundle extract(const Tensor& image, const ImageCodec& codec, const PerceptualModel& perceptual,
                      const ExtractOptions& options)
{
    return std::move(extract_batch(std::span<const Tensor>(&image, 1), codec, perceptual, options).front().bundle);
}

std::vector<FeatureRecord> extract_batch(std::span<const Tensor> images, const ImageCodec& codec,
                                         const PerceptualModel& perceptual, const ExtractOptions& options)
{
    check_models(codec, perceptual);
    std::vector<FeatureRecord> out;
    if (images.empty()) return out;

    auto recon = codec.reconstruct_batch(images);
    std::vector<Tensor> reconstructed;
    reconstructed.reserve(recon.size());
    for (auto& r : recon) reconstructed.push_back(std::move(r.image));

    auto raw = perceptual.perceive_batch(images);
    const auto blurred = perceptual.perceive_batch(reconstructed);

    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        Tensor vd(raw[i].shape());
        for (std::size_t j = 0; j < vd.size(); ++j) vd[j] = raw[i][j] - blurred[i][j];
        FeatureRecord rec{{std::move(recon[i].latent), std::move(vd)}, std::move(raw[i])};
        if (options.l2_normalize) {
            normalize_in_place(rec.bundle.vc);
            normalize_in_place(rec.bundle.vd);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace fusiform
