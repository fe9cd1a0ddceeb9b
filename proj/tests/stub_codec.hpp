#pragma once

#include "fusiform/autoencoder.hpp"

namespace fusiform::testing {

/// Codec whose reconstruction is its input, bit for bit.
class IdentityCodec : public ImageCodec {
public:
    IdentityCodec(std::size_t image_size, std::size_t latent_dim) : size_(image_size), latent_(latent_dim) {}

    std::size_t latent_dim() const override { return latent_; }
    std::size_t image_size() const override { return size_; }
    bool frozen() const override { return true; }

    std::vector<Reconstruction> reconstruct_batch(std::span<const Tensor> images) const override
    {
        std::vector<Reconstruction> out;
        for (const auto& img : images) out.push_back({img, Tensor(Shape{latent_})});
        return out;
    }

private:
    std::size_t size_;
    std::size_t latent_;
};

}  // namespace fusiform::testing
