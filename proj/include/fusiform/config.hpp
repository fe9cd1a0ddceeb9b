#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fusiform/autoencoder.hpp"
#include "fusiform/eval.hpp"
#include "fusiform/perceptual.hpp"
#include "fusiform/verifier.hpp"

namespace fusiform {

/// Bad key, value or file in a run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything that, together with the seed, determines a run. Serialised as
/// flat `key=value` lines (sorted by key) and embedded in every checkpoint.
struct RunConfig {
    std::string preset = "toy";
    std::uint64_t seed = 1;

    std::size_t image_size = 32;
    std::size_t bottleneck_dim = 64;
    std::vector<std::size_t> ae_channels{16, 32, 64};
    std::vector<std::size_t> perceptual_channels{16, 32, 64};
    std::vector<int> perceptual_strides{1, 2, 2};
    std::size_t verifier_hidden = 128;

    // Autoencoder training.
    std::size_t ae_images = 2000;
    std::size_t ae_images_per_identity = 4;
    std::size_t ae_steps = 2000;
    std::size_t ae_batch = 64;
    double ae_lr = 1e-3;

    // Proxy pretraining of the perceptual model.
    std::size_t proxy_images = 5000;
    std::size_t proxy_steps = 1500;
    std::size_t proxy_batch = 64;
    double proxy_lr = 1e-3;

    // Verifier training and evaluation.
    std::size_t verifier_steps = 3000;
    std::size_t verifier_batch = 64;
    double verifier_lr = 1e-3;
    std::size_t identities = 200;
    std::size_t images_per_id = 10;
    std::size_t identity_blocks = 20;
    std::size_t folds = 10;
    std::vector<std::uint64_t> eval_seeds{1, 2, 3};
    FusionMode mode = FusionMode::both;
    bool abs_diff = false;
    bool l2_normalize = false;

    std::size_t threads = 1;
    bool deterministic = true;

    static RunConfig toy();
    /// Full-scale values: 224 px input, 2048-d features, batch 600, 80K steps,
    /// learning rate 1e-4, 1024 hidden units.
    static RunConfig paper_scale();
    static RunConfig from_preset(const std::string& name);

    /// Sets one key from its text value; throws ConfigError on unknown keys
    /// or malformed values.
    void set(const std::string& key, const std::string& value);
    std::map<std::string, std::string> to_map() const;

    std::string serialize() const;
    /// Applies `key=value` lines over *this. Blank lines and `#` comments are
    /// skipped.
    void apply(const std::string& text);
    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);

    AutoencoderConfig autoencoder() const;
    PerceptualConfig perceptual() const;
    VerifierConfig verifier() const;
    AutoencoderHyper autoencoder_hyper() const;
    PretrainHyper pretrain_hyper() const;
    VerifierHyper verifier_hyper() const;
    PairSetOptions pair_options() const;
    BenchmarkOptions benchmark() const;
};

}  // namespace fusiform
