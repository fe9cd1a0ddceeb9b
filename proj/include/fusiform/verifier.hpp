#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusiform/fusiform.hpp"
#include "fusiform/graph.hpp"
#include "fusiform/layers.hpp"
#include "fusiform/optim.hpp"
#include "fusiform/synth.hpp"
#include "fusiform/tensor.hpp"

namespace fusiform {

/// Which feature blocks the verifier sees. `perceptual_raw` is the
/// perceptual-only baseline: the v_d slot carries raw perceive(I) features.
enum class FusionMode { both, vc_only, vd_only, perceptual_raw };

inline constexpr std::array<FusionMode, 4> kAllModes{FusionMode::both, FusionMode::vc_only, FusionMode::vd_only,
                                                      FusionMode::perceptual_raw};

std::string to_string(FusionMode mode);
FusionMode fusion_mode_from_string(const std::string& s);

bool uses_vc(FusionMode mode);
bool uses_vd(FusionMode mode);

/// Input width of the verifier: two blocks (difference, product) per enabled
/// feature vector.
std::size_t fused_width(FusionMode mode, std::size_t vc_dim, std::size_t vd_dim);

/// The bundle fed to fuse() for `mode`: for perceptual_raw the v_d slot is
/// replaced by the raw perceptual features.
FeatureBundle bundle_for_mode(const FeatureRecord& record, FusionMode mode);

/// [vc_a - vc_b, vc_a * vc_b, vd_a - vd_b, vd_a * vd_b], keeping only the
/// blocks enabled by `mode`. With abs_diff the differences are |a - b|.
Tensor fuse(const FeatureBundle& a, const FeatureBundle& b, FusionMode mode, bool abs_diff = false);

/// Graph form of fuse() over batched [N, D] feature inputs.
template <typename T>
BasicVar<T> fuse_graph(BasicVar<T> vc_a, BasicVar<T> vc_b, BasicVar<T> vd_a, BasicVar<T> vd_b, FusionMode mode,
                       bool abs_diff = false)
{
    std::vector<BasicVar<T>> parts;
    auto add = [&](BasicVar<T> a, BasicVar<T> b) {
        BasicVar<T> d = sub(a, b);
        parts.push_back(abs_diff ? fusiform::abs(d) : d);
        parts.push_back(mul(a, b));
    };
    if (uses_vc(mode)) add(vc_a, vc_b);
    if (uses_vd(mode)) add(vd_a, vd_b);
    return concat(std::span<const BasicVar<T>>(parts));
}

struct VerifierConfig {
    FusionMode mode = FusionMode::both;
    std::size_t vc_dim = 64;
    std::size_t vd_dim = 64;
    std::size_t hidden = 128;
    bool abs_diff = false;

    std::size_t input_width() const { return fused_width(mode, vc_dim, vd_dim); }
};

/// dense(width -> hidden) -> relu -> dense(hidden -> 1) -> sigmoid.
template <typename T>
class BasicVerifier {
public:
    BasicVerifier(VerifierConfig config, std::uint64_t seed);
    BasicVerifier(VerifierConfig config, std::vector<BasicParameter<T>> params);

    static std::vector<std::pair<std::string, Shape>> parameter_layout(const VerifierConfig& config);

    const VerifierConfig& config() const noexcept { return config_; }

    /// Fused rows [N, width] -> scores [N] in (0, 1).
    BasicTensor<T> predict(const BasicTensor<T>& fused) const;
    /// One fused vector [width] -> score.
    T predict_one(const BasicTensor<T>& fused) const;

    /// Records the head on `g` with tracked parameters; returns [N, 1].
    BasicVar<T> forward(Graph<T>& g, BasicVar<T> fused);

    std::vector<BasicParameter<T>>& parameters() noexcept { return params_; }
    const std::vector<BasicParameter<T>>& parameters() const noexcept { return params_; }

private:
    BasicVar<T> head(BasicVar<T> fused, const ParamBinder<T>& bind) const;

    VerifierConfig config_;
    std::vector<BasicParameter<T>> params_;
};

using VerifierModel = BasicVerifier<float>;

/// Fused rows plus labels, ready for the head.
struct FusedDataset {
    Tensor rows;  // [P, width]
    std::vector<int> labels;
};

/// Fuses the listed pairs of `set`, looking features up by image index.
FusedDataset build_fused_dataset(const PairSet& set, std::span<const FeatureRecord> features,
                                 std::span<const std::size_t> pair_indices, FusionMode mode, bool abs_diff = false);

struct VerifierHyper {
    AdamHyper adam{1e-3};
    std::size_t batch = 64;
    std::size_t steps = 3000;
    std::uint64_t seed = 0;
};

struct VerifierTrainResult {
    std::vector<double> loss_history;
    double train_accuracy = 0.0;
    /// Non-fatal issues, e.g. an unbalanced label distribution.
    std::vector<std::string> warnings;
};

/// BCE training of the head on precomputed fused rows.
VerifierTrainResult train_verifier(VerifierModel& model, const FusedDataset& data, const VerifierHyper& hyper);

/// Fraction of rows whose decision (score >= 0.5) matches the label.
double accuracy(const VerifierModel& model, const FusedDataset& data);

inline constexpr float kDecisionThreshold = 0.5f;

struct Verification {
    float score = 0.0f;
    bool same = false;  // score >= 0.5
};

/// End to end: extract both images, fuse in the given order, predict.
Verification verify(const VerifierModel& model, const ImageCodec& codec, const PerceptualModel& perceptual,
                    const Tensor& image_a, const Tensor& image_b);

}  // namespace fusiform
