#include "fusiform/verifier.hpp"

#include <algorithm>
#include <cmath>

namespace fusiform {

std::string to_string(FusionMode mode)
{
    switch (mode) {
    case FusionMode::both: return "both";
    case FusionMode::vc_only: return "vc_only";
    case FusionMode::vd_only: return "vd_only";
    case FusionMode::perceptual_raw: return "perceptual_raw";
    }
    return "unknown";
}

FusionMode fusion_mode_from_string(const std::string& s)
{
    for (FusionMode m : kAllModes) {
        if (to_string(m) == s) return m;
    }
    throw std::invalid_argument("unknown fusion mode '" + s + "'");
}

bool uses_vc(FusionMode mode) { return mode == FusionMode::both || mode == FusionMode::vc_only; }

bool uses_vd(FusionMode mode) { return mode != FusionMode::vc_only; }

std::size_t fused_width(FusionMode mode, std::size_t vc_dim, std::size_t vd_dim)
{
    return (uses_vc(mode) ? 2 * vc_dim : 0) + (uses_vd(mode) ? 2 * vd_dim : 0);
}

FeatureBundle bundle_for_mode(const FeatureRecord& record, FusionMode mode)
{
    if (mode == FusionMode::perceptual_raw) return {record.bundle.vc, record.raw};
    return record.bundle;
}

namespace {

void append_blocks(const Tensor& a, const Tensor& b, bool abs_diff, std::vector<float>& out, const char* what)
{
    if (a.size() != b.size()) throw ShapeError(std::string("fuse: ") + what + " lengths differ", a.shape(), b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const float d = a[i] - b[i];
        out.push_back(abs_diff ? std::fabs(d) : d);
    }
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] * b[i]);
}

}  // namespace

Tensor fuse(const FeatureBundle& a, const FeatureBundle& b, FusionMode mode, bool abs_diff)
{
    std::vector<float> out;
    if (uses_vc(mode)) append_blocks(a.vc, b.vc, abs_diff, out, "v_c");
    if (uses_vd(mode)) append_blocks(a.vd, b.vd, abs_diff, out, "v_d");
    const std::size_t n = out.size();
    return Tensor(Shape{n}, std::move(out));
}

// ---------------------------------------------------------------------------

template <typename T>
std::vector<std::pair<std::string, Shape>> BasicVerifier<T>::parameter_layout(const VerifierConfig& c)
{
    const std::size_t w = c.input_width();
    if (w == 0 || c.hidden == 0) throw UsageError("verifier needs a positive input width and hidden size");
    return {{"hidden.weight", Shape{w, c.hidden}},
            {"hidden.bias", Shape{c.hidden}},
            {"output.weight", Shape{c.hidden, 1}},
            {"output.bias", Shape{1}}};
}

template <typename T>
BasicVerifier<T>::BasicVerifier(VerifierConfig config, std::uint64_t seed) : config_(config)
{
    Rng rng(seed);
    for (auto& [name, shape] : parameter_layout(config_)) {
        if (name.ends_with(".bias")) {
            params_.emplace_back(name, BasicTensor<T>(shape));
        } else {
            params_.emplace_back(name, he_uniform<T>(shape, shape[0], rng));
        }
    }
}

template <typename T>
BasicVerifier<T>::BasicVerifier(VerifierConfig config, std::vector<BasicParameter<T>> params) : config_(config)
{
    const auto layout = parameter_layout(config_);
    if (params.size() != layout.size()) {
        throw ShapeError("verifier expects " + std::to_string(layout.size()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    for (const auto& [name, shape] : layout) {
        auto it = std::find_if(params.begin(), params.end(), [&](const auto& p) { return p.name == name; });
        if (it == params.end()) throw std::out_of_range("no parameter named '" + name + "'");
        if (it->value.shape() != shape) {
            throw ShapeError("verifier parameter '" + name + "' has the wrong shape", shape, it->value.shape());
        }
        params_.emplace_back(name, it->value, it->trainable);
    }
}

template <typename T>
BasicVar<T> BasicVerifier<T>::head(BasicVar<T> fused, const ParamBinder<T>& bind) const
{
    const auto& s = fused.shape();
    if (s.size() != 2 || s[1] != config_.input_width()) {
        throw ShapeError("verifier input width mismatch for mode " + to_string(config_.mode),
                         Shape{s.empty() ? 0 : s[0], config_.input_width()}, s);
    }
    BasicVar<T> h = relu(dense(fused, bind(0), bind(1)));
    return sigmoid(dense(h, bind(2), bind(3)));
}

template <typename T>
BasicVar<T> BasicVerifier<T>::forward(Graph<T>& g, BasicVar<T> fused)
{
    return head(fused, bind_trainable(g, params_));
}

template <typename T>
BasicTensor<T> BasicVerifier<T>::predict(const BasicTensor<T>& fused) const
{
    Graph<T> g;
    BasicVar<T> out = head(g.input(fused), bind_constant(g, params_));
    return out.value().reshaped(Shape{out.value().size()});
}

template <typename T>
T BasicVerifier<T>::predict_one(const BasicTensor<T>& fused) const
{
    if (fused.rank() != 1) throw ShapeError("predict_one expects a fused vector, got " + shape_str(fused.shape()));
    return predict(fused.reshaped(Shape{1, fused.size()}))[0];
}

template class BasicVerifier<float>;
template class BasicVerifier<double>;

// ---------------------------------------------------------------------------

FusedDataset build_fused_dataset(const PairSet& set, std::span<const FeatureRecord> features,
                                 std::span<const std::size_t> pair_indices, FusionMode mode, bool abs_diff)
{
    if (features.size() != set.images.size()) {
        throw UsageError("build_fused_dataset: one feature record per image is required");
    }
    if (pair_indices.empty()) throw UsageError("build_fused_dataset: no pairs selected");
    FusedDataset out;
    std::vector<float> rows;
    std::size_t width = 0;
    for (std::size_t idx : pair_indices) {
        const LabeledPair& p = set.pairs.at(idx);
        const Tensor f = fuse(bundle_for_mode(features[p.image_a], mode), bundle_for_mode(features[p.image_b], mode),
                              mode, abs_diff);
        width = f.size();
        rows.insert(rows.end(), f.data().begin(), f.data().end());
        out.labels.push_back(p.label);
    }
    out.rows = Tensor(Shape{pair_indices.size(), width}, std::move(rows));
    return out;
}

VerifierTrainResult train_verifier(VerifierModel& model, const FusedDataset& data, const VerifierHyper& hyper)
{
    const std::size_t n = data.labels.size();
    if (n == 0 || data.rows.rank() != 2 || data.rows.dim(0) != n) {
        throw UsageError("train_verifier: rows and labels disagree");
    }
    const std::size_t width = data.rows.dim(1);
    if (width != model.config().input_width()) {
        throw ShapeError("train_verifier: fused width does not match the model", Shape{n, model.config().input_width()},
                         data.rows.shape());
    }

    VerifierTrainResult result;
    const auto positives = static_cast<std::size_t>(std::count(data.labels.begin(), data.labels.end(), 1));
    const double balance = static_cast<double>(positives) / static_cast<double>(n);
    if (balance < 0.4 || balance > 0.6) {
        result.warnings.push_back("unbalanced training pairs: " + std::to_string(positives) + " of " +
                                  std::to_string(n) + " are matches");
    }

    Adam adam(parameter_pointers(model.parameters()), hyper.adam);
    BatchSampler sampler(n, hyper.batch, derive_seed(hyper.seed, 0xbce));
    result.loss_history.reserve(hyper.steps);
    for (std::size_t step = 1; step <= hyper.steps; ++step) {
        const auto idx = sampler.next();
        Tensor batch(Shape{idx.size(), width});
        Tensor labels(Shape{idx.size()});
        for (std::size_t r = 0; r < idx.size(); ++r) {
            std::copy_n(data.rows.data().data() + idx[r] * width, width, batch.data().data() + r * width);
            labels[r] = static_cast<float>(data.labels[idx[r]]);
        }
        adam.zero_grad();
        Graph<float> g;
        Var score = model.forward(g, g.input(std::move(batch)));
        Var loss = bce_loss(score, g.input(std::move(labels)));
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
            throw DivergenceError("verifier loss became non-finite at step " + std::to_string(step));
        }
        g.backward(loss);
        adam.step();
        result.loss_history.push_back(value);
    }
    result.train_accuracy = accuracy(model, data);
    return result;
}

double accuracy(const VerifierModel& model, const FusedDataset& data)
{
    if (data.labels.empty()) throw UsageError("accuracy: empty dataset");
    const Tensor scores = model.predict(data.rows);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        const int decision = scores[i] >= kDecisionThreshold ? 1 : 0;
        if (decision == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.labels.size());
}

Verification verify(const VerifierModel& model, const ImageCodec& codec, const PerceptualModel& perceptual,
                    const Tensor& image_a, const Tensor& image_b)
{
    const std::array<Tensor, 2> images{image_a, image_b};
    const auto records = extract_batch(images, codec, perceptual);
    const FusionMode mode = model.config().mode;
    const Tensor fused =
        fuse(bundle_for_mode(records[0], mode), bundle_for_mode(records[1], mode), mode, model.config().abs_diff);
    const float score = model.predict_one(fused);
    return {score, score >= kDecisionThreshold};
}

}  // namespace fusiform
