#include "model_io.hpp"

#include <sstream>
#include <vector>

namespace fusiform::cli {

namespace {

constexpr const char* kSection = "[model]";

void require_file(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw MissingFileError("missing checkpoint '" + path.string() + "'");
}

void require_kind(const Blob& blob, const std::string& kind, const std::filesystem::path& path)
{
    const auto it = blob.meta.find("kind");
    if (it == blob.meta.end() || it->second != kind) {
        throw CompatibilityError("'" + path.string() + "' is not a " + kind + " checkpoint");
    }
}

void require_same(const RunConfig& stored, const RunConfig& wanted, std::initializer_list<const char*> keys,
                  const std::filesystem::path& path)
{
    const auto a = stored.to_map();
    const auto b = wanted.to_map();
    for (const char* k : keys) {
        if (a.at(k) != b.at(k)) {
            throw CompatibilityError("checkpoint '" + path.string() + "' has " + k + "=" + a.at(k) +
                                     " but the config has " + k + "=" + b.at(k));
        }
    }
}

}  // namespace

std::string make_blob(const RunConfig& config, const std::map<std::string, std::string>& meta)
{
    std::string out = config.serialize();
    out += kSection;
    out += '\n';
    for (const auto& [k, v] : meta) out += k + "=" + v + "\n";
    return out;
}

Blob parse_blob(const std::string& text)
{
    const auto split = text.find(std::string(kSection) + "\n");
    Blob blob;
    blob.config = RunConfig::parse(text.substr(0, split));
    if (split == std::string::npos) return blob;
    std::istringstream in(text.substr(split + std::string(kSection).size() + 1));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) blob.meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return blob;
}

void save_autoencoder(const std::filesystem::path& path, const RunConfig& config, const AutoencoderModel& model)
{
    save_checkpoint(path.string(), make_blob(config, {{"kind", "autoencoder"}}), model.parameters());
}

void save_perceptual(const std::filesystem::path& path, const RunConfig& config, const PerceptualModel& model)
{
    save_checkpoint(path.string(),
                    make_blob(config, {{"kind", "perceptual"}, {"provenance", to_string(model.provenance())}}),
                    model.parameters());
}

void save_verifier(const std::filesystem::path& path, const RunConfig& config, const VerifierModel& model)
{
    const auto& c = model.config();
    save_checkpoint(path.string(),
                    make_blob(config, {{"kind", "verifier"},
                                       {"mode", to_string(c.mode)},
                                       {"abs_diff", c.abs_diff ? "true" : "false"},
                                       {"vd_sign", kVdSign}}),
                    model.parameters());
}

AutoencoderModel load_autoencoder(const std::filesystem::path& path, const RunConfig& config)
{
    require_file(path);
    const Checkpoint ck = load_checkpoint(path.string());
    const Blob blob = parse_blob(ck.config);
    require_kind(blob, "autoencoder", path);
    require_same(blob.config, config, {"image_size", "bottleneck_dim", "ae_channels"}, path);
    AutoencoderModel model(config.autoencoder(), ck.tensors);
    model.set_frozen(true);
    return model;
}

PerceptualModel load_perceptual(const std::filesystem::path& path, const RunConfig& config)
{
    require_file(path);
    const Checkpoint ck = load_checkpoint(path.string());
    const Blob blob = parse_blob(ck.config);
    require_kind(blob, "perceptual", path);
    require_same(blob.config, config, {"image_size", "perceptual_channels", "perceptual_strides"}, path);
    const auto prov = blob.meta.find("provenance");
    if (prov == blob.meta.end()) throw CompatibilityError("perceptual checkpoint lacks a provenance field");
    return PerceptualModel(config.perceptual(), ck.tensors, provenance_from_string(prov->second));
}

VerifierModel load_verifier(const std::filesystem::path& path, const RunConfig& config)
{
    require_file(path);
    const Checkpoint ck = load_checkpoint(path.string());
    const Blob blob = parse_blob(ck.config);
    require_kind(blob, "verifier", path);
    require_same(blob.config, config, {"bottleneck_dim", "perceptual_channels", "verifier_hidden"}, path);
    if (blob.meta.count("vd_sign") == 0 || blob.meta.at("vd_sign") != kVdSign) {
        throw CompatibilityError("verifier checkpoint was trained with a different v_d sign convention");
    }
    VerifierConfig vc = config.verifier();
    vc.mode = fusion_mode_from_string(blob.meta.at("mode"));
    vc.abs_diff = blob.meta.at("abs_diff") == "true";
    return VerifierModel(vc, ck.tensors);
}

}  // namespace fusiform::cli
