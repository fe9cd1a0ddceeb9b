#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "fusiform/autoencoder.hpp"
#include "fusiform/checkpoint.hpp"
#include "fusiform/config.hpp"
#include "fusiform/perceptual.hpp"
#include "fusiform/verifier.hpp"

namespace fusiform::cli {

/// Sign convention recorded with every extractor-dependent checkpoint.
inline constexpr const char* kVdSign = "original_minus_reconstruction";

/// Config text followed by a `[model]` section of key=value metadata.
std::string make_blob(const RunConfig& config, const std::map<std::string, std::string>& meta);

struct Blob {
    RunConfig config;
    std::map<std::string, std::string> meta;
};
Blob parse_blob(const std::string& text);

void save_autoencoder(const std::filesystem::path& path, const RunConfig& config, const AutoencoderModel& model);
void save_perceptual(const std::filesystem::path& path, const RunConfig& config, const PerceptualModel& model);
void save_verifier(const std::filesystem::path& path, const RunConfig& config, const VerifierModel& model);

/// Loaders check the stored model kind and architecture against `config`
/// and throw CompatibilityError naming the first disagreeing key.
AutoencoderModel load_autoencoder(const std::filesystem::path& path, const RunConfig& config);
PerceptualModel load_perceptual(const std::filesystem::path& path, const RunConfig& config);
VerifierModel load_verifier(const std::filesystem::path& path, const RunConfig& config);

}  // namespace fusiform::cli
