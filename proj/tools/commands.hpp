#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fusiform/autoencoder.hpp"
#include "fusiform/config.hpp"
#include "fusiform/eval.hpp"
#include "fusiform/perceptual.hpp"
#include "fusiform/verifier.hpp"

namespace fusiform::cli {

/// Where a run keeps its artefacts. Everything defaults to a location under
/// the run directory so the pipeline can be driven with `--out` alone.
struct RunPaths {
    std::filesystem::path out;
    std::filesystem::path data;
    std::filesystem::path autoencoder;
    std::filesystem::path perceptual;
    std::filesystem::path verifier;

    static RunPaths under(const std::filesystem::path& out);
};

void cmd_gen_data(const RunConfig& config, const RunPaths& paths,
                  const std::optional<std::filesystem::path>& import_dir = std::nullopt);
AutoencoderTrainResult cmd_train_ae(const RunConfig& config, const RunPaths& paths, bool dump_reconstructions = false);
PretrainResult cmd_pretrain_perceptual(const RunConfig& config, const RunPaths& paths);
VerifierTrainResult cmd_train_verifier(const RunConfig& config, const RunPaths& paths);
void cmd_extract(const RunConfig& config, const RunPaths& paths);
/// Writes ablation.csv and summary.csv into the run directory.
std::vector<SeedResult> cmd_eval(const RunConfig& config, const RunPaths& paths);
void cmd_inspect(const std::filesystem::path& checkpoint, std::ostream& out);

/// Process entry point: parses flags, runs one command and maps failures to
/// distinct exit codes.
int run(int argc, char** argv);

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitMissingFile = 3,
    kExitCrc = 4,
    kExitFormat = 5,
    kExitIncompatible = 6,
    kExitDiverged = 7,
};

}  // namespace fusiform::cli
