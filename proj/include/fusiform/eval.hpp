#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fusiform/fusiform.hpp"
#include "fusiform/synth.hpp"
#include "fusiform/verifier.hpp"

namespace fusiform {

/// No identity-disjoint k-way split exists within the size tolerance.
class InfeasibleSplitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fold contents as sorted pair indices.
using Folds = std::vector<std::vector<std::size_t>>;

/// Identity-disjoint k-fold split: identities linked by any pair form a
/// component, and whole components are placed greedily into the least
/// loaded fold. Fold sizes must land within +-20% of the mean.
Folds kfold_split(const PairSet& set, std::size_t k, Rng& rng);

/// Order-sensitive hash of a fold assignment, for paired-comparison checks.
std::uint64_t fold_hash(const Folds& folds);

struct FoldReport {
    std::size_t fold_index = 0;
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t n_pairs = 0;
    float threshold = kDecisionThreshold;
};

struct EvalSummary {
    FusionMode mode = FusionMode::both;
    double mean = 0.0;
    double std = 0.0;  // sample (n-1) standard deviation; 0 for a single fold
    std::vector<FoldReport> folds;
};

/// Arithmetic mean and sample standard deviation over fold accuracies.
EvalSummary summarize(std::span<const FoldReport> reports, FusionMode mode = FusionMode::both);

struct AblationOptions {
    std::size_t hidden = 128;
    bool abs_diff = false;
    VerifierHyper hyper;
    std::uint64_t seed = 0;
    /// Folds run on this many threads unless `deterministic` is set.
    std::size_t threads = 1;
    bool deterministic = true;
};

/// Trains a fresh verifier on the training folds and scores the test fold
/// at the fixed 0.5 threshold.
FoldReport evaluate_fold(const PairSet& set, std::span<const FeatureRecord> features, const Folds& folds,
                         std::size_t test_fold, FusionMode mode, const AblationOptions& options);

struct AblationTable {
    std::vector<EvalSummary> summaries;  // one per mode, in request order
    std::uint64_t fold_hash = 0;
    /// Fold hash observed by each mode; all equal by construction.
    std::vector<std::uint64_t> mode_fold_hashes;
};

AblationTable run_ablation(const PairSet& set, std::span<const FeatureRecord> features, const Folds& folds,
                           std::span<const FusionMode> modes, const AblationOptions& options);

// ---------------------------------------------------------------------------
// Multi-seed benchmark over fixed extractors.

struct BenchmarkOptions {
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::size_t identities = 200;
    std::size_t images_per_id = 10;  // 2 * 200 * 10 = 4000 pairs
    std::size_t folds = 10;
    PairSetOptions pair_options;
    AblationOptions ablation;
    ExtractOptions extract;
    std::vector<FusionMode> modes{kAllModes.begin(), kAllModes.end()};
};

struct SeedResult {
    std::uint64_t seed = 0;
    AblationTable table;
};

struct BenchmarkResult {
    std::vector<SeedResult> runs;
    /// Per mode: mean over seeds of the per-seed fold mean.
    std::vector<std::pair<FusionMode, double>> mean_across_seeds;
};

/// Folds and verifier seeds for one benchmark seed over a fixed pair set
/// and its extracted features.
SeedResult ablate_seed(const PairSet& set, std::span<const FeatureRecord> features, std::uint64_t seed,
                       const BenchmarkOptions& options);

/// Per mode, the mean over runs of the per-run fold mean.
std::vector<std::pair<FusionMode, double>> mean_across_seeds(std::span<const SeedResult> runs);

/// Regenerates the pair set for every seed, extracts features with the fixed
/// extractors and runs the ablation.
BenchmarkResult run_benchmark(const ImageCodec& codec, const PerceptualModel& perceptual,
                              const BenchmarkOptions& options);

// ---------------------------------------------------------------------------
// CSV output. Numbers use the C locale and 17 significant digits so every
// summary value can be recomputed from the per-fold rows.

void write_ablation_csv(std::ostream& out, std::span<const SeedResult> runs);
void write_summary_csv(std::ostream& out, std::span<const SeedResult> runs);

}  // namespace fusiform
