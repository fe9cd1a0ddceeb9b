#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "fusiform/fusiform.hpp"
#include "fusiform/synth.hpp"

namespace fusiform::cli {

/// Writes `dir/images/NNNNNN.fsfn` (one tensor each), `dir/index.tsv`
/// (id, file, nuisance fields) and `dir/pairs.tsv`.
void save_pair_set(const PairSet& set, const std::filesystem::path& dir);
PairSet load_pair_set(const std::filesystem::path& dir);

/// Reads `<root>/<identity>/<image>.{ppm,pgm,pnm}`, preprocesses every image
/// to `size` and pairs them. Identity directories are numbered in sorted
/// order; nuisance fields are left at their defaults.
PairSet import_image_tree(const std::filesystem::path& root, std::size_t size, Rng& rng, std::size_t blocks);

/// `features.bin` is a checkpoint-format container with tensors
/// `vc/N`, `vd/N`, `raw/N`; `features.tsv` maps image N to its identity and
/// the byte offset of its first record.
void save_features(const std::filesystem::path& dir, const PairSet& set, std::span<const FeatureRecord> records);
std::vector<FeatureRecord> load_features(const std::filesystem::path& dir);

}  // namespace fusiform::cli
