#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fusiform/tensor.hpp"

namespace fusiform {

/// An input file or directory does not exist.
class MissingFileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Truncated file, bad magic or unsupported version.
class CheckpointFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Trailing CRC32 does not match the payload.
class CrcMismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Checkpoint contents disagree with the requested configuration.
class CompatibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, all integers little-endian u32:
///
///   "FSFN" | version | config length | config bytes | tensor count |
///   per tensor: name length | name | rank | dims... | f32 data |
///   CRC32 of every preceding byte
struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string config;
    std::vector<Parameter> tensors;

    const Parameter& tensor(const std::string& name) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const std::string& config, std::span<const Parameter> tensors);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const std::string& config, std::span<const Parameter> tensors);
Checkpoint load_checkpoint(const std::string& path);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace fusiform
