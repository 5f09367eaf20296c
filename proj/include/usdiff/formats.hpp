#pragma once
// On-disk formats. Every multi-byte field is little-endian regardless of host.
//
//   PGM         binary "P5", maxval 255 only.
//   Tensor      "NDF1" | ndim u32 | dims u32[ndim] | float32[prod(dims)]
//   Checkpoint  "DDPMCKPT" | version u32 | count u32 |
//               count x (name_len u16 | name | tensor record) | crc32 u32
//   CIFAR-10    records of 1 label byte + 3072 channel-planar pixel bytes
//   RF          "key=value" lines, blank line, float32[elements * samples]
//
// Readers never return partial data: any violation raises a FormatError
// subclass naming the problem.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "usdiff/image.hpp"
#include "usdiff/rf.hpp"
#include "usdiff/tensor.hpp"

namespace usdiff {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Truncated file, trailing bytes, or payload size disagreeing with the header.
class LengthError : public FormatError {
 public:
  using FormatError::FormatError;
};

class CrcError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Malformed or unsupported header content.
class HeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MissingKeyError : public HeaderError {
 public:
  explicit MissingKeyError(const std::string& key)
      : HeaderError("missing header key '" + key + "'"), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Well-formed container holding an invalid value (label > 9, duplicate name, NaN…).
class ValueError : public FormatError {
 public:
  using FormatError::FormatError;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// PGM ----------------------------------------------------------------------

/// Returns an eight-bit-range image with integer sample values.
Image2D read_pgm(const std::filesystem::path& path);
Image2D decode_pgm(std::span<const std::uint8_t> bytes);
/// Non-eight-bit images are mapped affinely from their declared range, rounded
/// half away from zero and clamped to [0, 255].
void write_pgm(const std::filesystem::path& path, const Image2D& img);
std::vector<std::uint8_t> encode_pgm(const Image2D& img);

// Tensor -------------------------------------------------------------------

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);
void append_tensor_record(std::vector<std::uint8_t>& out, const Tensor& t);
/// Parses one tensor record starting at `offset`; advances offset past it.
Tensor parse_tensor_record(std::span<const std::uint8_t> bytes, std::size_t& offset);

// Checkpoint ---------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Tensor tensor;
};

std::vector<std::uint8_t> encode_checkpoint(std::span<const CheckpointEntry> entries);
std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const std::filesystem::path& path, std::span<const CheckpointEntry> entries);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// CIFAR-10 -----------------------------------------------------------------

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * kCifarSide * kCifarSide;

struct CifarSet {
  /// [1, 32, 32] when grayscale, else [3, 32, 32]; samples in [-1, 1].
  std::vector<Tensor> images;
  std::vector<std::uint8_t> labels;
};

CifarSet decode_cifar(std::span<const std::uint8_t> bytes, bool to_gray);
CifarSet load_cifar(const std::filesystem::path& path, bool to_gray);
/// Single-channel CIFAR tensor as a signed-unit image.
Image2D cifar_image(const Tensor& gray);

// RF frames ----------------------------------------------------------------

std::vector<std::uint8_t> encode_rf(const RFFrame& frame);
RFFrame decode_rf(std::span<const std::uint8_t> bytes);
void write_rf(const std::filesystem::path& path, const RFFrame& frame);
RFFrame read_rf(const std::filesystem::path& path);

// Image helpers used by the command line -------------------------------------

/// `.pgm` (eight-bit) or `.ndf` (2-D tensor [H, W], unit-interval), by extension.
Image2D load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image2D& img);

}  // namespace usdiff
