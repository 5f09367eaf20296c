#pragma once
// Valid sample files for every on-disk format and a catalogue of corrupted
// variants, each paired with the error class its reader must raise.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <typeinfo>
#include <vector>

#include "usdiff/formats.hpp"
#include "usdiff/rng.hpp"

namespace usdiff::testing {

using Bytes = std::vector<std::uint8_t>;

enum class FileKind { pgm, tensor, checkpoint, cifar, rf };

inline const char* kind_extension(FileKind k) {
  switch (k) {
    case FileKind::pgm: return ".pgm";
    case FileKind::tensor: return ".ndf";
    case FileKind::checkpoint: return ".ckpt";
    case FileKind::cifar: return ".bin";
    case FileKind::rf: return ".rf";
  }
  return "";
}

/// Reads `path` with the reader for `kind`, discarding the result.
inline void read_as(FileKind kind, const std::filesystem::path& path) {
  switch (kind) {
    case FileKind::pgm: (void)read_pgm(path); break;
    case FileKind::tensor: (void)read_tensor(path); break;
    case FileKind::checkpoint: (void)read_checkpoint(path); break;
    case FileKind::cifar: (void)load_cifar(path, true); break;
    case FileKind::rf: (void)read_rf(path); break;
  }
}

inline Image2D sample_pgm_image() {
  Image2D img(5, 3, ValueRange::eight_bit);
  for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = static_cast<float>((i * 37) % 256);
  return img;
}

inline Tensor sample_tensor() {
  Tensor t({2, 3, 4});
  SplitMix64 rng(1);
  for (float& v : t.values()) v = static_cast<float>(rng.normal());
  return t;
}

inline std::vector<CheckpointEntry> sample_entries() {
  return {{"enc0.conv1.weight", sample_tensor()}, {"out.bias", Tensor({3}, 0.25f)}};
}

inline Bytes sample_cifar(std::size_t records) {
  Bytes b;
  for (std::size_t r = 0; r < records; ++r) {
    b.push_back(static_cast<std::uint8_t>(r % 10));
    for (std::size_t i = 0; i < 3072; ++i) b.push_back(static_cast<std::uint8_t>((i + 7 * r) % 256));
  }
  return b;
}

inline RFFrame sample_frame() {
  TransducerGeometry g;
  g.element_count = 4;
  RFFrame f = make_frame(g, 16, 0.1);
  SplitMix64 rng(2);
  for (float& v : f.samples) v = static_cast<float>(rng.normal());
  return f;
}

inline Bytes tensor_bytes(const Tensor& t) {
  Bytes b;
  append_tensor_record(b, t);
  return b;
}

inline void put_u32(Bytes& b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

/// Recomputes the trailing checksum so a mutation is judged on content alone.
inline Bytes reseal(Bytes b) {
  const std::size_t body = b.size() - 4;
  put_u32(b, body, crc32(std::span(b).first(body)));
  return b;
}

inline Bytes rf_with_header(const std::string& header, std::size_t payload_floats) {
  Bytes b(header.begin(), header.end());
  b.resize(b.size() + 4 * payload_floats, 0);
  return b;
}

struct Mutation {
  std::string name;
  FileKind kind;
  Bytes bytes;
  /// Returns true when the exception has the expected class.
  std::function<bool(const std::exception&)> expected;
  std::string expected_name;
};

template <class E>
Mutation mutation(std::string name, FileKind kind, Bytes bytes) {
  return {std::move(name), kind, std::move(bytes),
          [](const std::exception& e) { return dynamic_cast<const E*>(&e) != nullptr; }, typeid(E).name()};
}

inline std::vector<Mutation> mutated_fixtures() {
  std::vector<Mutation> m;
  const Bytes pgm = encode_pgm(sample_pgm_image());
  const Bytes ten = tensor_bytes(sample_tensor());
  const Bytes ckpt = encode_checkpoint(sample_entries());
  const Bytes rf = encode_rf(sample_frame());
  const std::string rf_head = "elements=4\nsamples=16\nfs_hz=50000000\nc_mps=1540\npitch_m=0.000245\nf0_hz=8000000\nangle_rad=0.1\n";

  {
    Bytes b = pgm;
    b[1] = '2';
    m.push_back(mutation<MagicError>("pgm ascii magic", FileKind::pgm, b));
  }
  {
    const std::string s = "P5\n5 3\n65535\n";
    Bytes b(s.begin(), s.end());
    b.resize(b.size() + 30, 0);
    m.push_back(mutation<HeaderError>("pgm maxval 65535", FileKind::pgm, b));
  }
  m.push_back(mutation<LengthError>("pgm truncated payload", FileKind::pgm, Bytes(pgm.begin(), pgm.end() - 1)));
  {
    Bytes b = pgm;
    b.push_back(0);
    m.push_back(mutation<LengthError>("pgm trailing byte", FileKind::pgm, b));
  }
  {
    const std::string s = "P5\n5";
    m.push_back(mutation<HeaderError>("pgm header cut short", FileKind::pgm, Bytes(s.begin(), s.end())));
  }
  {
    const std::string s = "P5\nfive 3\n255\n";
    m.push_back(mutation<HeaderError>("pgm non-numeric width", FileKind::pgm, Bytes(s.begin(), s.end())));
  }

  {
    Bytes b = ten;
    b[0] = 'X';
    m.push_back(mutation<MagicError>("tensor bad magic", FileKind::tensor, b));
  }
  m.push_back(mutation<LengthError>("tensor truncated payload", FileKind::tensor, Bytes(ten.begin(), ten.end() - 3)));
  m.push_back(mutation<LengthError>("tensor truncated header", FileKind::tensor, Bytes(ten.begin(), ten.begin() + 6)));
  {
    Bytes b = ten;
    put_u32(b, 4, 5);
    m.push_back(mutation<HeaderError>("tensor rank 5", FileKind::tensor, b));
  }
  {
    Bytes b = ten;
    b.push_back(1);
    m.push_back(mutation<LengthError>("tensor trailing byte", FileKind::tensor, b));
  }
  {
    Bytes b = ten;
    put_u32(b, b.size() - 4, 0x7FC00000u);
    m.push_back(mutation<ValueError>("tensor NaN payload", FileKind::tensor, b));
  }

  {
    Bytes b = ckpt;
    b[b.size() / 2] ^= 0x01;
    m.push_back(mutation<CrcError>("checkpoint flipped payload byte", FileKind::checkpoint, b));
  }
  {
    Bytes b = ckpt;
    b[0] = 'X';
    m.push_back(mutation<MagicError>("checkpoint bad magic", FileKind::checkpoint, b));
  }
  m.push_back(mutation<LengthError>("checkpoint cut inside magic", FileKind::checkpoint, Bytes(ckpt.begin(), ckpt.begin() + 5)));
  {
    Bytes b = ckpt;
    put_u32(b, 8, 2);
    m.push_back(mutation<HeaderError>("checkpoint version 2", FileKind::checkpoint, reseal(b)));
  }
  {
    Bytes b = ckpt;
    put_u32(b, 12, 3);
    m.push_back(mutation<LengthError>("checkpoint overstated entry count", FileKind::checkpoint, reseal(b)));
  }
  {
    // Both entries renamed to the same 8-byte name.
    auto e = sample_entries();
    e[0].name = "aaaaaaaa";
    e[1].name = "bbbbbbbb";
    Bytes b = encode_checkpoint(e);
    for (std::size_t i = 0; i + 8 <= b.size(); ++i)
      if (std::memcmp(b.data() + i, "bbbbbbbb", 8) == 0) std::memcpy(b.data() + i, "aaaaaaaa", 8);
    m.push_back(mutation<ValueError>("checkpoint duplicate names", FileKind::checkpoint, reseal(b)));
  }

  {
    Bytes b = sample_cifar(2);
    b.pop_back();
    m.push_back(mutation<LengthError>("cifar partial record", FileKind::cifar, b));
  }
  {
    Bytes b = sample_cifar(2);
    b[3073] = 10;
    m.push_back(mutation<ValueError>("cifar label 10", FileKind::cifar, b));
  }

  {
    std::string h = rf_head;
    h.erase(h.find("c_mps=1540\n"), 11);
    m.push_back(mutation<MissingKeyError>("rf missing c_mps", FileKind::rf, rf_with_header(h + "\n", 64)));
  }
  m.push_back(mutation<LengthError>("rf payload short", FileKind::rf, Bytes(rf.begin(), rf.end() - 4)));
  m.push_back(mutation<LengthError>("rf payload long", FileKind::rf, rf_with_header(rf_head + "\n", 65)));
  m.push_back(mutation<HeaderError>("rf header unterminated", FileKind::rf, rf_with_header(rf_head, 0)));
  {
    std::string h = rf_head;
    h.replace(h.find("fs_hz=50000000"), 14, "fs_hz=fast");
    m.push_back(mutation<HeaderError>("rf non-numeric value", FileKind::rf, rf_with_header(h + "\n", 64)));
  }
  m.push_back(mutation<HeaderError>("rf empty file", FileKind::rf, Bytes{}));
  return m;
}

struct MutationOutcome {
  bool typed = false;   // raised the expected class
  std::string detail;
};

/// Writes the fixture to `dir` and runs its reader.
inline MutationOutcome run_mutation(const Mutation& m, const std::filesystem::path& dir, std::size_t index) {
  const auto path = dir / ("mutated_" + std::to_string(index) + kind_extension(m.kind));
  write_file_bytes(path, m.bytes);
  try {
    read_as(m.kind, path);
    return {false, "read succeeded"};
  } catch (const std::exception& e) {
    if (m.expected(e)) return {true, e.what()};
    return {false, std::string("wrong error: ") + e.what()};
  }
}

}  // namespace usdiff::testing
