#include "usdiff/formats.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string_view>

namespace usdiff {

void TransducerGeometry::validate() const {
  if (element_count == 0 || !(pitch > 0) || !(sampling_rate > 0) || !(sound_speed > 0) ||
      !(center_frequency > 0)) {
    throw std::invalid_argument("transducer geometry: every field must be positive");
  }
}

void RFFrame::validate() const {
  geometry.validate();
  if (samples_per_element == 0) throw std::invalid_argument("RF frame: no samples");
  if (samples.size() != geometry.element_count * samples_per_element) {
    throw std::invalid_argument("RF frame: sample count is not elements x samples");
  }
  if (!(std::fabs(steer_angle) < std::numbers::pi / 4)) {
    throw std::invalid_argument("RF frame: steering angle must satisfy |angle| < pi/4");
  }
}

RFFrame make_frame(const TransducerGeometry& geometry, std::size_t samples_per_element,
                   double steer_angle) {
  RFFrame f;
  f.geometry = geometry;
  f.samples_per_element = samples_per_element;
  f.steer_angle = steer_angle;
  f.samples.assign(geometry.element_count * samples_per_element, 0.0f);
  return f;
}

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

float get_f32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::bit_cast<float>(get_u32(b, at));
}

void need(std::span<const std::uint8_t> b, std::size_t offset, std::size_t count, const char* what) {
  if (offset > b.size() || b.size() - offset < count) {
    throw LengthError(std::string(what) + ": truncated (need " + std::to_string(count) +
                      " bytes at offset " + std::to_string(offset) + ", have " +
                      std::to_string(b.size() > offset ? b.size() - offset : 0) + ")");
  }
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error while writing '" + path.string() + "'");
}

// PGM ----------------------------------------------------------------------

namespace {

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::string pgm_token(std::span<const std::uint8_t> b, std::size_t& pos) {
  while (pos < b.size()) {
    if (is_space(b[pos])) {
      ++pos;
    } else if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < b.size() && !is_space(b[pos]) && b[pos] != '#') tok.push_back(static_cast<char>(b[pos++]));
  if (tok.empty()) throw HeaderError("pgm: header ended early");
  return tok;
}

std::size_t pgm_number(const std::string& tok, const char* what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw HeaderError(std::string("pgm: bad ") + what + " '" + tok + "'");
  }
  return v;
}

}  // namespace

Image2D decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw MagicError("pgm: expected 'P5' magic");
  std::size_t pos = 2;
  if (pos < bytes.size() && !is_space(bytes[pos]) && bytes[pos] != '#') throw MagicError("pgm: expected 'P5' magic");
  const std::size_t width = pgm_number(pgm_token(bytes, pos), "width");
  const std::size_t height = pgm_number(pgm_token(bytes, pos), "height");
  const std::size_t maxval = pgm_number(pgm_token(bytes, pos), "maxval");
  if (width == 0 || height == 0) throw HeaderError("pgm: zero dimension");
  if (width > (1u << 16) || height > (1u << 16)) throw HeaderError("pgm: dimensions too large");
  if (maxval != 255) throw HeaderError("pgm: maxval " + std::to_string(maxval) + " unsupported (only 255)");
  if (pos >= bytes.size() || !is_space(bytes[pos])) throw LengthError("pgm: missing payload");
  ++pos;
  const std::size_t n = width * height;
  if (bytes.size() - pos < n) throw LengthError("pgm: payload truncated");
  if (bytes.size() - pos > n) throw LengthError("pgm: trailing bytes after payload");
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(bytes[pos + i]);
  return Image2D(width, height, std::move(data), ValueRange::eight_bit);
}

Image2D read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file_bytes(path)); }

std::vector<std::uint8_t> encode_pgm(const Image2D& img) {
  if (img.empty()) throw std::invalid_argument("pgm: empty image");
  if (!img.all_finite()) throw std::invalid_argument("pgm: image has non-finite samples");
  const Image2D eight = convert_range(img, ValueRange::eight_bit);
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (float v : eight.pixels()) {
    const double q = std::round(static_cast<double>(v));  // half away from zero
    out.push_back(static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0)));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Image2D& img) {
  write_file_bytes(path, encode_pgm(img));
}

// Tensor -------------------------------------------------------------------

void append_tensor_record(std::vector<std::uint8_t>& out, const Tensor& t) {
  out.insert(out.end(), {'N', 'D', 'F', '1'});
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.dims()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("tensor: extent too large");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  out.reserve(out.size() + 4 * t.size());
  for (float v : t.values()) put_f32(out, v);
}

Tensor parse_tensor_record(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  need(bytes, offset, 8, "tensor");
  if (std::memcmp(bytes.data() + offset, "NDF1", 4) != 0) throw MagicError("tensor: expected 'NDF1' magic");
  const std::uint32_t ndim = get_u32(bytes, offset + 4);
  if (ndim > Tensor::kMaxRank) throw HeaderError("tensor: rank " + std::to_string(ndim) + " above 4");
  offset += 8;
  need(bytes, offset, 4 * std::size_t{ndim}, "tensor dims");
  std::vector<std::size_t> dims(ndim);
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    dims[i] = get_u32(bytes, offset + 4 * i);
    count *= dims[i];
    if (count > (std::uint64_t{1} << 34)) throw HeaderError("tensor: element count too large");
  }
  offset += 4 * std::size_t{ndim};
  need(bytes, offset, 4 * static_cast<std::size_t>(count), "tensor payload");
  std::vector<float> data(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = get_f32(bytes, offset + 4 * i);
    if (!std::isfinite(data[i])) throw ValueError("tensor: non-finite value at element " + std::to_string(i));
  }
  offset += 4 * data.size();
  return Tensor(std::move(dims), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::vector<std::uint8_t> out;
  append_tensor_record(out, t);
  write_file_bytes(path, out);
}

Tensor read_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t offset = 0;
  Tensor t = parse_tensor_record(bytes, offset);
  if (offset != bytes.size()) throw LengthError("tensor: trailing bytes after payload");
  return t;
}

// Checkpoint ---------------------------------------------------------------

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = ::crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {
constexpr char kCkptMagic[8] = {'D', 'D', 'P', 'M', 'C', 'K', 'P', 'T'};
}

std::vector<std::uint8_t> encode_checkpoint(std::span<const CheckpointEntry> entries) {
  std::vector<std::uint8_t> out(std::begin(kCkptMagic), std::end(kCkptMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.name.empty() || e.name.size() > 0xFFFF) throw std::invalid_argument("checkpoint: bad entry name length");
    if (!seen.insert(e.name).second) throw std::invalid_argument("checkpoint: duplicate entry '" + e.name + "'");
    put_u16(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    append_tensor_record(out, e.tensor);
  }
  put_u32(out, crc32(out));
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (!bytes.empty() && std::memcmp(bytes.data(), kCkptMagic, std::min<std::size_t>(bytes.size(), 8)) != 0) {
    throw MagicError("checkpoint: expected 'DDPMCKPT' magic");
  }
  need(bytes, 0, 20, "checkpoint header");
  const std::size_t body = bytes.size() - 4;
  const std::uint32_t stored = get_u32(bytes, body);
  if (crc32(bytes.first(body)) != stored) throw CrcError("checkpoint: CRC32 mismatch");
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kCheckpointVersion) throw HeaderError("checkpoint: unsupported version " + std::to_string(version));
  const std::uint32_t count = get_u32(bytes, 12);
  const auto payload = bytes.first(body);
  std::size_t offset = 16;
  std::vector<CheckpointEntry> entries;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    need(payload, offset, 2, "checkpoint entry name");
    const std::uint16_t len = get_u16(payload, offset);
    offset += 2;
    need(payload, offset, len, "checkpoint entry name");
    std::string name(reinterpret_cast<const char*>(payload.data() + offset), len);
    offset += len;
    if (name.empty()) throw ValueError("checkpoint: empty entry name");
    if (!seen.insert(name).second) throw ValueError("checkpoint: duplicate entry '" + name + "'");
    Tensor t = parse_tensor_record(payload, offset);
    entries.push_back({std::move(name), std::move(t)});
  }
  if (offset != body) throw LengthError("checkpoint: bytes left over after the last entry");
  return entries;
}

void write_checkpoint(const std::filesystem::path& path, std::span<const CheckpointEntry> entries) {
  write_file_bytes(path, encode_checkpoint(entries));
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

// CIFAR-10 -----------------------------------------------------------------

CifarSet decode_cifar(std::span<const std::uint8_t> bytes, bool to_gray) {
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw LengthError("cifar: file length " + std::to_string(bytes.size()) +
                      " is not a positive multiple of " + std::to_string(kCifarRecordBytes));
  }
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  const std::size_t plane = kCifarSide * kCifarSide;
  CifarSet set;
  set.images.reserve(records);
  set.labels.reserve(records);
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) throw ValueError("cifar: record " + std::to_string(r) + " has label " + std::to_string(rec[0]));
    const std::uint8_t* px = rec + 1;
    if (to_gray) {
      std::vector<float> data(plane);
      for (std::size_t i = 0; i < plane; ++i) {
        const double mean = (static_cast<double>(px[i]) + px[plane + i] + px[2 * plane + i]) / 3.0;
        data[i] = static_cast<float>(mean / 127.5 - 1.0);
      }
      set.images.emplace_back(std::vector<std::size_t>{1, kCifarSide, kCifarSide}, std::move(data));
    } else {
      std::vector<float> data(3 * plane);
      for (std::size_t i = 0; i < 3 * plane; ++i) data[i] = static_cast<float>(px[i] / 127.5 - 1.0);
      set.images.emplace_back(std::vector<std::size_t>{3, kCifarSide, kCifarSide}, std::move(data));
    }
    set.labels.push_back(rec[0]);
  }
  return set;
}

CifarSet load_cifar(const std::filesystem::path& path, bool to_gray) {
  return decode_cifar(read_file_bytes(path), to_gray);
}

Image2D cifar_image(const Tensor& gray) {
  if (gray.rank() != 3 || gray.dim(0) != 1) throw std::invalid_argument("cifar_image: expected [1, H, W]");
  return Image2D(gray.dim(2), gray.dim(1), std::vector<float>(gray.values().begin(), gray.values().end()),
                 ValueRange::signed_unit);
}

// RF -----------------------------------------------------------------------

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v)) {
    throw HeaderError("rf: key '" + key + "' has non-numeric value '" + value + "'");
  }
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size() || v == 0) {
    throw HeaderError("rf: key '" + key + "' must be a positive integer, got '" + value + "'");
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_rf(const RFFrame& frame) {
  frame.validate();
  const auto& g = frame.geometry;
  std::string header;
  header += "elements=" + std::to_string(g.element_count) + "\n";
  header += "samples=" + std::to_string(frame.samples_per_element) + "\n";
  header += "fs_hz=" + format_double(g.sampling_rate) + "\n";
  header += "c_mps=" + format_double(g.sound_speed) + "\n";
  header += "pitch_m=" + format_double(g.pitch) + "\n";
  header += "f0_hz=" + format_double(g.center_frequency) + "\n";
  header += "angle_rad=" + format_double(frame.steer_angle) + "\n";
  header += "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 4 * frame.samples.size());
  for (float v : frame.samples) put_f32(out, v);
  return out;
}

RFFrame decode_rf(std::span<const std::uint8_t> bytes) {
  static const char* const kKeys[] = {"elements", "samples", "fs_hz", "c_mps", "pitch_m", "f0_hz", "angle_rad"};
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  bool terminated = false;
  while (pos < bytes.size()) {
    const auto* begin = bytes.data() + pos;
    const auto* nl = static_cast<const std::uint8_t*>(std::memchr(begin, '\n', bytes.size() - pos));
    if (nl == nullptr) break;
    std::string line(reinterpret_cast<const char*>(begin), static_cast<std::size_t>(nl - begin));
    pos += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      terminated = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) throw HeaderError("rf: malformed header line '" + line + "'");
    std::string key = line.substr(0, eq);
    if (!kv.emplace(key, line.substr(eq + 1)).second) throw HeaderError("rf: duplicate key '" + key + "'");
    if (kv.size() > 64) throw HeaderError("rf: header too long");
  }
  if (!terminated) throw HeaderError("rf: header is not terminated by a blank line");
  for (const char* key : kKeys) {
    if (!kv.contains(key)) throw MissingKeyError(key);
  }
  RFFrame frame;
  auto& g = frame.geometry;
  g.element_count = parse_count("elements", kv["elements"]);
  frame.samples_per_element = parse_count("samples", kv["samples"]);
  g.sampling_rate = parse_double("fs_hz", kv["fs_hz"]);
  g.sound_speed = parse_double("c_mps", kv["c_mps"]);
  g.pitch = parse_double("pitch_m", kv["pitch_m"]);
  g.center_frequency = parse_double("f0_hz", kv["f0_hz"]);
  frame.steer_angle = parse_double("angle_rad", kv["angle_rad"]);
  if (!(g.sampling_rate > 0 && g.sound_speed > 0 && g.pitch > 0 && g.center_frequency > 0)) {
    throw HeaderError("rf: geometry values must be positive");
  }
  if (!(std::fabs(frame.steer_angle) < std::numbers::pi / 4)) throw HeaderError("rf: |angle_rad| must be below pi/4");
  const std::uint64_t count = std::uint64_t{g.element_count} * frame.samples_per_element;
  if (count > (std::uint64_t{1} << 32)) throw HeaderError("rf: frame too large");
  const std::size_t payload = bytes.size() - pos;
  if (payload != 4 * count) {
    throw LengthError("rf: payload is " + std::to_string(payload) + " bytes, header implies " +
                      std::to_string(4 * count));
  }
  frame.samples.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < frame.samples.size(); ++i) {
    frame.samples[i] = get_f32(bytes, pos + 4 * i);
    if (!std::isfinite(frame.samples[i])) throw ValueError("rf: non-finite sample " + std::to_string(i));
  }
  return frame;
}

void write_rf(const std::filesystem::path& path, const RFFrame& frame) { write_file_bytes(path, encode_rf(frame)); }

RFFrame read_rf(const std::filesystem::path& path) { return decode_rf(read_file_bytes(path)); }

// Image helpers --------------------------------------------------------------

Image2D load_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".ndf") {
    Tensor t = read_tensor(path);
    std::vector<std::size_t> dims;
    for (std::size_t d : t.dims()) {
      if (d != 1 || !dims.empty()) dims.push_back(d);
    }
    if (dims.size() != 2) throw HeaderError("ndf image: expected a 2-D tensor, got " + t.shape_string());
    return Image2D(dims[1], dims[0], std::vector<float>(t.values().begin(), t.values().end()),
                   ValueRange::unit_interval);
  }
  throw std::invalid_argument("unsupported image extension '" + ext + "' (use .pgm or .ndf)");
}

void save_image(const std::filesystem::path& path, const Image2D& img) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return write_pgm(path, img);
  if (ext == ".ndf") {
    const Image2D unit = convert_range(img, ValueRange::unit_interval);
    write_tensor(path, Tensor({img.height(), img.width()}, unit.data()));
    return;
  }
  throw std::invalid_argument("unsupported image extension '" + ext + "' (use .pgm or .ndf)");
}

}  // namespace usdiff
