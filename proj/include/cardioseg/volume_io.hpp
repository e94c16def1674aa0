#pragma once

// Uncompressed MetaImage subset: a text header (.mhd) with a fixed key order
// and a sibling raw little-endian payload. This is the only on-disk volume
// format the pipeline speaks; it round-trips bit-exactly.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "cardioseg/detail/textio.hpp"
#include "cardioseg/errors.hpp"
#include "cardioseg/volume.hpp"

namespace cardioseg {

enum class ElementType { Float32, Int16, UInt8 };

struct VolumeHeader {
  Vec3i dims;
  Vec3d spacing;
  ElementType element_type = ElementType::Float32;
  std::string data_file;  // relative to the header's directory
};

using AnyVolume = std::variant<Volume3, LabelMap>;

namespace detail {

inline std::size_t element_size(ElementType t) {
  switch (t) {
    case ElementType::Float32: return 4;
    case ElementType::Int16: return 2;
    case ElementType::UInt8: return 1;
  }
  return 0;
}

inline std::string element_type_name(ElementType t) {
  switch (t) {
    case ElementType::Float32: return "MET_FLOAT";
    case ElementType::Int16: return "MET_SHORT";
    case ElementType::UInt8: return "MET_UCHAR";
  }
  return "";
}

inline void put_f32_le(std::vector<unsigned char>& out, float v) {
  const auto u = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<unsigned char>(u & 0xff));
  out.push_back(static_cast<unsigned char>((u >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((u >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((u >> 24) & 0xff));
}

inline float get_f32_le(const unsigned char* p) {
  const std::uint32_t u = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                          (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  return std::bit_cast<float>(u);
}

inline std::int16_t get_i16_le(const unsigned char* p) {
  const std::uint16_t u = std::uint16_t(p[0]) | (std::uint16_t(p[1]) << 8);
  return std::bit_cast<std::int16_t>(u);
}

}  // namespace detail

inline VolumeHeader read_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open header file: " + path.string());

  // Fixed key order; see write_volume.
  const char* expected[] = {"ObjectType", "NDims",       "DimSize",
                            "ElementSpacing", "ElementType", "ElementDataFile"};
  std::string values[6];
  std::string line;
  for (int i = 0; i < 6; ++i) {
    if (!std::getline(in, line))
      fail(Errc::format, std::string("missing header key: ") + expected[i]);
    std::string_view key, value;
    if (!detail::split_key_value(line, key, value) || key != expected[i])
      fail(Errc::format, std::string("garbled header, expected key '") + expected[i] +
                             "' got line '" + line + "'");
    values[i] = std::string(value);
  }

  if (values[0] != "Image") fail(Errc::format, "ObjectType: expected 'Image', got '" + values[0] + "'");
  if (values[1] != "3") fail(Errc::format, "NDims: expected 3, got '" + values[1] + "'");

  VolumeHeader h;
  {
    auto parts = detail::split_ws(values[2]);
    if (parts.size() != 3) fail(Errc::format, "DimSize: expected 3 integers");
    h.dims.x = static_cast<int>(detail::parse_int(parts[0], Errc::format, "DimSize"));
    h.dims.y = static_cast<int>(detail::parse_int(parts[1], Errc::format, "DimSize"));
    h.dims.z = static_cast<int>(detail::parse_int(parts[2], Errc::format, "DimSize"));
    if (h.dims.x < 1 || h.dims.y < 1 || h.dims.z < 1)
      fail(Errc::format, "DimSize: all dimensions must be >= 1");
  }
  {
    auto parts = detail::split_ws(values[3]);
    if (parts.size() != 3) fail(Errc::format, "ElementSpacing: expected 3 reals");
    h.spacing.x = detail::parse_double(parts[0], Errc::format, "ElementSpacing");
    h.spacing.y = detail::parse_double(parts[1], Errc::format, "ElementSpacing");
    h.spacing.z = detail::parse_double(parts[2], Errc::format, "ElementSpacing");
    if (h.spacing.x <= 0 || h.spacing.y <= 0 || h.spacing.z <= 0)
      fail(Errc::format, "ElementSpacing: all components must be > 0");
  }
  if (values[4] == "MET_FLOAT") h.element_type = ElementType::Float32;
  else if (values[4] == "MET_SHORT") h.element_type = ElementType::Int16;
  else if (values[4] == "MET_UCHAR") h.element_type = ElementType::UInt8;
  else fail(Errc::unsupported_type, "ElementType: unsupported type '" + values[4] + "'");

  if (values[5].empty()) fail(Errc::format, "ElementDataFile: empty");
  h.data_file = values[5];
  return h;
}

inline AnyVolume read_volume(const std::filesystem::path& path) {
  const VolumeHeader h = read_header(path);
  const std::filesystem::path raw_path = path.parent_path() / h.data_file;

  std::ifstream raw(raw_path, std::ios::binary);
  if (!raw) fail(Errc::io, "cannot open payload file: " + raw_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(raw)),
                                   std::istreambuf_iterator<char>());
  const std::size_t expected = voxel_count(h.dims) * detail::element_size(h.element_type);
  if (bytes.size() != expected)
    fail(Errc::truncation, "payload size mismatch for " + raw_path.string() + ": expected " +
                               std::to_string(expected) + " bytes, got " +
                               std::to_string(bytes.size()));

  const std::size_t n = voxel_count(h.dims);
  switch (h.element_type) {
    case ElementType::Float32: {
      Volume3 v{h.dims, h.spacing, std::vector<float>(n)};
      for (std::size_t i = 0; i < n; ++i) v.data[i] = detail::get_f32_le(&bytes[i * 4]);
      return v;
    }
    case ElementType::Int16: {
      // CT payloads; exposed as floats without rescaling (raw Hounsfield units).
      Volume3 v{h.dims, h.spacing, std::vector<float>(n)};
      for (std::size_t i = 0; i < n; ++i)
        v.data[i] = static_cast<float>(detail::get_i16_le(&bytes[i * 2]));
      return v;
    }
    case ElementType::UInt8: {
      LabelMap m{h.dims, h.spacing, std::vector<std::uint8_t>(n)};
      for (std::size_t i = 0; i < n; ++i) {
        if (bytes[i] > kMaxLabel)
          fail(Errc::format, "label value " + std::to_string(int(bytes[i])) +
                                 " out of range 0..7 in " + raw_path.string());
        m.data[i] = bytes[i];
      }
      return m;
    }
  }
  fail(Errc::unsupported_type, "unreachable element type");
}

inline Volume3 read_image(const std::filesystem::path& path) {
  AnyVolume v = read_volume(path);
  if (auto* img = std::get_if<Volume3>(&v)) return std::move(*img);
  fail(Errc::unsupported_type, "expected an image volume, got a label map: " + path.string());
}

inline LabelMap read_labels(const std::filesystem::path& path) {
  AnyVolume v = read_volume(path);
  if (auto* lab = std::get_if<LabelMap>(&v)) return std::move(*lab);
  fail(Errc::unsupported_type, "expected a label map, got an image volume: " + path.string());
}

namespace detail {

inline void write_mhd(const std::filesystem::path& path, const Vec3i& dims,
                      const Vec3d& spacing, ElementType et, const std::string& data_file,
                      const std::vector<unsigned char>& payload) {
  std::ofstream hdr(path);
  if (!hdr) fail(Errc::io, "cannot write header file: " + path.string());
  hdr << "ObjectType = Image\n";
  hdr << "NDims = 3\n";
  hdr << "DimSize = " << dims.x << " " << dims.y << " " << dims.z << "\n";
  hdr << "ElementSpacing = " << format_double(spacing.x) << " " << format_double(spacing.y)
      << " " << format_double(spacing.z) << "\n";
  hdr << "ElementType = " << element_type_name(et) << "\n";
  hdr << "ElementDataFile = " << data_file << "\n";
  hdr.flush();
  if (!hdr) fail(Errc::io, "failed writing header file: " + path.string());

  const std::filesystem::path raw_path = path.parent_path() / data_file;
  std::ofstream raw(raw_path, std::ios::binary);
  if (!raw) fail(Errc::io, "cannot write payload file: " + raw_path.string());
  raw.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  raw.flush();
  if (!raw) fail(Errc::io, "failed writing payload file: " + raw_path.string());
}

inline std::string raw_name_for(const std::filesystem::path& header_path) {
  return header_path.stem().string() + ".raw";
}

}  // namespace detail

inline void write_volume(const std::filesystem::path& path, const Volume3& vol) {
  if (vol.data.size() != voxel_count(vol.dims))
    fail(Errc::shape, "volume data length does not match dims");
  std::vector<unsigned char> payload;
  payload.reserve(vol.data.size() * 4);
  for (float f : vol.data) detail::put_f32_le(payload, f);
  detail::write_mhd(path, vol.dims, vol.spacing, ElementType::Float32,
                    detail::raw_name_for(path), payload);
}

inline void write_volume(const std::filesystem::path& path, const LabelMap& labels) {
  if (labels.data.size() != voxel_count(labels.dims))
    fail(Errc::shape, "label data length does not match dims");
  std::vector<unsigned char> payload(labels.data.begin(), labels.data.end());
  detail::write_mhd(path, labels.dims, labels.spacing, ElementType::UInt8,
                    detail::raw_name_for(path), payload);
}

}  // namespace cardioseg
