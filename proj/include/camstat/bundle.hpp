#pragma once

// CAMB tensor bundle: a flat list of named f32 tensors.
//
//   "CAMB"            4 bytes magic
//   version           u8, currently 1
//   entry count       u32 LE
//   per entry:
//     name length     u16 LE
//     name            UTF-8 bytes
//     dtype           u8 (0 = f32)
//     ndim            u8
//     dims            ndim x u32 LE
//     payload         prod(dims) x f32 LE, row-major
//
// A reader rejects anything after the last entry.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "camstat/error.hpp"
#include "camstat/tensor.hpp"

namespace camstat {

enum class BundleErrorKind {
  bad_magic,
  bad_version,
  truncated,
  unknown_dtype,
  dim_overflow,
  trailing_data,
  duplicate_name,
  missing_entry,
};

class BundleError : public Error {
 public:
  BundleError(BundleErrorKind kind, const std::string& what)
      : Error(ErrorKind::bundle, what), bundle_kind_(kind) {}
  BundleErrorKind bundle_kind() const noexcept { return bundle_kind_; }

 private:
  BundleErrorKind bundle_kind_;
};

struct BundleEntry {
  std::string name;
  Tensor tensor;
};

class Bundle {
 public:
  Bundle() = default;

  void add(std::string name, Tensor t) {
    if (contains(name)) throw BundleError(BundleErrorKind::duplicate_name, "duplicate bundle entry '" + name + "'");
    entries_.push_back({std::move(name), std::move(t)});
  }

  bool contains(std::string_view name) const { return find(name) != nullptr; }

  const Tensor* find(std::string_view name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return &e.tensor;
    }
    return nullptr;
  }

  const Tensor& get(std::string_view name) const {
    if (const auto* t = find(name)) return *t;
    throw BundleError(BundleErrorKind::missing_entry, "bundle has no entry '" + std::string(name) + "'");
  }

  const std::vector<BundleEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<BundleEntry> entries_;
};

inline constexpr std::uint8_t kBundleVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

namespace detail {

static_assert(std::numeric_limits<float>::is_iec559);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw BundleError(BundleErrorKind::truncated, std::string("bundle truncated while reading ") + what +
                                                        ": need " + std::to_string(n) + " bytes, " +
                                                        std::to_string(remaining()) + " left");
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_bundle(const Bundle& bundle) {
  detail::ByteWriter w;
  w.bytes("CAMB");
  w.u8(kBundleVersion);
  if (bundle.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw BundleError(BundleErrorKind::dim_overflow, "too many bundle entries");
  }
  w.u32(static_cast<std::uint32_t>(bundle.size()));
  for (const auto& e : bundle.entries()) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw BundleError(BundleErrorKind::dim_overflow, "bundle entry name too long");
    }
    if (e.tensor.ndim() > std::numeric_limits<std::uint8_t>::max()) {
      throw BundleError(BundleErrorKind::dim_overflow, "tensor '" + e.name + "' has too many dims");
    }
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name);
    w.u8(kDtypeF32);
    w.u8(static_cast<std::uint8_t>(e.tensor.ndim()));
    for (auto d : e.tensor.dims()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) {
        throw BundleError(BundleErrorKind::dim_overflow, "tensor '" + e.name + "' dim exceeds u32");
      }
      w.u32(static_cast<std::uint32_t>(d));
    }
    for (float v : e.tensor.data()) w.f32(v);
  }
  return w.take();
}

/// Parses a bundle. A zero-dim entry is read as a one-element tensor.
inline Bundle decode_bundle(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  if (r.remaining() < 4 || r.str(4, "magic") != "CAMB") {
    throw BundleError(BundleErrorKind::bad_magic, "not a CAMB bundle (bad magic)");
  }
  const auto version = r.u8("version");
  if (version != kBundleVersion) {
    throw BundleError(BundleErrorKind::bad_version, "unsupported bundle version " + std::to_string(version));
  }
  const auto count = r.u32("entry count");
  Bundle bundle;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.u16("entry name length");
    auto name = r.str(name_len, "entry name");
    const auto dtype = r.u8("dtype");
    if (dtype != kDtypeF32) {
      throw BundleError(BundleErrorKind::unknown_dtype,
                        "entry '" + name + "' has unknown dtype " + std::to_string(dtype));
    }
    const auto ndim = r.u8("ndim");
    Dims dims;
    std::uint64_t elems = 1;
    for (int d = 0; d < ndim; ++d) {
      const auto extent = r.u32("dims");
      if (extent == 0) {
        throw BundleError(BundleErrorKind::dim_overflow, "entry '" + name + "' has a zero extent");
      }
      if (elems > std::numeric_limits<std::uint64_t>::max() / 4 / extent) {
        throw BundleError(BundleErrorKind::dim_overflow, "entry '" + name + "' element count overflows");
      }
      elems *= extent;
      dims.push_back(extent);
    }
    if (dims.empty()) dims.push_back(1);
    if (elems * 4 > r.remaining()) {
      throw BundleError(BundleErrorKind::truncated, "entry '" + name + "' declares " + std::to_string(elems) +
                                                        " values but only " + std::to_string(r.remaining()) +
                                                        " bytes remain");
    }
    std::vector<float> data(static_cast<std::size_t>(elems));
    for (auto& v : data) v = std::bit_cast<float>(r.u32("payload"));
    bundle.add(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  if (r.remaining() != 0) {
    throw BundleError(BundleErrorKind::trailing_data,
                      std::to_string(r.remaining()) + " unexpected bytes after the last bundle entry");
  }
  return bundle;
}

inline void write_bundle(const std::filesystem::path& path, const Bundle& bundle) {
  const auto bytes = encode_bundle(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline Bundle read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bundle '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_bundle(bytes);
  } catch (const BundleError& e) {
    throw BundleError(e.bundle_kind(), path.string() + ": " + e.what());
  }
}

}  // namespace camstat
