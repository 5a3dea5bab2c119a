#ifndef SSML_SRC_BINARY_IO_HPP
#define SSML_SRC_BINARY_IO_HPP

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "ssml/error.hpp"

namespace ssml::detail {

// Little-endian encoders independent of host byte order.

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  }

  void magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }

  void finish() {
    out_.flush();
    if (!out_) throw Error(ErrorCode::kIo, "write failed for " + path_.string());
  }

 private:
  template <class U>
  void put_le(U v) {
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      bytes[b] = static_cast<char>((v >> (8 * b)) & 0xFFu);
    }
    out_.write(bytes.data(), bytes.size());
  }

  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  }

  void expect_magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    read_bytes(got.data(), got.size());
    if (got != tag) {
      throw Error(ErrorCode::kFormat,
                  path_.string() + ": bad magic, expected " + std::string(tag));
    }
  }

  std::uint32_t u32() { return get_le<std::uint32_t>(); }
  std::uint64_t u64() { return get_le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }

  /// Bytes left between the cursor and end of file.
  std::uint64_t remaining() {
    const auto here = in_.tellg();
    in_.seekg(0, std::ios::end);
    const auto end = in_.tellg();
    in_.seekg(here);
    return static_cast<std::uint64_t>(end - here);
  }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw Error(ErrorCode::kFormat, path_.string() + ": trailing bytes");
    }
  }

 private:
  template <class U>
  U get_le() {
    std::array<unsigned char, sizeof(U)> bytes{};
    read_bytes(reinterpret_cast<char*>(bytes.data()), bytes.size());
    U v = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(bytes[b]) << (8 * b);
    return v;
  }

  void read_bytes(char* dst, std::size_t count) {
    in_.read(dst, static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in_.gcount()) != count) {
      throw Error(ErrorCode::kFormat, path_.string() + ": truncated file");
    }
  }

  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace ssml::detail

#endif  // SSML_SRC_BINARY_IO_HPP
