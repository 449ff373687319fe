#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "fhtgibbs/core/errors.hpp"

namespace fhtgibbs {

// Little-endian binary primitives with byte-accurate error positions.
class ByteWriter {
 public:
  explicit ByteWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot open '" + path + "' for writing");
  }

  void magic(const char tag[4]) { out_.write(tag, 4); }

  void u64(std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, 8);
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void f64_array(const double* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 8));
    } else {
      for (std::size_t i = 0; i < n; ++i) f64(data[i]);
    }
  }

  void close() {
    out_.close();
    if (!out_) throw ValidationError("failed writing '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw FormatError("cannot open '" + path + "'");
  }

  std::size_t offset() const { return pos_; }

  void magic(const char tag[4], const std::string& what) {
    char buf[4];
    read(buf, 4, what);
    if (std::memcmp(buf, tag, 4) != 0)
      throw FormatError(path_ + ": bad magic at byte 0, expected " + what);
  }

  std::uint64_t u64(const std::string& what) {
    char buf[8];
    read(buf, 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
    return v;
  }

  double f64(const std::string& what) { return std::bit_cast<double>(u64(what)); }

  void f64_array(double* data, std::size_t n, const std::string& what) {
    if constexpr (std::endian::native == std::endian::little) {
      read(reinterpret_cast<char*>(data), n * 8, what);
    } else {
      for (std::size_t i = 0; i < n; ++i) data[i] = f64(what);
    }
  }

  void expect_eof(const std::string& what) {
    char c;
    in_.read(&c, 1);
    if (!in_.eof())
      throw FormatError(path_ + ": trailing data at byte " + std::to_string(pos_) + " after " +
                        what);
  }

 private:
  void read(char* buf, std::size_t n, const std::string& what) {
    in_.read(buf, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError(path_ + ": truncated " + what + " at byte " + std::to_string(pos_));
    pos_ += n;
  }

  std::string path_;
  std::ifstream in_;
  std::size_t pos_ = 0;
};

}  // namespace fhtgibbs
