#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "clrep/common/error.hpp"

namespace clrep {

static_assert(std::endian::native == std::endian::little,
              "binary containers are little-endian; big-endian hosts are unsupported");

class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : out_(path, std::ios::binary) {
    require(out_.good(), Errc::io_error, "cannot open for write: " + path);
  }

  void magic(const char tag[4]) { out_.write(tag, 4); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }

  template <typename T>
  void array(const T* data, std::size_t count) {
    u64(count);
    raw(data, count * sizeof(T));
  }

  void close() {
    out_.close();
    require(out_.good(), Errc::io_error, "write failed on close");
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  std::ofstream out_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    require(in_.good(), Errc::io_error, "cannot open for read: " + path);
  }

  void magic(const char tag[4]) {
    char got[4];
    raw(got, 4);
    require(std::memcmp(got, tag, 4) == 0, Errc::io_error,
            "bad magic in " + path_ + " (expected " + std::string(tag, 4) + ")");
  }

  std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
  std::int64_t i64() { std::int64_t v; raw(&v, sizeof v); return v; }
  double f64() { double v; raw(&v, sizeof v); return v; }

  std::string str() {
    const auto n = u64();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  template <typename T>
  std::vector<T> array() {
    const auto n = u64();
    std::vector<T> v(n);
    raw(v.data(), n * sizeof(T));
    return v;
  }

  template <typename T>
  void array_into(T* data, std::size_t expected) {
    const auto n = u64();
    require(n == expected, Errc::io_error,
            "array length mismatch in " + path_ + ": expected " + std::to_string(expected) +
                ", found " + std::to_string(n));
    raw(data, n * sizeof(T));
  }

 private:
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    require(in_.gcount() == static_cast<std::streamsize>(n), Errc::io_error,
            "unexpected end of file: " + path_);
  }
  std::ifstream in_;
  std::string path_;
};

}  // namespace clrep
