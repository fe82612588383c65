// Little-endian byte buffers and hashing shared by the binary file formats.

#ifndef MESHSTYLE_BINARY_IO_HPP
#define MESHSTYLE_BINARY_IO_HPP

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

#include "meshstyle/errors.hpp"

namespace meshstyle::detail {

std::array<uint8_t, 32> sha256(const uint8_t* data, size_t size);
inline std::array<uint8_t, 32> sha256(const std::vector<uint8_t>& bytes) {
  return sha256(bytes.data(), bytes.size());
}

std::vector<uint8_t> read_file(const std::string& filename, const char* what);
void write_file(const std::string& filename, const std::vector<uint8_t>& bytes,
    const char* what);

struct writer {
  std::vector<uint8_t> bytes;

  template <typename T>
  void put(T value) {
    static_assert(std::is_arithmetic_v<T>);
    auto raw = std::array<uint8_t, sizeof(T)>{};
    std::memcpy(raw.data(), &value, sizeof(T));
    bytes.insert(bytes.end(), raw.begin(), raw.end());
  }
  void put_bytes(const void* data, size_t size) {
    auto ptr = static_cast<const uint8_t*>(data);
    bytes.insert(bytes.end(), ptr, ptr + size);
  }
  void put_string(const std::string& text) {
    put(uint32_t(text.size()));
    put_bytes(text.data(), text.size());
  }
  // length-prefixed nested section
  void put_section(const writer& section) {
    put(uint64_t(section.bytes.size()));
    put_bytes(section.bytes.data(), section.bytes.size());
  }
};

// Bounds-checked reader; errors name `where`.
struct reader {
  const uint8_t* data = nullptr;
  size_t         size = 0;
  size_t         pos  = 0;
  std::string    where;
  error_kind     kind = error_kind::compatibility;

  [[noreturn]] void fail() const {
    throw error(kind, "file truncated in " + where);
  }
  template <typename T>
  T get() {
    if (size - pos < sizeof(T)) fail();
    auto value = T{};
    std::memcpy(&value, data + pos, sizeof(T));
    pos += sizeof(T);
    return value;
  }
  std::string get_string() {
    auto length = get<uint32_t>();
    if (size - pos < length) fail();
    auto text = std::string(reinterpret_cast<const char*>(data + pos), length);
    pos += length;
    return text;
  }
  reader section(const std::string& name) {
    auto length = get<uint64_t>();
    if (size - pos < length) throw error(kind, "file truncated in " + name);
    auto sub = reader{data + pos, size_t(length), 0, name, kind};
    pos += length;
    return sub;
  }
  // element count guarded against the remaining bytes
  uint32_t count(size_t element_size) {
    auto n = get<uint32_t>();
    if (element_size && (size - pos) / element_size < n) fail();
    return n;
  }
};

}  // namespace meshstyle::detail

#endif
