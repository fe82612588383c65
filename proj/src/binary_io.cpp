#include "binary_io.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <stdexcept>

namespace meshstyle::detail {

std::array<uint8_t, 32> sha256(const uint8_t* data, size_t size) {
  auto digest = std::array<uint8_t, 32>{};
  auto length = 0u;
  if (!EVP_Digest(data, size, digest.data(), &length, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  return digest;
}

std::vector<uint8_t> read_file(const std::string& filename, const char* what) {
  auto file = std::ifstream{filename, std::ios::binary};
  if (!file) throw io_error(std::string("cannot open ") + what + " " + filename);
  return {std::istreambuf_iterator<char>(file), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& filename, const std::vector<uint8_t>& bytes,
    const char* what) {
  auto file = std::ofstream{filename, std::ios::binary};
  if (!file) throw io_error(std::string("cannot write ") + what + " " + filename);
  file.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!file) throw io_error(std::string("cannot write ") + what + " " + filename);
}

}  // namespace meshstyle::detail
