#include "manifest.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "dagmix/error.hpp"

namespace dagmix::cli {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("io", "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write '" + partial.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw Error("io", "write to '" + partial.string() + "' failed");
  }
  std::filesystem::rename(partial, path);
}

}  // namespace dagmix::cli
