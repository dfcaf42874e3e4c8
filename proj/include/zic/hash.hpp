#pragma once

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "zic/core.hpp"

namespace zic {

namespace detail {

inline std::string digest_hex(const EVP_MD* md, std::string_view data) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out, &len, md, nullptr) != 1) throw Error("digest computation failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", out[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace detail

inline std::string sha1_hex(std::string_view data) { return detail::digest_hex(EVP_sha1(), data); }
inline std::string sha256_hex(std::string_view data) { return detail::digest_hex(EVP_sha256(), data); }

/// Object id git would assign to a blob with these contents.
inline std::string git_blob_hash(std::string_view data) {
  std::string framed = "blob " + std::to_string(data.size());
  framed.push_back('\0');
  framed.append(data);
  return sha1_hex(framed);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string git_blob_hash_of_file(const std::string& path) { return git_blob_hash(read_file(path)); }

}  // namespace zic
