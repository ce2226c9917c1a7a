#include "saml/provenance.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <vector>

#include <openssl/evp.h>

#include "saml/error.hpp"
#include "saml/json_io.hpp"

namespace saml {

std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest.data(), &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw IoError("SHA-1 digest failed");
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char b = digest[i];
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

std::string git_blob_hash_file(const std::filesystem::path& path) { return git_blob_hash(read_text_file(path)); }

nlohmann::json hash_tree(const std::filesystem::path& dir, const std::vector<std::string>& skip) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir);
    if (std::find(skip.begin(), skip.end(), rel.generic_string()) != skip.end()) continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  nlohmann::json out = nlohmann::json::object();
  for (const auto& rel : files) out[rel.generic_string()] = git_blob_hash_file(dir / rel);
  return out;
}

}  // namespace saml
