#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace saml {

// SHA-1 of "blob <size>\0<content>", i.e. the id git assigns to a file.
std::string git_blob_hash(std::string_view content);
std::string git_blob_hash_file(const std::filesystem::path& path);

// Hashes of every regular file under `dir` (relative paths, sorted), except
// names listed in `skip`.
nlohmann::json hash_tree(const std::filesystem::path& dir, const std::vector<std::string>& skip = {});

}  // namespace saml
