#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace saml {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path);
// Writes `doc` indented by two spaces with a trailing newline.
void write_json_file(const std::filesystem::path& path, const json& doc);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

json to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

// Shortest round-trip decimal for a double.
std::string format_double(double value);

// Typed lookup with a default and a ConfigError naming the key on type errors.
template <class T>
T value_or(const json& obj, const char* key, T fallback);

}  // namespace saml

#include "saml/detail/json_io_impl.hpp"
