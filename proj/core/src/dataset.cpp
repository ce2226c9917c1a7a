#include "saml/dataset.hpp"

#include <sstream>

#include "saml/error.hpp"
#include "saml/json_io.hpp"

namespace saml {

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.state.size() != state_dim || s.control.size() != control_dim || s.next_state.size() != state_dim)
      throw ContractViolation("sample " + std::to_string(i) + " does not match the dataset dimensions");
    if (!s.state.allFinite() || !s.control.allFinite() || !s.next_state.allFinite())
      throw ContractViolation("sample " + std::to_string(i) + " has non-finite entries");
  }
}

std::filesystem::path header_path_for(const std::filesystem::path& data_path) {
  auto p = data_path;
  p.replace_extension(".header.json");
  return p;
}

std::string dataset_to_jsonl(const Dataset& data) {
  std::string out;
  for (const auto& s : data.samples) {
    json line{{"x", to_json(s.state)}, {"u", to_json(s.control)}, {"xn", to_json(s.next_state)}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

json dataset_header(const Dataset& data) {
  return json{{"system", data.provenance.system},
              {"count", data.samples.size()},
              {"stateDim", data.state_dim},
              {"controlDim", data.control_dim},
              {"seed", data.provenance.seed},
              {"noiseSigma", data.provenance.noise_sigma},
              {"ranges", data.provenance.ranges},
              {"systemParams", data.provenance.system_params}};
}

void write_dataset(const std::filesystem::path& data_path, const Dataset& data) {
  data.validate();
  write_text_file(data_path, dataset_to_jsonl(data));
  write_json_file(header_path_for(data_path), dataset_header(data));
}

Dataset read_dataset(const std::filesystem::path& data_path) {
  const json header = read_json_file(header_path_for(data_path));
  Dataset data;
  try {
    data.state_dim = header.at("stateDim").get<Eigen::Index>();
    data.control_dim = header.at("controlDim").get<Eigen::Index>();
    data.provenance.system = header.value("system", std::string{});
    data.provenance.seed = header.value("seed", std::uint64_t{0});
    data.provenance.noise_sigma = header.value("noiseSigma", 0.0);
    data.provenance.ranges = header.value("ranges", json::object());
    data.provenance.system_params = header.value("systemParams", json::object());
  } catch (const json::exception& e) {
    throw ConfigError("malformed dataset header: " + std::string(e.what()));
  }

  std::istringstream in(read_text_file(data_path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      data.samples.push_back(
          {vector_from_json(j.at("x")), vector_from_json(j.at("u")), vector_from_json(j.at("xn"))});
    } catch (const json::exception& e) {
      throw ConfigError(data_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  data.validate();
  return data;
}

}  // namespace saml
