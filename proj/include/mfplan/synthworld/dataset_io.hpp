#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mfplan/synthworld/scenario.hpp"

namespace mfplan::synthworld {

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON record per line; written to a temporary file and renamed.
void save_dataset(const std::string& path, const std::vector<Scenario>& scenarios);
std::vector<Scenario> load_dataset(const std::string& path);

std::string to_json_line(const Scenario& s);
Scenario from_json_line(const std::string& line, std::size_t line_no);

}  // namespace mfplan::synthworld
