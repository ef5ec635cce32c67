#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cofa/datamodel.hpp"
#include "cofa/errors.hpp"

namespace cofa::testing {

inline Column numeric_column(std::string name, std::vector<double> values,
                             ColumnRole role = ColumnRole::predictor) {
  Column c;
  c.schema = {std::move(name), ColumnKind::numeric, role};
  c.values = std::move(values);
  return c;
}

inline Column outcome_column(std::vector<double> values, std::string name = "y") {
  Column c;
  c.schema = {std::move(name), ColumnKind::binary_outcome, ColumnRole::outcome};
  c.values = std::move(values);
  return c;
}

/// Codes follow first appearance of each label.
inline Column categorical_column(std::string name, const std::vector<std::string>& labels,
                                 ColumnRole role = ColumnRole::predictor) {
  Column c;
  c.schema = {std::move(name), ColumnKind::categorical, role};
  for (const auto& label : labels) {
    auto code = c.find_level(label);
    if (!code) {
      c.levels.push_back(label);
      code = static_cast<std::uint32_t>(c.levels.size() - 1);
    }
    c.codes.push_back(*code);
  }
  return c;
}

inline Column coded_column(std::string name, std::vector<std::uint32_t> codes,
                           std::size_t n_levels, ColumnRole role = ColumnRole::predictor) {
  Column c;
  c.schema = {std::move(name), ColumnKind::categorical, role};
  c.codes = std::move(codes);
  for (std::size_t l = 0; l < n_levels; ++l) c.levels.push_back("L" + std::to_string(l));
  return c;
}

/// Unique scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cofa_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace cofa::testing
