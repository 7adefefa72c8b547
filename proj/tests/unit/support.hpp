#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "crossgrasp/urdf.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(CROSSGRASP_FIXTURE_DIR) / name;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline crossgrasp::HandModel load_fixture(const std::string& name) { return crossgrasp::load_urdf(fixture(name)); }

}  // namespace testing_support

#define EXPECT_ERROR_KIND(stmt, expected)                                  \
  do {                                                                 \
    try {                                                              \
      stmt;                                                            \
      ADD_FAILURE() << "expected " #expected;                              \
    } catch (const crossgrasp::Error& e) {                             \
      EXPECT_EQ(e.kind(), crossgrasp::ErrorKind::expected) << e.what();    \
    }                                                                  \
  } while (0)
