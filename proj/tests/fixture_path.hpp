#pragma once

#include <cstdlib>
#include <string>

namespace semcom::test {

// Directory of test fixtures; set via CMake for out-of-tree runs.
inline std::string fixture_dir() {
  if (const char* env = std::getenv("SEMCOM_FIXTURE_DIR")) return env;
#ifdef SEMCOM_FIXTURE_DIR
  return SEMCOM_FIXTURE_DIR;
#else
  return "tests/fixtures";
#endif
}

inline std::string fixture_path(const std::string& name) {
  return fixture_dir() + "/" + name;
}

// Path of the built CLI binary (integration tests).
inline std::string cli_path() {
  if (const char* env = std::getenv("SEMCOM_CLI_PATH")) return env;
#ifdef SEMCOM_CLI_PATH
  return SEMCOM_CLI_PATH;
#else
  return "./semcom";
#endif
}

}  // namespace semcom::test
