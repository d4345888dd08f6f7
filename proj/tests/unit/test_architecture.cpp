#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

namespace fs = std::filesystem;

TEST_CASE("only the cli module touches files, clocks or standard streams") {
  const fs::path root = SVSCL_SOURCE_DIR;
  const std::regex banned(
      R"(#\s*include\s*<(fstream|filesystem|chrono|ctime|iostream)>|\b(fopen|fprintf|printf|puts|getenv|std::cout|std::cerr|std::clock|std::time)\b)");
  std::size_t scanned = 0;
  for (const auto& dir : {root / "src", root / "include"}) {
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const fs::path p = entry.path();
      const auto rel = p.lexically_relative(root).generic_string();
      if (rel.starts_with("src/cli/") || p.filename() == "cli.hpp") continue;
      if (p.extension() != ".cpp" && p.extension() != ".hpp") continue;
      std::ifstream in(p);
      std::string text, line;
      while (std::getline(in, line)) text += line.substr(0, line.find("//")) + "\n";
      std::smatch m;
      CAPTURE(rel);
      CHECK_FALSE(std::regex_search(text, m, banned));
      ++scanned;
    }
  }
  CHECK(scanned > 10);
}
