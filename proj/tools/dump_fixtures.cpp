// Writes the bundled fixture programs out as files (fixtures/<name>.dsl).
#include <cstdio>
#include <fstream>
#include <string>

#include "specsim/fixtures.hpp"

int main(int argc, char** argv) {
  std::string dir = argc > 1 ? argv[1] : "fixtures";
  for (const auto& name : specsim::fixture_names()) {
    std::string path = dir + "/" + name + ".dsl";
    std::ofstream f(path, std::ios::binary);
    if (!f) {
      std::fprintf(stderr, "cannot write %s\n", path.c_str());
      return 1;
    }
    f << specsim::fixture_text(name);
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}
