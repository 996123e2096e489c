#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gca::cli {

enum ExitCode : int { ok = 0, property_failure = 1, usage = 2 };

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace gca::cli
