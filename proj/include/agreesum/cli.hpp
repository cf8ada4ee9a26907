#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace agreesum::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidation = 1;
inline constexpr int kIo = 2;
inline constexpr int kUsage = 64;

// Runs one subcommand. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
        std::ostream& err = std::cerr);

}  // namespace agreesum::cli
