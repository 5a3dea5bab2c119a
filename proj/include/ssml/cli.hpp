#ifndef SSML_CLI_HPP
#define SSML_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace ssml::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point for the `ssml` tool: subcommands gen, train, mine, eval, ablate.
/// Returns 0 on success, 1 on flag validation errors, 2 on runtime errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ssml::cli

#endif  // SSML_CLI_HPP
