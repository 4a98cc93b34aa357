#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hine::cli {

// Exit codes: 0 ok, 1 usage or configuration error, 2 data error, 3 numerical abort.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct FlagDoc {
  std::string name;  // with leading dashes
  std::string description;
};

std::vector<std::string> subcommands();
// Every flag accepted by `subcommand`, from the same registry that parses it.
std::vector<FlagDoc> flags(const std::string& subcommand);
std::string help_text(const std::string& subcommand = {});

}  // namespace hine::cli
