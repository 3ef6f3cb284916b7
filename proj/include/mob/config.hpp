#pragma once

#include "mob/exec_service.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mob {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScriptSpec {
    std::filesystem::path path; // resolved against the config file's directory
    std::string host;
};

// A simulation run: the network's hosts, the scripts to launch (in order) and
// the mock behaviour of the external services.
struct RunConfig {
    std::vector<std::string> hosts;
    std::vector<ScriptSpec> scripts;
    ext::ExternConfig mocks;
};

// Line-oriented format with [hosts] / [scripts] / [mocks] sections:
//   [hosts]     one host name per line
//   [scripts]   <path> <host>
//   [mocks]     fileexec.<command>=<output>
//               io.input=<line>            (repeatable)
//               ftp.file.<name>=<content>
//               ftp.file.<name>.size=<n>   (n generated bytes)
// '#' starts a comment line. Throws ConfigError on malformed input.
RunConfig parse_config(const std::filesystem::path& file);

} // namespace mob
