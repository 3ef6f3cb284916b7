#include "mob/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mob {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string generatedBytes(std::size_t n) {
    std::string out(n, 'a');
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<char>('a' + i % 26);
    return out;
}

} // namespace

RunConfig parse_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file '" + file.string() + "'");

    RunConfig cfg;
    std::filesystem::path base = file.parent_path();
    std::string section;
    std::string raw;
    std::size_t lineNo = 0;

    auto fail = [&](const std::string& msg) {
        throw ConfigError(file.string() + ":" + std::to_string(lineNo) + ": " + msg);
    };

    while (std::getline(in, raw)) {
        ++lineNo;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail("malformed section header");
            section = line.substr(1, line.size() - 2);
            if (section != "hosts" && section != "scripts" && section != "mocks")
                fail("unknown section '" + section + "'");
            continue;
        }

        if (section == "hosts") {
            cfg.hosts.push_back(line);
            continue;
        }

        if (section == "scripts") {
            std::istringstream ss(line);
            std::string path, host, extra;
            ss >> path >> host;
            if (path.empty() || host.empty()) fail("expected '<path> <host>'");
            if (ss >> extra) fail("unexpected trailing text '" + extra + "'");
            std::filesystem::path p(path);
            if (p.is_relative()) p = base / p;
            cfg.scripts.push_back(ScriptSpec{p, host});
            continue;
        }

        if (section == "mocks") {
            std::size_t eq = line.find('=');
            if (eq == std::string::npos) fail("expected '<key>=<value>'");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.rfind("fileexec.", 0) == 0) {
                cfg.mocks.fileexecOutputs[key.substr(9)] = value;
            } else if (key == "io.input") {
                cfg.mocks.ioInput.push_back(value);
            } else if (key.rfind("ftp.file.", 0) == 0) {
                std::string rest = key.substr(9);
                if (rest.size() > 5 && rest.compare(rest.size() - 5, 5, ".size") == 0) {
                    std::string name = rest.substr(0, rest.size() - 5);
                    std::size_t n = 0;
                    try {
                        n = std::stoull(value);
                    } catch (const std::exception&) {
                        fail("size must be a number");
                    }
                    cfg.mocks.ftpFiles[name] = generatedBytes(n);
                } else {
                    cfg.mocks.ftpFiles[rest] = value;
                }
            } else {
                fail("unknown mock key '" + key + "'");
            }
            continue;
        }

        fail("content before the first section header");
    }

    if (cfg.hosts.empty()) throw ConfigError(file.string() + ": no hosts configured");
    for (const auto& s : cfg.scripts) {
        if (std::find(cfg.hosts.begin(), cfg.hosts.end(), s.host) == cfg.hosts.end())
            throw ConfigError(file.string() + ": script host '" + s.host +
                              "' is not in [hosts]");
    }
    return cfg;
}

} // namespace mob
