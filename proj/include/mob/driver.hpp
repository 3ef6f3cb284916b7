#pragma once

#include "mob/ast.hpp"
#include "mob/collect.hpp"
#include "mob/infer.hpp"
#include "mob/resolver.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

namespace mob {

// Source of the built-in collection classes (Node, Array, ArrayIter, MapNode,
// Map, MapIter) that every program gets merged in.
const std::string& prelude_source();

// Splices the built-in classes into a parsed program, after its services and
// requires but before its own classes and agents. Names the program defines
// itself are not overridden.
void inject_prelude(ast::Program& prog);

struct CompiledScript {
    std::shared_ptr<ast::Program> ast;
    ProgramTypes types;
    std::shared_ptr<const CompiledCode> code;
};

// Full front-end pipeline for one script: parse, merge built-ins, structural
// checks, type inference, service compatibility against the shared resolver,
// code collection. Throws CompileError.
CompiledScript compile_script(const std::string& source, Resolver& resolver);

struct RunOptions {
    bool trace = false;
    std::optional<std::filesystem::path> traceFile;
    std::optional<std::uint64_t> seed;
    std::uint64_t maxSteps = 1'000'000;
    bool dumpTypes = false;
    bool dumpCode = false;
    bool dumpResolver = false;
    bool strictReturns = false;
    std::optional<std::string> atHost;                // host for single-file runs
    std::optional<std::filesystem::path> outDir;      // transcript directory
};

// Runs a config file or a single .mob script. Exit codes: 0 quiescent,
// 2 compile error, 3 deadlock, 4 step budget exhausted, 5 runtime error.
int run_mob(const std::filesystem::path& input, const RunOptions& opt, std::ostream& out,
            std::ostream& err);

// Compile-only check of one script. Exit codes: 0 ok, 2 compile error.
int check_mob(const std::filesystem::path& file, std::ostream& out, std::ostream& err);

} // namespace mob
