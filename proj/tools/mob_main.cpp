// mob: batch front end for the mobile-agent scripting language.
//
//   mob run <config-or-script> [--trace] [--trace-file F] [--seed N]
//                              [--max-steps N] [--dump-types] [--dump-code]
//                              [--dump-resolver] [--at HOST]
//                              [--strict-returns] [--out-dir DIR]
//   mob check <script.mob>
//
// Exit codes: 0 quiescent, 2 compile/config error, 3 deadlock,
// 4 step budget exhausted, 5 runtime error.

#include "mob/driver.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"mob - mobile agent language batch runner"};
    app.require_subcommand(1);

    std::string runInput;
    mob::RunOptions opt;
    std::string traceFile, atHost, outDir;
    std::uint64_t seed = 0;

    CLI::App* run = app.add_subcommand("run", "compile and execute a config file or script");
    run->add_option("input", runInput, "run config (.cfg) or single script (.mob)")->required();
    run->add_flag("--trace", opt.trace, "print one line per machine step");
    CLI::Option* tf = run->add_option("--trace-file", traceFile, "write the trace to a file");
    CLI::Option* sd = run->add_option("--seed", seed, "randomized scheduling with this seed");
    run->add_option("--max-steps", opt.maxSteps, "step budget (default 1000000)");
    run->add_flag("--dump-types", opt.dumpTypes, "print inferred service and class types");
    run->add_flag("--dump-code", opt.dumpCode, "print collected code repositories");
    run->add_flag("--dump-resolver", opt.dumpResolver, "print the final resolver state");
    CLI::Option* at = run->add_option("--at", atHost, "host for single-script runs");
    run->add_flag("--strict-returns", opt.strictReturns,
                  "treat a method body ending without return as a runtime error");
    CLI::Option* od = run->add_option("--out-dir", outDir, "transcript directory");

    std::string checkInput;
    CLI::App* check = app.add_subcommand("check", "compile a script without running it");
    check->add_option("input", checkInput, "script (.mob)")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (*tf) opt.traceFile = traceFile;
        if (*sd) opt.seed = seed;
        if (*at) opt.atHost = atHost;
        if (*od) opt.outDir = outDir;
        return mob::run_mob(runInput, opt, std::cout, std::cerr);
    }
    return mob::check_mob(checkInput, std::cout, std::cerr);
}
