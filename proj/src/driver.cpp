#include "mob/driver.hpp"

#include "mob/config.hpp"
#include "mob/diag.hpp"
#include "mob/machine.hpp"
#include "mob/parser.hpp"
#include "mob/restrictions.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mob {

namespace {

std::string readFile(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void printDiag(std::ostream& err, const std::filesystem::path& file, const CompileError& e) {
    err << file.string() << ':';
    if (e.pos().valid()) err << e.pos().line << ':' << e.pos().col << ':';
    err << ' ' << e.kind() << ": " << e.message() << '\n';
}

void dumpTypes(std::ostream& out, const CompiledScript& s) {
    for (const auto& [name, t] : s.types.services)
        out << "service " << name << " : " << types::to_string(t) << '\n';
    for (const auto& [name, t] : s.types.classes)
        out << name << " : " << types::to_string(t) << '\n';
}

void dumpCode(std::ostream& out, const CompiledScript& s) {
    for (const auto& [name, e] : s.code->entries) {
        out << name << ' ' << (e->isAgent ? "agent" : "class") << " methods {";
        bool first = true;
        for (const auto& [m, _] : e->methods) {
            if (!first) out << ", ";
            first = false;
            out << m;
        }
        out << "} nested {";
        first = true;
        for (const auto& [n, _] : e->nested) {
            if (!first) out << ", ";
            first = false;
            out << n;
        }
        out << "}\n";
    }
}

} // namespace

CompiledScript compile_script(const std::string& source, Resolver& resolver) {
    CompiledScript out;
    out.ast = parse_program(source);
    inject_prelude(*out.ast);
    require_restrictions(*out.ast);
    out.types = infer_program(*out.ast);
    check_services(out.types.services, resolver);
    out.code = code_collect(out.ast);
    return out;
}

int check_mob(const std::filesystem::path& file, std::ostream& /*out*/, std::ostream& err) {
    Resolver local;
    try {
        compile_script(readFile(file), local);
    } catch (const CompileError& e) {
        printDiag(err, file, e);
        return 2;
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return 2;
    }
    return 0;
}

int run_mob(const std::filesystem::path& input, const RunOptions& opt, std::ostream& out,
            std::ostream& err) {
    RunConfig cfg;
    try {
        if (input.extension() == ".mob") {
            cfg.hosts.push_back(opt.atHost.value_or("h"));
            cfg.scripts.push_back(ScriptSpec{input, cfg.hosts.front()});
        } else {
            cfg = parse_config(input);
        }
    } catch (const ConfigError& e) {
        err << e.what() << '\n';
        return 2;
    }

    auto resolver = std::make_shared<Resolver>();
    auto hub = std::make_shared<ext::Hub>(cfg.mocks);
    Machine machine(resolver, hub);
    machine.setHosts(std::set<std::string>(cfg.hosts.begin(), cfg.hosts.end()));
    machine.setStrictReturns(opt.strictReturns);
    if (opt.seed) machine.setSeed(*opt.seed);

    std::ofstream traceFile;
    if (opt.traceFile) {
        traceFile.open(*opt.traceFile);
        if (!traceFile) {
            err << "cannot open trace file '" << opt.traceFile->string() << "'\n";
            return 2;
        }
        machine.setTraceSink(&traceFile);
    } else if (opt.trace) {
        machine.setTraceSink(&out);
    }
    machine.setKeepTrace(false); // transcripts and sinks only; no in-memory log

    // Compile every script first, then launch them in listed order.
    std::vector<CompiledScript> scripts;
    for (const auto& spec : cfg.scripts) {
        try {
            scripts.push_back(compile_script(readFile(spec.path), *resolver));
        } catch (const CompileError& e) {
            printDiag(err, spec.path, e);
            return 2;
        } catch (const ConfigError& e) {
            err << e.what() << '\n';
            return 2;
        }
    }
    for (const auto& s : scripts) {
        if (opt.dumpTypes) dumpTypes(out, s);
        if (opt.dumpCode) dumpCode(out, s);
    }
    for (std::size_t i = 0; i < scripts.size(); ++i)
        machine.launchScript(scripts[i].code, cfg.scripts[i].host);

    std::filesystem::path outDir =
        opt.outDir ? *opt.outDir
                   : input.parent_path() / (input.stem().string() + ".out");

    Outcome outcome;
    try {
        outcome = machine.run(opt.maxSteps);
    } catch (const RuntimeFault& e) {
        hub->writeTranscripts(outDir);
        err << "runtime error: " << e.kind << ": " << e.what() << '\n';
        return 5;
    }

    hub->writeTranscripts(outDir);
    if (opt.dumpResolver) out << resolver->dump();

    switch (outcome) {
    case Outcome::Quiescent:
        return 0;
    case Outcome::Deadlock:
        err << "deadlock: no rule is enabled\n";
        for (const auto& line : machine.deadlockInfo()) err << "  " << line << '\n';
        return 3;
    case Outcome::StepBudget:
        err << "step budget exhausted after " << machine.steps() << " steps\n";
        return 4;
    }
    return 5;
}

} // namespace mob
