#pragma once

#include "mob/ast.hpp"
#include "mob/diag.hpp"

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace mob {

// One class or agent definition, in executable form. Method bodies point into
// the owning program's AST; `nested` lists the classes instantiated inside the
// entry's method bodies (including inside if/while/fork bodies), so an entry
// travels with everything its methods can construct.
struct CodeEntry {
    bool isAgent = false;
    std::string className;
    std::vector<std::string> params;
    std::map<std::string, const ast::Method*> methods;
    std::map<std::string, const CodeEntry*> nested;
    std::vector<std::string> provides;
};

// All entries collected from one compiled program; keeps the AST alive.
struct CompiledCode {
    std::shared_ptr<const ast::Program> program;
    std::map<std::string, std::unique_ptr<CodeEntry>> entries;
    std::set<std::string> launchClasses; // classes instantiated by the program body
};

// A per-agent repository: name -> entry, plus keep-alive references to every
// program whose entries may appear here. Merging is right-biased (the entry
// added last wins).
struct CodeRepo {
    std::map<std::string, const CodeEntry*> entries;
    std::set<std::shared_ptr<const CompiledCode>> owners;

    const CodeEntry* lookup(const std::string& name) const {
        auto it = entries.find(name);
        return it == entries.end() ? nullptr : it->second;
    }

    // Adds the entry and, transitively, everything in its nested repos.
    void addTransitive(const std::string& name, const CodeEntry* e);

    // Right-biased union with another repository.
    void mergeAll(const CodeRepo& other);
};

// Builds the code repository of a parsed program. Never fails on programs
// that passed the restriction checks.
std::shared_ptr<const CompiledCode> code_collect(std::shared_ptr<const ast::Program> prog);

// The full repository of a program, as handed to its script agent at launch.
CodeRepo launch_repo(const std::shared_ptr<const CompiledCode>& code);

} // namespace mob
