#pragma once

#include "mob/ast.hpp"
#include "mob/types.hpp"

#include <map>
#include <string>

namespace mob {

// Result of whole-program inference: frozen canonical types per name.
struct ProgramTypes {
    // Every bound service (defined or required), with the record type
    // accumulated from its definition, its providers and its usages.
    std::map<std::string, types::TermPtr> services;
    // Classes and agents as ((attribute types), interface record).
    std::map<std::string, types::TermPtr> classes;
};

// Infers types for a program that already passed the structural restrictions.
// Throws CompileError with kind "TypeMismatch" or "MissingServiceMethod".
ProgramTypes infer_program(const ast::Program& prog);

} // namespace mob
