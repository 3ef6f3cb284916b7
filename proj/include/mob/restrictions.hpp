#pragma once

#include "mob/ast.hpp"
#include "mob/diag.hpp"

#include <string>
#include <vector>

namespace mob {

// A single well-formedness violation. `kind` is a stable machine-readable
// name (MissingMain, BreakOutsideWhile, UnboundIdentifier, ...).
struct Violation {
    std::string kind;
    Pos pos;
    std::string message;
};

// Checks the structural restrictions that precede type inference:
// definition ordering, one main per agent, placement of return/break/go/exit,
// duplicate names, and closedness of variables, class ids and service ids.
// Returns every violation found, in source order.
std::vector<Violation> check_restrictions(const ast::Program& prog);

// Throws CompileError built from the first violation, if any.
void require_restrictions(const ast::Program& prog);

} // namespace mob
