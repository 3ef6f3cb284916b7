#pragma once
// Recursive-descent parser with one-token lookahead.

#include <memory>

#include "mob/ast.hpp"
#include "mob/token.hpp"

namespace mob {

// Parses a whole program (definitions, body, mandatory trailing `exit;`).
// Throws CompileError with kind "UnexpectedToken" or "SyntaxError".
std::shared_ptr<ast::Program> parse_program(const std::vector<Token>& tokens);
std::shared_ptr<ast::Program> parse_program(const std::string& source);

} // namespace mob
