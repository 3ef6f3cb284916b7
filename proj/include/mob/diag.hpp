#pragma once
// Source positions and the compile-time error type shared by the front end.

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mob {

struct Pos {
    uint32_t line = 0; // 1-based; 0 means "no position"
    uint32_t col = 0;  // 1-based

    bool valid() const { return line != 0; }
};

inline std::string to_string(Pos p) {
    if (!p.valid())
        return "<builtin>";
    return std::to_string(p.line) + ":" + std::to_string(p.col);
}

// Thrown by the lexer, parser and type inference. `kind` is a stable
// machine-readable tag (e.g. "UnterminatedString", "TypeMismatch") that tests
// assert on; what() carries the full human-readable message.
class CompileError : public std::runtime_error {
public:
    CompileError(std::string kind, Pos pos, const std::string& message)
        : std::runtime_error(to_string(pos) + ": " + kind + ": " + message),
          kind_(std::move(kind)),
          pos_(pos),
          message_(message) {}

    const std::string& kind() const { return kind_; }
    Pos pos() const { return pos_; }
    const std::string& message() const { return message_; }

private:
    std::string kind_;
    Pos pos_;
    std::string message_;
};

} // namespace mob
