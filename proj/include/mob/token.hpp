#pragma once
// Token stream produced by the lexer.

#include <cstdint>
#include <string>
#include <vector>

#include "mob/diag.hpp"

namespace mob {

enum class TokenKind {
    Keyword,    // reserved words (Table of reserved words, incl. main/null/self)
    Identifier, // lowercase-start: variables and method names
    CapIdentifier, // uppercase-start: class/agent/service names (role decided by position)
    IntLiteral,
    StringLiteral,
    BoolLiteral, // true / false
    Operator,    // + - * / % ^ && || == != < > <= >= ! =
    Punct,       // ( ) { } ; , .
    EndOfInput,
};

struct Token {
    TokenKind kind = TokenKind::EndOfInput;
    std::string lexeme;   // raw spelling ("while", "x'", "\"12:00\"", "==")
    std::string text;     // cooked value for string literals, identifier name otherwise
    int64_t intValue = 0; // for IntLiteral
    bool boolValue = false;
    Pos pos;

    bool isKeyword(const char* kw) const {
        return kind == TokenKind::Keyword && lexeme == kw;
    }
    bool isOp(const char* op) const {
        return kind == TokenKind::Operator && lexeme == op;
    }
    bool isPunct(const char* p) const {
        return kind == TokenKind::Punct && lexeme == p;
    }
};

const char* to_string(TokenKind k);

// Lexes `source`. The returned vector always ends with an EndOfInput token.
// Throws CompileError with kind "IllegalCharacter" or "UnterminatedString".
std::vector<Token> tokenize(const std::string& source);

bool is_reserved_word(const std::string& word);

} // namespace mob
