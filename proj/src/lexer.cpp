#include "mob/token.hpp"

#include <array>
#include <cctype>

namespace mob {

namespace {

const std::array<const char*, 25> kReserved = {
    "agent", "provides", "requires", "class",  "service", "main",   "new",
    "go",    "bind",     "fork",     "join",   "wait",    "notify", "lock",
    "unlock", "host",    "exec",     "if",     "else",    "while",  "break",
    "return", "exit",    "self",     "null",
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool ident_tail(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '\'';
}

} // namespace

bool is_reserved_word(const std::string& word) {
    for (const char* r : kReserved)
        if (word == r)
            return true;
    return false;
}

const char* to_string(TokenKind k) {
    switch (k) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Identifier: return "identifier";
    case TokenKind::CapIdentifier: return "capIdentifier";
    case TokenKind::IntLiteral: return "intLiteral";
    case TokenKind::StringLiteral: return "stringLiteral";
    case TokenKind::BoolLiteral: return "boolLiteral";
    case TokenKind::Operator: return "operator";
    case TokenKind::Punct: return "punctuation";
    case TokenKind::EndOfInput: return "endOfInput";
    }
    return "?";
}

std::vector<Token> tokenize(const std::string& source) {
    std::vector<Token> out;
    uint32_t line = 1, col = 1;
    size_t i = 0;
    const size_t n = source.size();

    auto peek = [&](size_t off = 0) -> char {
        return i + off < n ? source[i + off] : '\0';
    };
    auto advance = [&]() -> char {
        char c = source[i++];
        if (c == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        return c;
    };
    auto push = [&](TokenKind kind, std::string lexeme, Pos pos) -> Token& {
        Token t;
        t.kind = kind;
        t.lexeme = std::move(lexeme);
        t.text = t.lexeme;
        t.pos = pos;
        out.push_back(std::move(t));
        return out.back();
    };

    while (i < n) {
        char c = peek();
        Pos pos{line, col};

        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance();
            continue;
        }
        if (c == '/' && peek(1) == '/') {
            while (i < n && peek() != '\n')
                advance();
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::string num;
            while (i < n && std::isdigit(static_cast<unsigned char>(peek())))
                num.push_back(advance());
            Token& t = push(TokenKind::IntLiteral, num, pos);
            t.intValue = std::stoll(num);
            continue;
        }
        if (ident_start(c)) {
            std::string word;
            while (i < n && ident_tail(peek()))
                word.push_back(advance());
            if (word == "true" || word == "false") {
                Token& t = push(TokenKind::BoolLiteral, word, pos);
                t.boolValue = (word == "true");
            } else if (is_reserved_word(word)) {
                push(TokenKind::Keyword, word, pos);
            } else if (std::isupper(static_cast<unsigned char>(word[0]))) {
                push(TokenKind::CapIdentifier, word, pos);
            } else {
                push(TokenKind::Identifier, word, pos);
            }
            continue;
        }
        if (c == '"') {
            advance();
            std::string cooked;
            std::string raw = "\"";
            bool closed = false;
            while (i < n) {
                char d = peek();
                if (d == '\n')
                    break;
                advance();
                raw.push_back(d);
                if (d == '"') {
                    closed = true;
                    break;
                }
                if (d == '\\' && i < n) {
                    char e = advance();
                    raw.push_back(e);
                    switch (e) {
                    case 'n': cooked.push_back('\n'); break;
                    case 't': cooked.push_back('\t'); break;
                    case '"': cooked.push_back('"'); break;
                    case '\\': cooked.push_back('\\'); break;
                    default:
                        throw CompileError("IllegalCharacter", pos,
                                           std::string("unknown escape '\\") + e +
                                               "' in string literal");
                    }
                    continue;
                }
                cooked.push_back(d);
            }
            if (!closed)
                throw CompileError("UnterminatedString", pos,
                                   "string literal not terminated before newline/end of input");
            Token& t = push(TokenKind::StringLiteral, raw, pos);
            t.text = cooked;
            continue;
        }

        // Operators and punctuation (longest match first).
        auto two = [&](const char* op) {
            return c == op[0] && peek(1) == op[1];
        };
        if (two("&&") || two("||") || two("==") || two("!=") || two("<=") || two(">=")) {
            std::string op;
            op.push_back(advance());
            op.push_back(advance());
            push(TokenKind::Operator, op, pos);
            continue;
        }
        if (std::string("+-*/%^<>!=").find(c) != std::string::npos) {
            advance();
            push(TokenKind::Operator, std::string(1, c), pos);
            continue;
        }
        if (std::string("(){};,.").find(c) != std::string::npos) {
            advance();
            push(TokenKind::Punct, std::string(1, c), pos);
            continue;
        }
        throw CompileError("IllegalCharacter", pos,
                           std::string("unexpected character '") + c + "'");
    }

    Token end;
    end.kind = TokenKind::EndOfInput;
    end.pos = Pos{line, col};
    out.push_back(std::move(end));
    return out;
}

} // namespace mob
