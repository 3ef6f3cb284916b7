#include "mob/parser.hpp"

namespace mob {

namespace {

using namespace ast;

class Parser {
public:
    explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

    std::shared_ptr<Program> parseProgram() {
        auto prog = std::make_shared<Program>();
        while (atDefinition())
            prog->definitions.push_back(parseDefinition());
        while (!check(TokenKind::EndOfInput))
            prog->body.push_back(parseInstr());
        if (prog->body.empty() || prog->body.back()->kind != Instr::Kind::Exit)
            throw CompileError("SyntaxError", peek().pos, "program must end with 'exit;'");
        prog->body.pop_back(); // terminator is appended by the machine at launch
        return prog;
    }

private:
    const std::vector<Token>& toks_;
    size_t pos_ = 0;

    const Token& peek(size_t off = 0) const {
        size_t i = pos_ + off;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
    bool check(TokenKind k) const { return peek().kind == k; }
    bool checkKeyword(const char* kw) const { return peek().isKeyword(kw); }
    bool matchPunct(const char* p) {
        if (peek().isPunct(p)) {
            advance();
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& expected) const {
        const Token& t = peek();
        std::string got = t.kind == TokenKind::EndOfInput
                              ? std::string("end of input")
                              : "'" + t.lexeme + "'";
        throw CompileError("UnexpectedToken", t.pos, "expected " + expected + ", got " + got);
    }
    void expectPunct(const char* p) {
        if (!matchPunct(p))
            fail(std::string("'") + p + "'");
    }
    void expectOp(const char* op) {
        if (!peek().isOp(op))
            fail(std::string("'") + op + "'");
        advance();
    }
    std::string expectIdent(const char* what) {
        if (!check(TokenKind::Identifier))
            fail(what);
        return advance().text;
    }
    std::string expectCapIdent(const char* what) {
        if (!check(TokenKind::CapIdentifier))
            fail(what);
        return advance().text;
    }

    // ---- definitions ---------------------------------------------------------

    bool atDefinition() const {
        return checkKeyword("service") || checkKeyword("requires") || checkKeyword("class") ||
               checkKeyword("agent");
    }

    Definition parseDefinition() {
        Definition d;
        d.pos = peek().pos;
        if (checkKeyword("service")) {
            advance();
            d.kind = Definition::Kind::Service;
            d.name = expectCapIdent("service name");
            expectPunct("{");
            while (!matchPunct("}")) {
                if (check(TokenKind::Identifier))
                    d.serviceMethods.push_back(advance().text);
                else if (peek().isPunct(","))
                    advance();
                else
                    fail("method name or '}'");
            }
            matchPunct(";");
            return d;
        }
        if (checkKeyword("requires")) {
            advance();
            d.kind = Definition::Kind::Requires;
            d.requiresList = parseServiceNameList();
            if (d.requiresList.empty())
                fail("service name after 'requires'");
            matchPunct(";");
            return d;
        }
        bool isAgent = checkKeyword("agent");
        advance(); // class / agent
        d.kind = isAgent ? Definition::Kind::Agent : Definition::Kind::Class;
        d.name = expectCapIdent(isAgent ? "agent name" : "class name");
        expectPunct("(");
        d.params = parseParamList();
        if (isAgent) {
            if (checkKeyword("provides")) {
                advance();
                d.provides = parseServiceNameList();
                if (d.provides.empty())
                    fail("service name after 'provides'");
            }
            if (checkKeyword("requires")) {
                advance();
                d.requires_ = parseServiceNameList();
                if (d.requires_.empty())
                    fail("service name after 'requires'");
            }
        }
        expectPunct("{");
        while (!matchPunct("}"))
            d.methods.push_back(parseMethod());
        return d;
    }

    // Service names are uppercase identifiers; the list ends at the first token
    // that cannot start another name. A CapIdentifier followed by '=' or '.' is
    // a variable beginning the program body, not a service name.
    std::vector<std::string> parseServiceNameList() {
        std::vector<std::string> names;
        while (check(TokenKind::CapIdentifier) && !peek(1).isOp("=") && !peek(1).isPunct(".")) {
            names.push_back(advance().text);
            matchPunct(",");
        }
        return names;
    }

    std::vector<std::string> parseParamList() {
        std::vector<std::string> params;
        while (!matchPunct(")")) {
            if (check(TokenKind::Identifier) || check(TokenKind::CapIdentifier))
                params.push_back(advance().text);
            else if (peek().isPunct(","))
                advance();
            else
                fail("parameter name or ')'");
        }
        return params;
    }

    Method parseMethod() {
        Method m;
        m.pos = peek().pos;
        if (check(TokenKind::Identifier) || checkKeyword("main"))
            m.name = advance().text;
        else
            fail("method name");
        if (matchPunct("(")) // `main { }` may omit an empty parameter list
            m.params = parseParamList();
        expectPunct("{");
        m.body = parseBlockBody();
        return m;
    }

    // ---- instructions --------------------------------------------------------

    InstrSeq parseBlockBody() { // consumes the closing '}'
        InstrSeq seq;
        while (!matchPunct("}"))
            seq.push_back(parseInstr());
        return seq;
    }

    std::unique_ptr<Instr> parseInstr() {
        auto in = std::make_unique<Instr>();
        in->pos = peek().pos;

        if (checkKeyword("if")) {
            advance();
            in->kind = Instr::Kind::If;
            expectPunct("(");
            in->cond = parseValue();
            expectPunct(")");
            expectPunct("{");
            in->thenBody = parseBlockBody();
            if (!checkKeyword("else"))
                fail("'else' (the language has no if without else)");
            advance();
            expectPunct("{");
            in->elseBody = parseBlockBody();
            matchPunct(";");
            return in;
        }
        if (checkKeyword("while")) {
            advance();
            in->kind = Instr::Kind::While;
            expectPunct("(");
            in->cond = parseValue();
            expectPunct(")");
            expectPunct("{");
            in->thenBody = parseBlockBody();
            matchPunct(";");
            return in;
        }
        if (checkKeyword("fork")) { // bare fork statement (no assignment target)
            advance();
            in->kind = Instr::Kind::Assign;
            in->target = std::nullopt;
            in->value = parseForkValue();
            matchPunct(";");
            return in;
        }
        if (checkKeyword("break")) {
            advance();
            in->kind = Instr::Kind::Break;
            expectPunct(";");
            return in;
        }
        if (checkKeyword("exit")) {
            advance();
            in->kind = Instr::Kind::Exit;
            expectPunct(";");
            return in;
        }
        if (checkKeyword("go") || checkKeyword("return") || checkKeyword("join") ||
            checkKeyword("wait") || checkKeyword("notify") || checkKeyword("lock") ||
            checkKeyword("unlock")) {
            const std::string kw = advance().lexeme;
            if (kw == "go") in->kind = Instr::Kind::Go;
            else if (kw == "return") in->kind = Instr::Kind::Return;
            else if (kw == "join") in->kind = Instr::Kind::Join;
            else if (kw == "wait") in->kind = Instr::Kind::Wait;
            else if (kw == "notify") in->kind = Instr::Kind::Notify;
            else if (kw == "lock") in->kind = Instr::Kind::Lock;
            else in->kind = Instr::Kind::Unlock;
            expectPunct("(");
            in->arg = parseValue();
            expectPunct(")");
            expectPunct(";");
            return in;
        }

        // Assignment or attribute assignment; both start with a variable or self.
        if (check(TokenKind::Identifier) || check(TokenKind::CapIdentifier) ||
            checkKeyword("self")) {
            if (peek(1).isPunct(".")) {
                LangValue target = parseTargetValue();
                expectPunct(".");
                std::string member = expectIdent("attribute or method name");
                if (peek().isOp("=")) { // o.x = v ;
                    advance();
                    in->kind = Instr::Kind::AttrAssign;
                    in->attrTarget = target;
                    in->attrName = member;
                    in->attrValue = parseValue();
                    expectPunct(";");
                    return in;
                }
                fail("'=' after attribute (method calls must be assigned: x = o.m(...))");
            }
            if (peek(1).isOp("=")) {
                if (checkKeyword("self"))
                    fail("a variable ('self' cannot be assigned)");
                in->kind = Instr::Kind::Assign;
                in->target = advance().text;
                advance(); // '='
                in->value = parseAssignValue();
                bool braceEnd = in->value.kind == AssignValue::Kind::Fork;
                if (!matchPunct(";") && !braceEnd)
                    fail("';'");
                return in;
            }
        }
        fail("an instruction");
    }

    LangValue parseTargetValue() { // o ::= x | self
        if (checkKeyword("self"))
            return LangValue::selfRef(advance().pos);
        if (check(TokenKind::Identifier) || check(TokenKind::CapIdentifier)) {
            const Token& t = advance();
            return LangValue::var(t.text, t.pos);
        }
        fail("a variable or 'self'");
    }

    LangValue parseValue() { // v ::= o | c | null
        const Token& t = peek();
        switch (t.kind) {
        case TokenKind::IntLiteral:
            advance();
            return LangValue::ofInt(t.intValue, t.pos);
        case TokenKind::StringLiteral:
            advance();
            return LangValue::ofStr(t.text, t.pos);
        case TokenKind::BoolLiteral:
            advance();
            return LangValue::ofBool(t.boolValue, t.pos);
        case TokenKind::Identifier:
        case TokenKind::CapIdentifier:
            advance();
            return LangValue::var(t.text, t.pos);
        case TokenKind::Keyword:
            if (t.lexeme == "self") {
                advance();
                return LangValue::selfRef(t.pos);
            }
            if (t.lexeme == "null") {
                advance();
                return LangValue::null(t.pos);
            }
            break;
        default:
            break;
        }
        fail("a value");
    }

    std::vector<LangValue> parseValueArgs() { // consumes up to and incl. ')'
        std::vector<LangValue> args;
        while (!matchPunct(")")) {
            args.push_back(parseValue());
            matchPunct(",");
        }
        return args;
    }

    AssignValue parseForkValue() {
        AssignValue v;
        v.pos = peek().pos;
        v.kind = AssignValue::Kind::Fork;
        expectPunct("{");
        v.forkBody = parseBlockBody();
        return v;
    }

    AssignValue parseAssignValue() {
        AssignValue v;
        v.pos = peek().pos;

        if (checkKeyword("new")) {
            advance();
            v.kind = AssignValue::Kind::NewObject;
            v.className = expectCapIdent("class name");
            expectPunct("(");
            v.args = parseValueArgs();
            return v;
        }
        if (checkKeyword("fork"))
            return advance(), parseForkValue();
        if (checkKeyword("bind")) {
            advance();
            v.kind = AssignValue::Kind::Bind;
            expectPunct("(");
            v.serviceName = expectCapIdent("service name");
            matchPunct(",");
            if (!matchPunct(")")) {
                v.bindHost = parseValue();
                expectPunct(")");
            }
            return v;
        }
        if (checkKeyword("host")) {
            advance();
            v.kind = AssignValue::Kind::Host;
            expectPunct("(");
            expectPunct(")");
            return v;
        }
        if (checkKeyword("exec")) {
            advance();
            v.kind = AssignValue::Kind::Exec;
            expectPunct("(");
            v.args = parseValueArgs();
            if (v.args.size() != 3)
                throw CompileError("SyntaxError", v.pos, "exec takes exactly three arguments");
            return v;
        }
        // o.m(ṽ) or o.x — a leading `o.` commits (expressions contain no dots).
        if ((check(TokenKind::Identifier) || check(TokenKind::CapIdentifier) ||
             checkKeyword("self")) &&
            peek(1).isPunct(".")) {
            v.target = parseTargetValue();
            expectPunct(".");
            v.member = expectIdent("attribute or method name");
            if (matchPunct("(")) {
                v.kind = AssignValue::Kind::Invoke;
                v.args = parseValueArgs();
            } else {
                v.kind = AssignValue::Kind::AttrRead;
            }
            return v;
        }
        v.kind = AssignValue::Kind::Expression;
        v.expr = parseExpr();
        return v;
    }

    // ---- expressions (precedence climbing) ------------------------------------
    // unary !/- bind tightest; then * / % ^; + -; < > <= >=; == !=; &&; ||.

    std::unique_ptr<Expr> parseExpr() { return parseOr(); }

    std::unique_ptr<Expr> makeBin(BinOp op, std::unique_ptr<Expr> l, std::unique_ptr<Expr> r) {
        auto e = std::make_unique<Expr>();
        e->kind = Expr::Kind::Binary;
        e->binOp = op;
        e->pos = l->pos;
        e->lhs = std::move(l);
        e->rhs = std::move(r);
        return e;
    }

    std::unique_ptr<Expr> parseOr() {
        auto l = parseAnd();
        while (peek().isOp("||"))
            advance(), l = makeBin(BinOp::Or, std::move(l), parseAnd());
        return l;
    }
    std::unique_ptr<Expr> parseAnd() {
        auto l = parseEquality();
        while (peek().isOp("&&"))
            advance(), l = makeBin(BinOp::And, std::move(l), parseEquality());
        return l;
    }
    std::unique_ptr<Expr> parseEquality() {
        auto l = parseRelational();
        while (peek().isOp("==") || peek().isOp("!=")) {
            BinOp op = peek().isOp("==") ? BinOp::Eq : BinOp::Ne;
            advance();
            l = makeBin(op, std::move(l), parseRelational());
        }
        return l;
    }
    std::unique_ptr<Expr> parseRelational() {
        auto l = parseAdditive();
        while (peek().isOp("<") || peek().isOp(">") || peek().isOp("<=") || peek().isOp(">=")) {
            BinOp op = peek().isOp("<")    ? BinOp::Lt
                       : peek().isOp(">")  ? BinOp::Gt
                       : peek().isOp("<=") ? BinOp::Le
                                           : BinOp::Ge;
            advance();
            l = makeBin(op, std::move(l), parseAdditive());
        }
        return l;
    }
    std::unique_ptr<Expr> parseAdditive() {
        auto l = parseMultiplicative();
        while (peek().isOp("+") || peek().isOp("-")) {
            BinOp op = peek().isOp("+") ? BinOp::Add : BinOp::Sub;
            advance();
            l = makeBin(op, std::move(l), parseMultiplicative());
        }
        return l;
    }
    std::unique_ptr<Expr> parseMultiplicative() {
        auto l = parseUnary();
        while (peek().isOp("*") || peek().isOp("/") || peek().isOp("%") || peek().isOp("^")) {
            BinOp op = peek().isOp("*")   ? BinOp::Mul
                       : peek().isOp("/") ? BinOp::Div
                       : peek().isOp("%") ? BinOp::Mod
                                          : BinOp::Concat;
            advance();
            l = makeBin(op, std::move(l), parseUnary());
        }
        return l;
    }
    std::unique_ptr<Expr> parseUnary() {
        if (peek().isOp("!") || peek().isOp("-")) {
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Unary;
            e->pos = peek().pos;
            e->unOp = peek().isOp("!") ? UnOp::Not : UnOp::Neg;
            advance();
            e->lhs = parseUnary();
            return e;
        }
        return parsePrimary();
    }
    std::unique_ptr<Expr> parsePrimary() {
        if (matchPunct("(")) {
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Group;
            e->pos = peek().pos;
            e->lhs = parseExpr();
            expectPunct(")");
            return e;
        }
        auto e = std::make_unique<Expr>();
        e->kind = Expr::Kind::Value;
        e->value = parseValue();
        e->pos = e->value.pos;
        return e;
    }
};

} // namespace

std::shared_ptr<ast::Program> parse_program(const std::vector<Token>& tokens) {
    Parser p(tokens);
    return p.parseProgram();
}

std::shared_ptr<ast::Program> parse_program(const std::string& source) {
    return parse_program(tokenize(source));
}

} // namespace mob
