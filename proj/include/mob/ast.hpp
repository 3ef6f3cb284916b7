#pragma once
// Abstract syntax mirroring the language grammar: programs are a definition
// sequence followed by an instruction sequence (the mandatory trailing `exit`
// terminator is not stored in `body`; the machine appends it at launch).

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mob/diag.hpp"

namespace mob::ast {

// ---- language values (v ::= x | self | c | null) ---------------------------

struct LangValue {
    enum class Kind { Var, SelfRef, Int, Str, Bool, Null };
    Kind kind = Kind::Null;
    std::string name; // Var
    int64_t intValue = 0;
    std::string strValue;
    bool boolValue = false;
    Pos pos;

    static LangValue var(std::string n, Pos p) {
        LangValue v; v.kind = Kind::Var; v.name = std::move(n); v.pos = p; return v;
    }
    static LangValue selfRef(Pos p) {
        LangValue v; v.kind = Kind::SelfRef; v.pos = p; return v;
    }
    static LangValue ofInt(int64_t i, Pos p) {
        LangValue v; v.kind = Kind::Int; v.intValue = i; v.pos = p; return v;
    }
    static LangValue ofStr(std::string s, Pos p) {
        LangValue v; v.kind = Kind::Str; v.strValue = std::move(s); v.pos = p; return v;
    }
    static LangValue ofBool(bool b, Pos p) {
        LangValue v; v.kind = Kind::Bool; v.boolValue = b; v.pos = p; return v;
    }
    static LangValue null(Pos p) {
        LangValue v; v.kind = Kind::Null; v.pos = p; return v;
    }
};

// ---- expressions ------------------------------------------------------------

enum class BinOp { Add, Sub, Mul, Div, Mod, Concat, And, Or, Eq, Ne, Lt, Gt, Le, Ge };
enum class UnOp { Not, Neg };

const char* to_string(BinOp op);
const char* to_string(UnOp op);

struct Expr {
    enum class Kind { Value, Unary, Binary, Group };
    Kind kind = Kind::Value;
    LangValue value;            // Value
    UnOp unOp = UnOp::Not;      // Unary
    BinOp binOp = BinOp::Add;   // Binary
    std::unique_ptr<Expr> lhs;  // Binary / Unary operand / Group inner
    std::unique_ptr<Expr> rhs;  // Binary
    Pos pos;
};

// ---- instructions and assignable values -------------------------------------

struct Instr;

// Instruction sequence with stable node addresses (the machine holds pointers
// into the tree while rewriting code blocks).
using InstrSeq = std::vector<std::unique_ptr<Instr>>;

struct AssignValue {
    enum class Kind {
        NewObject, // new X(ṽ)
        Fork,      // fork { P }
        Bind,      // bind(S v) / bind(S)
        Host,      // host()
        Exec,      // exec(v1 v2 v3)
        Invoke,    // o.m(ṽ)
        AttrRead,  // o.x
        Expression,
    };
    Kind kind = Kind::Expression;
    std::string className;        // NewObject
    std::vector<LangValue> args;  // NewObject / Exec (3 values) / Invoke
    InstrSeq forkBody;            // Fork
    std::string serviceName;      // Bind
    std::optional<LangValue> bindHost; // Bind with host value
    LangValue target;             // Invoke / AttrRead (Var or SelfRef)
    std::string member;           // Invoke method / AttrRead attribute
    std::unique_ptr<Expr> expr;   // Expression
    Pos pos;
};

struct Instr {
    enum class Kind {
        Assign,     // x = V   (target empty for a bare `fork { P }` statement)
        AttrAssign, // o.x = v
        If,         // if (v) { P } else { P }
        While,      // while (v) { P }
        Go,
        Return,
        Join,
        Wait,
        Notify,
        Lock,
        Unlock,
        Break,
        Exit,
    };
    Kind kind = Kind::Break;
    std::optional<std::string> target; // Assign
    AssignValue value;                 // Assign
    LangValue attrTarget;              // AttrAssign (Var or SelfRef)
    std::string attrName;              // AttrAssign
    LangValue attrValue;               // AttrAssign
    LangValue cond;                    // If / While
    InstrSeq thenBody;                 // If then / While body
    InstrSeq elseBody;                 // If else
    LangValue arg;                     // Go/Return/Join/Wait/Notify/Lock/Unlock
    Pos pos;
};

// ---- definitions -------------------------------------------------------------

struct Method {
    std::string name;
    std::vector<std::string> params;
    InstrSeq body;
    Pos pos;
};

struct Definition {
    enum class Kind { Service, Requires, Class, Agent };
    Kind kind = Kind::Service;
    std::string name;                      // Service/Class/Agent
    std::vector<std::string> serviceMethods; // Service
    std::vector<std::string> requiresList;   // Requires (program-level)
    std::vector<std::string> params;         // Class/Agent constructor params
    std::vector<std::string> provides;       // Agent
    std::vector<std::string> requires_;      // Agent
    std::vector<Method> methods;             // Class/Agent
    Pos pos;
};

struct Program {
    std::vector<Definition> definitions;
    InstrSeq body; // excludes the mandatory trailing `exit`
};

// Canonical source printer; parse(print(parse(s))) == parse(s) structurally.
std::string print_program(const Program& p);
std::string print_instr_seq(const InstrSeq& seq, int indent = 0);
std::string print_expr(const Expr& e);
std::string print_value(const LangValue& v);

} // namespace mob::ast
