#include "mob/ast.hpp"

#include <sstream>

namespace mob::ast {

const char* to_string(BinOp op) {
    switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::Concat: return "^";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Gt: return ">";
    case BinOp::Le: return "<=";
    case BinOp::Ge: return ">=";
    }
    return "?";
}

const char* to_string(UnOp op) {
    return op == UnOp::Not ? "!" : "-";
}

namespace {

std::string escape_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

std::string pad(int indent) { return std::string(static_cast<size_t>(indent) * 2, ' '); }

void print_instr(std::ostringstream& os, const Instr& in, int indent);

void print_seq(std::ostringstream& os, const InstrSeq& seq, int indent) {
    for (const auto& in : seq)
        print_instr(os, *in, indent);
}

void print_assign_value(std::ostringstream& os, const AssignValue& v, int indent) {
    switch (v.kind) {
    case AssignValue::Kind::NewObject: {
        os << "new " << v.className << "(";
        for (size_t i = 0; i < v.args.size(); ++i)
            os << (i ? ", " : "") << print_value(v.args[i]);
        os << ")";
        break;
    }
    case AssignValue::Kind::Fork: {
        os << "fork {\n";
        print_seq(os, v.forkBody, indent + 1);
        os << pad(indent) << "}";
        break;
    }
    case AssignValue::Kind::Bind: {
        os << "bind(" << v.serviceName;
        if (v.bindHost)
            os << " " << print_value(*v.bindHost);
        os << ")";
        break;
    }
    case AssignValue::Kind::Host:
        os << "host()";
        break;
    case AssignValue::Kind::Exec: {
        os << "exec(";
        for (size_t i = 0; i < v.args.size(); ++i)
            os << (i ? ", " : "") << print_value(v.args[i]);
        os << ")";
        break;
    }
    case AssignValue::Kind::Invoke: {
        os << print_value(v.target) << "." << v.member << "(";
        for (size_t i = 0; i < v.args.size(); ++i)
            os << (i ? ", " : "") << print_value(v.args[i]);
        os << ")";
        break;
    }
    case AssignValue::Kind::AttrRead:
        os << print_value(v.target) << "." << v.member;
        break;
    case AssignValue::Kind::Expression:
        os << print_expr(*v.expr);
        break;
    }
}

void print_instr(std::ostringstream& os, const Instr& in, int indent) {
    os << pad(indent);
    switch (in.kind) {
    case Instr::Kind::Assign: {
        if (in.target)
            os << *in.target << " = ";
        print_assign_value(os, in.value, indent);
        os << ";\n";
        break;
    }
    case Instr::Kind::AttrAssign:
        os << print_value(in.attrTarget) << "." << in.attrName << " = "
           << print_value(in.attrValue) << ";\n";
        break;
    case Instr::Kind::If:
        os << "if (" << print_value(in.cond) << ") {\n";
        print_seq(os, in.thenBody, indent + 1);
        os << pad(indent) << "} else {\n";
        print_seq(os, in.elseBody, indent + 1);
        os << pad(indent) << "};\n";
        break;
    case Instr::Kind::While:
        os << "while (" << print_value(in.cond) << ") {\n";
        print_seq(os, in.thenBody, indent + 1);
        os << pad(indent) << "};\n";
        break;
    case Instr::Kind::Go: os << "go(" << print_value(in.arg) << ");\n"; break;
    case Instr::Kind::Return: os << "return (" << print_value(in.arg) << ");\n"; break;
    case Instr::Kind::Join: os << "join(" << print_value(in.arg) << ");\n"; break;
    case Instr::Kind::Wait: os << "wait(" << print_value(in.arg) << ");\n"; break;
    case Instr::Kind::Notify: os << "notify(" << print_value(in.arg) << ");\n"; break;
    case Instr::Kind::Lock: os << "lock(" << print_value(in.arg) << ");\n"; break;
    case Instr::Kind::Unlock: os << "unlock(" << print_value(in.arg) << ");\n"; break;
    case Instr::Kind::Break: os << "break;\n"; break;
    case Instr::Kind::Exit: os << "exit;\n"; break;
    }
}

int precedence(BinOp op) {
    switch (op) {
    case BinOp::Or: return 1;
    case BinOp::And: return 2;
    case BinOp::Eq:
    case BinOp::Ne: return 3;
    case BinOp::Lt:
    case BinOp::Gt:
    case BinOp::Le:
    case BinOp::Ge: return 4;
    case BinOp::Add:
    case BinOp::Sub: return 5;
    case BinOp::Mul:
    case BinOp::Div:
    case BinOp::Mod:
    case BinOp::Concat: return 6;
    }
    return 0;
}

void print_expr_prec(std::ostringstream& os, const Expr& e, int parentPrec) {
    switch (e.kind) {
    case Expr::Kind::Value:
        os << print_value(e.value);
        break;
    case Expr::Kind::Group:
        os << "(";
        print_expr_prec(os, *e.lhs, 0);
        os << ")";
        break;
    case Expr::Kind::Unary:
        os << to_string(e.unOp);
        print_expr_prec(os, *e.lhs, 7);
        break;
    case Expr::Kind::Binary: {
        int p = precedence(e.binOp);
        bool paren = p < parentPrec;
        if (paren)
            os << "(";
        print_expr_prec(os, *e.lhs, p);
        os << " " << to_string(e.binOp) << " ";
        print_expr_prec(os, *e.rhs, p + 1);
        if (paren)
            os << ")";
        break;
    }
    }
}

} // namespace

std::string print_value(const LangValue& v) {
    switch (v.kind) {
    case LangValue::Kind::Var: return v.name;
    case LangValue::Kind::SelfRef: return "self";
    case LangValue::Kind::Int: return std::to_string(v.intValue);
    case LangValue::Kind::Str: return escape_string(v.strValue);
    case LangValue::Kind::Bool: return v.boolValue ? "true" : "false";
    case LangValue::Kind::Null: return "null";
    }
    return "?";
}

std::string print_expr(const Expr& e) {
    std::ostringstream os;
    print_expr_prec(os, e, 0);
    return os.str();
}

std::string print_instr_seq(const InstrSeq& seq, int indent) {
    std::ostringstream os;
    print_seq(os, seq, indent);
    return os.str();
}

std::string print_program(const Program& p) {
    std::ostringstream os;
    for (const auto& d : p.definitions) {
        switch (d.kind) {
        case Definition::Kind::Service: {
            os << "service " << d.name << " { ";
            for (size_t i = 0; i < d.serviceMethods.size(); ++i)
                os << (i ? " " : "") << d.serviceMethods[i];
            os << " }\n";
            break;
        }
        case Definition::Kind::Requires: {
            os << "requires";
            for (const auto& s : d.requiresList)
                os << " " << s;
            os << "\n";
            break;
        }
        case Definition::Kind::Class:
        case Definition::Kind::Agent: {
            os << (d.kind == Definition::Kind::Agent ? "agent " : "class ") << d.name << "(";
            for (size_t i = 0; i < d.params.size(); ++i)
                os << (i ? ", " : "") << d.params[i];
            os << ")";
            if (!d.provides.empty()) {
                os << " provides";
                for (const auto& s : d.provides)
                    os << " " << s;
            }
            if (!d.requires_.empty()) {
                os << " requires";
                for (const auto& s : d.requires_)
                    os << " " << s;
            }
            os << " {\n";
            for (const auto& m : d.methods) {
                os << "  " << m.name << "(";
                for (size_t i = 0; i < m.params.size(); ++i)
                    os << (i ? ", " : "") << m.params[i];
                os << ") {\n";
                os << print_instr_seq(m.body, 2);
                os << "  }\n";
            }
            os << "}\n";
            break;
        }
        }
    }
    os << print_instr_seq(p.body, 0);
    os << "exit;\n";
    return os.str();
}

} // namespace mob::ast
