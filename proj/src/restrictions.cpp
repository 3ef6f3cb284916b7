#include "mob/restrictions.hpp"

#include <set>

namespace mob {

namespace {

using namespace ast;

// The three external-service selectors are prebound integer variables,
// visible in the program body and in every method body.
const char* kPrebound[] = {"FILEEXEC", "IO", "FTP"};

struct Checker {
    const Program& prog;
    std::vector<Violation> out;

    std::set<std::string> classNames;    // classes and agents
    std::set<std::string> serviceDefs;   // `service S { ... }` definitions
    std::set<std::string> topRequires;   // program-level requires
    std::set<std::string> allDefNames;   // one namespace for all definitions

    // Walk context.
    struct Ctx {
        bool inMethod = false;      // return legal; self bound
        bool inAgentMethod = false; // go/exit legal
        bool inWhile = false;       // break legal
        const std::set<std::string>* agentRequires = nullptr;
    };

    void add(const char* kind, Pos pos, std::string msg) {
        out.push_back({kind, pos, std::move(msg)});
    }

    void run() {
        collectDefinitions();
        checkDefinitionOrder();
        for (const Definition& d : prog.definitions)
            checkDefinition(d);
        // Program body: prebound selectors only; no self, no method context.
        std::set<std::string> scope(std::begin(kPrebound), std::end(kPrebound));
        Ctx ctx;
        walkSeq(prog.body, scope, ctx);
    }

    void collectDefinitions() {
        for (const Definition& d : prog.definitions) {
            switch (d.kind) {
            case Definition::Kind::Service:
                if (!allDefNames.insert(d.name).second)
                    add("DuplicateDefinition", d.pos, "name '" + d.name + "' is defined twice");
                serviceDefs.insert(d.name);
                break;
            case Definition::Kind::Requires:
                // requires introduces service names; repeating one is harmless.
                for (const std::string& s : d.requiresList)
                    topRequires.insert(s);
                break;
            case Definition::Kind::Class:
            case Definition::Kind::Agent:
                if (!allDefNames.insert(d.name).second)
                    add("DuplicateDefinition", d.pos, "name '" + d.name + "' is defined twice");
                classNames.insert(d.name);
                break;
            }
        }
    }

    void checkDefinitionOrder() {
        // services, then requires, then class/agent definitions.
        int stage = 0;
        for (const Definition& d : prog.definitions) {
            int s = d.kind == Definition::Kind::Service    ? 0
                    : d.kind == Definition::Kind::Requires ? 1
                                                           : 2;
            if (s < stage)
                add("DefinitionOrder", d.pos,
                    "definitions must be ordered: services, requires, then classes and agents");
            else
                stage = s;
        }
    }

    void checkDefinition(const Definition& d) {
        if (d.kind == Definition::Kind::Service) {
            std::set<std::string> seen;
            for (const std::string& m : d.serviceMethods)
                if (!seen.insert(m).second)
                    add("DuplicateMethod", d.pos,
                        "service '" + d.name + "' lists method '" + m + "' twice");
            return;
        }
        if (d.kind == Definition::Kind::Requires)
            return;

        bool isAgent = d.kind == Definition::Kind::Agent;

        std::set<std::string> params;
        for (const std::string& p : d.params)
            if (!params.insert(p).second)
                add("DuplicateParameter", d.pos,
                    "'" + d.name + "' has duplicate parameter '" + p + "'");

        std::set<std::string> agentReq(d.requires_.begin(), d.requires_.end());
        for (const std::string& s : d.provides)
            if (!serviceDefs.count(s))
                add("UnknownService", d.pos,
                    "agent '" + d.name + "' provides undefined service '" + s + "'");

        std::set<std::string> methodNames;
        bool hasMain = false;
        for (const Method& m : d.methods) {
            if (!methodNames.insert(m.name).second)
                add("DuplicateMethod", m.pos,
                    "'" + d.name + "' defines method '" + m.name + "' twice");
            std::set<std::string> mp;
            for (const std::string& p : m.params)
                if (!mp.insert(p).second)
                    add("DuplicateParameter", m.pos,
                        "method '" + m.name + "' has duplicate parameter '" + p + "'");
            if (m.name == "main") {
                hasMain = true;
                if (!m.params.empty())
                    add("MissingMain", m.pos, "main must take no parameters");
            }

            std::set<std::string> scope(std::begin(kPrebound), std::end(kPrebound));
            scope.insert(d.params.begin(), d.params.end()); // attributes are in scope
            scope.insert(m.params.begin(), m.params.end());
            Ctx ctx;
            ctx.inMethod = true;
            ctx.inAgentMethod = isAgent;
            ctx.agentRequires = isAgent ? &agentReq : nullptr;
            walkSeq(m.body, scope, ctx);
        }
        if (isAgent && !hasMain)
            add("MissingMain", d.pos, "agent '" + d.name + "' does not implement main");
    }

    // ---- body walk ------------------------------------------------------

    bool serviceBound(const std::string& s, const Ctx& ctx) const {
        return serviceDefs.count(s) || topRequires.count(s) ||
               (ctx.agentRequires && ctx.agentRequires->count(s));
    }

    void checkValue(const LangValue& v, const std::set<std::string>& scope, const Ctx& ctx) {
        if (v.kind == LangValue::Kind::Var && !scope.count(v.name))
            add("UnboundIdentifier", v.pos, "variable '" + v.name + "' is not bound here");
        if (v.kind == LangValue::Kind::SelfRef && !ctx.inMethod)
            add("SelfOutsideMethod", v.pos, "self may only appear inside method bodies");
    }

    void checkExpr(const Expr& e, const std::set<std::string>& scope, const Ctx& ctx) {
        switch (e.kind) {
        case Expr::Kind::Value:
            checkValue(e.value, scope, ctx);
            break;
        case Expr::Kind::Unary:
        case Expr::Kind::Group:
            checkExpr(*e.lhs, scope, ctx);
            break;
        case Expr::Kind::Binary:
            checkExpr(*e.lhs, scope, ctx);
            checkExpr(*e.rhs, scope, ctx);
            break;
        }
    }

    void checkAssignValue(const AssignValue& v, std::set<std::string>& scope, const Ctx& ctx) {
        switch (v.kind) {
        case AssignValue::Kind::NewObject:
            if (!classNames.count(v.className))
                add("UnknownClass", v.pos, "class '" + v.className + "' is not defined");
            for (const LangValue& a : v.args)
                checkValue(a, scope, ctx);
            break;
        case AssignValue::Kind::Fork: {
            // The forked thread inherits the scope; return/break contexts reset,
            // go/exit remain tied to the enclosing agent method.
            std::set<std::string> inner = scope;
            Ctx c = ctx;
            c.inMethod = false;
            c.inWhile = false;
            walkSeq(v.forkBody, inner, c);
            break;
        }
        case AssignValue::Kind::Bind:
            if (!serviceBound(v.serviceName, ctx))
                add("UnknownService", v.pos,
                    "service '" + v.serviceName + "' is neither defined nor required");
            if (v.bindHost)
                checkValue(*v.bindHost, scope, ctx);
            break;
        case AssignValue::Kind::Host:
            break;
        case AssignValue::Kind::Exec:
            for (const LangValue& a : v.args)
                checkValue(a, scope, ctx);
            break;
        case AssignValue::Kind::Invoke:
            checkValue(v.target, scope, ctx);
            for (const LangValue& a : v.args)
                checkValue(a, scope, ctx);
            break;
        case AssignValue::Kind::AttrRead:
            checkValue(v.target, scope, ctx);
            break;
        case AssignValue::Kind::Expression:
            checkExpr(*v.expr, scope, ctx);
            break;
        }
    }

    void bindVar(const std::string& name, Pos pos, std::set<std::string>& scope) {
        if (allDefNames.count(name)) {
            add("DuplicateDefinition", pos,
                "variable '" + name + "' collides with a definition of the same name");
            return;
        }
        scope.insert(name);
    }

    void walkSeq(const InstrSeq& seq, std::set<std::string>& scope, const Ctx& ctx) {
        for (const auto& in : seq)
            walkInstr(*in, scope, ctx);
    }

    void walkInstr(const Instr& in, std::set<std::string>& scope, const Ctx& ctx) {
        switch (in.kind) {
        case Instr::Kind::Assign:
            checkAssignValue(in.value, scope, ctx);
            if (in.target)
                bindVar(*in.target, in.pos, scope);
            break;
        case Instr::Kind::AttrAssign:
            checkValue(in.attrTarget, scope, ctx);
            checkValue(in.attrValue, scope, ctx);
            break;
        case Instr::Kind::If: {
            checkValue(in.cond, scope, ctx);
            std::set<std::string> thenScope = scope; // branch bindings do not escape
            walkSeq(in.thenBody, thenScope, ctx);
            std::set<std::string> elseScope = scope;
            walkSeq(in.elseBody, elseScope, ctx);
            break;
        }
        case Instr::Kind::While: {
            checkValue(in.cond, scope, ctx);
            std::set<std::string> bodyScope = scope; // loop bindings do not escape
            Ctx c = ctx;
            c.inWhile = true;
            walkSeq(in.thenBody, bodyScope, c);
            break;
        }
        case Instr::Kind::Go:
            if (!ctx.inAgentMethod)
                add("GoOutsideAgent", in.pos, "go may only appear inside agent method bodies");
            checkValue(in.arg, scope, ctx);
            break;
        case Instr::Kind::Return:
            if (!ctx.inMethod)
                add("ReturnOutsideMethod", in.pos,
                    "return may only appear inside method bodies");
            checkValue(in.arg, scope, ctx);
            break;
        case Instr::Kind::Join:
        case Instr::Kind::Wait:
        case Instr::Kind::Notify:
        case Instr::Kind::Lock:
        case Instr::Kind::Unlock:
            checkValue(in.arg, scope, ctx);
            break;
        case Instr::Kind::Break:
            if (!ctx.inWhile)
                add("BreakOutsideWhile", in.pos, "break may only appear inside while bodies");
            break;
        case Instr::Kind::Exit:
            if (!ctx.inAgentMethod)
                add("ExitOutsideAgent", in.pos,
                    "exit may only appear inside agent method bodies");
            break;
        }
    }
};

} // namespace

std::vector<Violation> check_restrictions(const ast::Program& prog) {
    Checker c{prog, {}, {}, {}, {}, {}};
    c.run();
    return c.out;
}

void require_restrictions(const ast::Program& prog) {
    std::vector<Violation> vs = check_restrictions(prog);
    if (!vs.empty())
        throw CompileError(vs.front().kind, vs.front().pos, vs.front().message);
}

} // namespace mob
