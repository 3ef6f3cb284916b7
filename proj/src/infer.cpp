#include "mob/infer.hpp"

#include <set>

namespace mob {

namespace {

using namespace ast;
using types::NodeId;
using types::TypeStore;

struct Inferer {
    const Program& prog;
    TypeStore store;

    NodeId intN, stringN, boolN, threadN;

    std::map<std::string, NodeId> serviceNode;               // S -> record node
    std::map<std::string, std::vector<std::string>> declared; // S -> declared names
    std::map<std::string, NodeId> classNode;                  // X -> ((attrs), iface)
    std::map<std::string, std::map<std::string, NodeId>> classAttrs; // X -> name -> node

    // Lexical scopes: the innermost map is the current binding level.
    using Scopes = std::vector<std::map<std::string, NodeId>>;

    struct Ctx {
        NodeId retNode = 0;
        bool hasRet = false;
        NodeId selfNode = 0;
        bool hasSelf = false;
        const std::map<std::string, NodeId>* attrs = nullptr;
    };

    explicit Inferer(const Program& p) : prog(p) {
        intN = store.prim("int");
        stringN = store.prim("string");
        boolN = store.prim("bool");
        threadN = store.prim("thread");
    }

    // ---- pass 0: definition skeletons ------------------------------------

    void buildSkeletons() {
        for (const Definition& d : prog.definitions) {
            if (d.kind == Definition::Kind::Service) {
                std::set<std::string> allowed(d.serviceMethods.begin(),
                                              d.serviceMethods.end());
                serviceNode[d.name] = store.record(true, allowed);
                declared[d.name] = d.serviceMethods;
            } else if (d.kind == Definition::Kind::Requires) {
                for (const std::string& s : d.requiresList)
                    if (!serviceNode.count(s))
                        serviceNode[s] = store.record(true);
            }
        }
        for (const Definition& d : prog.definitions) {
            if (d.kind != Definition::Kind::Class && d.kind != Definition::Kind::Agent)
                continue;
            for (const std::string& s : d.requires_)
                if (!serviceNode.count(s))
                    serviceNode[s] = store.record(true);
            NodeId iface = store.record(true);
            for (const Method& m : d.methods)
                store.ensureLabel(iface, m.name, m.params.size(), m.pos,
                                  "method '" + m.name + "'");
            store.close(iface);
            std::vector<NodeId> attrs;
            std::map<std::string, NodeId> attrMap;
            for (const std::string& p : d.params) {
                NodeId n = store.fresh();
                attrs.push_back(n);
                attrMap.emplace(p, n);
            }
            classNode[d.name] = store.classPair(std::move(attrs), iface);
            classAttrs[d.name] = std::move(attrMap);
        }
    }

    // ---- pass 1: method bodies and provides ------------------------------

    void inferDefinitions() {
        for (const Definition& d : prog.definitions) {
            if (d.kind != Definition::Kind::Class && d.kind != Definition::Kind::Agent)
                continue;
            NodeId pair = classNode.at(d.name);
            NodeId iface = store.pairIface(pair);
            const auto& attrMap = classAttrs.at(d.name);

            for (const Method& m : d.methods) {
                TypeStore::Sig sig = store.ensureLabel(iface, m.name, m.params.size(),
                                                       m.pos, "method '" + m.name + "'");
                Scopes scopes;
                scopes.emplace_back();
                preboundSelectors(scopes.back());
                for (const auto& [name, node] : attrMap)
                    scopes.back()[name] = node; // attributes are plain variables here
                for (std::size_t i = 0; i < m.params.size(); ++i)
                    scopes.back()[m.params[i]] = sig.params[i];

                Ctx ctx;
                ctx.retNode = sig.ret;
                ctx.hasRet = true;
                ctx.selfNode = iface;
                ctx.hasSelf = true;
                ctx.attrs = &attrMap;
                inferSeq(m.body, scopes, ctx);
            }

            if (d.kind == Definition::Kind::Agent)
                for (const std::string& s : d.provides)
                    checkProvides(d, s, iface);
        }
    }

    void checkProvides(const Definition& d, const std::string& s, NodeId iface) {
        NodeId svc = serviceNode.at(s); // restriction pass verified the definition
        for (const std::string& dm : declared.at(s)) {
            const auto& ifaceLabels = store.labels(iface);
            auto it = ifaceLabels.find(dm);
            if (it == ifaceLabels.end())
                throw CompileError("MissingServiceMethod", d.pos,
                                   "agent '" + d.name + "' provides '" + s +
                                       "' but does not implement method '" + dm + "'");
            TypeStore::Sig have = it->second;
            TypeStore::Sig want = store.ensureLabel(svc, dm, have.params.size(), d.pos,
                                                    "service '" + s + "'");
            for (std::size_t i = 0; i < have.params.size(); ++i)
                store.unify(have.params[i], want.params[i], d.pos,
                            "service '" + s + "' method '" + dm + "'");
            store.unify(have.ret, want.ret, d.pos,
                        "service '" + s + "' method '" + dm + "'");
        }
    }

    // ---- pass 2: program body ---------------------------------------------

    void inferBody() {
        Scopes scopes;
        scopes.emplace_back();
        preboundSelectors(scopes.back());
        Ctx ctx;
        inferSeq(prog.body, scopes, ctx);
    }

    void preboundSelectors(std::map<std::string, NodeId>& level) {
        level["FILEEXEC"] = intN;
        level["IO"] = intN;
        level["FTP"] = intN;
    }

    // ---- scope handling ----------------------------------------------------

    NodeId lookupVar(const Scopes& scopes, const std::string& name, Pos pos) const {
        for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
            auto f = it->find(name);
            if (f != it->end())
                return f->second;
        }
        throw CompileError("TypeMismatch", pos,
                           "internal: variable '" + name + "' escaped the scope check");
    }

    // A straight-line assignment in the current level rebinds the name with a
    // fresh type; an assignment to an enclosing-level variable (from an if,
    // while or fork body, whose updates are observable outside) must keep its
    // type and therefore unifies.
    void assignVar(Scopes& scopes, const std::string& name, NodeId node, Pos pos) {
        auto& cur = scopes.back();
        if (cur.count(name)) {
            cur[name] = node;
            return;
        }
        for (auto it = std::next(scopes.rbegin()); it != scopes.rend(); ++it) {
            auto f = it->find(name);
            if (f != it->end()) {
                store.unify(f->second, node, pos, "assignment to '" + name + "'");
                return;
            }
        }
        cur[name] = node;
    }

    // ---- values and expressions -------------------------------------------

    NodeId inferValue(const LangValue& v, const Scopes& scopes, const Ctx& ctx) {
        switch (v.kind) {
        case LangValue::Kind::Var:
            return lookupVar(scopes, v.name, v.pos);
        case LangValue::Kind::SelfRef:
            return ctx.selfNode;
        case LangValue::Kind::Int:
            return intN;
        case LangValue::Kind::Str:
            return stringN;
        case LangValue::Kind::Bool:
            return boolN;
        case LangValue::Kind::Null:
            return store.freshNotPrim();
        }
        return intN; // unreachable
    }

    NodeId inferExpr(const Expr& e, const Scopes& scopes, const Ctx& ctx) {
        switch (e.kind) {
        case Expr::Kind::Value:
            return inferValue(e.value, scopes, ctx);
        case Expr::Kind::Group:
            return inferExpr(*e.lhs, scopes, ctx);
        case Expr::Kind::Unary: {
            NodeId op = inferExpr(*e.lhs, scopes, ctx);
            if (e.unOp == UnOp::Not) {
                store.unify(op, boolN, e.pos, "operand of '!'");
                return boolN;
            }
            store.unify(op, intN, e.pos, "operand of unary '-'");
            return intN;
        }
        case Expr::Kind::Binary: {
            NodeId l = inferExpr(*e.lhs, scopes, ctx);
            NodeId r = inferExpr(*e.rhs, scopes, ctx);
            const char* opName = ast::to_string(e.binOp);
            switch (e.binOp) {
            case BinOp::Add:
            case BinOp::Sub:
            case BinOp::Mul:
            case BinOp::Div:
            case BinOp::Mod:
                store.unify(l, intN, e.pos, std::string("left operand of '") + opName + "'");
                store.unify(r, intN, e.pos, std::string("right operand of '") + opName + "'");
                return intN;
            case BinOp::Concat:
                store.unify(l, stringN, e.pos, "left operand of '^'");
                store.unify(r, stringN, e.pos, "right operand of '^'");
                return stringN;
            case BinOp::Lt:
            case BinOp::Gt:
            case BinOp::Le:
            case BinOp::Ge:
                store.unify(l, intN, e.pos, std::string("left operand of '") + opName + "'");
                store.unify(r, intN, e.pos, std::string("right operand of '") + opName + "'");
                return boolN;
            case BinOp::Eq:
            case BinOp::Ne:
                store.unify(l, r, e.pos, std::string("operands of '") + opName + "'");
                return boolN;
            case BinOp::And:
            case BinOp::Or:
                store.unify(l, boolN, e.pos, std::string("left operand of '") + opName + "'");
                store.unify(r, boolN, e.pos,
                            std::string("right operand of '") + opName + "'");
                return boolN;
            }
            return intN; // unreachable
        }
        }
        return intN; // unreachable
    }

    // ---- instructions -------------------------------------------------------

    NodeId inferAssignValue(const AssignValue& v, Scopes& scopes, const Ctx& ctx) {
        switch (v.kind) {
        case AssignValue::Kind::NewObject: {
            NodeId pair = classNode.at(v.className);
            const auto& attrs = store.pairAttrs(pair);
            if (attrs.size() != v.args.size())
                throw CompileError("TypeMismatch", v.pos,
                                   "'" + v.className + "' takes " +
                                       std::to_string(attrs.size()) +
                                       " constructor argument(s), not " +
                                       std::to_string(v.args.size()));
            for (std::size_t i = 0; i < v.args.size(); ++i)
                store.unify(inferValue(v.args[i], scopes, ctx), attrs[i], v.pos,
                            "constructor argument of '" + v.className + "'");
            return store.pairIface(pair);
        }
        case AssignValue::Kind::Fork: {
            scopes.emplace_back();
            Ctx inner = ctx;
            inner.hasRet = false; // return may not cross a fork boundary
            inferSeq(v.forkBody, scopes, inner);
            scopes.pop_back();
            return threadN;
        }
        case AssignValue::Kind::Bind: {
            if (v.bindHost)
                store.unify(inferValue(*v.bindHost, scopes, ctx), stringN, v.pos,
                            "bind host");
            return serviceNode.at(v.serviceName);
        }
        case AssignValue::Kind::Host:
            return stringN;
        case AssignValue::Kind::Exec: {
            const LangValue& action = v.args[0];
            if (action.kind != LangValue::Kind::Str)
                throw CompileError("TypeMismatch", v.pos,
                                   "the first exec argument must be a string literal");
            store.unify(inferValue(v.args[1], scopes, ctx), intN, v.pos,
                        "second exec argument");
            store.unify(inferValue(v.args[2], scopes, ctx), stringN, v.pos,
                        "third exec argument");
            const std::string& a = action.strValue;
            if (a == "init")
                return intN;
            if (a == "read" || a == "readLine")
                return stringN;
            if (a == "write" || a == "isAlive" || a == "action" || a == "close")
                return boolN;
            throw CompileError("TypeMismatch", v.pos, "unknown exec action '" + a + "'");
        }
        case AssignValue::Kind::Invoke: {
            NodeId target = inferValue(v.target, scopes, ctx);
            TypeStore::Sig sig = store.ensureLabel(target, v.member, v.args.size(), v.pos,
                                                   "invocation of '" + v.member + "'");
            for (std::size_t i = 0; i < v.args.size(); ++i)
                store.unify(inferValue(v.args[i], scopes, ctx), sig.params[i], v.pos,
                            "argument of '" + v.member + "'");
            return sig.ret;
        }
        case AssignValue::Kind::AttrRead: {
            if (v.target.kind != LangValue::Kind::SelfRef || !ctx.attrs)
                throw CompileError("TypeMismatch", v.pos,
                                   "attribute access is only typed through self");
            auto it = ctx.attrs->find(v.member);
            if (it == ctx.attrs->end())
                throw CompileError("TypeMismatch", v.pos,
                                   "no attribute '" + v.member + "' (attributes are the "
                                   "constructor parameters)");
            return it->second;
        }
        case AssignValue::Kind::Expression:
            return inferExpr(*v.expr, scopes, ctx);
        }
        return intN; // unreachable
    }

    void inferSeq(const InstrSeq& seq, Scopes& scopes, const Ctx& ctx) {
        for (const auto& in : seq)
            inferInstr(*in, scopes, ctx);
    }

    void inferInstr(const Instr& in, Scopes& scopes, const Ctx& ctx) {
        switch (in.kind) {
        case Instr::Kind::Assign: {
            NodeId val = inferAssignValue(in.value, scopes, ctx);
            if (in.target)
                assignVar(scopes, *in.target, val, in.pos);
            break;
        }
        case Instr::Kind::AttrAssign: {
            if (in.attrTarget.kind != LangValue::Kind::SelfRef || !ctx.attrs)
                throw CompileError("TypeMismatch", in.pos,
                                   "attribute assignment is only typed through self");
            auto it = ctx.attrs->find(in.attrName);
            if (it == ctx.attrs->end())
                throw CompileError("TypeMismatch", in.pos,
                                   "no attribute '" + in.attrName +
                                       "' (attributes are the constructor parameters)");
            store.unify(inferValue(in.attrValue, scopes, ctx), it->second, in.pos,
                        "assignment to attribute '" + in.attrName + "'");
            break;
        }
        case Instr::Kind::If: {
            store.unify(inferValue(in.cond, scopes, ctx), boolN, in.pos, "if condition");
            scopes.emplace_back();
            inferSeq(in.thenBody, scopes, ctx);
            scopes.pop_back();
            scopes.emplace_back();
            inferSeq(in.elseBody, scopes, ctx);
            scopes.pop_back();
            break;
        }
        case Instr::Kind::While: {
            store.unify(inferValue(in.cond, scopes, ctx), boolN, in.pos,
                        "while condition");
            scopes.emplace_back();
            inferSeq(in.thenBody, scopes, ctx);
            scopes.pop_back();
            break;
        }
        case Instr::Kind::Go:
            store.unify(inferValue(in.arg, scopes, ctx), stringN, in.pos,
                        "go destination");
            break;
        case Instr::Kind::Return:
            if (!ctx.hasRet)
                throw CompileError("TypeMismatch", in.pos,
                                   "internal: return outside a method escaped checks");
            store.unify(inferValue(in.arg, scopes, ctx), ctx.retNode, in.pos,
                        "return value");
            break;
        case Instr::Kind::Join:
            store.unify(inferValue(in.arg, scopes, ctx), threadN, in.pos,
                        "join argument");
            break;
        case Instr::Kind::Wait:
        case Instr::Kind::Notify:
        case Instr::Kind::Lock:
        case Instr::Kind::Unlock: {
            NodeId rec = store.record(true);
            const char* what = in.kind == Instr::Kind::Wait     ? "wait argument"
                               : in.kind == Instr::Kind::Notify ? "notify argument"
                               : in.kind == Instr::Kind::Lock   ? "lock argument"
                                                                : "unlock argument";
            store.unify(inferValue(in.arg, scopes, ctx), rec, in.pos, what);
            break;
        }
        case Instr::Kind::Break:
        case Instr::Kind::Exit:
            break;
        }
    }

    // ---- result -------------------------------------------------------------

    ProgramTypes result() {
        ProgramTypes out;
        for (const auto& [name, node] : serviceNode)
            out.services.emplace(name, store.freeze(node));
        for (const auto& [name, node] : classNode)
            out.classes.emplace(name, store.freeze(node));
        return out;
    }
};

} // namespace

ProgramTypes infer_program(const ast::Program& prog) {
    Inferer inf(prog);
    inf.buildSkeletons();
    inf.inferDefinitions();
    inf.inferBody();
    return inf.result();
}

} // namespace mob
