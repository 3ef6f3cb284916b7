#include "mob/machine.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>
#include <sstream>

namespace mob {

using ast::AssignValue;
using ast::Instr;
using ast::LangValue;

// ---- formatting ----------------------------------------------------------------

std::string to_string(const Value& v) {
    switch (v.kind) {
    case Value::Kind::Null: return "null";
    case Value::Kind::Int: return std::to_string(v.i);
    case Value::Kind::Bool: return v.b ? "true" : "false";
    case Value::Kind::Str: return v.s;
    case Value::Kind::Ref: return to_string(v.ref);
    }
    return "?";
}

std::string TraceEvent::format() const {
    std::ostringstream os;
    os << "STEP " << stepNo << ' ' << rule << " agent=a" << agent << " thread=";
    if (thread)
        os << 't' << thread->num;
    else
        os << '-';
    if (!details.empty()) {
        os << " detail=";
        bool first = true;
        for (const auto& [k, v] : details) {
            if (!first) os << ',';
            first = false;
            os << k << ':' << v;
        }
    }
    return os.str();
}

std::string Machine::fmtRef(QualRef r, int perspective) const {
    if (r.agent < 0) return "null"; // wait/notify sentinel
    std::ostringstream os;
    os << (r.isThread ? 't' : 'r') << r.num;
    if (r.agent != perspective) os << "@a" << r.agent;
    return os.str();
}

// The key used when a wait/notify argument is the null constant.
static QualRef nullKey() { return QualRef{-1, false, 0}; }

// ---- construction ----------------------------------------------------------------

Machine::Machine(std::shared_ptr<Resolver> resolver, std::shared_ptr<ext::Hub> hub)
    : resolver_(std::move(resolver)), hub_(std::move(hub)) {}

void Machine::setSeed(std::uint64_t seed) {
    seeded_ = true;
    rng_.seed(seed);
}

AgentState& Machine::agentRef(int num) {
    auto it = agents_.find(num);
    if (it == agents_.end()) throw std::logic_error("no such agent a" + std::to_string(num));
    return it->second;
}

void Machine::removeAgent(int num) { agents_.erase(num); }

void Machine::emit(TraceEvent ev) {
    ev.stepNo = ++stepNo_;
    if (sink_) *sink_ << ev.format() << '\n';
    if (keepTrace_) trace_.push_back(std::move(ev));
}

int Machine::launchScript(std::shared_ptr<const CompiledCode> code, const std::string& host) {
    int num = nextAgent_++;
    AgentState& a = agents_[num];
    a.num = num;
    a.host = host;
    a.registered = false;
    a.code = launch_repo(code);

    Thread t;
    t.tref = a.freshT();
    a.heap[t.tref] = HeapCell{t.tref, false, {}, Value::null()};

    // The program body plus the mandatory trailing exit.
    auto synth = std::make_shared<ast::InstrSeq>();
    auto ex = std::make_unique<Instr>();
    ex->kind = Instr::Kind::Exit;
    synth->push_back(std::move(ex));

    Block b;
    for (const auto& instr : code->program->body) b.code.push_back(instr.get());
    b.code.push_back((*synth)[0].get());
    b.synthetic = synth;
    t.stack.push_back(std::move(b));
    t.seq = a.nextSeq++;
    a.running.push_back(std::move(t));
    return num;
}

// ---- evaluation -------------------------------------------------------------------

Value Machine::derefOneHop(const AgentState& a, Value v) const {
    if (!v.isRef()) return v;
    if (v.ref.isThread) return v;           // thread handles denote themselves
    if (v.ref.agent != a.num) return v;     // foreign refs are opaque
    auto it = a.heap.find(v.ref);
    if (it == a.heap.end())
        throw RuntimeFault("DanglingRef", "reference " + to_string(v.ref) + " has no cell");
    if (it->second.isClosure) return v;     // objects denote their ref
    return it->second.value;                // value cells denote their content
}

Value Machine::evalIn(const AgentState& a, const Env& env, const LangValue& v) const {
    switch (v.kind) {
    case LangValue::Kind::Int: return Value::ofInt(v.intValue);
    case LangValue::Kind::Str: return Value::ofStr(v.strValue);
    case LangValue::Kind::Bool: return Value::ofBool(v.boolValue);
    case LangValue::Kind::Null: return Value::null();
    case LangValue::Kind::SelfRef: {
        auto it = env.find("self");
        if (it == env.end())
            throw RuntimeFault("UnboundVariable", "'self' is not bound here");
        return derefOneHop(a, it->second);
    }
    case LangValue::Kind::Var: {
        auto it = env.find(v.name);
        if (it == env.end()) {
            // Prebound external service selectors are visible everywhere.
            if (v.name == "FILEEXEC") return Value::ofInt(ext::kFileExec);
            if (v.name == "IO") return Value::ofInt(ext::kIO);
            if (v.name == "FTP") return Value::ofInt(ext::kFTP);
            throw RuntimeFault("UnboundVariable", "variable '" + v.name + "' is not bound");
        }
        return derefOneHop(a, it->second);
    }
    }
    throw RuntimeFault("UnboundVariable", "unreachable value form");
}

Value Machine::evalExpr(const AgentState& a, const Env& env, const ast::Expr& e) const {
    using K = ast::Expr::Kind;
    switch (e.kind) {
    case K::Value: return evalIn(a, env, e.value);
    case K::Group: return evalExpr(a, env, *e.lhs);
    case K::Unary: {
        Value x = evalExpr(a, env, *e.lhs);
        if (e.unOp == ast::UnOp::Not) {
            if (x.kind != Value::Kind::Bool)
                throw RuntimeFault("OperatorTypeError", "'!' needs a bool operand");
            return Value::ofBool(!x.b);
        }
        if (x.kind != Value::Kind::Int)
            throw RuntimeFault("OperatorTypeError", "unary '-' needs an int operand");
        return Value::ofInt(-x.i);
    }
    case K::Binary: break;
    }
    Value l = evalExpr(a, env, *e.lhs);
    Value r = evalExpr(a, env, *e.rhs);
    auto needInts = [&](const char* op) {
        if (l.kind != Value::Kind::Int || r.kind != Value::Kind::Int)
            throw RuntimeFault("OperatorTypeError",
                               std::string("'") + op + "' needs int operands");
    };
    auto needBools = [&](const char* op) {
        if (l.kind != Value::Kind::Bool || r.kind != Value::Kind::Bool)
            throw RuntimeFault("OperatorTypeError",
                               std::string("'") + op + "' needs bool operands");
    };
    switch (e.binOp) {
    case ast::BinOp::Add: needInts("+"); return Value::ofInt(l.i + r.i);
    case ast::BinOp::Sub: needInts("-"); return Value::ofInt(l.i - r.i);
    case ast::BinOp::Mul: needInts("*"); return Value::ofInt(l.i * r.i);
    case ast::BinOp::Div:
        needInts("/");
        if (r.i == 0) throw RuntimeFault("DivisionByZero", "division by zero");
        return Value::ofInt(l.i / r.i);
    case ast::BinOp::Mod:
        needInts("%");
        if (r.i == 0) throw RuntimeFault("DivisionByZero", "modulo by zero");
        return Value::ofInt(l.i % r.i);
    case ast::BinOp::Concat:
        if (l.kind != Value::Kind::Str || r.kind != Value::Kind::Str)
            throw RuntimeFault("OperatorTypeError", "'^' needs string operands");
        return Value::ofStr(l.s + r.s);
    case ast::BinOp::Lt: needInts("<"); return Value::ofBool(l.i < r.i);
    case ast::BinOp::Gt: needInts(">"); return Value::ofBool(l.i > r.i);
    case ast::BinOp::Le: needInts("<="); return Value::ofBool(l.i <= r.i);
    case ast::BinOp::Ge: needInts(">="); return Value::ofBool(l.i >= r.i);
    case ast::BinOp::Eq: return Value::ofBool(l == r);
    case ast::BinOp::Ne: return Value::ofBool(!(l == r));
    case ast::BinOp::And: needBools("&&"); return Value::ofBool(l.b && r.b);
    case ast::BinOp::Or: needBools("||"); return Value::ofBool(l.b || r.b);
    }
    throw RuntimeFault("OperatorTypeError", "unreachable operator");
}

// ---- copy ---------------------------------------------------------------------------

Value copy_value(AgentState& src, AgentState& dst, std::map<QualRef, QualRef>& memo,
                 const Value& u) {
    if (!u.isRef()) return u;
    QualRef r = u.ref;
    if (r.agent != src.num) return u; // foreign refs travel unchanged
    if (auto it = memo.find(r); it != memo.end()) return Value::ofRef(it->second);
    auto hit = src.heap.find(r);
    if (hit == src.heap.end()) return u; // dangling: keep as an opaque foreign ref
    HeapCell& c = hit->second;
    if (c.isClosure && c.closure.isAgent) return u; // agents travel by reference

    QualRef nr = dst.freshR();
    memo.emplace(r, nr); // before recursing, so cycles and self refs remap
    if (c.isClosure) {
        HeapCell cell;
        cell.isClosure = true;
        cell.closure.isAgent = false;
        cell.closure.className = c.closure.className;
        auto [dit, _] = dst.heap.emplace(nr, std::move(cell));
        for (const auto& [k, v] : c.closure.env)
            dit->second.closure.env.emplace(k, copy_value(src, dst, memo, v));
        if (const CodeEntry* e = src.code.lookup(c.closure.className))
            dst.code.addTransitive(c.closure.className, e);
        return Value::ofRef(nr);
    }
    auto [dit, _] = dst.heap.emplace(nr, HeapCell{std::nullopt, false, {}, Value::null()});
    dit->second.value = copy_value(src, dst, memo, c.value);
    return Value::ofRef(nr);
}

// ---- thread bookkeeping ----------------------------------------------------------------

bool Machine::hasAccess(const HeapCell& c, QualRef t) {
    return !c.lockOwner || *c.lockOwner == t;
}

void Machine::normalize(Thread& th) {
    // An exhausted block with a continuation below pops silently; bindings of
    // variables already known below survive, new ones are dropped.
    while (th.stack.size() > 1 && th.stack.back().exhausted()) {
        Block top = std::move(th.stack.back());
        th.stack.pop_back();
        Block& below = th.stack.back();
        for (auto& [k, v] : below.env) {
            auto it = top.env.find(k);
            if (it != top.env.end()) v = it->second;
        }
    }
}

void Machine::suspend(AgentState& a, std::size_t idx, QualRef on) {
    Thread t = std::move(a.running[idx]);
    a.running.erase(a.running.begin() + static_cast<std::ptrdiff_t>(idx));
    normalize(t);
    a.waiting[on].push_back(std::move(t));
}

void Machine::spawnNotify(AgentState& a, QualRef r) {
    Thread n;
    n.isNotify = true;
    n.notifyRef = r;
    n.seq = a.nextSeq++;
    a.running.push_back(std::move(n));
}

void Machine::wakeAll(AgentState& a, QualRef r) {
    auto it = a.waiting.find(r);
    if (it == a.waiting.end()) return;
    std::deque<Thread> woken = std::move(it->second);
    a.waiting.erase(it);
    for (auto& t : woken) {
        t.seq = a.nextSeq++;
        t.blockReason.clear();
        a.running.push_back(std::move(t));
    }
}

// Delivers a return value (or plain thread end when there is no result slot)
// and removes the thread. Emits End / LocalReturn / RemoteReturn.
void Machine::finishThread(AgentState& a, std::size_t idx, const Value& result, bool hasResult) {
    Thread& th = a.running[idx];
    QualRef tref = th.tref;
    if (!th.resultRef) {
        (void)hasResult; // a value returned from an agent main is discarded
        a.heap[tref] = HeapCell{std::nullopt, false, {}, Value::null()};
        TraceEvent ev;
        ev.rule = "End";
        ev.agent = a.num;
        ev.thread = tref;
        emit(ev);
        spawnNotify(a, tref);
        a.running.erase(a.running.begin() + static_cast<std::ptrdiff_t>(idx));
        return;
    }
    QualRef slot = *th.resultRef;
    if (slot.agent == a.num) {
        a.heap[slot] = HeapCell{std::nullopt, false, {}, result};
        TraceEvent ev;
        ev.rule = "LocalReturn";
        ev.agent = a.num;
        ev.thread = tref;
        ev.details = {{"slot", fmtRef(slot, a.num)}};
        emit(ev);
        spawnNotify(a, slot);
        a.running.erase(a.running.begin() + static_cast<std::ptrdiff_t>(idx));
        return;
    }
    AgentState& b = agentRef(slot.agent);
    b.code.owners.insert(a.code.owners.begin(), a.code.owners.end());
    std::map<QualRef, QualRef> memo;
    Value copied = copy_value(a, b, memo, result);
    b.heap[slot] = HeapCell{std::nullopt, false, {}, copied};
    TraceEvent ev;
    ev.rule = "RemoteReturn";
    ev.agent = a.num;
    ev.thread = tref;
    ev.details = {{"slot", fmtRef(slot, a.num)}};
    emit(ev);
    spawnNotify(b, slot);
    // The dying thread owns its tref cell exclusively; release it quietly.
    if (auto hit = a.heap.find(tref); hit != a.heap.end()) hit->second.lockOwner.reset();
    a.running.erase(a.running.begin() + static_cast<std::ptrdiff_t>(idx));
}

// ---- scheduling ------------------------------------------------------------------------

std::vector<std::size_t> Machine::candidateOrder(const AgentState& a) const {
    std::vector<std::size_t> idxs(a.running.size());
    std::iota(idxs.begin(), idxs.end(), std::size_t{0});
    std::stable_sort(idxs.begin(), idxs.end(), [&](std::size_t x, std::size_t y) {
        const Thread& tx = a.running[x];
        const Thread& ty = a.running[y];
        if (tx.isNotify != ty.isNotify) return tx.isNotify; // wakeups first
        if (tx.isNotify) return tx.seq < ty.seq;
        return tx.tref.num < ty.tref.num;
    });
    return idxs;
}

bool Machine::step() {
    // Exited script agents are collected before anything else runs.
    for (auto it = agents_.begin(); it != agents_.end(); ++it) {
        if (it->second.tombstone) {
            TraceEvent ev;
            ev.rule = "AgentGC";
            ev.agent = it->first;
            emit(ev);
            agents_.erase(it);
            return true;
        }
    }

    std::vector<int> keys;
    keys.reserve(agents_.size());
    for (const auto& [k, _] : agents_) keys.push_back(k);

    if (!seeded_) {
        std::vector<int> order;
        for (int k : keys)
            if (k > lastAgent_) order.push_back(k);
        for (int k : keys)
            if (k <= lastAgent_) order.push_back(k);
        for (int k : order) {
            AgentState& a = agents_.find(k)->second;
            for (std::size_t idx : candidateOrder(a)) {
                if (tryThread(a, idx, false)) {
                    lastAgent_ = k;
                    tryThread(a, idx, true);
                    return true;
                }
            }
        }
        return false;
    }

    std::vector<Candidate> cands;
    for (int k : keys) {
        AgentState& a = agents_.find(k)->second;
        for (std::size_t idx : candidateOrder(a))
            if (tryThread(a, idx, false)) cands.push_back(Candidate{k, idx});
    }
    if (cands.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
    Candidate c = cands[pick(rng_)];
    lastAgent_ = c.agent;
    tryThread(agents_.find(c.agent)->second, c.idx, true);
    return true;
}

bool Machine::anyThreads() const {
    for (const auto& [_, a] : agents_) {
        if (!a.running.empty()) return true;
        for (const auto& [__, q] : a.waiting)
            if (!q.empty()) return true;
    }
    return false;
}

Outcome Machine::run(std::uint64_t maxSteps) {
    deadlock_.clear();
    for (std::uint64_t n = 0; n < maxSteps; ++n) {
        if (step()) continue;
        if (!anyThreads()) return Outcome::Quiescent;
        for (const auto& [num, a] : agents_) {
            for (std::size_t idx : candidateOrder(a)) {
                const Thread& th = a.running[idx];
                std::ostringstream os;
                os << "agent a" << num << " thread t" << th.tref.num << ": "
                   << (th.blockReason.empty() ? "blocked" : th.blockReason);
                deadlock_.push_back(os.str());
            }
            for (const auto& [ref, q] : a.waiting) {
                for (const Thread& th : q) {
                    std::ostringstream os;
                    os << "agent a" << num << " thread t" << th.tref.num
                       << ": suspended on " << fmtRef(ref, num);
                    deadlock_.push_back(os.str());
                }
            }
        }
        return Outcome::Deadlock;
    }
    return Outcome::StepBudget;
}

// ---- introspection -----------------------------------------------------------------------

std::vector<int> Machine::agentNums() const {
    std::vector<int> out;
    out.reserve(agents_.size());
    for (const auto& [k, _] : agents_) out.push_back(k);
    return out;
}

const AgentState* Machine::agent(int num) const {
    auto it = agents_.find(num);
    return it == agents_.end() ? nullptr : &it->second;
}

const HeapCell* Machine::cell(QualRef r) const {
    const AgentState* a = agent(r.agent);
    if (!a) return nullptr;
    auto it = a->heap.find(r);
    return it == a->heap.end() ? nullptr : &it->second;
}

std::optional<Value> Machine::agentAttr(int agentNum, const std::string& attr) const {
    const AgentState* a = agent(agentNum);
    if (!a || !a->registered) return std::nullopt;
    auto it = a->heap.find(a->selfRef);
    if (it == a->heap.end() || !it->second.isClosure) return std::nullopt;
    auto ait = it->second.closure.env.find(attr);
    if (ait == it->second.closure.env.end()) return std::nullopt;
    return ait->second;
}

// ---- the rule dispatcher -------------------------------------------------------------------

bool Machine::tryThread(AgentState& a, std::size_t idx, bool commit) {
    Thread& th = a.running[idx];

    // Wakeup pseudo-thread: moves every waiter on its ref into the run pool.
    if (th.isNotify) {
        if (!commit) return true;
        QualRef r = th.notifyRef;
        TraceEvent ev;
        ev.rule = "NotifyThread";
        ev.agent = a.num;
        ev.details = {{"ref", fmtRef(r, a.num)}};
        emit(ev);
        wakeAll(a, r);
        a.running.erase(a.running.begin() + static_cast<std::ptrdiff_t>(idx));
        return true;
    }

    Block& top = th.stack.back();

    // End of the last block: plain end, or an implicit `return null`.
    if (top.exhausted()) {
        if (th.resultRef && th.resultRef->agent != a.num &&
            agents_.find(th.resultRef->agent) == agents_.end()) {
            th.blockReason = "return: caller agent a" + std::to_string(th.resultRef->agent) +
                             " is gone";
            return false;
        }
        if (!commit) return true;
        if (th.resultRef && strictReturns_)
            throw RuntimeFault("MissingReturn",
                               "method body ended without an explicit return");
        finishThread(a, idx, Value::null(), false);
        return true;
    }

    const Instr* I = top.head();
    const Env& env = top.env;

    switch (I->kind) {

    case Instr::Kind::Assign: {
        const AssignValue& V = I->value;
        switch (V.kind) {

        case AssignValue::Kind::Bind: {
            std::optional<std::string> wantHost;
            if (V.bindHost) {
                Value h = evalIn(a, env, *V.bindHost);
                if (h.kind != Value::Kind::Str)
                    throw RuntimeFault("OperatorTypeError", "bind host must be a string");
                wantHost = h.s;
            }
            std::optional<QualRef> found;
            for (const QualRef& r : resolver_->impls(V.serviceName)) {
                if (r.agent == a.num) continue;
                if (wantHost && resolver_->hostOf(r) != wantHost) continue;
                found = r;
                break;
            }
            if (!found) {
                th.blockReason = "bind: no provider for service '" + V.serviceName + "'";
                if (wantHost) th.blockReason += " at host '" + *wantHost + "'";
                return false;
            }
            if (!commit) return true;
            TraceEvent ev;
            ev.rule = wantHost ? "Bind" : "BindAny";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"service", V.serviceName}, {"bound", fmtRef(*found, a.num)}};
            emit(ev);
            if (I->target) top.env[*I->target] = Value::ofRef(*found);
            top.pc++;
            normalize(th);
            return true;
        }

        case AssignValue::Kind::Host: {
            if (!commit) return true;
            TraceEvent ev;
            ev.rule = "Host";
            ev.agent = a.num;
            ev.thread = th.tref;
            emit(ev);
            if (I->target) top.env[*I->target] = Value::ofStr(a.host);
            top.pc++;
            normalize(th);
            return true;
        }

        case AssignValue::Kind::Exec: {
            if (!commit) return true;
            Value action = evalIn(a, env, V.args[0]);
            Value id = evalIn(a, env, V.args[1]);
            Value payload = evalIn(a, env, V.args[2]);
            if (action.kind != Value::Kind::Str || id.kind != Value::Kind::Int ||
                payload.kind != Value::Kind::Str)
                throw RuntimeFault("OperatorTypeError",
                                   "exec needs (string, int, string) arguments");
            ext::ExecResult res;
            try {
                res = hub_->exec(action.s, id.i, payload.s, "a" + std::to_string(a.num));
            } catch (const ext::ExternError& e) {
                throw RuntimeFault(e.kind, e.what());
            }
            TraceEvent ev;
            ev.rule = "Exec";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"action", action.s}, {"id", std::to_string(id.i)}};
            emit(ev);
            Value out;
            switch (res.kind) {
            case ext::ExecResult::Kind::Int: out = Value::ofInt(res.i); break;
            case ext::ExecResult::Kind::Str: out = Value::ofStr(res.s); break;
            case ext::ExecResult::Kind::Bool: out = Value::ofBool(res.b); break;
            }
            if (I->target) top.env[*I->target] = out;
            top.pc++;
            normalize(th);
            return true;
        }

        case AssignValue::Kind::Fork: {
            if (!commit) return true;
            QualRef t2 = a.freshT();
            a.heap[t2] = HeapCell{t2, false, {}, Value::null()};
            Thread child;
            child.tref = t2;
            child.seq = a.nextSeq++;
            Block blk;
            blk.env = top.env;
            for (const auto& instr : V.forkBody) blk.code.push_back(instr.get());
            child.stack.push_back(std::move(blk));
            TraceEvent ev;
            ev.rule = "Fork";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"thread", fmtRef(t2, a.num)}};
            emit(ev);
            if (I->target) top.env[*I->target] = Value::ofRef(t2);
            top.pc++;
            normalize(th);
            a.running.push_back(std::move(child)); // after: th may dangle
            return true;
        }

        case AssignValue::Kind::NewObject: {
            const CodeEntry* entry = a.code.lookup(V.className);
            if (!entry) {
                if (!commit) return true; // fault on commit for determinism
                throw RuntimeFault("UnknownClass",
                                   "no code for class '" + V.className + "'");
            }
            if (!commit) return true;
            if (V.args.size() != entry->params.size())
                throw RuntimeFault("ArityMismatch",
                                   "constructor of '" + V.className + "' takes " +
                                       std::to_string(entry->params.size()) + " arguments");
            std::vector<Value> argv;
            argv.reserve(V.args.size());
            for (const auto& av : V.args) argv.push_back(evalIn(a, env, av));

            if (!entry->isAgent) {
                QualRef r = a.freshR();
                HeapCell cell;
                cell.isClosure = true;
                cell.closure.isAgent = false;
                cell.closure.className = V.className;
                cell.closure.env["self"] = Value::ofRef(r);
                for (std::size_t i = 0; i < argv.size(); ++i)
                    cell.closure.env[entry->params[i]] = argv[i];
                a.heap[r] = std::move(cell);
                TraceEvent ev;
                ev.rule = "NewObject";
                ev.agent = a.num;
                ev.thread = th.tref;
                ev.details = {{"class", V.className}, {"ref", fmtRef(r, a.num)}};
                emit(ev);
                if (I->target) top.env[*I->target] = Value::ofRef(r);
                top.pc++;
                normalize(th);
                return true;
            }

            // A new agent: fresh heap, copied arguments, code delta, main launch,
            // resolver registration.
            auto mit = entry->methods.find("main");
            if (mit == entry->methods.end())
                throw RuntimeFault("UnknownMethod",
                                   "agent '" + V.className + "' has no main");
            int bnum = nextAgent_++;
            AgentState& b = agents_[bnum];
            b.num = bnum;
            b.host = a.host;
            b.registered = true;
            b.code.owners = a.code.owners;
            std::map<QualRef, QualRef> memo;
            std::vector<Value> cargs;
            cargs.reserve(argv.size());
            for (const auto& v : argv) cargs.push_back(copy_value(a, b, memo, v));
            b.code.addTransitive(V.className, entry);

            QualRef r = b.freshR();
            HeapCell cell;
            cell.isClosure = true;
            cell.closure.isAgent = true;
            cell.closure.className = V.className;
            cell.closure.env["self"] = Value::ofRef(r);
            for (std::size_t i = 0; i < cargs.size(); ++i)
                cell.closure.env[entry->params[i]] = cargs[i];
            b.heap[r] = cell;
            b.selfRef = r;

            QualRef t0 = b.freshT();
            b.heap[t0] = HeapCell{t0, false, {}, Value::null()};
            Thread tm;
            tm.tref = t0;
            tm.seq = b.nextSeq++;
            Block blk;
            blk.env = cell.closure.env;
            for (const auto& instr : mit->second->body) blk.code.push_back(instr.get());
            tm.stack.push_back(std::move(blk));
            b.running.push_back(std::move(tm));

            resolver_->registerAgent(r, b.host);
            for (const auto& s : entry->provides) resolver_->addImpl(s, r);

            TraceEvent ev;
            ev.rule = "NewAgent";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"class", V.className},
                          {"created", "a" + std::to_string(bnum)},
                          {"ref", fmtRef(r, a.num)}};
            emit(ev);
            if (I->target) top.env[*I->target] = Value::ofRef(r);
            top.pc++;
            normalize(th);
            return true;
        }

        case AssignValue::Kind::Invoke: {
            Value tv = evalIn(a, env, V.target);
            if (tv.isRef() && !tv.ref.isThread && tv.ref.agent != a.num &&
                agents_.find(tv.ref.agent) == agents_.end()) {
                th.blockReason =
                    "invoke: target agent a" + std::to_string(tv.ref.agent) + " is gone";
                return false;
            }
            if (!commit) return true;
            if (!tv.isRef() || tv.ref.isThread)
                throw RuntimeFault("InvokeOnNonClosure",
                                   "method call on " + to_string(tv));

            if (tv.ref.agent == a.num) {
                auto hit = a.heap.find(tv.ref);
                if (hit == a.heap.end())
                    throw RuntimeFault("DanglingRef",
                                       "reference " + to_string(tv.ref) + " has no cell");
                HeapCell& cell = hit->second;
                if (!cell.isClosure)
                    throw RuntimeFault("InvokeOnNonClosure",
                                       "method call on a plain value");
                if (!hasAccess(cell, th.tref)) {
                    TraceEvent ev;
                    ev.rule = "LocalInvokeLocked";
                    ev.agent = a.num;
                    ev.thread = th.tref;
                    ev.details = {{"target", fmtRef(tv.ref, a.num)}};
                    emit(ev);
                    suspend(a, idx, tv.ref);
                    return true;
                }
                const CodeEntry* entry = a.code.lookup(cell.closure.className);
                if (!entry)
                    throw RuntimeFault("UnknownMethod",
                                       "no code for class '" + cell.closure.className + "'");
                auto mit = entry->methods.find(V.member);
                if (mit == entry->methods.end())
                    throw RuntimeFault("UnknownMethod",
                                       "class '" + cell.closure.className + "' has no method '" +
                                           V.member + "'");
                const ast::Method* M = mit->second;
                if (V.args.size() != M->params.size())
                    throw RuntimeFault("ArityMismatch",
                                       "method '" + V.member + "' takes " +
                                           std::to_string(M->params.size()) + " arguments");
                std::vector<Value> argv;
                argv.reserve(V.args.size());
                for (const auto& av : V.args) argv.push_back(evalIn(a, env, av));

                QualRef slot = a.freshR();
                a.heap[slot] = HeapCell{th.tref, false, {}, Value::null()};
                Thread callee;
                callee.tref = th.tref; // the caller's thread continues in the method
                callee.resultRef = slot;
                callee.seq = a.nextSeq++;
                Block blk;
                blk.env = cell.closure.env;
                for (std::size_t i = 0; i < argv.size(); ++i) blk.env[M->params[i]] = argv[i];
                for (const auto& instr : M->body) blk.code.push_back(instr.get());
                callee.stack.push_back(std::move(blk));

                TraceEvent ev;
                ev.rule = "LocalInvoke";
                ev.agent = a.num;
                ev.thread = th.tref;
                ev.details = {{"method", V.member},
                              {"target", fmtRef(tv.ref, a.num)},
                              {"result", fmtRef(slot, a.num)}};
                emit(ev);
                if (I->target) top.env[*I->target] = Value::ofRef(slot);
                top.pc++;
                a.running.push_back(std::move(callee)); // th dangles after this
                suspend(a, idx, slot);
                return true;
            }

            // Remote invocation on a foreign agent closure.
            AgentState& b = agentRef(tv.ref.agent);
            auto hit = b.heap.find(tv.ref);
            if (hit == b.heap.end())
                throw RuntimeFault("DanglingRef",
                                   "reference " + to_string(tv.ref) + " has no cell");
            HeapCell& cell = hit->second;
            if (!cell.isClosure || !cell.closure.isAgent)
                throw RuntimeFault("InvokeOnNonClosure",
                                   "remote call on a non-agent reference");
            const CodeEntry* entry = b.code.lookup(cell.closure.className);
            if (!entry)
                throw RuntimeFault("UnknownMethod",
                                   "no code for class '" + cell.closure.className + "'");
            auto mit = entry->methods.find(V.member);
            if (mit == entry->methods.end())
                throw RuntimeFault("UnknownMethod",
                                   "agent '" + cell.closure.className + "' has no method '" +
                                       V.member + "'");
            const ast::Method* M = mit->second;
            if (V.args.size() != M->params.size())
                throw RuntimeFault("ArityMismatch",
                                   "method '" + V.member + "' takes " +
                                       std::to_string(M->params.size()) + " arguments");
            std::vector<Value> argv;
            argv.reserve(V.args.size());
            for (const auto& av : V.args) argv.push_back(evalIn(a, env, av));

            QualRef slot = a.freshR();
            a.heap[slot] = HeapCell{th.tref, false, {}, Value::null()};

            b.code.owners.insert(a.code.owners.begin(), a.code.owners.end());
            std::map<QualRef, QualRef> memo;
            std::vector<Value> cargs;
            cargs.reserve(argv.size());
            for (const auto& v : argv) cargs.push_back(copy_value(a, b, memo, v));

            // Trampoline in the callee: x = self.m(params); return (x)
            auto synth = std::make_shared<ast::InstrSeq>();
            {
                auto call = std::make_unique<Instr>();
                call->kind = Instr::Kind::Assign;
                call->target = "x";
                call->value.kind = AssignValue::Kind::Invoke;
                call->value.target = LangValue::selfRef(Pos{});
                call->value.member = V.member;
                for (const auto& p : M->params)
                    call->value.args.push_back(LangValue::var(p, Pos{}));
                auto ret = std::make_unique<Instr>();
                ret->kind = Instr::Kind::Return;
                ret->arg = LangValue::var("x", Pos{});
                synth->push_back(std::move(call));
                synth->push_back(std::move(ret));
            }
            QualRef t2 = b.freshT();
            b.heap[t2] = HeapCell{t2, false, {}, Value::null()};
            Thread tramp;
            tramp.tref = t2;
            tramp.resultRef = slot;
            tramp.seq = b.nextSeq++;
            Block blk;
            blk.env = cell.closure.env;
            for (std::size_t i = 0; i < cargs.size(); ++i) blk.env[M->params[i]] = cargs[i];
            blk.code = {(*synth)[0].get(), (*synth)[1].get()};
            blk.synthetic = synth;
            tramp.stack.push_back(std::move(blk));
            b.running.push_back(std::move(tramp));

            TraceEvent ev;
            ev.rule = "RemoteInvoke";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"method", V.member},
                          {"callee", "a" + std::to_string(tv.ref.agent)},
                          {"result", fmtRef(slot, a.num)}};
            emit(ev);
            if (I->target) top.env[*I->target] = Value::ofRef(slot);
            top.pc++;
            suspend(a, idx, slot);
            return true;
        }

        case AssignValue::Kind::AttrRead: {
            if (!commit) return true;
            Value tv = evalIn(a, env, V.target);
            if (!tv.isRef() || tv.ref.isThread)
                throw RuntimeFault("AttrAccessNonObject",
                                   "attribute read on " + to_string(tv));
            if (tv.ref.agent != a.num)
                throw RuntimeFault("AttrAccessForeign",
                                   "attribute read on a foreign reference");
            auto hit = a.heap.find(tv.ref);
            if (hit == a.heap.end())
                throw RuntimeFault("DanglingRef",
                                   "reference " + to_string(tv.ref) + " has no cell");
            if (!hit->second.isClosure)
                throw RuntimeFault("AttrAccessNonObject",
                                   "attribute read on a plain value");
            auto ait = hit->second.closure.env.find(V.member);
            if (ait == hit->second.closure.env.end())
                throw RuntimeFault("UnknownAttribute",
                                   "object has no attribute '" + V.member + "'");
            TraceEvent ev;
            ev.rule = "ReadAttr";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"attr", V.member}};
            emit(ev);
            if (I->target) top.env[*I->target] = ait->second;
            top.pc++;
            normalize(th);
            return true;
        }

        case AssignValue::Kind::Expression: {
            if (!commit) return true;
            Value out = evalExpr(a, env, *V.expr);
            TraceEvent ev;
            ev.rule = "Assignment";
            ev.agent = a.num;
            ev.thread = th.tref;
            emit(ev);
            if (I->target) top.env[*I->target] = out;
            top.pc++;
            normalize(th);
            return true;
        }
        }
        return false; // unreachable
    }

    case Instr::Kind::AttrAssign: {
        if (!commit) return true;
        Value tv = evalIn(a, env, I->attrTarget);
        if (!tv.isRef() || tv.ref.isThread)
            throw RuntimeFault("AttrAccessNonObject",
                               "attribute write on " + to_string(tv));
        if (tv.ref.agent != a.num)
            throw RuntimeFault("AttrAccessForeign",
                               "attribute write on a foreign reference");
        auto hit = a.heap.find(tv.ref);
        if (hit == a.heap.end())
            throw RuntimeFault("DanglingRef",
                               "reference " + to_string(tv.ref) + " has no cell");
        HeapCell& cell = hit->second;
        if (!cell.isClosure)
            throw RuntimeFault("AttrAccessNonObject", "attribute write on a plain value");
        if (!hasAccess(cell, th.tref)) {
            TraceEvent ev;
            ev.rule = "AttrAssignmentLocked";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"attr", I->attrName}};
            emit(ev);
            suspend(a, idx, tv.ref);
            return true;
        }
        auto ait = cell.closure.env.find(I->attrName);
        if (ait == cell.closure.env.end())
            throw RuntimeFault("UnknownAttribute",
                               "object has no attribute '" + I->attrName + "'");
        Value cur = derefOneHop(a, ait->second);
        if (cur.isRef() && cur.ref.agent == a.num) {
            auto cit = a.heap.find(cur.ref);
            if (cit != a.heap.end() && !hasAccess(cit->second, th.tref)) {
                TraceEvent ev;
                ev.rule = "AttrAssignmentLockedInAttr";
                ev.agent = a.num;
                ev.thread = th.tref;
                ev.details = {{"attr", I->attrName}};
                emit(ev);
                suspend(a, idx, cur.ref);
                return true;
            }
        }
        Value nv = evalIn(a, env, I->attrValue);
        TraceEvent ev;
        ev.rule = "AttrAssignment";
        ev.agent = a.num;
        ev.thread = th.tref;
        ev.details = {{"attr", I->attrName}};
        emit(ev);
        cell.closure.env[I->attrName] = nv;
        top.pc++;
        normalize(th);
        return true;
    }

    case Instr::Kind::If: {
        if (!commit) return true;
        Value c = evalIn(a, env, I->cond);
        if (c.kind != Value::Kind::Bool)
            throw RuntimeFault("OperatorTypeError", "if condition must be a bool");
        const ast::InstrSeq& branch = c.b ? I->thenBody : I->elseBody;
        std::vector<const Instr*> code;
        for (const auto& instr : branch) code.push_back(instr.get());
        for (std::size_t i = top.pc + 1; i < top.code.size(); ++i) code.push_back(top.code[i]);
        TraceEvent ev;
        ev.rule = c.b ? "IfTrue" : "IfFalse";
        ev.agent = a.num;
        ev.thread = th.tref;
        emit(ev);
        top.code = std::move(code);
        top.pc = 0;
        normalize(th);
        return true;
    }

    case Instr::Kind::While: {
        if (!commit) return true;
        if (top.loopInstr == I) {
            // At the loop head: test the condition.
            Value c = evalIn(a, env, I->cond);
            if (c.kind != Value::Kind::Bool)
                throw RuntimeFault("OperatorTypeError", "while condition must be a bool");
            if (c.b) {
                std::vector<const Instr*> code;
                for (const auto& instr : I->thenBody) code.push_back(instr.get());
                code.push_back(I);
                TraceEvent ev;
                ev.rule = "WhileTrue";
                ev.agent = a.num;
                ev.thread = th.tref;
                emit(ev);
                top.code = std::move(code);
                top.pc = 0;
                return true;
            }
            static const Instr kBreak = [] {
                Instr b;
                b.kind = Instr::Kind::Break;
                return b;
            }();
            TraceEvent ev;
            ev.rule = "WhileFalse";
            ev.agent = a.num;
            ev.thread = th.tref;
            emit(ev);
            top.code = {&kBreak};
            top.pc = 0;
            return true;
        }
        // First encounter: push a dedicated loop block over the continuation.
        Block cont;
        cont.env = top.env;
        for (std::size_t i = top.pc + 1; i < top.code.size(); ++i)
            cont.code.push_back(top.code[i]);
        cont.loopInstr = top.loopInstr;
        cont.synthetic = top.synthetic;
        Block loop;
        loop.env = top.env;
        loop.code = {I};
        loop.loopInstr = I;
        loop.synthetic = top.synthetic;
        TraceEvent ev;
        ev.rule = "PushCont";
        ev.agent = a.num;
        ev.thread = th.tref;
        emit(ev);
        th.stack.back() = std::move(cont);
        th.stack.push_back(std::move(loop));
        return true;
    }

    case Instr::Kind::Break: {
        if (!commit) return true;
        if (th.stack.size() < 2)
            throw RuntimeFault("StuckThread", "break without an enclosing block");
        TraceEvent ev;
        ev.rule = "Break";
        ev.agent = a.num;
        ev.thread = th.tref;
        emit(ev);
        Block popped = std::move(th.stack.back());
        th.stack.pop_back();
        Block& below = th.stack.back();
        for (auto& [k, v] : below.env) {
            auto it = popped.env.find(k);
            if (it != popped.env.end()) v = it->second;
        }
        normalize(th);
        return true;
    }

    case Instr::Kind::Go: {
        Value h = evalIn(a, env, I->arg);
        if (h.kind != Value::Kind::Str)
            throw RuntimeFault("OperatorTypeError", "go target must be a string");
        auto sit = env.find("self");
        if (sit == env.end() || !sit->second.isRef()) {
            th.blockReason = "go: no agent identity";
            return false;
        }
        QualRef selfR = sit->second.ref;
        if (!resolver_->hostOf(selfR)) {
            th.blockReason = "go: agent is not registered";
            return false;
        }
        if (hosts_.find(h.s) == hosts_.end()) {
            th.blockReason = "go: unknown host '" + h.s + "'";
            return false;
        }
        if (!commit) return true;
        TraceEvent ev;
        ev.rule = "Go";
        ev.agent = a.num;
        ev.thread = th.tref;
        ev.details = {{"host", h.s}};
        emit(ev);
        a.host = h.s;
        resolver_->moveAgent(selfR, h.s);
        top.pc++;
        normalize(th);
        return true;
    }

    case Instr::Kind::Return: {
        if (th.resultRef && th.resultRef->agent != a.num &&
            agents_.find(th.resultRef->agent) == agents_.end()) {
            th.blockReason = "return: caller agent a" + std::to_string(th.resultRef->agent) +
                             " is gone";
            return false;
        }
        if (!commit) return true;
        Value rv = evalIn(a, env, I->arg);
        finishThread(a, idx, rv, true);
        return true;
    }

    case Instr::Kind::Join: {
        Value tv = evalIn(a, env, I->arg);
        if (!tv.isRef() || !tv.ref.isThread) {
            if (!commit) return true;
            throw RuntimeFault("JoinOnNonThread", "join on " + to_string(tv));
        }
        QualRef t2 = tv.ref;
        if (t2 == th.tref) {
            if (!commit) return true;
            TraceEvent ev;
            ev.rule = "Join";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"on", fmtRef(t2, a.num)}};
            emit(ev);
            top.pc++;
            normalize(th);
            return true;
        }
        if (t2.agent != a.num) {
            if (!commit) return true;
            throw RuntimeFault("JoinOnNonThread", "join on a foreign thread handle");
        }
        auto hit = a.heap.find(t2);
        if (hit == a.heap.end()) {
            if (!commit) return true;
            throw RuntimeFault("DanglingRef", "thread handle " + to_string(t2) + " has no cell");
        }
        const HeapCell& cell = hit->second;
        if (cell.lockOwner && *cell.lockOwner == t2) {
            // Still running: wait for its end.
            if (!commit) return true;
            TraceEvent ev;
            ev.rule = "JoinSuspend";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"on", fmtRef(t2, a.num)}};
            emit(ev);
            suspend(a, idx, t2);
            return true;
        }
        if (!cell.lockOwner) {
            if (!commit) return true;
            TraceEvent ev;
            ev.rule = "Join";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"on", fmtRef(t2, a.num)}};
            emit(ev);
            top.pc++;
            normalize(th);
            return true;
        }
        th.blockReason = "join: handle " + fmtRef(t2, a.num) + " is locked by another thread";
        return false;
    }

    case Instr::Kind::Wait: {
        Value rv = evalIn(a, env, I->arg);
        QualRef key;
        if (rv.kind == Value::Kind::Null)
            key = nullKey();
        else if (rv.isRef())
            key = rv.ref;
        else {
            if (!commit) return true;
            throw RuntimeFault("OperatorTypeError", "wait needs a reference");
        }
        if (key == th.tref) {
            th.blockReason = "wait on the thread's own handle";
            return false;
        }
        if (!commit) return true;
        TraceEvent ev;
        ev.rule = "Wait";
        ev.agent = a.num;
        ev.thread = th.tref;
        ev.details = {{"on", fmtRef(key, a.num)}};
        emit(ev);
        top.pc++;
        suspend(a, idx, key);
        return true;
    }

    case Instr::Kind::Notify: {
        if (!commit) return true;
        Value rv = evalIn(a, env, I->arg);
        QualRef key;
        if (rv.kind == Value::Kind::Null)
            key = nullKey();
        else if (rv.isRef())
            key = rv.ref;
        else
            throw RuntimeFault("OperatorTypeError", "notify needs a reference");
        TraceEvent ev;
        ev.rule = "Notify";
        ev.agent = a.num;
        ev.thread = th.tref;
        ev.details = {{"ref", fmtRef(key, a.num)}};
        emit(ev);
        top.pc++;
        normalize(th);
        spawnNotify(a, key); // after: th may dangle
        return true;
    }

    case Instr::Kind::Lock: {
        if (!commit) return true;
        Value rv = evalIn(a, env, I->arg);
        if (!rv.isRef())
            throw RuntimeFault("OperatorTypeError", "lock needs a reference");
        if (rv.ref.agent != a.num)
            throw RuntimeFault("LockForeignRef", "lock on a foreign reference");
        auto hit = a.heap.find(rv.ref);
        if (hit == a.heap.end())
            throw RuntimeFault("DanglingRef", "reference " + to_string(rv.ref) + " has no cell");
        HeapCell& cell = hit->second;
        if (!cell.lockOwner || *cell.lockOwner == th.tref) {
            TraceEvent ev;
            ev.rule = "Lock";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"ref", fmtRef(rv.ref, a.num)}};
            emit(ev);
            cell.lockOwner = th.tref;
            top.pc++;
            normalize(th);
            return true;
        }
        TraceEvent ev;
        ev.rule = "LockFailed";
        ev.agent = a.num;
        ev.thread = th.tref;
        ev.details = {{"ref", fmtRef(rv.ref, a.num)}};
        emit(ev);
        suspend(a, idx, rv.ref);
        return true;
    }

    case Instr::Kind::Unlock: {
        if (!commit) return true;
        Value rv = evalIn(a, env, I->arg);
        if (!rv.isRef())
            throw RuntimeFault("OperatorTypeError", "unlock needs a reference");
        if (rv.ref.agent != a.num)
            throw RuntimeFault("LockForeignRef", "unlock on a foreign reference");
        auto hit = a.heap.find(rv.ref);
        if (hit == a.heap.end())
            throw RuntimeFault("DanglingRef", "reference " + to_string(rv.ref) + " has no cell");
        HeapCell& cell = hit->second;
        if (cell.lockOwner && *cell.lockOwner == th.tref) {
            TraceEvent ev;
            ev.rule = "Unlock";
            ev.agent = a.num;
            ev.thread = th.tref;
            ev.details = {{"ref", fmtRef(rv.ref, a.num)}};
            emit(ev);
            cell.lockOwner.reset();
            top.pc++;
            normalize(th);
            spawnNotify(a, rv.ref); // after: th may dangle
            return true;
        }
        TraceEvent ev;
        ev.rule = "UnlockIgnore";
        ev.agent = a.num;
        ev.thread = th.tref;
        ev.details = {{"ref", fmtRef(rv.ref, a.num)}};
        emit(ev);
        top.pc++;
        normalize(th);
        return true;
    }

    case Instr::Kind::Exit: {
        if (!commit) return true;
        TraceEvent ev;
        ev.rule = "Exit";
        ev.agent = a.num;
        ev.thread = th.tref;
        emit(ev);
        if (a.registered) {
            resolver_->dropAgent(a.num);
            removeAgent(a.num); // a and th dangle after this
            return true;
        }
        a.tombstone = true;
        a.running.clear();
        a.waiting.clear();
        a.heap.clear();
        return true;
    }
    }
    return false; // unreachable
}

} // namespace mob
