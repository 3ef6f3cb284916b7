#pragma once

#include "mob/ast.hpp"
#include "mob/collect.hpp"
#include "mob/exec_service.hpp"
#include "mob/resolver.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace mob {

// Raised when a rule premise can never be satisfied (wrong dynamic types,
// unknown methods, foreign lock attempts, ...). Aborts the whole run.
struct RuntimeFault : std::runtime_error {
    RuntimeFault(std::string k, const std::string& message)
        : std::runtime_error(message), kind(std::move(k)) {}
    std::string kind;
};

// ---- runtime values ----------------------------------------------------------

struct Value {
    enum class Kind { Null, Int, Str, Bool, Ref };
    Kind kind = Kind::Null;
    long long i = 0;
    bool b = false;
    std::string s;
    QualRef ref;

    static Value null() { return {}; }
    static Value ofInt(long long v) { Value x; x.kind = Kind::Int; x.i = v; return x; }
    static Value ofStr(std::string v) { Value x; x.kind = Kind::Str; x.s = std::move(v); return x; }
    static Value ofBool(bool v) { Value x; x.kind = Kind::Bool; x.b = v; return x; }
    static Value ofRef(QualRef r) { Value x; x.kind = Kind::Ref; x.ref = r; return x; }

    bool isRef() const { return kind == Kind::Ref; }
    bool operator==(const Value& o) const {
        if (kind != o.kind) return false;
        switch (kind) {
        case Kind::Null: return true;
        case Kind::Int: return i == o.i;
        case Kind::Str: return s == o.s;
        case Kind::Bool: return b == o.b;
        case Kind::Ref: return ref == o.ref;
        }
        return false;
    }
};

std::string to_string(const Value& v); // for traces, transcripts and tests

using Env = std::map<std::string, Value>;

struct Closure {
    bool isAgent = false;
    std::string className;
    Env env; // self + constructor attributes
};

// A heap cell: either a closure or a plain value, plus the thread holding its
// lock (if any).
struct HeapCell {
    std::optional<QualRef> lockOwner;
    bool isClosure = false;
    Closure closure;
    Value value;
};

// One entry of a thread's block stack: an environment, a code pointer list and
// (for loop blocks) the while instruction owning the block.
struct Block {
    Env env;
    std::vector<const ast::Instr*> code;
    std::size_t pc = 0;
    const ast::Instr* loopInstr = nullptr;
    std::shared_ptr<const ast::InstrSeq> synthetic; // keep-alive for generated code

    bool exhausted() const { return pc >= code.size(); }
    const ast::Instr* head() const { return code[pc]; }
};

struct Thread {
    QualRef tref;                      // t-kind ref, qualified with owning agent
    std::vector<Block> stack;          // back() is the active block
    std::optional<QualRef> resultRef;  // where return delivers (possibly foreign)
    std::uint64_t seq = 0;             // arrival order in the running pool

    bool isNotify = false;             // pseudo-thread spawned to wake waiters
    QualRef notifyRef;

    std::string blockReason;           // diagnostics when not currently enabled
};

struct AgentState {
    int num = -1;
    std::string host;
    bool registered = false; // true for agents created by `new`, false for scripts
    bool tombstone = false;  // exited script awaiting collection
    QualRef selfRef;         // closure ref of a registered agent
    CodeRepo code;
    std::map<QualRef, HeapCell> heap;
    std::vector<Thread> running;
    std::map<QualRef, std::deque<Thread>> waiting;
    std::uint32_t nextR = 0;
    std::uint32_t nextT = 0;
    std::uint64_t nextSeq = 0;

    QualRef freshR() { return QualRef{num, false, nextR++}; }
    QualRef freshT() { return QualRef{num, true, nextT++}; }
};

// ---- tracing -------------------------------------------------------------------

struct TraceEvent {
    std::uint64_t stepNo = 0;
    std::string rule;
    int agent = -1;
    std::optional<QualRef> thread; // nullopt prints as '-'
    std::vector<std::pair<std::string, std::string>> details;

    std::string format() const;
};

enum class Outcome { Quiescent, Deadlock, StepBudget };

// Deep-copies a value from one agent's heap into another's: plain values and
// object graphs are duplicated (sharing and cycles preserved via the memo),
// agent closures and foreign refs travel unchanged.
Value copy_value(AgentState& src, AgentState& dst, std::map<QualRef, QualRef>& memo,
                 const Value& u);

// ---- the abstract machine -------------------------------------------------------

class Machine {
public:
    Machine(std::shared_ptr<Resolver> resolver, std::shared_ptr<ext::Hub> hub);

    void setHosts(std::set<std::string> hosts) { hosts_ = std::move(hosts); }
    void setSeed(std::uint64_t seed);       // switch to randomized scheduling
    void setStrictReturns(bool on) { strictReturns_ = on; }
    void setTraceSink(std::ostream* os) { sink_ = os; }
    void setKeepTrace(bool on) { keepTrace_ = on; }

    // Launches a program as an unregistered script agent at `host`; returns the
    // agent number. The script runs its program body followed by `exit`.
    int launchScript(std::shared_ptr<const CompiledCode> code, const std::string& host);

    // Applies one rule. Returns false when no rule is enabled anywhere.
    bool step();

    // Runs until quiescence, deadlock or the step budget is exhausted.
    Outcome run(std::uint64_t maxSteps);

    // --- introspection ----------------------------------------------------------
    Resolver& resolver() { return *resolver_; }
    const Resolver& resolver() const { return *resolver_; }
    ext::Hub& hub() { return *hub_; }
    std::uint64_t steps() const { return stepNo_; }
    const std::vector<TraceEvent>& trace() const { return trace_; }
    std::vector<int> agentNums() const;
    const AgentState* agent(int num) const;
    const HeapCell* cell(QualRef r) const;
    // The value of a registered agent's attribute, if any.
    std::optional<Value> agentAttr(int agentNum, const std::string& attr) const;
    // Diagnostics for the last run() that ended in Deadlock.
    const std::vector<std::string>& deadlockInfo() const { return deadlock_; }
    bool anyThreads() const;

private:
    // --- scheduling -------------------------------------------------------------
    struct Candidate {
        int agent;
        std::size_t idx; // index into running (after per-agent candidate ordering)
    };
    std::vector<std::size_t> candidateOrder(const AgentState& a) const;
    bool tryThread(AgentState& a, std::size_t idx, bool commit);
    bool collectTombstone(bool commit, int* which);

    // --- evaluation ---------------------------------------------------------------
    Value evalIn(const AgentState& a, const Env& env, const ast::LangValue& v) const;
    Value evalExpr(const AgentState& a, const Env& env, const ast::Expr& e) const;
    Value derefOneHop(const AgentState& a, Value v) const;

    // --- helpers -------------------------------------------------------------------
    AgentState& agentRef(int num);
    void emit(TraceEvent ev);
    void normalize(Thread& th);
    void suspend(AgentState& a, std::size_t idx, QualRef on);
    void spawnNotify(AgentState& a, QualRef r);
    void wakeAll(AgentState& a, QualRef r);
    static bool hasAccess(const HeapCell& c, QualRef t);
    std::string fmtRef(QualRef r, int perspective) const;
    void finishThread(AgentState& a, std::size_t idx, const Value& result, bool hasResult);
    void removeAgent(int num);

    std::shared_ptr<Resolver> resolver_;
    std::shared_ptr<ext::Hub> hub_;
    std::set<std::string> hosts_;
    std::map<int, AgentState> agents_;
    int nextAgent_ = 0;
    int lastAgent_ = -1;
    std::uint64_t stepNo_ = 0;
    bool strictReturns_ = false;
    bool keepTrace_ = true;
    std::ostream* sink_ = nullptr;
    std::vector<TraceEvent> trace_;
    std::vector<std::string> deadlock_;
    bool seeded_ = false;
    std::mt19937_64 rng_;
};

} // namespace mob
