// End-to-end acceptance suite. Each criterion prints exactly one
//
//   CRITERION <n> PASS — <description>
//   CRITERION <n> FAIL — <description> [first reason]
//
// line and the process exits with the number of failed criteria. Fixture
// programs, run configurations and the pinned golden trace live under
// tests/ in the source tree (located through MOB_SOURCE_DIR).

#include "mob/config.hpp"
#include "mob/diag.hpp"
#include "mob/driver.hpp"
#include "mob/machine.hpp"
#include "mob/parser.hpp"
#include "mob/restrictions.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace mob;

static const fs::path kSrc = MOB_SOURCE_DIR;
static const fs::path kCorpus = kSrc / "tests" / "corpus";
static const fs::path kConfigs = kSrc / "tests" / "configs";
static const fs::path kGolden = kSrc / "tests" / "golden";
static const fs::path kMutants = kSrc / "tests" / "mutants";

// ---- small helpers -----------------------------------------------------------

static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

static std::vector<std::string> splitLines(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == '\n') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Rule name of a "STEP <n> <Rule> ..." line, empty otherwise.
static std::string ruleOf(const std::string& line) {
    std::istringstream is(line);
    std::string a, b, c;
    if ((is >> a >> b >> c) && a == "STEP") return c;
    return "";
}

static bool isSubsequence(const std::vector<std::string>& haystack,
                          const std::vector<std::string>& needle) {
    std::size_t i = 0;
    for (const auto& h : haystack)
        if (i < needle.size() && h == needle[i]) ++i;
    return i == needle.size();
}

static std::string detailOf(const TraceEvent& ev, const std::string& key) {
    for (const auto& [k, v] : ev.details)
        if (k == key) return v;
    return "";
}

static fs::path freshTmpDir(const std::string& tag) {
    static int counter = 0;
    fs::path p = fs::temp_directory_path() /
                 ("mob-accept-" + tag + "-" + std::to_string(++counter));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Accumulates sub-checks; remembers the first failure reason.
struct Criterion {
    bool pass = true;
    std::string why;
    void expect(bool cond, const std::string& reason) {
        if (!cond && pass) {
            pass = false;
            why = reason;
        }
    }
};

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

// A resolver + hub + machine bundle for API-level runs.
struct Sim {
    std::shared_ptr<Resolver> res = std::make_shared<Resolver>();
    std::shared_ptr<ext::Hub> hub;
    std::unique_ptr<Machine> m;
    explicit Sim(ext::ExternConfig cfg = {})
        : hub(std::make_shared<ext::Hub>(std::move(cfg))),
          m(std::make_unique<Machine>(res, hub)) {}
};

// ---- criterion 1: corpus compiles, mutants are rejected -----------------------

static Criterion crit1() {
    Criterion c;
    Timer t;

    try {
        Resolver shared; // the time pair shares one resolver, like a config run
        compile_script(slurp(kCorpus / "listing1.mob"), shared);
        compile_script(slurp(kCorpus / "listing2.mob"), shared);
    } catch (const CompileError& e) {
        c.expect(false, std::string("time listings: ") + e.what());
    }
    // The printed messenger pair is not jointly consistent: the client reuses
    // one variable across nested scopes, which pins the logIn result to bool,
    // while the server returns null there. Each program compiles on its own;
    // the runnable peer client is compiled jointly with the server instead.
    for (const char* file : {"listing3.mob", "listing4.mob"}) {
        try {
            Resolver own;
            compile_script(slurp(kCorpus / file), own);
        } catch (const CompileError& e) {
            c.expect(false, std::string(file) + ": " + e.what());
        }
    }
    try {
        Resolver shared;
        compile_script(slurp(kCorpus / "listing3.mob"), shared);
        compile_script(slurp(kCorpus / "peer_client.mob"), shared);
    } catch (const CompileError& e) {
        c.expect(false, std::string("messenger system: ") + e.what());
    }

    static const std::pair<const char*, const char*> mutants[] = {
        {"break_outside_while.mob", "BreakOutsideWhile"},
        {"duplicate_method.mob", "DuplicateMethod"},
        {"go_in_class.mob", "GoOutsideAgent"},
        {"int_as_bool.mob", "TypeMismatch"},
        {"missing_main.mob", "MissingMain"},
        {"missing_service_method.mob", "MissingServiceMethod"},
        {"order_violation.mob", "DefinitionOrder"},
        {"return_at_top.mob", "ReturnOutsideMethod"},
        {"unbound_service.mob", "UnknownService"},
        {"unbound_var.mob", "UnboundIdentifier"},
    };
    for (const auto& [file, kind] : mutants) {
        bool threw = false;
        std::string got;
        try {
            Resolver r;
            compile_script(slurp(kMutants / file), r);
        } catch (const CompileError& e) {
            threw = true;
            got = e.kind();
        }
        c.expect(threw, std::string(file) + " was accepted");
        if (threw)
            c.expect(got == kind,
                     std::string(file) + " rejected as " + got + ", expected " + kind);
    }

    c.expect(t.seconds() < 1.0, "took longer than one second");
    return c;
}

// ---- criterion 2: golden trace of the time service run ------------------------

static Criterion crit2() {
    Criterion c;
    Timer t;
    fs::path tmp = freshTmpDir("c2");

    RunOptions opt;
    opt.trace = true;
    opt.dumpResolver = true;
    opt.outDir = tmp;
    std::ostringstream out, err;
    int rc = run_mob(kConfigs / "time.cfg", opt, out, err);
    c.expect(rc == 0, "exit code " + std::to_string(rc) + ": " + err.str());

    c.expect(out.str() == slurp(kGolden / "time_trace.txt"),
             "trace or resolver dump differs from the pinned golden output");

    // Structure checks independent of the golden file: the client must bind,
    // migrate to each time host, call the server remotely and run its own
    // exec steps on the answer.
    auto lines = splitLines(out.str());
    std::vector<std::string> rules;
    for (const auto& l : lines) {
        std::string r = ruleOf(l);
        if (!r.empty()) rules.push_back(r);
    }
    c.expect(isSubsequence(rules, {"NewAgent", "Exit", "AgentGC", "BindAny", "Go",
                                   "RemoteInvoke", "LocalInvoke", "Exec", "LocalReturn",
                                   "RemoteReturn", "NotifyThread", "End"}),
             "expected rule order not found in the trace");
    for (const char* host : {"host1.net1", "host2.net2", "host3.net3"}) {
        bool found = false;
        for (const auto& l : lines)
            if (ruleOf(l) == "Go" && l.find("host:" + std::string(host)) != std::string::npos)
                found = true;
        c.expect(found, std::string("no migration to ") + host);
    }
    bool ansServer = false, ansClient = false, snsTime = false;
    for (const auto& l : lines) {
        if (l == "ANS r0@a2 h") ansServer = true;
        if (l.rfind("ANS ", 0) == 0 && l.find("host3.net3") != std::string::npos)
            ansClient = true;
        if (l.rfind("SNS Time ", 0) == 0 && l.find("{r0@a2}") != std::string::npos)
            snsTime = true;
    }
    c.expect(ansServer, "server not registered at host h");
    c.expect(ansClient, "client did not end up on host3.net3");
    c.expect(snsTime, "Time service not provided by the server in the SNS");

    std::string fe = slurp(tmp / "fileexec.txt");
    std::string expected;
    for (int i = 0; i < 3; ++i) expected += "getTimeApplication\nsetTimeApplication 12:00\n";
    c.expect(fe == expected, "fileexec transcript differs");

    c.expect(t.seconds() < 1.0, "took longer than one second");
    fs::remove_all(tmp);
    return c;
}

// ---- criterion 3: messenger exchange, deep-copy isolation ---------------------

static Criterion crit3() {
    Criterion c;
    Timer t;

    Sim sim;
    CompiledScript srv, cli;
    try {
        srv = compile_script(slurp(kCorpus / "listing3.mob"), *sim.res);
        cli = compile_script(slurp(kCorpus / "peer_client.mob"), *sim.res);
    } catch (const CompileError& e) {
        c.expect(false, std::string("compile: ") + e.what());
        return c;
    }
    sim.m->setHosts({"h", "h2"});
    sim.m->launchScript(srv.code, "h");
    sim.m->launchScript(cli.code, "h2");
    Outcome oc = sim.m->run(200000);
    // close() exits the client agent instead of returning, so the launching
    // script stays blocked forever: the run must end in a reported deadlock.
    c.expect(oc == Outcome::Deadlock, "run did not end blocked on the lost close() reply");

    const auto& tr = sim.m->trace();
    int srvNum = -1, cliNum = -1;
    for (const auto& ev : tr) {
        if (ev.rule != "NewAgent") continue;
        std::string cls = detailOf(ev, "class");
        int num = std::atoi(detailOf(ev, "created").c_str() + 1);
        if (cls == "MessengerServer") srvNum = num;
        if (cls == "PeerClient") cliNum = num;
    }
    c.expect(srvNum >= 0 && cliNum >= 0, "agent creation events missing");

    auto indexOf = [&](const std::string& rule, const std::string& method) {
        for (std::size_t i = 0; i < tr.size(); ++i)
            if (tr[i].rule == rule && detailOf(tr[i], "method") == method) return (long)i;
        return -1L;
    };
    long login = indexOf("RemoteInvoke", "logIn");
    long logout = indexOf("RemoteInvoke", "logOut");
    long printMsg = indexOf("RemoteInvoke", "printMessage");
    c.expect(login >= 0, "no remote logIn");
    c.expect(logout >= 0, "no remote logOut");
    c.expect(printMsg >= 0, "no remote printMessage");
    c.expect(login < logout, "logOut happened before logIn");

    // The client mutated its own copy of the logged map (adding a ghost user);
    // that add must run inside the client agent ...
    bool ghostAddOnClient = false;
    for (const auto& ev : tr)
        if (ev.rule == "LocalInvoke" && detailOf(ev, "method") == "add" && ev.agent == cliNum)
            ghostAddOnClient = true;
    c.expect(ghostAddOnClient, "the client never mutated its copy of the map");

    // ... while the server's original map stays empty after the final logOut.
    const AgentState* server = sim.m->agent(srvNum);
    c.expect(server != nullptr, "server agent vanished");
    if (server) {
        auto logged = sim.m->agentAttr(srvNum, "logged");
        c.expect(logged && logged->isRef(), "server has no logged map");
        if (logged && logged->isRef()) {
            const HeapCell* mapCell = sim.m->cell(logged->ref);
            c.expect(mapCell && mapCell->isClosure, "logged is not an object");
            if (mapCell && mapCell->isClosure) {
                auto cnt = mapCell->closure.env.find("count");
                auto head = mapCell->closure.env.find("head");
                c.expect(cnt != mapCell->closure.env.end() && *&cnt->second == Value::ofInt(0),
                         "server map count is not 0");
                c.expect(head != mapCell->closure.env.end() &&
                             head->second.kind == Value::Kind::Null,
                         "server map still holds entries");
            }
        }
    }

    // printMessage reached the client and wrote through its console session.
    bool hello = false;
    for (const auto& [owner, lines] : sim.hub->ioWrites())
        for (const auto& l : lines)
            if (l == "hello") hello = true;
    c.expect(hello, "the delivered message never reached the console");

    // Resolver cleanup: the exited client is gone from both name services.
    c.expect(sim.m->agent(cliNum) == nullptr, "client agent not collected after exit");
    c.expect(sim.res->ans().size() == 1 && sim.res->ans().begin()->first.agent == srvNum,
             "agent name service should hold exactly the server");
    c.expect(sim.res->impls("Messenger").size() == 1, "Messenger must keep its provider");
    c.expect(sim.res->impls("MessengerPeer").empty(),
             "MessengerPeer must have no providers left");
    c.expect(sim.res->hasServiceType("MessengerPeer"),
             "MessengerPeer's registered type must survive its provider");

    c.expect(t.seconds() < 1.0, "took longer than one second");
    return c;
}

// ---- criterion 4: chunked ftp transfer -----------------------------------------

static Criterion crit4() {
    Criterion c;
    Timer t;

    RunConfig cfg = parse_config(kConfigs / "ftp.cfg");
    Sim sim(cfg.mocks);
    CompiledScript prog;
    try {
        prog = compile_script(slurp(kCorpus / "ftp_session.mob"), *sim.res);
    } catch (const CompileError& e) {
        c.expect(false, std::string("compile: ") + e.what());
        return c;
    }
    sim.m->setHosts({"h"});
    sim.m->launchScript(prog.code, "h");
    c.expect(sim.m->run(100000) == Outcome::Quiescent, "ftp session did not run to completion");

    std::string expectedFile;
    for (int i = 0; i < 10000; ++i) expectedFile += char('a' + i % 26);

    std::vector<std::size_t> readSizes;
    std::string readBytes;
    bool actionOk = false, closeOk = false;
    for (const auto& rec : sim.hub->calls()) {
        if (rec.action == "read") {
            readSizes.push_back(rec.result.s.size());
            readBytes += rec.result.s;
        }
        if (rec.action == "action" && rec.payload == "GET afile")
            actionOk = rec.result.kind == ext::ExecResult::Kind::Bool && rec.result.b;
        if (rec.action == "close")
            closeOk = rec.result.kind == ext::ExecResult::Kind::Bool && rec.result.b;
    }
    c.expect(actionOk, "GET afile was not acknowledged");
    c.expect(readSizes == std::vector<std::size_t>{4096, 4096, 1808, 0},
             "read chunk sizes are wrong");
    c.expect(readBytes == expectedFile, "reassembled bytes differ from the served file");
    c.expect(closeOk, "session close did not report success");

    c.expect(t.seconds() < 2.0, "took longer than expected");
    return c;
}

// ---- criterion 5: randomized schedules keep locking sound ---------------------

static Criterion crit5() {
    Criterion c;
    Timer t;

    Resolver compileRes;
    CompiledScript prog;
    try {
        prog = compile_script(slurp(kCorpus / "lock_stress.mob"), compileRes);
    } catch (const CompileError& e) {
        c.expect(false, std::string("compile: ") + e.what());
        return c;
    }

    const int runs = 1000;
    for (int seed = 1; seed <= runs && c.pass; ++seed) {
        Sim sim;
        sim.m->setHosts({"h"});
        sim.m->setSeed((std::uint64_t)seed);
        sim.m->setKeepTrace(false);
        sim.m->launchScript(prog.code, "h");

        std::string tag = " (seed " + std::to_string(seed) + ")";
        std::uint64_t steps = 0;
        while (sim.m->step()) {
            if (++steps > 100000) break;
            // Every held lock must be owned by a live thread of the owning agent.
            for (int num : sim.m->agentNums()) {
                const AgentState* a = sim.m->agent(num);
                for (const auto& [ref, cell] : a->heap) {
                    if (!cell.lockOwner) continue;
                    QualRef owner = *cell.lockOwner;
                    c.expect(owner.agent == num, "lock held by a foreign agent" + tag);
                    const AgentState* oa = sim.m->agent(owner.agent);
                    bool live = false;
                    if (oa) {
                        for (const auto& th : oa->running)
                            if (th.tref == owner) live = true;
                        for (const auto& [_, q] : oa->waiting)
                            for (const auto& th : q)
                                if (th.tref == owner) live = true;
                    }
                    c.expect(live, "lock held by a dead thread" + tag);
                }
            }
            if (!c.pass) break;
        }
        c.expect(steps <= 100000, "run exceeded the step budget" + tag);
        c.expect(!sim.m->anyThreads(), "run left stuck threads behind" + tag);

        bool sawTotal = false;
        for (int num : sim.m->agentNums()) {
            const AgentState* a = sim.m->agent(num);
            for (const auto& [_, q] : a->waiting)
                c.expect(q.empty(), "suspended thread left behind" + tag);
            for (const auto& [ref, cell] : a->heap)
                c.expect(!cell.lockOwner, "lock still held after quiescence" + tag);
            auto total = sim.m->agentAttr(num, "total");
            if (total) {
                sawTotal = true;
                c.expect(*total == Value::ofInt(16),
                         "counter ended at " + to_string(*total) + ", not 16" + tag);
            }
        }
        c.expect(sawTotal, "stress agent disappeared" + tag);
    }

    c.expect(t.seconds() < 60.0, "took longer than expected");
    return c;
}

// ---- criterion 6: copying cyclic object graphs between agents ------------------

namespace {

// Canonical serialization of an agent's heap, for before/after comparisons.
std::string snapshotHeap(const AgentState& a) {
    std::ostringstream os;
    for (const auto& [ref, cell] : a.heap) {
        os << to_string(ref) << " lock=" << (cell.lockOwner ? "y" : "n");
        if (cell.isClosure) {
            os << " closure " << (cell.closure.isAgent ? "agent " : "") << cell.closure.className;
            for (const auto& [k, v] : cell.closure.env) os << " " << k << "=" << to_string(v);
        } else {
            os << " value " << to_string(cell.value);
        }
        os << "\n";
    }
    return os.str();
}

} // namespace

static Criterion crit6() {
    Criterion c;
    std::mt19937_64 rng(0xC0FFEE);

    for (int iter = 0; iter < 200 && c.pass; ++iter) {
        std::string tag = " (graph " + std::to_string(iter) + ")";
        AgentState src;
        src.num = 1;
        src.host = "h";
        AgentState dst;
        dst.num = 2;
        dst.host = "k";

        // Cells live on five generation layers; references descend at most one
        // layer (or jump back up), which keeps the graphs shallow but cyclic.
        int n = 3 + (int)(rng() % 10);
        std::vector<QualRef> refs;
        std::vector<int> layer(n);
        for (int i = 0; i < n; ++i) {
            refs.push_back(src.freshR());
            layer[i] = i == 0 ? 1 : 1 + (int)(rng() % 5);
        }
        auto pickTarget = [&](int from) {
            std::vector<int> ok;
            for (int j = 0; j < n; ++j)
                if (layer[j] <= layer[from] + 1) ok.push_back(j);
            return refs[ok[rng() % ok.size()]];
        };
        for (int i = 0; i < n; ++i) {
            HeapCell cell;
            bool agentCell = rng() % 100 < 12;
            bool closureCell = agentCell || rng() % 100 < 40;
            if (rng() % 100 < 20) cell.lockOwner = QualRef{1, true, 77};
            if (closureCell) {
                cell.isClosure = true;
                cell.closure.isAgent = agentCell;
                cell.closure.className = agentCell ? "Peer" : "Obj";
                int fields = 1 + (int)(rng() % 3);
                for (int f = 0; f < fields; ++f) {
                    std::string key = "f" + std::to_string(f);
                    if (rng() % 100 < 55)
                        cell.closure.env[key] = Value::ofRef(pickTarget(i));
                    else
                        cell.closure.env[key] = Value::ofInt((long long)(rng() % 100));
                }
            } else {
                int kind = (int)(rng() % 100);
                if (kind < 55)
                    cell.value = Value::ofRef(pickTarget(i));
                else if (kind < 80)
                    cell.value = Value::ofInt((long long)(rng() % 100));
                else
                    cell.value = Value::ofStr("s" + std::to_string(rng() % 100));
            }
            src.heap.emplace(refs[i], std::move(cell));
        }

        Value root = Value::ofRef(refs[0]);
        std::map<QualRef, QualRef> memo;
        Value got = copy_value(src, dst, memo, root);

        // Parallel walk: same shape, agent refs by identity, everything else
        // freshly allocated in the destination with sharing preserved.
        std::map<QualRef, QualRef> seen;
        std::function<void(const Value&, const Value&)> walk = [&](const Value& a,
                                                                   const Value& b) {
            if (!c.pass) return;
            c.expect(a.kind == b.kind, "copied value changed kind" + tag);
            if (!c.pass) return;
            if (!a.isRef()) {
                c.expect(a == b, "copied plain value differs" + tag);
                return;
            }
            auto sIt = src.heap.find(a.ref);
            if (sIt == src.heap.end()) {
                c.expect(b.ref == a.ref, "dangling ref must travel unchanged" + tag);
                return;
            }
            if (sIt->second.isClosure && sIt->second.closure.isAgent) {
                c.expect(b.ref == a.ref, "agent ref must travel by identity" + tag);
                return;
            }
            c.expect(b.ref.agent == dst.num, "copied ref does not live in the destination" + tag);
            auto hit = seen.find(a.ref);
            if (hit != seen.end()) {
                c.expect(b.ref == hit->second, "sharing was not preserved" + tag);
                return;
            }
            for (const auto& [s2, d2] : seen)
                c.expect(!(d2 == b.ref), "two source cells merged into one copy" + tag);
            seen[a.ref] = b.ref;
            auto dIt = dst.heap.find(b.ref);
            c.expect(dIt != dst.heap.end(), "copied ref has no cell" + tag);
            if (!c.pass) return;
            const HeapCell& sc = sIt->second;
            const HeapCell& dc = dIt->second;
            c.expect(!dc.lockOwner, "locks must not travel with a copy" + tag);
            c.expect(sc.isClosure == dc.isClosure, "cell kind changed" + tag);
            if (!c.pass) return;
            if (sc.isClosure) {
                c.expect(sc.closure.className == dc.closure.className, "class changed" + tag);
                c.expect(sc.closure.env.size() == dc.closure.env.size(),
                         "environment size changed" + tag);
                for (const auto& [k, v] : sc.closure.env) {
                    auto f = dc.closure.env.find(k);
                    c.expect(f != dc.closure.env.end(), "environment key lost" + tag);
                    if (!c.pass) return;
                    walk(v, f->second);
                }
            } else {
                walk(sc.value, dc.value);
            }
        };
        walk(root, got);
        if (!c.pass) break;

        for (const auto& [s, d] : seen) {
            auto m = memo.find(s);
            c.expect(m != memo.end() && m->second == d, "memo disagrees with the copy" + tag);
        }

        // Mutating every plain value in the source must not show in the copy.
        std::string before = snapshotHeap(dst);
        for (auto& [ref, cell] : src.heap) {
            auto bump = [](Value& v) {
                if (v.kind == Value::Kind::Int) v.i += 1;
                if (v.kind == Value::Kind::Str) v.s += "!";
            };
            if (cell.isClosure)
                for (auto& [k, v] : cell.closure.env) bump(v);
            else
                bump(cell.value);
        }
        c.expect(snapshotHeap(dst) == before, "copy shares state with its source" + tag);
    }
    return c;
}

// ---- criterion 7: seed determinism ----------------------------------------------

static Criterion crit7() {
    Criterion c;

    // Equal seeds: the whole pipeline (trace, resolver dump, transcripts) must
    // reproduce byte for byte.
    RunOptions opt;
    opt.trace = true;
    opt.dumpResolver = true;
    opt.seed = 5;
    fs::path t1 = freshTmpDir("c7a"), t2 = freshTmpDir("c7b");
    std::ostringstream out1, out2, err;
    opt.outDir = t1;
    int rc1 = run_mob(kConfigs / "time.cfg", opt, out1, err);
    opt.outDir = t2;
    int rc2 = run_mob(kConfigs / "time.cfg", opt, out2, err);
    c.expect(rc1 == 0 && rc2 == 0, "seeded time runs failed");
    c.expect(out1.str() == out2.str(), "equal seeds produced different traces");
    c.expect(slurp(t1 / "fileexec.txt") == slurp(t2 / "fileexec.txt"),
             "equal seeds produced different transcripts");
    fs::remove_all(t1);
    fs::remove_all(t2);

    // Different seeds: schedules must diverge while the final name services agree.
    Resolver compileRes;
    CompiledScript prog = compile_script(slurp(kCorpus / "lock_stress.mob"), compileRes);
    auto seededRun = [&](std::uint64_t seed, std::string& trace, std::string& resolverDump) {
        Sim sim;
        std::ostringstream sink;
        sim.m->setTraceSink(&sink);
        sim.m->setHosts({"h"});
        sim.m->setSeed(seed);
        sim.m->launchScript(prog.code, "h");
        Outcome oc = sim.m->run(100000);
        trace = sink.str();
        resolverDump = sim.res->dump();
        return oc;
    };
    std::string traceA, dumpA;
    c.expect(seededRun(11, traceA, dumpA) == Outcome::Quiescent, "seed 11 did not finish");
    bool diverged = false;
    for (std::uint64_t seed = 12; seed <= 15 && !diverged; ++seed) {
        std::string traceB, dumpB;
        c.expect(seededRun(seed, traceB, dumpB) == Outcome::Quiescent,
                 "seed " + std::to_string(seed) + " did not finish");
        c.expect(dumpA == dumpB, "final resolver state depends on the seed");
        diverged = traceB != traceA;
    }
    c.expect(diverged, "different seeds never changed the schedule");
    return c;
}

// ---- criterion 8: inference versus an independent saturation checker -----------

namespace sat {

enum class Ty { Int, Str, Bool, Thr, Nul };

// A deliberately naive re-statement of the typing rules for the straight-line
// fragment the generator emits: monomorphic types, explicit scope levels,
// rebinding allowed only at the binding level, enclosing-level assignments
// must preserve the type exactly (null only ever matches null).
struct Checker {
    std::vector<std::map<std::string, Ty>> env;
    bool ok = true;

    Checker() {
        env.push_back({{"FILEEXEC", Ty::Int}, {"IO", Ty::Int}, {"FTP", Ty::Int}});
    }

    void fail() { ok = false; }

    std::optional<std::pair<std::size_t, Ty>> find(const std::string& n) const {
        for (std::size_t i = env.size(); i-- > 0;) {
            auto it = env[i].find(n);
            if (it != env[i].end()) return {{i, it->second}};
        }
        return std::nullopt;
    }

    std::optional<Ty> value(const ast::LangValue& v) {
        switch (v.kind) {
        case ast::LangValue::Kind::Var: {
            auto f = find(v.name);
            if (!f) { fail(); return {}; }
            return f->second;
        }
        case ast::LangValue::Kind::Int: return Ty::Int;
        case ast::LangValue::Kind::Str: return Ty::Str;
        case ast::LangValue::Kind::Bool: return Ty::Bool;
        case ast::LangValue::Kind::Null: return Ty::Nul;
        default: fail(); return {};
        }
    }

    std::optional<Ty> expr(const ast::Expr& e) {
        using K = ast::Expr::Kind;
        if (e.kind == K::Value) return value(e.value);
        if (e.kind == K::Group) return expr(*e.lhs);
        if (e.kind == K::Unary) {
            auto t = expr(*e.lhs);
            if (!t) return {};
            Ty need = e.unOp == ast::UnOp::Not ? Ty::Bool : Ty::Int;
            if (*t != need) { fail(); return {}; }
            return need;
        }
        auto l = expr(*e.lhs);
        auto r = expr(*e.rhs);
        if (!l || !r) return {};
        using B = ast::BinOp;
        switch (e.binOp) {
        case B::Add: case B::Sub: case B::Mul: case B::Div: case B::Mod:
            if (*l != Ty::Int || *r != Ty::Int) { fail(); return {}; }
            return Ty::Int;
        case B::Concat:
            if (*l != Ty::Str || *r != Ty::Str) { fail(); return {}; }
            return Ty::Str;
        case B::And: case B::Or:
            if (*l != Ty::Bool || *r != Ty::Bool) { fail(); return {}; }
            return Ty::Bool;
        case B::Lt: case B::Gt: case B::Le: case B::Ge:
            if (*l != Ty::Int || *r != Ty::Int) { fail(); return {}; }
            return Ty::Bool;
        case B::Eq: case B::Ne:
            if (*l != *r) { fail(); return {}; }
            return Ty::Bool;
        }
        fail();
        return {};
    }

    void assign(const std::string& name, Ty t) {
        auto f = find(name);
        if (!f || f->first == env.size() - 1) {
            env.back()[name] = t; // fresh binding or same-level rebind
            return;
        }
        // Assignment to an enclosing level: the type must be preserved, and a
        // null-bound variable can only stay null.
        if (env[f->first][name] != t) fail();
    }

    void seq(const ast::InstrSeq& is) {
        for (const auto& p : is) {
            if (!ok) return;
            instr(*p);
        }
    }

    void instr(const ast::Instr& I) {
        using K = ast::Instr::Kind;
        switch (I.kind) {
        case K::Assign: {
            const auto& V = I.value;
            std::optional<Ty> t;
            switch (V.kind) {
            case ast::AssignValue::Kind::Expression:
                t = expr(*V.expr);
                break;
            case ast::AssignValue::Kind::Fork:
                env.push_back({});
                seq(V.forkBody);
                env.pop_back();
                if (ok) t = Ty::Thr;
                break;
            case ast::AssignValue::Kind::Exec: {
                if (V.args[0].kind != ast::LangValue::Kind::Str) { fail(); break; }
                static const std::map<std::string, Ty> table = {
                    {"init", Ty::Int},     {"read", Ty::Str},  {"readLine", Ty::Str},
                    {"write", Ty::Bool},   {"isAlive", Ty::Bool}, {"action", Ty::Bool},
                    {"close", Ty::Bool}};
                auto hit = table.find(V.args[0].strValue);
                if (hit == table.end()) { fail(); break; }
                auto id = value(V.args[1]);
                auto payload = value(V.args[2]);
                if (!id || !payload) break;
                if (*id != Ty::Int || *payload != Ty::Str) { fail(); break; }
                t = hit->second;
                break;
            }
            default:
                fail();
                break;
            }
            if (ok && t && I.target) assign(*I.target, *t);
            break;
        }
        case K::If: {
            auto t = value(I.cond);
            if (!t) break;
            if (*t != Ty::Bool) { fail(); break; }
            env.push_back({});
            seq(I.thenBody);
            env.pop_back();
            if (!ok) break;
            env.push_back({});
            seq(I.elseBody);
            env.pop_back();
            break;
        }
        case K::While: {
            auto t = value(I.cond);
            if (!t) break;
            if (*t != Ty::Bool) { fail(); break; }
            env.push_back({});
            seq(I.thenBody);
            env.pop_back();
            break;
        }
        case K::Join: {
            auto t = value(I.arg);
            if (!t) break;
            if (*t != Ty::Thr) fail();
            break;
        }
        case K::Break:
            break;
        default:
            fail();
            break;
        }
    }

    bool check(const ast::Program& p) {
        seq(p.body);
        return ok;
    }
};

// Emits random well-typed programs of the same fragment, optionally with one
// injected type flaw. Tracks the same scope discipline while generating so
// that every flaw-free program is well typed by construction.
struct Generator {
    std::mt19937_64& rng;
    std::ostringstream out;
    std::vector<std::map<std::string, Ty>> scopes;
    int nextVar = 0;
    int depth = 0;

    explicit Generator(std::mt19937_64& r) : rng(r) { scopes.push_back({}); }

    int pct() { return (int)(rng() % 100); }
    std::size_t pick(std::size_t n) { return (std::size_t)(rng() % n); }

    std::optional<std::string> anyVar(Ty t) {
        std::vector<std::string> hits;
        for (const auto& sc : scopes)
            for (const auto& [n, ty] : sc)
                if (ty == t) hits.push_back(n);
        if (hits.empty()) return std::nullopt;
        return hits[pick(hits.size())];
    }

    // Variables whose innermost binding sits in an enclosing level.
    std::optional<std::string> outerVar(Ty t) {
        std::vector<std::string> hits;
        for (std::size_t i = 0; i + 1 < scopes.size(); ++i)
            for (const auto& [n, ty] : scopes[i])
                if (ty == t && !scopes.back().count(n)) hits.push_back(n);
        if (hits.empty()) return std::nullopt;
        return hits[pick(hits.size())];
    }

    std::string fresh() { return "v" + std::to_string(nextVar++); }

    std::string intAtom() {
        if (pct() < 60)
            if (auto v = anyVar(Ty::Int)) return *v;
        return std::to_string(pick(100));
    }
    std::string strAtom() {
        if (pct() < 60)
            if (auto v = anyVar(Ty::Str)) return *v;
        return "\"s" + std::to_string(pick(50)) + "\"";
    }
    std::string boolAtom() {
        if (pct() < 60)
            if (auto v = anyVar(Ty::Bool)) return *v;
        return pct() < 50 ? "true" : "false";
    }

    std::string expr(Ty t) {
        switch (t) {
        case Ty::Int: {
            if (pct() < 35) return intAtom();
            static const char* ops[] = {"+", "-", "*", "/", "%"};
            return intAtom() + " " + ops[pick(5)] + " " + intAtom();
        }
        case Ty::Str:
            return pct() < 50 ? strAtom() : strAtom() + " ^ " + strAtom();
        case Ty::Bool: {
            switch (pick(5)) {
            case 0: return boolAtom();
            case 1: return intAtom() + (pct() < 50 ? " < " : " <= ") + intAtom();
            case 2: return intAtom() + " == " + intAtom();
            case 3: return boolAtom() + " && " + boolAtom();
            default: return "!" + boolAtom();
            }
        }
        default:
            return "null";
        }
    }

    void line(const std::string& s) {
        for (int i = 0; i < depth + (scopes.size() > 1 ? 1 : 0); ++i) out << "  ";
        out << s << "\n";
    }

    void bindHere(const std::string& n, Ty t) { scopes.back()[n] = t; }

    void stmts(int count) {
        for (int i = 0; i < count; ++i) stmt();
    }

    void stmt() {
        int k = pct();
        if (depth < 2 && k < 10) {
            if (auto cond = anyVar(Ty::Bool)) {
                line("if (" + *cond + ") {");
                scopes.push_back({});
                ++depth;
                stmts(1 + (int)pick(2));
                maybeOuterAssign();
                --depth;
                scopes.pop_back();
                line("} else {");
                scopes.push_back({});
                ++depth;
                stmts(1 + (int)pick(2));
                --depth;
                scopes.pop_back();
                line("}");
                return;
            }
        }
        if (depth < 2 && k < 18) {
            if (auto cond = anyVar(Ty::Bool)) {
                line("while (" + *cond + ") {");
                scopes.push_back({});
                ++depth;
                stmts(1 + (int)pick(2));
                maybeOuterAssign();
                if (pct() < 40) line("break;");
                --depth;
                scopes.pop_back();
                line("}");
                return;
            }
        }
        if (depth < 2 && k < 28) {
            std::string t = fresh();
            line(t + " = fork {");
            scopes.push_back({});
            ++depth;
            stmts(1 + (int)pick(2));
            maybeOuterAssign();
            --depth;
            scopes.pop_back();
            line("}");
            bindHere(t, Ty::Thr);
            if (pct() < 60) line("join(" + t + ");");
            return;
        }
        if (k < 40) {
            static const std::pair<const char*, Ty> execs[] = {
                {"init", Ty::Int},   {"read", Ty::Str},     {"readLine", Ty::Str},
                {"write", Ty::Bool}, {"isAlive", Ty::Bool}, {"close", Ty::Bool}};
            auto [action, ty] = execs[pick(6)];
            std::string id = pct() < 50 ? "FILEEXEC" : intAtom();
            std::string v = fresh();
            line(v + " = exec(\"" + std::string(action) + "\", " + id + ", " + strAtom() + ");");
            bindHere(v, ty);
            return;
        }
        // Plain assignment: a fresh name, or a same-level rebind with a new
        // type. The four seed variables keep their types so that the injected
        // flaws can rely on them.
        Ty t = std::array{Ty::Int, Ty::Str, Ty::Bool, Ty::Int, Ty::Str, Ty::Nul}[pick(6)];
        std::string name;
        if (pct() < 30 && !scopes.back().empty()) {
            auto it = scopes.back().begin();
            std::advance(it, pick(scopes.back().size()));
            static const std::set<std::string> seeds = {"iv", "sv", "bv", "nv"};
            if (it->second != Ty::Thr && !seeds.count(it->first)) name = it->first;
        }
        if (name.empty()) name = fresh();
        line(name + " = " + expr(t) + ";");
        bindHere(name, t);
    }

    // A type-preserving update of an enclosing-level variable.
    void maybeOuterAssign() {
        if (pct() >= 40) return;
        for (Ty t : {Ty::Int, Ty::Str, Ty::Bool}) {
            if (auto v = outerVar(t)) {
                line(*v + " = " + expr(t) + ";");
                return;
            }
        }
    }

    // One deliberately ill-typed statement, appended at the end.
    void flaw(int which) {
        std::string f = fresh();
        switch (which % 15) {
        case 0: line("if (iv) {"); line("  " + fresh() + " = 1;"); line("} else {");
                line("  " + fresh() + " = 2;"); line("}"); break;
        case 1: line(f + " = sv + 1;"); break;
        case 2: line(f + " = iv ^ \"a\";"); break;
        case 3: line(f + " = iv && true;"); break;
        case 4: line(f + " = exec(\"chmod\", FILEEXEC, \"f\");"); break;
        case 5: line(f + " = exec(\"read\", sv, \"4\");"); break;
        case 6: line(f + " = exec(\"read\", FILEEXEC, 4);"); break;
        case 7: line("join(iv);"); break;
        case 8: line("if (bv) {"); line("  iv = 2;"); line("} else {");
                line("  iv = \"s\";"); line("}"); break;
        case 9: line("while (bv) {"); line("  sv = 1;"); line("  break;"); line("}"); break;
        case 10: line(f + " = nv + 1;"); break;
        case 11: line(f + " = iv == sv;"); break;
        case 12: line(f + " = fork {"); line("  iv = \"s\";"); line("}"); break;
        case 13: line(f + " = !iv;"); break;
        case 14: line("if (nv) {"); line("  " + fresh() + " = 1;"); line("} else {");
                 line("  " + fresh() + " = 2;"); line("}"); break;
        }
    }

    std::string program(int statements, std::optional<int> flawId) {
        line("iv = 1;");
        bindHere("iv", Ty::Int);
        line("sv = \"a\";");
        bindHere("sv", Ty::Str);
        line("bv = true;");
        bindHere("bv", Ty::Bool);
        line("nv = null;");
        bindHere("nv", Ty::Nul);
        stmts(statements);
        if (flawId) flaw(*flawId);
        line("exit;");
        return out.str();
    }
};

} // namespace sat

static Criterion crit8() {
    Criterion c;
    std::mt19937_64 rng(0x5EED);
    int agreed = 0;

    for (int i = 0; i < 50; ++i) {
        bool flawed = i % 2 == 1;
        sat::Generator g(rng);
        std::string src = g.program(6 + (int)(rng() % 8), flawed ? std::optional<int>(i / 2)
                                                                 : std::nullopt);
        std::string tag = " (program " + std::to_string(i) + ")";

        std::shared_ptr<ast::Program> prog;
        try {
            prog = parse_program(src);
            require_restrictions(*prog);
        } catch (const CompileError& e) {
            c.expect(false, std::string("generated program is not clean: ") + e.what() + tag);
            break;
        }

        bool inferOk = true;
        try {
            infer_program(*prog);
        } catch (const CompileError&) {
            inferOk = false;
        }
        bool checkerOk = sat::Checker().check(*prog);

        c.expect(inferOk == checkerOk, "inference and the reference checker disagree" + tag);
        c.expect(inferOk == !flawed,
                 std::string(flawed ? "injected flaw was accepted" : "clean program rejected") +
                     tag);
        if (inferOk == checkerOk) ++agreed;
    }
    c.expect(agreed == 50, "agreement on " + std::to_string(agreed) + " of 50 programs");
    return c;
}

// ---- criterion 9: late joins and strict return checking -------------------------

static Criterion crit9() {
    Criterion c;

    { // A join issued after the thread already finished must still succeed.
        Sim sim;
        CompiledScript prog = compile_script(slurp(kCorpus / "late_join.mob"), *sim.res);
        sim.m->setHosts({"h"});
        sim.m->launchScript(prog.code, "h");
        c.expect(sim.m->run(100000) == Outcome::Quiescent, "late join run did not finish");
        bool joined = false, suspended = false;
        for (const auto& ev : sim.m->trace()) {
            if (ev.rule == "Join") joined = true;
            if (ev.rule == "JoinSuspend") suspended = true;
        }
        c.expect(joined, "join never completed");
        c.expect(!suspended, "join suspended although the thread had finished");
    }
    { // Control case: joining a still-running thread suspends first.
        Sim sim;
        CompiledScript prog = compile_script(slurp(kCorpus / "lock_stress.mob"), *sim.res);
        sim.m->setHosts({"h"});
        sim.m->launchScript(prog.code, "h");
        c.expect(sim.m->run(100000) == Outcome::Quiescent, "stress run did not finish");
        bool joined = false, suspended = false;
        for (const auto& ev : sim.m->trace()) {
            if (ev.rule == "Join") joined = true;
            if (ev.rule == "JoinSuspend") suspended = true;
        }
        c.expect(joined && suspended, "early join did not go through the suspend path");
    }
    { // Default mode: a method ending without return completes with null.
        Sim sim;
        CompiledScript prog = compile_script(slurp(kCorpus / "missing_return.mob"), *sim.res);
        sim.m->setHosts({"h"});
        sim.m->launchScript(prog.code, "h");
        c.expect(sim.m->run(100000) == Outcome::Quiescent, "default-mode run did not finish");
        bool sawNull = false;
        for (int num : sim.m->agentNums())
            if (auto got = sim.m->agentAttr(num, "got"))
                sawNull = got->kind == Value::Kind::Null;
        c.expect(sawNull, "fall-through method did not produce null");
    }
    { // Strict mode: the same program faults with MissingReturn.
        Sim sim;
        CompiledScript prog = compile_script(slurp(kCorpus / "missing_return.mob"), *sim.res);
        sim.m->setHosts({"h"});
        sim.m->setStrictReturns(true);
        sim.m->launchScript(prog.code, "h");
        bool faulted = false;
        try {
            sim.m->run(100000);
        } catch (const RuntimeFault& e) {
            faulted = e.kind == "MissingReturn";
        }
        c.expect(faulted, "strict mode did not raise MissingReturn");
    }
    { // The CLI maps the two modes to exit codes 0 and 5.
        std::ostringstream out, err;
        RunOptions lax;
        c.expect(run_mob(kConfigs / "missing_return.cfg", lax, out, err) == 0,
                 "default run should exit 0");
        RunOptions strict;
        strict.strictReturns = true;
        std::ostringstream out2, err2;
        c.expect(run_mob(kConfigs / "missing_return.cfg", strict, out2, err2) == 5,
                 "strict run should exit 5");
        c.expect(err2.str().find("MissingReturn") != std::string::npos,
                 "strict run did not name the fault");
    }
    return c;
}

// ---- driver ----------------------------------------------------------------------

int main() {
    struct Row {
        int num;
        const char* what;
        Criterion (*fn)();
    };
    const Row rows[] = {
        {1, "corpus programs compile and every seeded mutant is rejected", crit1},
        {2, "time service run reproduces the pinned golden trace and resolver", crit2},
        {3, "messenger exchange keeps deep copies isolated and cleans the resolver", crit3},
        {4, "ftp transfer streams the mocked file in byte-counted chunks", crit4},
        {5, "1000 randomized schedules keep lock ownership sound and rejoin", crit5},
        {6, "200 cyclic object graphs survive inter-agent copying intact", crit6},
        {7, "equal seeds replay byte-identically, different seeds diverge", crit7},
        {8, "type verdicts match an independent saturation checker on 50 programs", crit8},
        {9, "late joins succeed and strict return checking faults cleanly", crit9},
    };

    int failures = 0;
    for (const Row& row : rows) {
        Criterion c;
        try {
            c = row.fn();
        } catch (const std::exception& e) {
            c.pass = false;
            c.why = std::string("unhandled exception: ") + e.what();
        }
        std::cout << "CRITERION " << row.num << " " << (c.pass ? "PASS" : "FAIL") << " — "
                  << row.what;
        if (!c.pass) std::cout << " [" << c.why << "]";
        std::cout << "\n";
        if (!c.pass) ++failures;
    }
    return failures;
}
