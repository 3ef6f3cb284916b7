#include "mob/types.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <sstream>

namespace mob::types {

// ---------------------------------------------------------------------------
// Term construction
// ---------------------------------------------------------------------------

TermPtr make_prim(const std::string& name) {
    auto t = std::make_shared<TypeTerm>();
    t->kind = TypeTerm::Kind::Prim;
    t->prim = name;
    return t;
}

TermPtr make_var(int id, bool notPrim) {
    auto t = std::make_shared<TypeTerm>();
    t->kind = TypeTerm::Kind::Var;
    t->var = id;
    t->notPrim = notPrim;
    return t;
}

TermPtr make_record(std::map<std::string, MethodSig> methods, bool open,
                    std::optional<std::set<std::string>> allowed) {
    auto t = std::make_shared<TypeTerm>();
    t->kind = TypeTerm::Kind::Record;
    t->methods = std::move(methods);
    t->open = open;
    t->allowed = std::move(allowed);
    return t;
}

TermPtr make_class_pair(std::vector<TermPtr> attrs, TermPtr iface) {
    auto t = std::make_shared<TypeTerm>();
    t->kind = TypeTerm::Kind::ClassPair;
    t->attrs = std::move(attrs);
    t->iface = std::move(iface);
    return t;
}

TermPtr make_mu(int id, TermPtr body) {
    auto t = std::make_shared<TypeTerm>();
    t->kind = TypeTerm::Kind::Mu;
    t->var = id;
    t->body = std::move(body);
    return t;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

void printTerm(const TermPtr& t, std::ostream& os) {
    switch (t->kind) {
    case TypeTerm::Kind::Prim:
        os << t->prim;
        break;
    case TypeTerm::Kind::Var:
        os << "t" << t->var;
        break;
    case TypeTerm::Kind::Record: {
        os << "{";
        bool first = true;
        for (const auto& [name, sig] : t->methods) {
            if (!first)
                os << ", ";
            first = false;
            os << name << ":(";
            for (std::size_t i = 0; i < sig.params.size(); ++i) {
                if (i)
                    os << ", ";
                printTerm(sig.params[i], os);
            }
            os << (sig.params.empty() ? "-> " : " -> ");
            printTerm(sig.ret, os);
            os << ")";
        }
        os << "}";
        break;
    }
    case TypeTerm::Kind::ClassPair: {
        os << "((";
        for (std::size_t i = 0; i < t->attrs.size(); ++i) {
            if (i)
                os << ", ";
            printTerm(t->attrs[i], os);
        }
        os << "), ";
        printTerm(t->iface, os);
        os << ")";
        break;
    }
    case TypeTerm::Kind::Mu:
        os << "mu t" << t->var << ".";
        printTerm(t->body, os);
        break;
    }
}

} // namespace

std::string to_string(const TermPtr& t) {
    std::ostringstream os;
    printTerm(t, os);
    return os.str();
}

// ---------------------------------------------------------------------------
// TypeStore basics
// ---------------------------------------------------------------------------

NodeId TypeStore::fresh() {
    NodeId id = static_cast<NodeId>(nodes_.size());
    Node n;
    n.parent = id;
    nodes_.push_back(std::move(n));
    return id;
}

NodeId TypeStore::freshNotPrim() {
    NodeId n = fresh();
    nodes_[n].notPrim = true;
    return n;
}

NodeId TypeStore::prim(const std::string& rho) {
    NodeId n = fresh();
    nodes_[n].k = Kind::Prim;
    nodes_[n].prim = rho;
    return n;
}

NodeId TypeStore::record(bool open, std::optional<std::set<std::string>> allowed) {
    NodeId n = fresh();
    nodes_[n].k = Kind::Record;
    nodes_[n].open = open;
    nodes_[n].allowed = std::move(allowed);
    return n;
}

NodeId TypeStore::classPair(std::vector<NodeId> attrs, NodeId iface) {
    NodeId n = fresh();
    nodes_[n].k = Kind::ClassPair;
    nodes_[n].attrs = std::move(attrs);
    nodes_[n].iface = iface;
    return n;
}

NodeId TypeStore::find(NodeId n) const {
    while (nodes_[n].parent != n)
        n = nodes_[n].parent;
    return n;
}

TypeStore::Kind TypeStore::kind(NodeId n) const { return rep(n).k; }

const std::map<std::string, TypeStore::Sig>& TypeStore::labels(NodeId recN) const {
    assert(rep(recN).k == Kind::Record);
    return rep(recN).labels;
}

bool TypeStore::isOpen(NodeId recN) const { return rep(recN).open; }

const std::optional<std::set<std::string>>& TypeStore::allowedSet(NodeId recN) const {
    return rep(recN).allowed;
}

bool TypeStore::isNotPrim(NodeId n) const { return rep(n).notPrim; }

const std::string& TypeStore::primName(NodeId n) const { return rep(n).prim; }

const std::vector<NodeId>& TypeStore::pairAttrs(NodeId n) const {
    assert(rep(n).k == Kind::ClassPair);
    return rep(n).attrs;
}

NodeId TypeStore::pairIface(NodeId n) const {
    assert(rep(n).k == Kind::ClassPair);
    return rep(n).iface;
}

void TypeStore::mismatch(NodeId a, NodeId b, Pos pos, const std::string& what) const {
    throw CompileError("TypeMismatch", pos,
                       what + ": " + types::to_string(freeze(a)) + " vs " +
                           types::to_string(freeze(b)));
}

TypeStore::Sig TypeStore::ensureLabel(NodeId recN, const std::string& m, std::size_t arity,
                                      Pos pos, const std::string& what) {
    NodeId r = find(recN);
    if (nodes_[r].k == Kind::Free) {
        nodes_[r].k = Kind::Record; // a variable (even null's) can become a record
        nodes_[r].notPrim = false;
        nodes_[r].open = true;
    }
    if (nodes_[r].k != Kind::Record)
        throw CompileError("TypeMismatch", pos,
                           what + ": " + types::to_string(freeze(r)) + " has no methods");
    auto it = nodes_[r].labels.find(m);
    if (it != nodes_[r].labels.end()) {
        if (it->second.params.size() != arity)
            throw CompileError("TypeMismatch", pos,
                               what + ": method '" + m + "' takes " +
                                   std::to_string(it->second.params.size()) +
                                   " argument(s), not " + std::to_string(arity));
        return it->second;
    }
    if (!nodes_[r].open)
        throw CompileError("TypeMismatch", pos,
                           what + ": record " + types::to_string(freeze(r)) +
                               " has no method '" + m + "'");
    if (nodes_[r].allowed && !nodes_[r].allowed->count(m))
        throw CompileError("TypeMismatch", pos,
                           what + ": service does not declare method '" + m + "'");
    Sig sig;
    for (std::size_t i = 0; i < arity; ++i)
        sig.params.push_back(fresh());
    sig.ret = fresh();
    nodes_[find(r)].labels.emplace(m, sig); // fresh() may reallocate; re-resolve
    return sig;
}

void TypeStore::close(NodeId recN) {
    NodeId r = find(recN);
    assert(nodes_[r].k == Kind::Record);
    nodes_[r].open = false;
}

// ---------------------------------------------------------------------------
// Unification over rational trees: merge the representatives *before*
// recursing into children, so cyclic structures terminate.
// ---------------------------------------------------------------------------

void TypeStore::unify(NodeId a0, NodeId b0, Pos pos, const std::string& what) {
    NodeId a = find(a0), b = find(b0);
    if (a == b)
        return;
    Node& na = nodes_[a];
    Node& nb = nodes_[b];

    if (na.k == Kind::Free || nb.k == Kind::Free) {
        NodeId freeN = na.k == Kind::Free ? a : b;
        NodeId otherN = freeN == a ? b : a;
        Node& fn = nodes_[freeN];
        Node& on = nodes_[otherN];
        if (fn.notPrim) {
            if (on.k == Kind::Prim)
                mismatch(a, b, pos, what + " (null is not a primitive)");
            if (on.k == Kind::Free)
                on.notPrim = true;
        }
        fn.parent = otherN;
        return;
    }

    if (na.k != nb.k)
        mismatch(a, b, pos, what);

    switch (na.k) {
    case Kind::Prim:
        if (na.prim != nb.prim)
            mismatch(a, b, pos, what);
        na.parent = b;
        return;

    case Kind::Record: {
        bool open = na.open && nb.open;
        std::optional<std::set<std::string>> allowed;
        if (na.allowed && nb.allowed) {
            if (*na.allowed != *nb.allowed)
                mismatch(a, b, pos, what + " (services declare different method sets)");
            allowed = na.allowed;
        } else {
            allowed = na.allowed ? na.allowed : nb.allowed;
        }
        if (!na.open || !nb.open) {
            const Node& closed = !na.open ? na : nb;
            const Node& other = &closed == &na ? nb : na;
            for (const auto& [m, sig] : other.labels)
                if (!closed.labels.count(m))
                    mismatch(a, b, pos, what + " (no method '" + m + "')");
            if (allowed) {
                for (const auto& [m, sig] : closed.labels)
                    if (!allowed->count(m))
                        mismatch(a, b, pos,
                                 what + " (service does not declare '" + m + "')");
                for (const std::string& m : *allowed)
                    if (!closed.labels.count(m))
                        mismatch(a, b, pos,
                                 what + " (record lacks declared method '" + m + "')");
            }
        } else if (allowed) {
            for (const Node* side : {&na, &nb})
                for (const auto& [m, sig] : side->labels)
                    if (!allowed->count(m))
                        mismatch(a, b, pos,
                                 what + " (service does not declare '" + m + "')");
        }

        std::vector<std::pair<NodeId, NodeId>> defer;
        std::map<std::string, Sig> merged = nb.labels;
        for (const auto& [m, sig] : na.labels) {
            auto it = merged.find(m);
            if (it == merged.end()) {
                merged.emplace(m, sig);
            } else {
                if (it->second.params.size() != sig.params.size())
                    mismatch(a, b, pos,
                             what + " (method '" + m + "' arity " +
                                 std::to_string(sig.params.size()) + " vs " +
                                 std::to_string(it->second.params.size()) + ")");
                for (std::size_t i = 0; i < sig.params.size(); ++i)
                    defer.emplace_back(sig.params[i], it->second.params[i]);
                defer.emplace_back(sig.ret, it->second.ret);
            }
        }
        nb.labels = std::move(merged);
        nb.open = open;
        nb.allowed = std::move(allowed);
        na.parent = b;
        for (auto& [x, y] : defer)
            unify(x, y, pos, what);
        return;
    }

    case Kind::ClassPair: {
        if (na.attrs.size() != nb.attrs.size())
            mismatch(a, b, pos,
                     what + " (constructor takes " + std::to_string(nb.attrs.size()) +
                         " argument(s), not " + std::to_string(na.attrs.size()) + ")");
        std::vector<std::pair<NodeId, NodeId>> defer;
        for (std::size_t i = 0; i < na.attrs.size(); ++i)
            defer.emplace_back(na.attrs[i], nb.attrs[i]);
        defer.emplace_back(na.iface, nb.iface);
        na.parent = b;
        for (auto& [x, y] : defer)
            unify(x, y, pos, what);
        return;
    }

    case Kind::Free:
        return; // handled above
    }
}

// ---------------------------------------------------------------------------
// Freezing: store graph -> term with mu binders. Variable ids are handed out
// lazily in first-need order, which makes the numbering canonical per term.
// ---------------------------------------------------------------------------

TermPtr TypeStore::freeze(NodeId start) const {
    struct Fr {
        const TypeStore& s;
        std::map<NodeId, int> varIds; // rep -> public id (free vars and mu binders)
        std::set<NodeId> onStack;
        std::map<NodeId, TermPtr> memo; // only closed terms (no escaping binders)
        int nextId = 0;

        int idFor(NodeId r) {
            auto it = varIds.find(r);
            if (it != varIds.end())
                return it->second;
            int id = nextId++;
            varIds.emplace(r, id);
            return id;
        }

        TermPtr go(NodeId n0, std::set<int>& used) {
            NodeId r = s.find(n0);
            if (onStack.count(r)) { // back-edge: reference the (future) binder
                int id = idFor(r);
                used.insert(id);
                return make_var(id);
            }
            auto mi = memo.find(r);
            if (mi != memo.end())
                return mi->second;

            switch (s.kind(r)) {
            case Kind::Free: {
                TermPtr t = make_var(idFor(r), s.isNotPrim(r));
                memo.emplace(r, t);
                return t;
            }
            case Kind::Prim: {
                TermPtr t = make_prim(s.primName(r));
                memo.emplace(r, t);
                return t;
            }
            case Kind::Record: {
                onStack.insert(r);
                std::set<int> inner;
                std::map<std::string, MethodSig> ms;
                for (const auto& [name, sig] : s.labels(r)) {
                    MethodSig fs;
                    for (NodeId p : sig.params)
                        fs.params.push_back(go(p, inner));
                    fs.ret = go(sig.ret, inner);
                    ms.emplace(name, std::move(fs));
                }
                onStack.erase(r);
                TermPtr t = make_record(std::move(ms), s.isOpen(r), s.allowedSet(r));
                return finish(r, std::move(t), inner, used);
            }
            case Kind::ClassPair: {
                onStack.insert(r);
                std::set<int> inner;
                std::vector<TermPtr> attrs;
                for (NodeId aN : s.pairAttrs(r))
                    attrs.push_back(go(aN, inner));
                TermPtr ifaceT = go(s.pairIface(r), inner);
                onStack.erase(r);
                TermPtr t = make_class_pair(std::move(attrs), std::move(ifaceT));
                return finish(r, std::move(t), inner, used);
            }
            }
            return make_var(-1); // unreachable
        }

        TermPtr finish(NodeId r, TermPtr t, std::set<int>& inner, std::set<int>& used) {
            auto vi = varIds.find(r);
            if (vi != varIds.end() && inner.count(vi->second)) {
                t = make_mu(vi->second, std::move(t));
                inner.erase(vi->second);
            }
            used.insert(inner.begin(), inner.end());
            if (inner.empty())
                memo.emplace(r, t);
            return t;
        }
    };

    Fr f{*this, {}, {}, {}, 0};
    std::set<int> used;
    return f.go(start, used);
}

// ---------------------------------------------------------------------------
// Thawing: term -> fresh rational-tree instance in this store.
// ---------------------------------------------------------------------------

NodeId TypeStore::thaw(const TermPtr& t) {
    std::map<int, NodeId> env; // var id (mu binder or free var) -> node

    std::function<NodeId(const TermPtr&)> go = [&](const TermPtr& term) -> NodeId {
        switch (term->kind) {
        case TypeTerm::Kind::Prim:
            return prim(term->prim);
        case TypeTerm::Kind::Var: {
            auto it = env.find(term->var);
            if (it != env.end())
                return it->second;
            NodeId n = term->notPrim ? freshNotPrim() : fresh();
            env.emplace(term->var, n);
            return n;
        }
        case TypeTerm::Kind::Mu: {
            NodeId placeholder = fresh();
            env[term->var] = placeholder;
            NodeId bodyN = go(term->body);
            unify(placeholder, bodyN, Pos{}, "internal"); // free node: cannot fail
            return find(bodyN);
        }
        case TypeTerm::Kind::Record: {
            NodeId n = record(term->open, term->allowed);
            for (const auto& [name, sig] : term->methods) {
                Sig s;
                for (const TermPtr& p : sig.params)
                    s.params.push_back(go(p));
                s.ret = go(sig.ret);
                nodes_[find(n)].labels.emplace(name, std::move(s));
            }
            return n;
        }
        case TypeTerm::Kind::ClassPair: {
            std::vector<NodeId> attrs;
            for (const TermPtr& a : term->attrs)
                attrs.push_back(go(a));
            NodeId ifaceN = go(term->iface);
            return classPair(std::move(attrs), ifaceN);
        }
        }
        return fresh(); // unreachable
    };
    return go(t);
}

// ---------------------------------------------------------------------------
// Equivalence: realize both terms as graphs in one scratch store, then check
// bisimulation with a bijection between free variables.
// ---------------------------------------------------------------------------

bool type_equiv(const TermPtr& a, const TermPtr& b) {
    TypeStore s;
    NodeId na = s.thaw(a);
    NodeId nb = s.thaw(b);

    std::set<std::pair<NodeId, NodeId>> assumed;
    std::map<NodeId, NodeId> fwd, bwd;

    std::function<bool(NodeId, NodeId)> eq = [&](NodeId x0, NodeId y0) -> bool {
        NodeId x = s.find(x0), y = s.find(y0);
        if (x == y)
            return true;
        auto key = std::make_pair(x, y);
        if (assumed.count(key))
            return true;
        assumed.insert(key);
        if (s.kind(x) != s.kind(y))
            return false;
        switch (s.kind(x)) {
        case TypeStore::Kind::Free: {
            if (s.isNotPrim(x) != s.isNotPrim(y))
                return false;
            auto fit = fwd.find(x);
            auto bit = bwd.find(y);
            if (fit == fwd.end() && bit == bwd.end()) {
                fwd.emplace(x, y);
                bwd.emplace(y, x);
                return true;
            }
            return fit != fwd.end() && fit->second == y && bit != bwd.end() &&
                   bit->second == x;
        }
        case TypeStore::Kind::Prim:
            return s.primName(x) == s.primName(y);
        case TypeStore::Kind::Record: {
            if (s.isOpen(x) != s.isOpen(y) || s.allowedSet(x) != s.allowedSet(y))
                return false;
            const auto& lx = s.labels(x);
            const auto& ly = s.labels(y);
            if (lx.size() != ly.size())
                return false;
            for (const auto& [m, sx] : lx) {
                auto it = ly.find(m);
                if (it == ly.end() || it->second.params.size() != sx.params.size())
                    return false;
                for (std::size_t i = 0; i < sx.params.size(); ++i)
                    if (!eq(sx.params[i], it->second.params[i]))
                        return false;
                if (!eq(sx.ret, it->second.ret))
                    return false;
            }
            return true;
        }
        case TypeStore::Kind::ClassPair: {
            const auto& ax = s.pairAttrs(x);
            const auto& ay = s.pairAttrs(y);
            if (ax.size() != ay.size())
                return false;
            for (std::size_t i = 0; i < ax.size(); ++i)
                if (!eq(ax[i], ay[i]))
                    return false;
            return eq(s.pairIface(x), s.pairIface(y));
        }
        }
        return false;
    };
    return eq(na, nb);
}

} // namespace mob::types
