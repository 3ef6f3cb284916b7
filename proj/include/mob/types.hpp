#pragma once

#include "mob/diag.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mob::types {

// ---------------------------------------------------------------------------
// Frozen type terms. Recursive (rational) types carry explicit `mu` binders:
// Mu(n, body) binds variable n inside body. Terms are immutable and shared.
// ---------------------------------------------------------------------------

struct TypeTerm;
using TermPtr = std::shared_ptr<const TypeTerm>;

struct MethodSig {
    std::vector<TermPtr> params;
    TermPtr ret;
};

struct TypeTerm {
    enum class Kind { Prim, Var, Record, ClassPair, Mu };
    Kind kind = Kind::Var;

    std::string prim;     // Prim: int | string | bool | thread
    int var = -1;         // Var id, or Mu binder id
    bool notPrim = false; // Var: refuses unification with any primitive

    std::map<std::string, MethodSig> methods; // Record
    bool open = false;                        // Record: may still absorb labels
    std::optional<std::set<std::string>> allowed; // Record: exact permitted label set

    std::vector<TermPtr> attrs; // ClassPair: constructor parameter types
    TermPtr iface;              // ClassPair: instance record
    TermPtr body;               // Mu
};

TermPtr make_prim(const std::string& name);
TermPtr make_var(int id, bool notPrim = false);
TermPtr make_record(std::map<std::string, MethodSig> methods, bool open,
                    std::optional<std::set<std::string>> allowed = std::nullopt);
TermPtr make_class_pair(std::vector<TermPtr> attrs, TermPtr iface);
TermPtr make_mu(int id, TermPtr body);

// Canonical rendering: prims by name, variables t0/t1/..., records
// {m:(int, string -> bool), n:(-> int)}, pairs ((int), {...}), recursion
// mu t0.{...}.
std::string to_string(const TermPtr& t);

// Structural equivalence of possibly-recursive terms (bisimulation with a
// bijection between free variables).
bool type_equiv(const TermPtr& a, const TermPtr& b);

// ---------------------------------------------------------------------------
// Mutable store used during inference: a union-find graph over type nodes
// with unification over rational trees (merge before recursing, so cyclic
// types unify without occurs checks).
// ---------------------------------------------------------------------------

using NodeId = std::uint32_t;

class TypeStore {
public:
    struct Sig {
        std::vector<NodeId> params;
        NodeId ret = 0;
    };

    enum class Kind { Free, Prim, Record, ClassPair };

    NodeId fresh();
    NodeId freshNotPrim(); // the type of null: any non-primitive
    NodeId prim(const std::string& rho);
    NodeId record(bool open, std::optional<std::set<std::string>> allowed = std::nullopt);
    NodeId classPair(std::vector<NodeId> attrs, NodeId iface);

    NodeId find(NodeId n) const;
    Kind kind(NodeId n) const;

    // Materializes (or retrieves) method `m` with the given arity on a record
    // node, coercing a free node into an open record first. Throws on arity
    // clash, on closed records lacking m, and on declared sets excluding m.
    Sig ensureLabel(NodeId rec, const std::string& m, std::size_t arity, Pos pos,
                    const std::string& what);

    // Fixes a record's label set (used once an interface is fully built).
    void close(NodeId rec);

    // Record introspection (post-find); record nodes only.
    const std::map<std::string, Sig>& labels(NodeId rec) const;
    bool isOpen(NodeId rec) const;
    const std::optional<std::set<std::string>>& allowedSet(NodeId rec) const;

    // Free-node and prim introspection (post-find).
    bool isNotPrim(NodeId n) const;
    const std::string& primName(NodeId n) const;

    // ClassPair introspection (post-find).
    const std::vector<NodeId>& pairAttrs(NodeId n) const;
    NodeId pairIface(NodeId n) const;

    void unify(NodeId a, NodeId b, Pos pos, const std::string& what);

    TermPtr freeze(NodeId n) const; // canonical term for the node's type
    NodeId thaw(const TermPtr& t);  // fresh instance of a term in this store

private:
    struct Node {
        NodeId parent;
        Kind k = Kind::Free;
        bool notPrim = false;
        std::string prim;
        std::map<std::string, Sig> labels;
        bool open = true;
        std::optional<std::set<std::string>> allowed;
        std::vector<NodeId> attrs;
        NodeId iface = 0;
    };
    std::vector<Node> nodes_;

    Node& rep(NodeId n) { return nodes_[find(n)]; }
    const Node& rep(NodeId n) const { return nodes_[find(n)]; }
    [[noreturn]] void mismatch(NodeId a, NodeId b, Pos pos, const std::string& what) const;
};

} // namespace mob::types
