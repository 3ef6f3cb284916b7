#pragma once

#include "mob/types.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mob {

// A globally qualified heap reference: owning agent number, ref kind
// (plain cell r / thread t) and the per-agent counter value.
struct QualRef {
    int agent = -1;
    bool isThread = false;
    std::uint32_t num = 0;
    auto operator<=>(const QualRef&) const = default;
};

// "r0@a2" / "t1@a0"
std::string to_string(const QualRef& r);

// The two name services of the simulated network. The agent name service maps
// registered agent closure refs to host names; the service name service maps
// service names to a registered record type plus the refs of the agents
// providing the service.
class Resolver {
public:
    // --- agent name service -------------------------------------------------
    void registerAgent(QualRef ref, const std::string& host);
    void moveAgent(QualRef ref, const std::string& host);
    void dropAgent(int agentNum); // removes every ANS entry and impl of the agent
    std::optional<std::string> hostOf(QualRef ref) const;
    const std::map<QualRef, std::string>& ans() const { return ans_; }

    // --- service name service -----------------------------------------------
    bool hasServiceType(const std::string& s) const;
    const types::TermPtr& serviceType(const std::string& s) const;
    void declareServiceType(const std::string& s, types::TermPtr t); // first writer wins
    void addImpl(const std::string& s, QualRef ref);
    const std::set<QualRef>& impls(const std::string& s) const;
    std::vector<std::string> serviceNames() const;

    // "ANS <ref> <host>" and "SNS <service> <type> {<refs>}" lines.
    std::string dump() const;

private:
    std::map<QualRef, std::string> ans_;
    struct Entry {
        types::TermPtr type;
        std::set<QualRef> impls;
    };
    std::map<std::string, Entry> sns_;
    static const std::set<QualRef> kNoImpls;
};

// Compile-time service compatibility against a shared resolver: services not
// yet registered are registered with the program's frozen type; already
// registered ones must unify (as fresh instances) with the program's local
// type. Throws CompileError("ServiceTypeMismatch", ...).
void check_services(const std::map<std::string, types::TermPtr>& services, Resolver& r);

} // namespace mob
