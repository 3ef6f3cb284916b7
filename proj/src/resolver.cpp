#include "mob/resolver.hpp"

#include "mob/diag.hpp"

#include <sstream>
#include <stdexcept>

namespace mob {

const std::set<QualRef> Resolver::kNoImpls{};

std::string to_string(const QualRef& r) {
    std::ostringstream os;
    os << (r.isThread ? 't' : 'r') << r.num << "@a" << r.agent;
    return os.str();
}

void Resolver::registerAgent(QualRef ref, const std::string& host) {
    ans_[ref] = host;
}

void Resolver::moveAgent(QualRef ref, const std::string& host) {
    auto it = ans_.find(ref);
    if (it == ans_.end())
        throw std::logic_error("moveAgent: unregistered agent ref " + to_string(ref));
    it->second = host;
}

void Resolver::dropAgent(int agentNum) {
    for (auto it = ans_.begin(); it != ans_.end();) {
        if (it->first.agent == agentNum)
            it = ans_.erase(it);
        else
            ++it;
    }
    for (auto& [name, entry] : sns_) {
        for (auto it = entry.impls.begin(); it != entry.impls.end();) {
            if (it->agent == agentNum)
                it = entry.impls.erase(it);
            else
                ++it;
        }
    }
}

std::optional<std::string> Resolver::hostOf(QualRef ref) const {
    auto it = ans_.find(ref);
    if (it == ans_.end()) return std::nullopt;
    return it->second;
}

bool Resolver::hasServiceType(const std::string& s) const {
    auto it = sns_.find(s);
    return it != sns_.end() && it->second.type != nullptr;
}

const types::TermPtr& Resolver::serviceType(const std::string& s) const {
    auto it = sns_.find(s);
    if (it == sns_.end() || !it->second.type)
        throw std::logic_error("serviceType: unknown service " + s);
    return it->second.type;
}

void Resolver::declareServiceType(const std::string& s, types::TermPtr t) {
    auto& entry = sns_[s];
    if (!entry.type) entry.type = std::move(t);
}

void Resolver::addImpl(const std::string& s, QualRef ref) {
    sns_[s].impls.insert(ref);
}

const std::set<QualRef>& Resolver::impls(const std::string& s) const {
    auto it = sns_.find(s);
    if (it == sns_.end()) return kNoImpls;
    return it->second.impls;
}

std::vector<std::string> Resolver::serviceNames() const {
    std::vector<std::string> out;
    out.reserve(sns_.size());
    for (const auto& [name, entry] : sns_) out.push_back(name);
    return out;
}

std::string Resolver::dump() const {
    std::ostringstream os;
    for (const auto& [ref, host] : ans_)
        os << "ANS " << to_string(ref) << ' ' << host << '\n';
    for (const auto& [name, entry] : sns_) {
        os << "SNS " << name << ' '
           << (entry.type ? types::to_string(entry.type) : "?") << " {";
        bool first = true;
        for (const auto& ref : entry.impls) {
            if (!first) os << ", ";
            first = false;
            os << to_string(ref);
        }
        os << "}\n";
    }
    return os.str();
}

void check_services(const std::map<std::string, types::TermPtr>& services, Resolver& r) {
    for (const auto& [name, term] : services) {
        if (!r.hasServiceType(name)) {
            r.declareServiceType(name, term);
            continue;
        }
        // Unify fresh instances of both types in a scratch store: structural
        // placeholders may be filled in differently per program, but ground
        // parts must agree.
        types::TypeStore scratch;
        types::NodeId a = scratch.thaw(r.serviceType(name));
        types::NodeId b = scratch.thaw(term);
        try {
            scratch.unify(a, b, Pos{}, "service '" + name + "'");
        } catch (const CompileError& e) {
            throw CompileError("ServiceTypeMismatch", e.pos(),
                               "service '" + name + "' is used with incompatible types: " +
                                   e.message());
        }
    }
}

} // namespace mob
