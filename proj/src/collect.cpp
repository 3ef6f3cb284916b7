#include "mob/collect.hpp"

namespace mob {

namespace {

using namespace ast;

// Collects the class names instantiated anywhere in a sequence, descending
// into branch, loop and fork bodies.
void scanNews(const InstrSeq& seq, std::set<std::string>& out) {
    for (const auto& in : seq) {
        switch (in->kind) {
        case Instr::Kind::Assign:
            if (in->value.kind == AssignValue::Kind::NewObject)
                out.insert(in->value.className);
            else if (in->value.kind == AssignValue::Kind::Fork)
                scanNews(in->value.forkBody, out);
            break;
        case Instr::Kind::If:
            scanNews(in->thenBody, out);
            scanNews(in->elseBody, out);
            break;
        case Instr::Kind::While:
            scanNews(in->thenBody, out);
            break;
        default:
            break;
        }
    }
}

} // namespace

void CodeRepo::addTransitive(const std::string& name, const CodeEntry* e) {
    auto [it, inserted] = entries.insert_or_assign(name, e);
    (void)it;
    // Walk nested repos; a visited set guards against mutual recursion.
    std::set<const CodeEntry*> visited{e};
    std::vector<const CodeEntry*> work{e};
    while (!work.empty()) {
        const CodeEntry* cur = work.back();
        work.pop_back();
        for (const auto& [n, sub] : cur->nested) {
            entries.insert_or_assign(n, sub);
            if (visited.insert(sub).second)
                work.push_back(sub);
        }
    }
}

void CodeRepo::mergeAll(const CodeRepo& other) {
    for (const auto& [n, e] : other.entries)
        entries.insert_or_assign(n, e);
    owners.insert(other.owners.begin(), other.owners.end());
}

std::shared_ptr<const CompiledCode> code_collect(std::shared_ptr<const ast::Program> prog) {
    auto out = std::make_shared<CompiledCode>();
    out->program = prog;

    // First create every entry, then wire up the nested repositories, so that
    // mutually recursive classes reference each other.
    for (const Definition& d : prog->definitions) {
        if (d.kind != Definition::Kind::Class && d.kind != Definition::Kind::Agent)
            continue;
        auto e = std::make_unique<CodeEntry>();
        e->isAgent = d.kind == Definition::Kind::Agent;
        e->className = d.name;
        e->params = d.params;
        e->provides = d.provides;
        for (const Method& m : d.methods)
            e->methods.emplace(m.name, &m);
        out->entries.emplace(d.name, std::move(e));
    }
    for (const Definition& d : prog->definitions) {
        if (d.kind != Definition::Kind::Class && d.kind != Definition::Kind::Agent)
            continue;
        std::set<std::string> used;
        for (const Method& m : d.methods)
            scanNews(m.body, used);
        CodeEntry& e = *out->entries.at(d.name);
        for (const std::string& n : used) {
            auto it = out->entries.find(n);
            if (it == out->entries.end())
                throw CompileError("UnknownClass", d.pos,
                                   "'" + d.name + "' instantiates undefined class '" + n +
                                       "'");
            e.nested.emplace(n, it->second.get());
        }
    }
    scanNews(prog->body, out->launchClasses);
    return out;
}

CodeRepo launch_repo(const std::shared_ptr<const CompiledCode>& code) {
    CodeRepo repo;
    repo.owners.insert(code);
    for (const auto& [name, e] : code->entries)
        repo.entries.emplace(name, e.get());
    return repo;
}

} // namespace mob
