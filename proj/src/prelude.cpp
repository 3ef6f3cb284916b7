#include "mob/driver.hpp"

#include "mob/parser.hpp"

#include <set>

namespace mob {

// Built-in singly linked collections. Bodies stick to the instruction grammar:
// conditions are plain variables, attribute writes take plain values, and
// loops exit through a scan flag.
const std::string& prelude_source() {
    static const std::string src = R"PRELUDE(
class Node(value, next) {
    getValue { return (value); }
    getNext { return (next); }
    setValue(v) { self.value = v; return (true); }
    setNext(n) { self.next = n; return (true); }

}

class ArrayIter(cur) {
    hasNext {
        h = cur != null;
        return (h);
    }
    next {
        v = cur.getValue();
        n = cur.getNext();
        self.cur = n;
        return (v);
    }

}

class Array(head, count) {
    put(v) {
        n = new Node(v, null);
        e = head == null;
        if (e) {
            self.head = n;
        } else {
            c = head;
            scanning = true;
            while (scanning) {
                nx = c.getNext();
                more = nx != null;
                if (more) { c = nx; } else { scanning = false; }
            }
            z = c.setNext(n);
        }
        c2 = count + 1;
        self.count = c2;
        return (true);
    }
    get(i) {
        c = head;
        j = 0;
        more = j < i;
        while (more) {
            c = c.getNext();
            j = j + 1;
            more = j < i;
        }
        v = c.getValue();
        return (v);
    }
    size { return (count); }
    iterator {
        it = new ArrayIter(head);
        return (it);
    }

}

class MapNode(key, value, next) {
    getKey { return (key); }
    getValue { return (value); }
    getNext { return (next); }
    setValue(v) { self.value = v; return (true); }
    setNext(n) { self.next = n; return (true); }

}

class MapIter(cur) {
    hasNext {
        h = cur != null;
        return (h);
    }
    next {
        k = cur.getKey();
        n = cur.getNext();
        self.cur = n;
        return (k);
    }

}

class Map(head, count) {
    add(k, v) {
        c = head;
        found = false;
        scanning = c != null;
        while (scanning) {
            ck = c.getKey();
            eq = ck == k;
            if (eq) {
                z = c.setValue(v);
                found = true;
                scanning = false;
            } else {
                c = c.getNext();
                scanning = c != null;
            }
        }
        done = found;
        if (done) { } else {
            n = new MapNode(k, v, head);
            self.head = n;
            c2 = count + 1;
            self.count = c2;
        }
        return (true);
    }
    remove(k) {
        prev = null;
        c = head;
        removed = false;
        scanning = c != null;
        while (scanning) {
            ck = c.getKey();
            eq = ck == k;
            if (eq) {
                n = c.getNext();
                e = prev == null;
                if (e) { self.head = n; } else { z = prev.setNext(n); }
                c2 = count - 1;
                self.count = c2;
                removed = true;
                scanning = false;
            } else {
                prev = c;
                c = c.getNext();
                scanning = c != null;
            }
        }
        return (removed);
    }
    get(k) {
        res = null;
        c = head;
        scanning = c != null;
        while (scanning) {
            ck = c.getKey();
            eq = ck == k;
            if (eq) {
                res = c.getValue();
                scanning = false;
            } else {
                c = c.getNext();
                scanning = c != null;
            }
        }
        return (res);
    }
    size { return (count); }
    iterator {
        it = new MapIter(head);
        return (it);
    }

}

exit;
)PRELUDE";
    return src;
}

void inject_prelude(ast::Program& prog) {
    std::set<std::string> defined;
    for (const auto& d : prog.definitions)
        if (d.kind != ast::Definition::Kind::Requires) defined.insert(d.name);

    // A fresh parse per program: definitions are moved into the target tree.
    auto pre = parse_program(prelude_source());

    // Splice after the leading services/requires, keeping the program's own
    // definition order untouched otherwise.
    std::size_t at = 0;
    while (at < prog.definitions.size() &&
           (prog.definitions[at].kind == ast::Definition::Kind::Service ||
            prog.definitions[at].kind == ast::Definition::Kind::Requires))
        ++at;

    std::vector<ast::Definition> merged;
    merged.reserve(prog.definitions.size() + pre->definitions.size());
    for (std::size_t i = 0; i < at; ++i)
        merged.push_back(std::move(prog.definitions[i]));
    for (auto& d : pre->definitions)
        if (defined.find(d.name) == defined.end()) merged.push_back(std::move(d));
    for (std::size_t i = at; i < prog.definitions.size(); ++i)
        merged.push_back(std::move(prog.definitions[i]));
    prog.definitions = std::move(merged);
}

} // namespace mob
