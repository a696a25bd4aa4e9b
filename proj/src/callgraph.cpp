#include "llmsec/callgraph.hpp"

#include <algorithm>
#include <deque>
#include <functional>

namespace llmsec {

std::vector<SinkSpec> default_sinks() {
    return {
        {"exec", {"exec"}},
        {"eval", {"eval"}},
        {"subprocess.run", {"subprocess.run"}},
        {"os.popen", {"os.popen"}},
        {"os.system", {"os.system"}},
    };
}

std::string sink_node_name(const SinkSpec& sink) { return "sink:" + sink.name; }

namespace {

bool matches_sink_token(std::string_view expr, const std::string& token) {
    if (token.find('.') == std::string::npos)
        return final_segment(expr) == token;
    if (expr == token) return true;
    return expr.size() > token.size() &&
           expr.compare(expr.size() - token.size(), token.size(), token) == 0 &&
           expr[expr.size() - token.size() - 1] == '.';
}

bool matches_sink(std::string_view expr, const SinkSpec& sink) {
    for (const std::string& t : sink.match_tokens)
        if (matches_sink_token(expr, t)) return true;
    return false;
}

const ImportBinding* find_binding(const ProgramIndex& index,
                                  const std::string& module,
                                  std::string_view alias) {
    const auto it = index.imports.find(module);
    if (it == index.imports.end()) return nullptr;
    for (const auto& b : it->second)
        if (b.local_alias == alias) return &b;
    return nullptr;
}

bool defined_in_files(const ProgramIndex& index, const std::string& qname,
                      const std::set<std::string>& files) {
    const auto it = index.functions.find(qname);
    return it != index.functions.end() &&
           files.count(it->second.location.file) > 0;
}

// Method lookup through the class and its resolved bases, breadth first.
std::optional<std::string> lookup_method(const ProgramIndex& index,
                                         const std::string& class_qname,
                                         const std::string& method) {
    std::deque<std::string> queue{class_qname};
    std::set<std::string> seen;
    while (!queue.empty()) {
        const std::string cls = queue.front();
        queue.pop_front();
        if (!seen.insert(cls).second) continue;
        const auto it = index.classes.find(cls);
        if (it == index.classes.end()) continue;
        const auto m = it->second.methods.find(method);
        if (m != it->second.methods.end()) return m->second;
        const std::string module =
            index.units.count(it->second.location.file)
                ? index.units.at(it->second.location.file).module_name
                : std::string{};
        for (const std::string& base : it->second.base_names) {
            if (auto resolved = resolve_class_reference(base, module, index))
                queue.push_back(*resolved);
        }
    }
    return std::nullopt;
}

}  // namespace

std::set<std::string> resolve_callee(const CallSiteRecord& call_site,
                                     const ProgramIndex& index,
                                     const SinkSpec& sink,
                                     const std::set<std::string>& files) {
    std::set<std::string> out;
    const std::string& expr = call_site.callee_expr;
    const auto caller_it = index.functions.find(call_site.caller_qname);
    if (caller_it == index.functions.end() || expr.empty()) return out;
    const FunctionRecord& caller = caller_it->second;
    const std::string module = module_of(caller, index);

    const auto add_fn = [&](const std::string& qname) {
        if (defined_in_files(index, qname, files))
            out.insert(qname);
        else
            out.insert(std::string(final_segment(qname)));
    };

    const auto dot = expr.find('.');
    if (dot == std::string::npos) {
        // nested function defined in the caller
        const std::string nested = caller.qname + "." + expr;
        if (index.functions.count(nested)) {
            add_fn(nested);
            return out;
        }
        // module-level function
        const std::string local = module.empty() ? expr : module + "." + expr;
        if (index.functions.count(local)) {
            add_fn(local);
            return out;
        }
        // import binding
        if (const ImportBinding* b = find_binding(index, module, expr)) {
            if (index.functions.count(b->target)) {
                add_fn(b->target);
                return out;
            }
            if (index.classes.count(b->target)) return out;  // instantiation
            if (matches_sink(b->target, sink)) {
                out.insert(sink_node_name(sink));
                return out;
            }
        }
        // local class instantiation
        if (index.classes.count(local)) return out;
        if (matches_sink(expr, sink)) {
            out.insert(sink_node_name(sink));
            return out;
        }
        out.insert(expr);  // unresolved leaf
        return out;
    }

    const std::string head = expr.substr(0, dot);
    const std::string rest = expr.substr(dot + 1);
    const std::string last(final_segment(expr));

    if (head == "self" || head == "cls") {
        if (caller.enclosing_class && rest.find('.') == std::string::npos) {
            if (auto m = lookup_method(index, *caller.enclosing_class, rest)) {
                add_fn(*m);
                return out;
            }
        }
        // attribute of unknown type: fall through to the name match below
    } else {
        // absolute dotted path
        if (index.functions.count(expr)) {
            add_fn(expr);
            return out;
        }
        if (index.classes.count(expr)) return out;  // instantiation

        if (const ImportBinding* b = find_binding(index, module, head)) {
            const std::string expanded = b->target + "." + rest;
            if (index.functions.count(expanded)) {
                add_fn(expanded);
                return out;
            }
            if (index.classes.count(expanded)) return out;  // instantiation
            // Class.method reference through an imported class
            if (index.classes.count(b->target) &&
                rest.find('.') == std::string::npos) {
                if (auto m = lookup_method(index, b->target, rest)) {
                    add_fn(*m);
                    return out;
                }
            }
            if (matches_sink(expanded, sink)) {
                out.insert(sink_node_name(sink));
                return out;
            }
        }
        // Class.method on a class of the same module
        const std::string local_head =
            module.empty() ? head : module + "." + head;
        if (index.classes.count(local_head) &&
            rest.find('.') == std::string::npos) {
            if (auto m = lookup_method(index, local_head, rest)) {
                add_fn(*m);
                return out;
            }
        }
    }

    if (matches_sink(expr, sink)) {
        out.insert(sink_node_name(sink));
        return out;
    }

    // Unknown receiver: over-approximate by method name across the file
    // set, the same confusion a plain string match would make.
    bool found = false;
    for (const auto& [qname, fn] : index.functions) {
        if (!fn.enclosing_class) continue;
        if (final_segment(qname) != last) continue;
        if (!files.count(fn.location.file)) continue;
        out.insert(qname);
        found = true;
    }
    if (!found) out.insert(last);
    return out;
}

CallGraph build_callgraph(const ProgramIndex& index,
                          const std::set<std::string>& files,
                          const SinkSpec& sink) {
    CallGraph cg;
    for (const auto& [qname, fn] : index.functions) {
        if (!files.count(fn.location.file)) continue;
        cg.nodes.insert(qname);
    }
    for (const auto& [qname, fn] : index.functions) {
        if (!files.count(fn.location.file)) continue;
        for (const CallSiteRecord& cs : fn.call_sites) {
            for (const std::string& target :
                 resolve_callee(cs, index, sink, files)) {
                cg.nodes.insert(target);
                cg.edges.insert({qname, target, cs.location});
            }
        }
    }
    return cg;
}

InheritanceGraph build_inheritance_graph(const ProgramIndex& index) {
    InheritanceGraph g;
    for (const auto& [qname, cls] : index.classes) {
        const std::string module =
            index.units.count(cls.location.file)
                ? index.units.at(cls.location.file).module_name
                : std::string{};
        for (const std::string& base : cls.base_names) {
            if (auto resolved = resolve_class_reference(base, module, index)) {
                if (*resolved != qname)
                    g.edges.insert({qname, *resolved});
                else
                    g.dropped_cycle_edges.insert({qname, *resolved});
            } else {
                g.unresolved_bases.insert({qname, base});
            }
        }
    }

    // Break inheritance cycles by dropping back edges found in a
    // deterministic depth-first walk.
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& [sub, base] : g.edges) adj[sub].push_back(base);
    for (auto& [k, v] : adj) std::sort(v.begin(), v.end());

    std::set<std::string> done;
    std::set<std::string> on_stack;
    std::set<std::pair<std::string, std::string>> to_drop;

    std::function<void(const std::string&)> visit =
        [&](const std::string& node) {
            if (done.count(node)) return;
            on_stack.insert(node);
            const auto it = adj.find(node);
            if (it != adj.end()) {
                for (const std::string& next : it->second) {
                    if (on_stack.count(next)) {
                        to_drop.insert({node, next});
                        continue;
                    }
                    visit(next);
                }
            }
            on_stack.erase(node);
            done.insert(node);
        };
    for (const auto& [node, _] : adj) visit(node);

    for (const auto& e : to_drop) {
        g.edges.erase(e);
        g.dropped_cycle_edges.insert(e);
    }
    return g;
}

std::set<std::string> find_callers(const CallGraph& cg,
                                   const std::string& callee_qname) {
    std::set<std::string> out;
    for (const auto& e : cg.edges)
        if (e.callee == callee_qname) out.insert(e.caller);
    return out;
}

std::set<ImplicitCaller> implicit_callers(const std::string& callee_qname,
                                          const ProgramIndex& index,
                                          const InheritanceGraph& inh) {
    std::set<ImplicitCaller> out;
    const auto fn_it = index.functions.find(callee_qname);
    if (fn_it == index.functions.end() || !fn_it->second.enclosing_class)
        return out;
    const std::string owner = *fn_it->second.enclosing_class;

    // inheritance closure in both directions
    std::set<std::string> related{owner};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& [sub, base] : inh.edges) {
            if (related.count(sub) && related.insert(base).second) grew = true;
            if (related.count(base) && related.insert(sub).second) grew = true;
        }
    }

    for (const std::string& cls : related) {
        const auto it = index.classes.find(cls);
        if (it == index.classes.end()) continue;
        for (const auto& [fn_qname, loc] : it->second.instantiation_sites)
            out.insert({fn_qname, cls});
    }

    // constructor-argument composition, one level deep
    for (const auto& [fq, fn] : index.functions) {
        const std::string module = module_of(fn, index);
        for (const CallSiteRecord& cs : fn.call_sites) {
            if (!resolve_class_reference(cs.callee_expr, module, index))
                continue;  // only calls that build an instance qualify
            const auto consider = [&](const std::string& expr) {
                if (auto cls = resolve_class_reference(expr, module, index)) {
                    if (related.count(*cls)) out.insert({fq, *cls});
                }
            };
            for (const std::string& nested : cs.arg_callees) consider(nested);
            for (const std::string& name : cs.arg_name_refs) {
                const auto alias = fn.ctor_aliases.find(name);
                if (alias == fn.ctor_aliases.end()) continue;
                for (const std::string& expr : alias->second) consider(expr);
            }
        }
    }
    return out;
}

}  // namespace llmsec
