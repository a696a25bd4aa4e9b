#pragma once

#include <set>
#include <string>
#include <vector>

#include "llmsec/source_model.hpp"

namespace llmsec {

// A code-execution sink: calls whose callee matches one of the tokens
// terminate chains. Dotted tokens require a qualified suffix match,
// plain tokens match the final segment of the callee expression.
struct SinkSpec {
    std::string name;
    std::set<std::string> match_tokens;
};

std::vector<SinkSpec> default_sinks();
std::string sink_node_name(const SinkSpec& sink);

struct CallGraph {
    struct Edge {
        std::string caller;
        std::string callee;
        Location location;

        friend bool operator<(const Edge& a, const Edge& b) {
            if (a.caller != b.caller) return a.caller < b.caller;
            if (a.callee != b.callee) return a.callee < b.callee;
            if (a.location.file != b.location.file)
                return a.location.file < b.location.file;
            return a.location.line < b.location.line;
        }
        friend bool operator==(const Edge& a, const Edge& b) {
            return a.caller == b.caller && a.callee == b.callee &&
                   a.location == b.location;
        }
    };

    std::set<std::string> nodes;
    std::set<Edge> edges;
};

struct InheritanceGraph {
    std::set<std::pair<std::string, std::string>> edges;  // (subclass, base)
    std::set<std::pair<std::string, std::string>> unresolved_bases;
    std::set<std::pair<std::string, std::string>> dropped_cycle_edges;
};

struct ImplicitCaller {
    std::string fn_qname;
    std::string via_class;

    friend bool operator<(const ImplicitCaller& a, const ImplicitCaller& b) {
        if (a.fn_qname != b.fn_qname) return a.fn_qname < b.fn_qname;
        return a.via_class < b.via_class;
    }
    friend bool operator==(const ImplicitCaller&,
                           const ImplicitCaller&) = default;
};

struct CallerSet {
    std::set<std::string> direct;
    std::set<ImplicitCaller> implicit;
};

// Candidate targets for one call site, resolved against the functions
// defined in `files`. Targets are function qnames, sink nodes
// ("sink:<name>") or bare leaf names for unresolved callees. Calls that
// resolve to a class are instantiations and yield no targets here.
std::set<std::string> resolve_callee(const CallSiteRecord& call_site,
                                     const ProgramIndex& index,
                                     const SinkSpec& sink,
                                     const std::set<std::string>& files);

// Call graph over exactly the functions defined in `files`.
CallGraph build_callgraph(const ProgramIndex& index,
                          const std::set<std::string>& files,
                          const SinkSpec& sink);

InheritanceGraph build_inheritance_graph(const ProgramIndex& index);

std::set<std::string> find_callers(const CallGraph& cg,
                                   const std::string& callee_qname);

// Functions that can invoke `callee_qname` without a textual call:
// instantiators of the method's class (or any class related to it by
// inheritance, both directions), plus constructor-argument composition
// resolved one level deep.
std::set<ImplicitCaller> implicit_callers(const std::string& callee_qname,
                                          const ProgramIndex& index,
                                          const InheritanceGraph& inh);

}  // namespace llmsec
