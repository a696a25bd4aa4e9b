#include "llmsec/chain_extractor.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>

namespace llmsec {

const std::set<std::string>& user_input_lexicon() {
    static const std::set<std::string> lexicon = {
        "prompt", "query", "question", "input", "text", "q", "message", "code"};
    return lexicon;
}

bool is_user_api(const FunctionRecord& fn, const ApiManifest& manifest) {
    if (manifest.explicit_apis.count(fn.qname)) return true;
    if (!manifest.heuristic_enabled) return false;
    if (!fn.is_public) return false;
    if (fn.enclosing_class && !qname_is_public(*fn.enclosing_class))
        return false;
    for (const std::string& p : fn.params)
        if (user_input_lexicon().count(p)) return true;
    return false;
}

namespace {

struct CallerInfo {
    LinkKind kind;
    std::string via_class;
};

// Direct callers first; an implicit caller that is also direct keeps the
// direct tag.
std::map<std::string, CallerInfo> merge_callers(
    const std::set<std::string>& direct,
    const std::set<ImplicitCaller>& implicit) {
    std::map<std::string, CallerInfo> merged;
    for (const std::string& c : direct) merged[c] = {LinkKind::Direct, ""};
    for (const ImplicitCaller& ic : implicit)
        merged.emplace(ic.fn_qname, CallerInfo{LinkKind::Implicit, ic.via_class});
    return merged;
}

void finalize_files(CallChain& chain, const ProgramIndex& index) {
    chain.files.clear();
    for (const std::string& link : chain.links) {
        const auto it = index.functions.find(link);
        if (it == index.functions.end()) continue;
        const std::string& f = it->second.location.file;
        if (std::find(chain.files.begin(), chain.files.end(), f) ==
            chain.files.end())
            chain.files.push_back(f);
    }
}

void sort_chains(std::vector<CallChain>& chains) {
    std::sort(chains.begin(), chains.end(),
              [](const CallChain& a, const CallChain& b) {
                  if (a.links != b.links) return a.links < b.links;
                  return a.complete > b.complete;
              });
}

}  // namespace

std::vector<CallChain> extract_chains(const ProgramIndex& index,
                                      const SinkSpec& sink,
                                      const ApiManifest& manifest,
                                      const ChainLimits& limits) {
    if (limits.max_depth < 2)
        throw ChainError("max_depth must be at least 2");

    const InheritanceGraph inh = build_inheritance_graph(index);
    const std::string sink_node = sink_node_name(sink);
    std::vector<CallChain> out;

    struct Partial {
        std::vector<std::string> links;
        std::vector<LinkKind> kinds;
        std::vector<std::string> vias;
    };
    std::deque<Partial> worklist;

    // seed with the functions that call the sink
    {
        std::set<std::string> files;
        for (const std::string& token : sink.match_tokens) {
            const auto hits =
                token_search(index, std::string(final_segment(token)));
            files.insert(hits.begin(), hits.end());
        }
        const CallGraph cg = build_callgraph(index, files, sink);
        for (const std::string& caller : find_callers(cg, sink_node)) {
            if (!index.functions.count(caller)) continue;
            worklist.push_back(
                {{caller, sink_node}, {LinkKind::Direct}, {""}});
        }
    }

    while (!worklist.empty()) {
        Partial cur = std::move(worklist.front());
        worklist.pop_front();

        const std::string& head = cur.links.front();
        const FunctionRecord& fn = index.functions.at(head);

        if (is_user_api(fn, manifest)) {
            CallChain chain{cur.links, cur.kinds, cur.vias, {}, true};
            finalize_files(chain, index);
            out.push_back(std::move(chain));
            continue;
        }
        if (static_cast<int>(cur.links.size()) >= limits.max_depth) {
            CallChain chain{cur.links, cur.kinds, cur.vias, {}, false};
            finalize_files(chain, index);
            out.push_back(std::move(chain));
            continue;
        }

        const auto files =
            token_search(index, std::string(final_segment(head)));
        const CallGraph cg = build_callgraph(index, files, sink);
        const auto direct =
            cg.nodes.count(head) ? find_callers(cg, head) : std::set<std::string>{};
        const auto implicit = implicit_callers(head, index, inh);

        bool extended = false;
        for (const auto& [caller, info] : merge_callers(direct, implicit)) {
            if (!index.functions.count(caller)) continue;  // leaf callers
            if (std::find(cur.links.begin(), cur.links.end(), caller) !=
                cur.links.end())
                continue;  // cycle
            Partial next;
            next.links.reserve(cur.links.size() + 1);
            next.links.push_back(caller);
            next.links.insert(next.links.end(), cur.links.begin(),
                              cur.links.end());
            next.kinds.push_back(info.kind);
            next.kinds.insert(next.kinds.end(), cur.kinds.begin(),
                              cur.kinds.end());
            next.vias.push_back(info.via_class);
            next.vias.insert(next.vias.end(), cur.vias.begin(),
                             cur.vias.end());
            worklist.push_back(std::move(next));
            extended = true;
        }
        if (!extended) {
            CallChain chain{cur.links, cur.kinds, cur.vias, {}, false};
            finalize_files(chain, index);
            out.push_back(std::move(chain));
        }
    }

    sort_chains(out);
    return out;
}

std::vector<CallChain> oracle_all_paths(const ProgramIndex& index,
                                        const SinkSpec& sink,
                                        const ApiManifest& manifest,
                                        const ChainLimits& limits) {
    if (static_cast<int>(index.functions.size()) > limits.node_budget)
        throw ChainError("oracle node budget exceeded");

    std::set<std::string> all_files;
    for (const auto& [path, unit] : index.units) all_files.insert(path);

    const CallGraph cg = build_callgraph(index, all_files, sink);
    const InheritanceGraph inh = build_inheritance_graph(index);
    const std::string sink_node = sink_node_name(sink);

    // reverse adjacency with direct edges taking precedence
    std::map<std::string, std::map<std::string, CallerInfo>> rev;
    for (const CallGraph::Edge& e : cg.edges) {
        if (!index.functions.count(e.caller)) continue;
        rev[e.callee][e.caller] = {LinkKind::Direct, ""};
    }
    for (const auto& [qname, fn] : index.functions) {
        for (const ImplicitCaller& ic : implicit_callers(qname, index, inh)) {
            rev[qname].emplace(ic.fn_qname,
                               CallerInfo{LinkKind::Implicit, ic.via_class});
        }
    }

    std::vector<CallChain> out;
    std::vector<std::string> path{sink_node};
    std::vector<LinkKind> kinds;
    std::vector<std::string> vias;

    std::function<void(const std::string&)> expand =
        [&](const std::string& node) {
            const auto it = rev.find(node);
            if (it == rev.end()) return;
            for (const auto& [caller, info] : it->second) {
                if (std::find(path.begin(), path.end(), caller) != path.end())
                    continue;
                path.insert(path.begin(), caller);
                kinds.insert(kinds.begin(), info.kind);
                vias.insert(vias.begin(), info.via_class);

                const FunctionRecord& fn = index.functions.at(caller);
                if (is_user_api(fn, manifest)) {
                    CallChain chain{path, kinds, vias, {}, true};
                    finalize_files(chain, index);
                    out.push_back(std::move(chain));
                } else {
                    expand(caller);
                }

                path.erase(path.begin());
                kinds.erase(kinds.begin());
                vias.erase(vias.begin());
            }
        };
    expand(sink_node);

    sort_chains(out);
    return out;
}

ChainMetrics chain_metrics(const std::vector<CallChain>& chains) {
    ChainMetrics m;
    for (const CallChain& c : chains) {
        if (!c.complete) continue;
        ++m.count;
        const int len = static_cast<int>(c.links.size());
        const int nfiles = static_cast<int>(c.files.size());
        m.length_sum += len;
        m.length_max = std::max(m.length_max, len);
        m.files_sum += nfiles;
        m.files_max = std::max(m.files_max, nfiles);
    }
    if (m.count > 0) {
        m.length_avg = static_cast<double>(m.length_sum) / m.count;
        m.files_avg = static_cast<double>(m.files_sum) / m.count;
    }
    return m;
}

}  // namespace llmsec
