#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "llmsec/callgraph.hpp"
#include "llmsec/source_model.hpp"

namespace llmsec {

class ChainError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Which functions count as user-facing entry points. Explicit names
// always qualify; the parameter-name heuristic applies on top unless
// disabled.
struct ApiManifest {
    std::set<std::string> explicit_apis;
    bool heuristic_enabled = true;
};

struct ChainLimits {
    int max_depth = 16;    // maximum number of links per chain
    int node_budget = 500; // guard for the exhaustive oracle
};

enum class LinkKind { Direct, Implicit };

// One caller-to-sink path. links[0] is the outermost caller reached,
// links.back() is the sink node; complete means links[0] is a user API.
struct CallChain {
    std::vector<std::string> links;
    std::vector<LinkKind> link_kinds;        // kinds of (links[i], links[i+1])
    std::vector<std::string> via_classes;    // class tag for implicit links
    std::vector<std::string> files;          // ordered, deduplicated
    bool complete = false;

    friend bool operator==(const CallChain&, const CallChain&) = default;
};

struct ChainMetrics {
    int count = 0;
    int length_sum = 0;
    int length_max = 0;
    double length_avg = 0.0;
    int files_sum = 0;
    int files_max = 0;
    double files_avg = 0.0;

    friend bool operator==(const ChainMetrics&, const ChainMetrics&) = default;
};

// Parameter names that typically carry end-user input.
const std::set<std::string>& user_input_lexicon();

bool is_user_api(const FunctionRecord& fn, const ApiManifest& manifest);

// Backward worklist extraction: narrow candidate files by token match,
// build a call graph over them, branch one partial chain per caller
// (direct or implicit) and emit when the head is a user API, has no
// callers, or the depth limit is reached. Output is sorted by link
// sequence.
std::vector<CallChain> extract_chains(const ProgramIndex& index,
                                      const SinkSpec& sink,
                                      const ApiManifest& manifest,
                                      const ChainLimits& limits = {});

// Exhaustive counterpart used as a test oracle: one whole-program call
// graph, then every simple path from a user API to the sink with no
// interior API node. Guarded by limits.node_budget.
std::vector<CallChain> oracle_all_paths(const ProgramIndex& index,
                                        const SinkSpec& sink,
                                        const ApiManifest& manifest,
                                        const ChainLimits& limits = {});

// Sum/max/avg of link counts and per-chain file counts over complete
// chains only.
ChainMetrics chain_metrics(const std::vector<CallChain>& chains);

}  // namespace llmsec
