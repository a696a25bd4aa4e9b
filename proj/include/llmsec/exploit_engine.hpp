#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "llmsec/exploit.hpp"

namespace llmsec::exploit {

enum class Stage {
    Basic,
    Hallucination,
    RcePlain,
    RceEscape,
    Network,
    Backdoor,
    Done,
};

std::string stage_name(Stage s);

enum class EscapeMode { None, Llm, Code, Both };

std::string escape_mode_name(EscapeMode m);

struct TranscriptEntry {
    std::string stage;
    std::string tactic_id;
    std::string prompt;
    std::string response;
    Classification classification = Classification::Fail;
    std::string evidence_kind;
};

enum class ExploitLevel { SqlInjection, LimitedRce, ReverseShell, Root };
enum class FailureReason {
    RuntimeException,
    RestrictedPrompts,
    NoCeAbility,
    ProtectedCe,
    Other,
};

std::string level_name(ExploitLevel level);
std::string reason_name(FailureReason reason);

struct Verdict {
    bool exploitable = false;
    ExploitLevel level = ExploitLevel::LimitedRce;
    FailureReason reason = FailureReason::Other;
    std::vector<int> evidence_refs;

    // Outcome identity ignores which transcript lines supported it.
    friend bool same_outcome(const Verdict& a, const Verdict& b) {
        if (a.exploitable != b.exploitable) return false;
        return a.exploitable ? a.level == b.level : a.reason == b.reason;
    }
};

// Severity order used by the monotonicity checks: not exploitable,
// then SQL injection, limited RCE, reverse shell, root.
int verdict_rank(const Verdict& v);

std::string verdict_summary(const Verdict& v);

// Consulted when an early stage fails; returning a catalogue requests
// one stage retry with the replacement prompts.
using CatalogueReloadHook =
    std::function<std::optional<Catalogue>(Stage, const Catalogue&)>;

struct EngineConfig {
    bool llm_escape_enabled = true;
    bool code_escape_enabled = true;
    bool sql_probe_enabled = true;
    int budget = 40;  // maximum prompts per session
    std::uint64_t seed = 0;
    bool allow_real_backdoor = false;  // backdoor stage on real targets
    std::string attacker_ip = "203.0.113.7";
    std::string attacker_port = "8443";
    CatalogueReloadHook reload_hook;
};

struct SessionResult {
    Verdict verdict;
    std::vector<TranscriptEntry> transcript;
    EscapeMode escape_used = EscapeMode::None;
    std::vector<std::string> stages_entered;
    int prompts_sent = 0;
};

// Drive the staged protocol: basic usage, capability probes, command
// execution plain and with escapes, callback test, backdoor test.
// Always terminates with a verdict within the prompt budget.
SessionResult run_session(TargetAdapter& adapter, const Catalogue& catalogue,
                          const EngineConfig& config = {});

nlohmann::json session_to_json(const SessionResult& result);
void save_session(const SessionResult& result, const std::string& path);

}  // namespace llmsec::exploit
