#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "llmsec/exploit_engine.hpp"

namespace llmsec::sim {

enum class PromptRestriction { Free, TemplateOnly };
enum class Guard { None, SystemPrompt, SandboxBlocklist, Both };
enum class NetworkPolicy { Open, Blocked };
enum class Privilege { Root, User, UserWithSuid };

// Capability configuration of one simulated LLM-integrated app.
struct TargetProfile {
    bool runtime_ok = true;
    PromptRestriction prompt_restriction = PromptRestriction::Free;
    bool has_ce = true;
    bool hallucinates = false;
    Guard guard = Guard::None;
    NetworkPolicy network = NetworkPolicy::Open;
    Privilege privilege = Privilege::User;
    bool sql_backend = false;
    std::uint64_t seed = 0;

    friend bool operator==(const TargetProfile&,
                           const TargetProfile&) = default;
};

nlohmann::json profile_to_json(const TargetProfile& profile);
TargetProfile profile_from_json(const nlohmann::json& j);
TargetProfile load_profile(const std::string& path);

// What the fake model decided to hand to the executor.
struct GeneratedCode {
    enum class Form {
        PrintExpr,
        HashProbe,
        B85Probe,
        OsCommand,
        CodeEscapePayload,
        SqlSelect,
        Refused,
        Chat,
    };
    Form form = Form::Chat;
    std::string payload;  // expression, probe input, or extracted command
    std::string raw;      // refusal text when form == Refused
};

// Recognizes the catalogue's code shapes structurally. A system-prompt
// guard refuses command forms unless the prompt carries one of the
// instruction-override markers.
GeneratedCode fake_llm(const std::string& prompt, const TargetProfile& profile);

struct SimState {
    bool backdoor_present = false;
    std::uint64_t clock = 0;
};

struct ExecOutcome {
    std::string text;
    std::vector<exploit::NetworkEventRec> events;
};

// The code-effect model: real answers for the arithmetic/hash/base85
// probes via embedded evaluators, canned outputs for the known commands,
// callback-bus records instead of sockets. Never spawns a process,
// opens a socket, or touches the file system.
ExecOutcome mini_executor(const GeneratedCode& code,
                          const TargetProfile& profile, SimState& state);

std::unique_ptr<exploit::TargetAdapter> make_adapter(
    const TargetProfile& profile);

// Closed-form outcome for a profile under a given engine configuration;
// written directly from the capability dimensions, independent of the
// staged engine.
exploit::Verdict expected_verdict(const TargetProfile& profile,
                                  const exploit::EngineConfig& config = {});

// Every observably distinct profile: one dead-runtime row, one
// template-restricted row, and the full product of the remaining
// dimensions for free-prompt live targets.
std::vector<TargetProfile> profile_grid();

}  // namespace llmsec::sim
