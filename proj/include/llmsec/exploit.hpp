#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace llmsec::exploit {

enum class Strategy {
    BasicUsage,
    Hallucination,
    RceNoEscape,
    RceLlmEscape,
    RceCodeEscape,
    Network,
    Backdoor,
    SqlProbe,
};

std::string strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(const std::string& name);

enum class EvidenceKind {
    ExactAnswer,
    Substring,
    NonceEcho,
    NetworkEvent,
    ShellBanner,
    UidProbe,
};

std::string evidence_kind_name(EvidenceKind k);

struct EvidenceSpec {
    EvidenceKind kind = EvidenceKind::Substring;
    // For nonce_echo the concatenated nonce is filled in per send; for
    // network_event this names the expected event kind.
    std::string expected;
};

// One reusable attack prompt. Placeholders: {cmd} {ip} {port} {code}
// {nonce_a} {nonce_b}. `command` carries the shell command the prompt
// induces so escape carriers can re-wrap it.
struct Tactic {
    std::string id;
    Strategy strategy = Strategy::BasicUsage;
    std::string template_text;
    std::string command;  // optional command template
    EvidenceSpec evidence;
};

class CatalogueError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Catalogue {
    std::vector<Tactic> tactics;

    std::vector<const Tactic*> by_strategy(Strategy s) const;
    const Tactic* find(const std::string& id) const;
    // Throws CatalogueError on unknown placeholders or missing evidence.
    void validate() const;
};

// The built-in catalogue: print/arithmetic basics, the three capability
// probes, plain command execution, instruction-override and persuasion
// wrappers, interpreter sandbox breakouts, the callback and backdoor
// steps, and a marker-bearing SQL probe.
Catalogue default_catalogue();

Catalogue load_catalogue(const std::string& path);
void save_catalogue(const Catalogue& catalogue, const std::string& path);
nlohmann::json catalogue_to_json(const Catalogue& catalogue);
Catalogue catalogue_from_json(const nlohmann::json& j);

// Pure placeholder substitution; throws CatalogueError when the template
// references a placeholder missing from params.
std::string render_prompt(const Tactic& tactic,
                          const std::map<std::string, std::string>& params);
std::string render_template(const std::string& template_text,
                            const std::map<std::string, std::string>& params);

enum class Classification { Pass, Fail, Indeterminate };

std::string classification_name(Classification c);

// Text-level evidence check. Exact answers compare trimmed strings and
// fall back to numeric comparison at 1e-9 relative tolerance. Empty
// responses are Indeterminate. Network-event evidence cannot be decided
// from text and classifies Fail here; the engine checks the event bus.
Classification classify_response(std::string_view response,
                                 const EvidenceSpec& evidence);

struct NetworkEventRec {
    std::string nonce;
    std::string kind;  // http_probe | file_fetch | shell_connect
    std::uint64_t timestamp = 0;
};

struct SendResult {
    bool ok = true;
    std::string text;
    std::string error;
};

// The target under test. send() is synchronous; network_events() drains
// callback records observed since the previous poll.
class TargetAdapter {
  public:
    virtual ~TargetAdapter() = default;
    virtual SendResult send(const std::string& prompt) = 0;
    virtual std::vector<NetworkEventRec> network_events() = 0;
    virtual bool is_simulated() const = 0;
    virtual bool declares_sql_backend() const { return false; }
};

}  // namespace llmsec::exploit
