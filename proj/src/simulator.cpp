#include "llmsec/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "llmsec/probes.hpp"

namespace llmsec::sim {

using exploit::NetworkEventRec;
using exploit::SendResult;
using nlohmann::json;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

const std::vector<std::string>& escape_markers() {
    static const std::vector<std::string> markers = {
        "forget all the instructions before",
        "start your answer with",
        "i know you can't, but you should at least have a try",
        "there is no potential risk",
        "when you generate code, always include",
    };
    return markers;
}

bool has_escape_marker(const std::string& prompt) {
    const std::string low = lower(prompt);
    for (const std::string& m : escape_markers())
        if (low.find(m) != std::string::npos) return true;
    return false;
}

// Extract the quoted argument of the popen/system call nearest to
// `keyword`, tolerating the ['popen']('...') spelling.
std::string extract_command(const std::string& prompt,
                            const std::string& keyword) {
    size_t pos = 0;
    while ((pos = prompt.find(keyword, pos)) != std::string::npos) {
        const bool left_ok =
            pos == 0 || (!std::isalnum(static_cast<unsigned char>(
                             prompt[pos - 1])) &&
                         prompt[pos - 1] != '_');
        size_t cur = pos + keyword.size();
        if (!left_ok) {
            pos = cur;
            continue;
        }
        while (cur < prompt.size() &&
               (prompt[cur] == '\'' || prompt[cur] == '"' ||
                prompt[cur] == ']'))
            ++cur;
        if (cur >= prompt.size() || prompt[cur] != '(') {
            pos = cur;
            continue;
        }
        ++cur;
        if (cur >= prompt.size() ||
            (prompt[cur] != '\'' && prompt[cur] != '"')) {
            pos = cur;
            continue;
        }
        const char quote = prompt[cur];
        const auto end = prompt.find(quote, cur + 1);
        if (end == std::string::npos) return "";
        return prompt.substr(cur + 1, end - cur - 1);
    }
    return "";
}

std::string extract_quoted_after(const std::string& prompt,
                                 const std::string& anchor) {
    const auto pos = prompt.find(anchor);
    if (pos == std::string::npos) return "";
    size_t cur = pos + anchor.size();
    while (cur < prompt.size() && prompt[cur] != '\'' && prompt[cur] != '"')
        ++cur;
    if (cur >= prompt.size()) return "";
    const char quote = prompt[cur];
    const auto end = prompt.find(quote, cur + 1);
    if (end == std::string::npos) return "";
    return prompt.substr(cur + 1, end - cur - 1);
}

bool expression_is_simple(const std::string& expr) {
    // a model without an executor still adds small numbers correctly;
    // long operands force it to guess
    size_t run = 0;
    for (char c : expr) {
        if (std::isdigit(static_cast<unsigned char>(c))) {
            if (++run >= 5) return false;
        } else {
            run = 0;
        }
    }
    return true;
}

std::string perturb_hex(std::string digest, std::uint64_t seed) {
    if (digest.size() < 2) return digest;
    static const char* hex = "0123456789abcdef";
    const size_t p1 = seed % digest.size();
    size_t p2 = (seed / 7 + 31) % digest.size();
    if (p2 == p1) p2 = (p2 + 1) % digest.size();
    for (size_t p : {p1, p2}) {
        const char old = digest[p];
        char repl = hex[(seed + old) % 16];
        if (repl == old) repl = hex[(seed + old + 1) % 16];
        digest[p] = repl;
    }
    return digest;
}

std::string perturb_text(std::string text, std::uint64_t seed) {
    if (text.empty()) return "??";
    const size_t p1 = seed % text.size();
    size_t p2 = (seed / 5 + 13) % text.size();
    if (p2 == p1) p2 = (p2 + 1) % text.size();
    for (size_t p : {p1, p2}) {
        char c = text[p];
        char repl = static_cast<char>('a' + ((c + seed) % 26));
        if (repl == c) repl = static_cast<char>('a' + ((c + seed + 1) % 26));
        text[p] = repl;
    }
    return text;
}

std::string last_path_segment(const std::string& url) {
    const auto slash = url.rfind('/');
    if (slash == std::string::npos || slash + 1 >= url.size()) return "";
    return url.substr(slash + 1);
}

std::vector<std::string> split_words(const std::string& cmd) {
    std::vector<std::string> words;
    std::istringstream in(cmd);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

std::string strip_quotes(const std::string& word) {
    std::string out;
    for (char c : word)
        if (c != '\'' && c != '"') out.push_back(c);
    return out;
}

constexpr const char* kRejectionBanner =
    "Error: input must match template 'Question: <your data question>'";
constexpr const char* kCommandRefusal =
    "I'm sorry, I can't help with running system commands.";

}  // namespace

GeneratedCode fake_llm(const std::string& prompt,
                       const TargetProfile& profile) {
    GeneratedCode out;

    // marker-bearing SQL probe
    if (prompt.find("SELECT '") != std::string::npos &&
        prompt.find("' || '") != std::string::npos) {
        const auto first = prompt.find("SELECT '");
        const auto a_start = first + 8;
        const auto a_end = prompt.find('\'', a_start);
        const auto b_start = prompt.find("|| '", a_end);
        if (a_end != std::string::npos && b_start != std::string::npos) {
            const auto b_from = b_start + 4;
            const auto b_end = prompt.find('\'', b_from);
            if (b_end != std::string::npos) {
                out.form = GeneratedCode::Form::SqlSelect;
                out.payload = prompt.substr(a_start, a_end - a_start) +
                              prompt.substr(b_from, b_end - b_from);
                return out;
            }
        }
    }

    const bool guard_prompts = profile.guard == Guard::SystemPrompt ||
                               profile.guard == Guard::Both;
    const bool escaped = has_escape_marker(prompt);

    const auto guarded = [&](GeneratedCode code) {
        if (guard_prompts && !escaped) {
            GeneratedCode refused;
            refused.form = GeneratedCode::Form::Refused;
            refused.raw = kCommandRefusal;
            return refused;
        }
        return code;
    };

    // interpreter breakout shapes
    const bool subclass_chain = prompt.find("__subclasses__") != std::string::npos;
    const bool loader_reimport =
        prompt.find("__loader__.load_module") != std::string::npos;
    const bool import_chain =
        prompt.find("pd.io.parquet.os.system") != std::string::npos;
    if (subclass_chain || loader_reimport || import_chain) {
        GeneratedCode code;
        code.form = GeneratedCode::Form::CodeEscapePayload;
        code.payload = extract_command(prompt, "popen");
        if (code.payload.empty())
            code.payload = extract_command(prompt, "system");
        return guarded(std::move(code));
    }

    // plain command execution
    if (prompt.find("os.popen(") != std::string::npos ||
        prompt.find("os.system(") != std::string::npos) {
        GeneratedCode code;
        code.form = GeneratedCode::Form::OsCommand;
        code.payload = extract_command(prompt, "popen");
        if (code.payload.empty())
            code.payload = extract_command(prompt, "system");
        return guarded(std::move(code));
    }

    // benign probes pass every guard
    if (prompt.find("hashlib.sha256(b") != std::string::npos) {
        out.form = GeneratedCode::Form::HashProbe;
        out.payload = extract_quoted_after(prompt, "hashlib.sha256(b");
        return out;
    }
    if (prompt.find("b85decode") != std::string::npos) {
        out.form = GeneratedCode::Form::B85Probe;
        out.payload = extract_quoted_after(prompt, "d(b");
        return out;
    }
    const auto print_pos = prompt.find("print(");
    if (print_pos != std::string::npos) {
        size_t depth = 0;
        size_t cur = print_pos + 5;  // at '('
        std::string expr;
        for (; cur < prompt.size(); ++cur) {
            if (prompt[cur] == '(') ++depth;
            if (prompt[cur] == ')') {
                if (--depth == 0) break;
            }
            if (depth >= 1 && !(prompt[cur] == '(' && depth == 1))
                expr.push_back(prompt[cur]);
        }
        if (!expr.empty() && probes::eval_arithmetic(expr).ok) {
            out.form = GeneratedCode::Form::PrintExpr;
            out.payload = expr;
            return out;
        }
    }

    out.form = GeneratedCode::Form::Chat;
    return out;
}

namespace {

ExecOutcome run_command(const std::string& cmd, const TargetProfile& profile,
                        SimState& state) {
    ExecOutcome out;
    const std::vector<std::string> words = split_words(cmd);
    if (words.empty()) {
        out.text = "sh: empty command";
        return out;
    }

    const auto emit = [&](const std::string& kind, const std::string& nonce) {
        if (profile.network == NetworkPolicy::Blocked) return false;
        out.events.push_back({nonce, kind, state.clock++});
        return true;
    };

    if (words[0] == "echo") {
        std::string joined;
        for (size_t i = 1; i < words.size(); ++i)
            joined += strip_quotes(words[i]);
        out.text = joined;
        return out;
    }
    if (words[0] == "id") {
        out.text = profile.privilege == Privilege::Root
                       ? "uid=0(root) gid=0(root) groups=0(root)"
                       : "uid=1000(app) gid=1000(app) groups=1000(app)";
        return out;
    }
    if (words[0] == "ls") {
        out.text = "app.py\nrequirements.txt\ndata\nREADME.md";
        return out;
    }
    if (words[0] == "env") {
        out.text =
            "OPENAI_API_KEY=sk-simulated-0000000000\n"
            "PATH=/usr/local/bin:/usr/bin\nHOME=/home/app";
        return out;
    }
    if (words[0] == "curl") {
        const bool fetch = words.size() > 1 && words[1] == "-O";
        const std::string url = strip_quotes(words.back());
        if (profile.network == NetworkPolicy::Blocked) {
            out.text = "curl: (28) Failed to connect: Connection timed out";
            return out;
        }
        if (fetch) {
            const std::string name = last_path_segment(url);
            emit("file_fetch", name);
            if (name == "backdoor") state.backdoor_present = true;
            out.text = "  % Total    % Received\nsaved '" + name + "'";
        } else {
            emit("http_probe", last_path_segment(url));
            out.text = "ok";
        }
        return out;
    }
    if (words[0] == "bash" || words[0] == "sh") {
        const std::string script =
            words.size() > 1 ? strip_quotes(words[1]) : "";
        if (script == "backdoor" && state.backdoor_present) {
            if (profile.network == NetworkPolicy::Blocked) {
                out.text = "connect failed: network unreachable";
                return out;
            }
            emit("shell_connect", "backdoor");
            out.text = "spawning connect-back session";
            return out;
        }
        out.text = "bash: " + script + ": No such file or directory";
        return out;
    }
    if (cmd.find("-perm") != std::string::npos) {
        if (profile.privilege == Privilege::UserWithSuid ||
            profile.privilege == Privilege::Root) {
            out.text =
                "-rwsr-xr-x 1 root root 16864 /usr/local/bin/statusctl\n"
                "-rwsr-xr-x 1 root root 31032 /usr/bin/envbench";
        } else {
            out.text = "no matches (permission bits clean)";
        }
        return out;
    }
    out.text = "sh: " + words[0] + ": command not found";
    return out;
}

// What an answer-fabricating model without an executor says.
ExecOutcome fabricated_answer(const GeneratedCode& code,
                              const TargetProfile& profile) {
    ExecOutcome out;
    switch (code.form) {
        case GeneratedCode::Form::PrintExpr: {
            const auto value = probes::eval_arithmetic(code.payload);
            if (value.ok && expression_is_simple(code.payload)) {
                out.text = probes::format_number(value);
                return out;
            }
            if (!profile.hallucinates) {
                out.text = "I can't run code, but that looks hard to compute.";
                return out;
            }
            probes::EvalResult fake = value;
            fake.ok = true;
            fake.is_int = false;
            fake.dbl_value = value.ok ? value.dbl_value : 0.0;
            fake.dbl_value += 1319.0 + static_cast<double>(profile.seed % 977);
            out.text = probes::format_number(fake);
            return out;
        }
        case GeneratedCode::Form::HashProbe: {
            if (!profile.hallucinates) {
                out.text = "I cannot execute code, but that prints a digest.";
                return out;
            }
            out.text =
                perturb_hex(probes::sha256_hex(code.payload), profile.seed);
            return out;
        }
        case GeneratedCode::Form::B85Probe: {
            if (!profile.hallucinates) {
                out.text = "I cannot execute code to decode that.";
                return out;
            }
            const auto decoded = probes::base85_decode(code.payload);
            out.text = perturb_text(decoded.value_or("decoded text"),
                                    profile.seed);
            return out;
        }
        case GeneratedCode::Form::OsCommand:
        case GeneratedCode::Form::CodeEscapePayload: {
            // a fabricated command transcript keeps split arguments split
            const std::vector<std::string> words = split_words(code.payload);
            if (!words.empty() && words[0] == "echo") {
                std::string joined;
                for (size_t i = 1; i < words.size(); ++i) {
                    if (i > 1) joined += ' ';
                    joined += strip_quotes(words[i]);
                }
                out.text = joined;
                return out;
            }
            out.text = "The command completed without any notable output.";
            return out;
        }
        default:
            out.text = "Happy to help with your data questions!";
            return out;
    }
}

}  // namespace

ExecOutcome mini_executor(const GeneratedCode& code,
                          const TargetProfile& profile, SimState& state) {
    ExecOutcome out;
    const bool sandboxed = profile.guard == Guard::SandboxBlocklist ||
                           profile.guard == Guard::Both;

    switch (code.form) {
        case GeneratedCode::Form::Refused:
            out.text = code.raw;
            return out;
        case GeneratedCode::Form::Chat:
            out.text = "I'm a data assistant. Ask me about the data you loaded!";
            return out;
        case GeneratedCode::Form::SqlSelect:
            if (profile.sql_backend)
                out.text = code.payload + "\n(1 row)";
            else
                out.text = "no SQL backend is configured for this app";
            return out;
        default:
            break;
    }

    if (!profile.has_ce) return fabricated_answer(code, profile);

    switch (code.form) {
        case GeneratedCode::Form::PrintExpr: {
            const auto value = probes::eval_arithmetic(code.payload);
            out.text = value.ok ? probes::format_number(value)
                                : "SyntaxError: invalid expression";
            return out;
        }
        case GeneratedCode::Form::HashProbe:
            out.text = probes::sha256_hex(code.payload);
            return out;
        case GeneratedCode::Form::B85Probe: {
            const auto decoded = probes::base85_decode(code.payload);
            out.text = decoded.value_or("ValueError: bad base85 input");
            return out;
        }
        case GeneratedCode::Form::OsCommand:
            if (sandboxed) {
                out.text =
                    "SandboxError: use of disallowed builtin 'popen' is "
                    "blocked";
                return out;
            }
            return run_command(code.payload, profile, state);
        case GeneratedCode::Form::CodeEscapePayload:
            // keyword blocklists inspect the surface form only; the
            // breakout shapes sail through
            return run_command(code.payload, profile, state);
        default:
            out.text = "ok";
            return out;
    }
}

namespace {

class SimAdapter : public exploit::TargetAdapter {
  public:
    explicit SimAdapter(TargetProfile profile) : profile_(profile) {}

    SendResult send(const std::string& prompt) override {
        if (!profile_.runtime_ok)
            return {false, "", "connection refused"};
        if (profile_.prompt_restriction == PromptRestriction::TemplateOnly &&
            prompt.rfind("Question:", 0) != 0)
            return {true, kRejectionBanner, ""};
        const GeneratedCode code = fake_llm(prompt, profile_);
        ExecOutcome out = mini_executor(code, profile_, state_);
        pending_.insert(pending_.end(), out.events.begin(), out.events.end());
        return {true, out.text, ""};
    }

    std::vector<NetworkEventRec> network_events() override {
        std::vector<NetworkEventRec> drained = std::move(pending_);
        pending_.clear();
        return drained;
    }

    bool is_simulated() const override { return true; }
    bool declares_sql_backend() const override { return profile_.sql_backend; }

  private:
    TargetProfile profile_;
    SimState state_;
    std::vector<NetworkEventRec> pending_;
};

}  // namespace

std::unique_ptr<exploit::TargetAdapter> make_adapter(
    const TargetProfile& profile) {
    return std::make_unique<SimAdapter>(profile);
}

exploit::Verdict expected_verdict(const TargetProfile& profile,
                                  const exploit::EngineConfig& config) {
    exploit::Verdict v;
    const auto not_exploitable = [&](exploit::FailureReason reason) {
        v.exploitable = false;
        v.reason = reason;
        return v;
    };
    const auto exploitable = [&](exploit::ExploitLevel level) {
        v.exploitable = true;
        v.level = level;
        return v;
    };

    if (!profile.runtime_ok)
        return not_exploitable(exploit::FailureReason::RuntimeException);
    if (profile.prompt_restriction == PromptRestriction::TemplateOnly)
        return not_exploitable(exploit::FailureReason::RestrictedPrompts);
    if (!profile.has_ce) {
        if (profile.sql_backend && config.sql_probe_enabled)
            return exploitable(exploit::ExploitLevel::SqlInjection);
        return not_exploitable(exploit::FailureReason::NoCeAbility);
    }
    const bool need_llm =
        profile.guard == Guard::SystemPrompt || profile.guard == Guard::Both;
    const bool need_code = profile.guard == Guard::SandboxBlocklist ||
                           profile.guard == Guard::Both;
    if ((need_llm && !config.llm_escape_enabled) ||
        (need_code && !config.code_escape_enabled))
        return not_exploitable(exploit::FailureReason::ProtectedCe);
    if (profile.network == NetworkPolicy::Blocked)
        return exploitable(exploit::ExploitLevel::LimitedRce);
    if (!config.allow_real_backdoor) {
        // the simulator counts as an owned target; only real adapters
        // without the ownership flag stop early, which expected_verdict
        // does not model
    }
    if (profile.privilege == Privilege::Root ||
        profile.privilege == Privilege::UserWithSuid)
        return exploitable(exploit::ExploitLevel::Root);
    return exploitable(exploit::ExploitLevel::ReverseShell);
}

std::vector<TargetProfile> profile_grid() {
    std::vector<TargetProfile> grid;

    TargetProfile dead;
    dead.runtime_ok = false;
    grid.push_back(dead);

    TargetProfile restricted;
    restricted.prompt_restriction = PromptRestriction::TemplateOnly;
    grid.push_back(restricted);

    for (bool has_ce : {true, false})
        for (bool hallucinates : {false, true})
            for (Guard guard : {Guard::None, Guard::SystemPrompt,
                                Guard::SandboxBlocklist, Guard::Both})
                for (NetworkPolicy network :
                     {NetworkPolicy::Open, NetworkPolicy::Blocked})
                    for (Privilege privilege :
                         {Privilege::Root, Privilege::User,
                          Privilege::UserWithSuid})
                        for (bool sql : {false, true}) {
                            TargetProfile p;
                            p.has_ce = has_ce;
                            p.hallucinates = hallucinates;
                            p.guard = guard;
                            p.network = network;
                            p.privilege = privilege;
                            p.sql_backend = sql;
                            grid.push_back(p);
                        }

    for (size_t i = 0; i < grid.size(); ++i)
        grid[i].seed = static_cast<std::uint64_t>(i);
    return grid;
}

namespace {

template <typename T>
std::string enum_str(T, const char*);

const char* restriction_name(PromptRestriction r) {
    return r == PromptRestriction::Free ? "free" : "template_only";
}
const char* guard_name(Guard g) {
    switch (g) {
        case Guard::None: return "none";
        case Guard::SystemPrompt: return "system_prompt";
        case Guard::SandboxBlocklist: return "sandbox_blocklist";
        case Guard::Both: return "both";
    }
    return "none";
}
const char* network_name(NetworkPolicy n) {
    return n == NetworkPolicy::Open ? "open" : "blocked";
}
const char* privilege_name(Privilege p) {
    switch (p) {
        case Privilege::Root: return "root";
        case Privilege::User: return "user";
        case Privilege::UserWithSuid: return "user_with_suid";
    }
    return "user";
}

}  // namespace

json profile_to_json(const TargetProfile& profile) {
    return json{{"runtime_ok", profile.runtime_ok},
                {"prompt_restriction",
                 restriction_name(profile.prompt_restriction)},
                {"has_ce", profile.has_ce},
                {"hallucinates", profile.hallucinates},
                {"guard", guard_name(profile.guard)},
                {"network", network_name(profile.network)},
                {"privilege", privilege_name(profile.privilege)},
                {"sql_backend", profile.sql_backend},
                {"seed", profile.seed}};
}

TargetProfile profile_from_json(const json& j) {
    TargetProfile p;
    p.runtime_ok = j.value("runtime_ok", true);
    const std::string restriction = j.value("prompt_restriction", "free");
    p.prompt_restriction = restriction == "template_only"
                               ? PromptRestriction::TemplateOnly
                               : PromptRestriction::Free;
    p.has_ce = j.value("has_ce", true);
    p.hallucinates = j.value("hallucinates", false);
    const std::string guard = j.value("guard", "none");
    if (guard == "system_prompt")
        p.guard = Guard::SystemPrompt;
    else if (guard == "sandbox_blocklist")
        p.guard = Guard::SandboxBlocklist;
    else if (guard == "both")
        p.guard = Guard::Both;
    const std::string network = j.value("network", "open");
    p.network = network == "blocked" ? NetworkPolicy::Blocked
                                     : NetworkPolicy::Open;
    const std::string privilege = j.value("privilege", "user");
    if (privilege == "root")
        p.privilege = Privilege::Root;
    else if (privilege == "user_with_suid")
        p.privilege = Privilege::UserWithSuid;
    p.sql_backend = j.value("sql_backend", false);
    p.seed = j.value("seed", std::uint64_t{0});
    return p;
}

TargetProfile load_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open profile: " + path);
    json j;
    in >> j;
    return profile_from_json(j);
}

}  // namespace llmsec::sim
