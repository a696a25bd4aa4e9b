#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace llmsec::collector {

struct RepoRecord {
    std::string repo_name;
    std::string owner;
    std::string description;
    std::string readme_text;
    // path -> contents for the files shipped with the snapshot
    std::vector<std::pair<std::string, std::string>> files;
    std::string origin;  // "local-dir" or "metadata-feed"
};

enum class UrlVerdict { Unset, Kept, Discarded };
enum class DnsStatus { Unchecked, Live, Dead };

struct UrlCandidate {
    std::string url;           // normalized absolute URL
    std::string source_field;  // "readme" or "description"
    std::string repo_name;     // repo the URL was extracted from
    UrlVerdict verdict = UrlVerdict::Unset;
    std::string rule_id;       // R1..R4 when discarded
    DnsStatus dns_status = DnsStatus::Unchecked;

    friend bool operator==(const UrlCandidate&, const UrlCandidate&) = default;
};

struct FilterRuleset {
    std::set<std::string> file_extensions;
    std::set<std::string> social_terms;
    std::set<std::string> framework_repo_names;
    std::set<std::string> host_allowlist;

    static FilterRuleset defaults();
};

struct UsageHit {
    std::string path;
    std::string api_name;
    int line = 0;
    bool comment = false;

    friend bool operator==(const UsageHit&, const UsageHit&) = default;
};

// The entry points known to reach code execution in popular frameworks;
// used as search fingerprints over repository snapshots.
const std::vector<std::string>& default_api_names();

// Identifier-boundary matches over source files. Hits on comment lines
// are reported but flagged.
std::vector<UsageHit> match_vulnerable_usage(
    const RepoRecord& repo, const std::vector<std::string>& api_names);

// Scheme-qualified http(s) URLs with trailing punctuation stripped,
// deduplicated preserving first occurrence. Verdicts are left unset.
std::vector<UrlCandidate> extract_urls(const std::string& text,
                                       const std::string& source_field = "readme",
                                       const std::string& repo_name = "");

// Apply the discard rules in order R1..R4, first match wins:
//   R1 file-pointer URLs, R2 social-network terms, R3 candidates from a
//   framework repository, R4 hosts outside the allowlist.
// Idempotent; candidates already carrying a verdict pass through.
std::vector<UrlCandidate> filter_urls(std::vector<UrlCandidate> candidates,
                                      const FilterRuleset& rules);

class Resolver {
  public:
    enum class Outcome { Live, Dead, Timeout };
    virtual ~Resolver() = default;
    virtual Outcome resolve(const std::string& host) = 0;
};

// Table-backed resolver for offline runs and tests.
class StubResolver : public Resolver {
  public:
    explicit StubResolver(std::map<std::string, bool> table)
        : table_(std::move(table)) {}
    Outcome resolve(const std::string& host) override {
        const auto it = table_.find(host);
        if (it == table_.end()) return Outcome::Dead;
        return it->second ? Outcome::Live : Outcome::Dead;
    }

  private:
    std::map<std::string, bool> table_;
};

// getaddrinfo-backed resolver for live runs.
class SystemResolver : public Resolver {
  public:
    Outcome resolve(const std::string& host) override;
};

UrlCandidate dns_precheck(UrlCandidate candidate, Resolver& resolver);

// Optional external refinement stage (e.g. an LLM-based clusterer);
// receives the ranked keywords and returns the refined list.
using KeywordRefiner =
    std::function<std::vector<std::string>(const std::vector<std::string>&)>;

// Case-folded term frequency over the descriptions, stopwords removed,
// top_n returned in descending frequency (ties alphabetical).
std::vector<std::string> keyword_seed(
    const std::vector<std::string>& descriptions, size_t top_n = 10,
    const KeywordRefiner& refiner = nullptr);

std::string host_of(const std::string& url);

// Feed I/O: one JSON object per line, fields mirroring RepoRecord.
std::vector<RepoRecord> load_repo_feed(const std::string& path);
std::vector<RepoRecord> load_repo_dir(const std::string& root);

nlohmann::json candidate_to_json(const UrlCandidate& c);
UrlCandidate candidate_from_json(const nlohmann::json& j);
FilterRuleset load_ruleset(const std::string& path);

}  // namespace llmsec::collector
