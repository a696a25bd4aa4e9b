#include "llmsec/collector.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <netdb.h>
#include <sys/socket.h>

#include <nlohmann/json.hpp>

#include "llmsec/source_model.hpp"

namespace fs = std::filesystem;

namespace llmsec::collector {

using nlohmann::json;

const std::vector<std::string>& default_api_names() {
    static const std::vector<std::string> names = {
        "create_csv_agent",
        "create_pandas_dataframe_agent",
        "PALChain",
        "PandasAI",
        "create_spark_dataframe_agent",
        "PandasQueryEngine",
    };
    return names;
}

FilterRuleset FilterRuleset::defaults() {
    FilterRuleset r;
    r.file_extensions = {"png", "jpg", "jpeg", "gif", "svg", "pdf", "zip"};
    r.social_terms = {"twitter",  "tiktok",   "facebook", "discord",
                      "linkedin", "youtube",  "instagram"};
    r.framework_repo_names = {"langchain", "llamaindex", "pandas-ai",
                              "langflow",  "pandas-llm", "auto-gpt",
                              "griptape",  "lagent",     "metagpt",
                              "vanna",     "langroid"};
    r.host_allowlist = {"streamlit.app"};
    return r;
}

namespace {

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool is_source_path(const std::string& path) {
    return path.size() > 3 && path.compare(path.size() - 3, 3, ".py") == 0;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

std::vector<UsageHit> match_vulnerable_usage(
    const RepoRecord& repo, const std::vector<std::string>& api_names) {
    std::vector<UsageHit> hits;
    for (const auto& [path, content] : repo.files) {
        if (!is_source_path(path)) continue;
        std::istringstream in(content);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            for (const std::string& api : api_names) {
                size_t pos = 0;
                while ((pos = line.find(api, pos)) != std::string::npos) {
                    const bool left_ok =
                        pos == 0 || !is_ident_char(line[pos - 1]);
                    const size_t end = pos + api.size();
                    const bool right_ok =
                        end >= line.size() || !is_ident_char(line[end]);
                    if (left_ok && right_ok) {
                        hits.push_back({path, api, lineno,
                                        hash != std::string::npos && pos > hash});
                        break;  // one hit per api per line
                    }
                    pos = end;
                }
            }
        }
    }
    return hits;
}

std::string host_of(const std::string& url) {
    auto pos = url.find("://");
    if (pos == std::string::npos) return "";
    pos += 3;
    const auto end = url.find_first_of("/:?#", pos);
    return end == std::string::npos ? url.substr(pos)
                                    : url.substr(pos, end - pos);
}

namespace {

std::string normalize_url(std::string url) {
    // lowercase scheme and host, drop one trailing slash
    const auto scheme_end = url.find("://");
    if (scheme_end != std::string::npos) {
        const auto host_end = url.find_first_of("/:?#", scheme_end + 3);
        const size_t stop = host_end == std::string::npos ? url.size() : host_end;
        for (size_t i = 0; i < stop; ++i)
            url[i] = static_cast<char>(std::tolower(
                static_cast<unsigned char>(url[i])));
    }
    if (!url.empty() && url.back() == '/') url.pop_back();
    return url;
}

}  // namespace

std::vector<UrlCandidate> extract_urls(const std::string& text,
                                       const std::string& source_field,
                                       const std::string& repo_name) {
    static const std::string trailing = ".,;:!?*'\"`";
    std::vector<UrlCandidate> out;
    std::set<std::string> seen;

    size_t pos = 0;
    while (pos < text.size()) {
        size_t start = text.find("http", pos);
        if (start == std::string::npos) break;
        size_t scheme_len = 0;
        if (text.compare(start, 8, "https://") == 0)
            scheme_len = 8;
        else if (text.compare(start, 7, "http://") == 0)
            scheme_len = 7;
        if (scheme_len == 0) {
            pos = start + 4;
            continue;
        }
        size_t end = start + scheme_len;
        while (end < text.size()) {
            const char c = text[end];
            if (std::isspace(static_cast<unsigned char>(c)) || c == '<' ||
                c == '>' || c == '"' || c == '\'' || c == '(' || c == ')' ||
                c == '[' || c == ']' || c == '{' || c == '}' || c == '`')
                break;
            ++end;
        }
        std::string url = text.substr(start, end - start);
        while (!url.empty() && trailing.find(url.back()) != std::string::npos)
            url.pop_back();
        pos = end;
        if (url.size() <= scheme_len) continue;
        url = normalize_url(std::move(url));
        if (host_of(url).empty()) continue;
        if (!seen.insert(url).second) continue;
        UrlCandidate cand;
        cand.url = std::move(url);
        cand.source_field = source_field;
        cand.repo_name = repo_name;
        out.push_back(std::move(cand));
    }
    return out;
}

namespace {

std::string path_of(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return "";
    const auto slash = url.find('/', scheme_end + 3);
    if (slash == std::string::npos) return "";
    const auto stop = url.find_first_of("?#", slash);
    return stop == std::string::npos ? url.substr(slash)
                                     : url.substr(slash, stop - slash);
}

bool rule_file_pointer(const UrlCandidate& c, const FilterRuleset& rules) {
    const std::string path = lower(path_of(c.url));
    const auto dot = path.rfind('.');
    if (dot == std::string::npos) return false;
    const std::string ext = path.substr(dot + 1);
    return rules.file_extensions.count(ext) > 0;
}

bool rule_social_term(const UrlCandidate& c, const FilterRuleset& rules) {
    const std::string url = lower(c.url);
    for (const std::string& term : rules.social_terms)
        if (url.find(term) != std::string::npos) return true;
    return false;
}

bool rule_framework_repo(const UrlCandidate& c, const FilterRuleset& rules) {
    return rules.framework_repo_names.count(lower(c.repo_name)) > 0;
}

bool host_allowlisted(const std::string& host, const FilterRuleset& rules) {
    for (const std::string& allowed : rules.host_allowlist) {
        if (host == allowed) return true;
        if (host.size() > allowed.size() &&
            host.compare(host.size() - allowed.size(), allowed.size(),
                         allowed) == 0 &&
            host[host.size() - allowed.size() - 1] == '.')
            return true;
    }
    return false;
}

}  // namespace

std::vector<UrlCandidate> filter_urls(std::vector<UrlCandidate> candidates,
                                      const FilterRuleset& rules) {
    for (UrlCandidate& c : candidates) {
        if (c.verdict != UrlVerdict::Unset) continue;
        if (rule_file_pointer(c, rules)) {
            c.verdict = UrlVerdict::Discarded;
            c.rule_id = "R1";
        } else if (rule_social_term(c, rules)) {
            c.verdict = UrlVerdict::Discarded;
            c.rule_id = "R2";
        } else if (rule_framework_repo(c, rules)) {
            c.verdict = UrlVerdict::Discarded;
            c.rule_id = "R3";
        } else if (!host_allowlisted(lower(host_of(c.url)), rules)) {
            c.verdict = UrlVerdict::Discarded;
            c.rule_id = "R4";
        } else {
            c.verdict = UrlVerdict::Kept;
        }
    }
    return candidates;
}

Resolver::Outcome SystemResolver::resolve(const std::string& host) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const int rc = getaddrinfo(host.c_str(), nullptr, &hints, &result);
    if (result != nullptr) freeaddrinfo(result);
    if (rc == 0) return Outcome::Live;
    if (rc == EAI_AGAIN) return Outcome::Timeout;
    return Outcome::Dead;
}

UrlCandidate dns_precheck(UrlCandidate candidate, Resolver& resolver) {
    const std::string host = host_of(candidate.url);
    switch (resolver.resolve(host)) {
        case Resolver::Outcome::Live:
            candidate.dns_status = DnsStatus::Live;
            break;
        case Resolver::Outcome::Dead:
            candidate.dns_status = DnsStatus::Dead;
            break;
        case Resolver::Outcome::Timeout:
            candidate.dns_status = DnsStatus::Unchecked;
            break;
    }
    return candidate;
}

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "a",    "an",   "and",  "are",  "as",   "at",   "be",   "by",
        "for",  "from", "has",  "have", "in",   "into", "is",   "it",
        "its",  "of",   "on",   "or",   "that", "the",  "this", "to",
        "use",  "using", "with", "you",  "your", "via",  "our",  "can"};
    return words;
}

}  // namespace

std::vector<std::string> keyword_seed(
    const std::vector<std::string>& descriptions, size_t top_n,
    const KeywordRefiner& refiner) {
    std::map<std::string, int> freq;
    for (const std::string& desc : descriptions) {
        std::string token;
        const auto flush = [&]() {
            if (token.size() >= 2 && !stopwords().count(token)) ++freq[token];
            token.clear();
        };
        for (char ch : desc) {
            if (std::isalnum(static_cast<unsigned char>(ch)))
                token.push_back(static_cast<char>(
                    std::tolower(static_cast<unsigned char>(ch))));
            else
                flush();
        }
        flush();
    }

    std::vector<std::pair<std::string, int>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::string> out;
    for (const auto& [word, count] : ranked) {
        if (out.size() >= top_n) break;
        out.push_back(word);
    }
    if (refiner) return refiner(out);
    return out;
}

std::vector<RepoRecord> load_repo_feed(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feed: " + path);
    std::vector<RepoRecord> repos;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const json j = json::parse(line);
        RepoRecord r;
        r.repo_name = j.value("repo_name", "");
        r.owner = j.value("owner", "");
        r.description = j.value("description", "");
        r.readme_text = j.value("readme_text", "");
        if (j.contains("files")) {
            for (const auto& [k, v] : j.at("files").items())
                r.files.emplace_back(k, v.get<std::string>());
        }
        r.origin = "metadata-feed";
        repos.push_back(std::move(r));
    }
    return repos;
}

std::vector<RepoRecord> load_repo_dir(const std::string& root) {
    const fs::path base(root);
    if (!fs::is_directory(base))
        throw std::runtime_error("repo dir not found: " + root);
    std::vector<RepoRecord> repos;
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(base))
        if (entry.is_directory()) subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const fs::path& dir : subdirs) {
        RepoRecord r;
        r.repo_name = dir.filename().string();
        r.origin = "local-dir";
        for (const auto& entry : fs::recursive_directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            std::ifstream f(entry.path(), std::ios::binary);
            std::ostringstream ss;
            ss << f.rdbuf();
            const std::string rel =
                fs::relative(entry.path(), dir).generic_string();
            const std::string name = lower(entry.path().filename().string());
            if (name.rfind("readme", 0) == 0) r.readme_text += ss.str();
            if (name == "description.txt" || name == ".description")
                r.description += ss.str();
            r.files.emplace_back(rel, ss.str());
        }
        std::sort(r.files.begin(), r.files.end());
        repos.push_back(std::move(r));
    }
    return repos;
}

json candidate_to_json(const UrlCandidate& c) {
    json j;
    j["url"] = c.url;
    j["source_field"] = c.source_field;
    j["repo_name"] = c.repo_name;
    switch (c.verdict) {
        case UrlVerdict::Unset: j["verdict"] = "unset"; break;
        case UrlVerdict::Kept: j["verdict"] = "kept"; break;
        case UrlVerdict::Discarded: j["verdict"] = "discarded"; break;
    }
    if (c.verdict == UrlVerdict::Discarded) j["rule_id"] = c.rule_id;
    switch (c.dns_status) {
        case DnsStatus::Unchecked: j["dns_status"] = "unchecked"; break;
        case DnsStatus::Live: j["dns_status"] = "live"; break;
        case DnsStatus::Dead: j["dns_status"] = "dead"; break;
    }
    return j;
}

UrlCandidate candidate_from_json(const json& j) {
    UrlCandidate c;
    c.url = j.at("url").get<std::string>();
    c.source_field = j.value("source_field", "readme");
    c.repo_name = j.value("repo_name", "");
    const std::string verdict = j.value("verdict", "unset");
    if (verdict == "kept")
        c.verdict = UrlVerdict::Kept;
    else if (verdict == "discarded")
        c.verdict = UrlVerdict::Discarded;
    c.rule_id = j.value("rule_id", "");
    const std::string dns = j.value("dns_status", "unchecked");
    if (dns == "live")
        c.dns_status = DnsStatus::Live;
    else if (dns == "dead")
        c.dns_status = DnsStatus::Dead;
    return c;
}

FilterRuleset load_ruleset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ruleset: " + path);
    json j;
    in >> j;
    FilterRuleset r = FilterRuleset::defaults();
    const auto load_set = [&](const char* key, std::set<std::string>& dst) {
        if (!j.contains(key)) return;
        dst.clear();
        for (const auto& v : j.at(key)) dst.insert(lower(v.get<std::string>()));
    };
    load_set("file_extensions", r.file_extensions);
    load_set("social_terms", r.social_terms);
    load_set("framework_repo_names", r.framework_repo_names);
    load_set("host_allowlist", r.host_allowlist);
    return r;
}

}  // namespace llmsec::collector
