#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "llmsec/collector.hpp"
#include "llmsec/exploit_engine.hpp"
#include "llmsec/http_adapter.hpp"
#include "llmsec/report.hpp"
#include "llmsec/simulator.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitError = 2;

void print_metrics(const llmsec::ChainMetrics& m) {
    std::cout << "complete chains: " << m.count << "\n";
    std::cout << "chain length   sum=" << m.length_sum << " max=" << m.length_max
              << " avg=" << m.length_avg << "\n";
    std::cout << "files per chain sum=" << m.files_sum << " max=" << m.files_max
              << " avg=" << m.files_avg << "\n";
}

int run_scan(const std::string& root, const std::string& config_path,
             const std::string& manifest_path, const std::string& out_path,
             const std::string& name, const std::string& version) {
    llmsec::ScanConfig config;
    if (!config_path.empty()) config = llmsec::load_scan_config(config_path);
    if (!root.empty()) config.target_root = root;
    if (!manifest_path.empty())
        config.manifest = llmsec::load_manifest(manifest_path);
    if (!name.empty()) config.framework_name = name;
    if (!version.empty()) config.version_string = version;
    if (!out_path.empty()) config.report_path = out_path;

    const llmsec::ScanReport report = llmsec::scan_package(config);
    if (!config.report_path.empty())
        llmsec::save_report(report, config.report_path);
    else
        std::cout << llmsec::report_to_json(report).dump(2) << "\n";

    std::cout << report.framework_name << ": " << report.chains.size()
              << " chains, " << report.user_apis.size() << " user APIs, "
              << report.candidates.size() << " candidates ("
              << report.timing_seconds << "s)\n";
    return kExitOk;
}

int run_metrics(const std::string& report_path) {
    const llmsec::ScanReport report = llmsec::load_report(report_path);
    print_metrics(report.metrics);
    return kExitOk;
}

int run_diff(const std::string& old_path, const std::string& new_path) {
    const llmsec::ScanReport old_report = llmsec::load_report(old_path);
    const llmsec::ScanReport new_report = llmsec::load_report(new_path);
    const llmsec::ReportDiff diff = llmsec::diff_reports(old_report, new_report);
    json j;
    j["added"] = json::array();
    j["removed"] = json::array();
    for (const auto& c : diff.added) j["added"].push_back(llmsec::chain_to_json(c));
    for (const auto& c : diff.removed)
        j["removed"].push_back(llmsec::chain_to_json(c));
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int run_collect(const std::string& repos, const std::string& apis_path,
                const std::string& rules_path, const std::string& out_path,
                bool dns) {
    namespace col = llmsec::collector;

    std::vector<col::RepoRecord> records;
    if (std::filesystem::is_directory(repos))
        records = col::load_repo_dir(repos);
    else
        records = col::load_repo_feed(repos);

    std::vector<std::string> apis = col::default_api_names();
    if (!apis_path.empty()) {
        std::ifstream in(apis_path);
        if (!in) throw std::runtime_error("cannot open api list: " + apis_path);
        apis.clear();
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line[0] != '#') apis.push_back(line);
        }
    }
    col::FilterRuleset rules = rules_path.empty()
                                   ? col::FilterRuleset::defaults()
                                   : col::load_ruleset(rules_path);

    std::vector<col::UrlCandidate> candidates;
    int matched_repos = 0;
    for (const col::RepoRecord& repo : records) {
        const auto hits = col::match_vulnerable_usage(repo, apis);
        if (hits.empty()) continue;
        ++matched_repos;
        auto readme = col::extract_urls(repo.readme_text, "readme",
                                        repo.repo_name);
        auto desc = col::extract_urls(repo.description, "description",
                                      repo.repo_name);
        candidates.insert(candidates.end(), readme.begin(), readme.end());
        candidates.insert(candidates.end(), desc.begin(), desc.end());
    }
    candidates = col::filter_urls(std::move(candidates), rules);

    if (dns) {
        col::SystemResolver resolver;
        for (auto& c : candidates)
            if (c.verdict == col::UrlVerdict::Kept)
                c = col::dns_precheck(std::move(c), resolver);
    }

    json out = json::array();
    int kept = 0;
    for (const auto& c : candidates) {
        if (c.verdict == col::UrlVerdict::Kept) ++kept;
        out.push_back(col::candidate_to_json(c));
    }
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw std::runtime_error("cannot write: " + out_path);
        f << out.dump(2) << "\n";
    } else {
        std::cout << out.dump(2) << "\n";
    }
    std::cout << matched_repos << " repos matched, " << candidates.size()
              << " URL candidates, " << kept << " kept\n";
    return kExitOk;
}

int run_exploit(const std::string& adapter_kind, const std::string& profile_path,
                const std::string& url, const std::string& catalogue_path,
                const std::string& out_path, std::uint64_t seed, int budget,
                bool no_llm, bool no_code, bool sql, bool own_target,
                const std::string& listen, const std::string& prompt_field) {
    namespace ex = llmsec::exploit;

    ex::Catalogue catalogue = catalogue_path.empty()
                                  ? ex::default_catalogue()
                                  : ex::load_catalogue(catalogue_path);
    ex::EngineConfig config;
    config.seed = seed;
    config.budget = budget;
    config.llm_escape_enabled = !no_llm;
    config.code_escape_enabled = !no_code;
    config.sql_probe_enabled = sql;
    config.allow_real_backdoor = own_target;

    std::unique_ptr<ex::TargetAdapter> adapter;
    if (adapter_kind == "sim") {
        if (profile_path.empty()) {
            std::cerr << "exploit --adapter sim requires --profile\n";
            return kExitUsage;
        }
        adapter = llmsec::sim::make_adapter(llmsec::sim::load_profile(profile_path));
    } else if (adapter_kind == "http") {
        if (url.empty()) {
            std::cerr << "exploit --adapter http requires --url\n";
            return kExitUsage;
        }
        ex::HttpAdapterConfig http;
        http.url = url;
        http.prompt_field = prompt_field;
        http.declares_sql = sql;
        if (!listen.empty()) {
            const auto colon = listen.rfind(':');
            if (colon == std::string::npos) {
                std::cerr << "--listen expects host:port\n";
                return kExitUsage;
            }
            http.listen_host = listen.substr(0, colon);
            http.listen_port = std::stoi(listen.substr(colon + 1));
        }
        auto http_adapter = std::make_unique<ex::HttpAdapter>(http);
        config.attacker_ip = http.listen_host;
        config.attacker_port = std::to_string(http_adapter->listener_port());
        adapter = std::move(http_adapter);
    } else {
        std::cerr << "unknown adapter: " << adapter_kind << "\n";
        return kExitUsage;
    }

    const ex::SessionResult result = ex::run_session(*adapter, catalogue, config);
    if (!out_path.empty()) ex::save_session(result, out_path);

    std::cout << "verdict: " << ex::verdict_summary(result.verdict) << "\n";
    std::cout << "escape: " << ex::escape_mode_name(result.escape_used)
              << ", prompts: " << result.prompts_sent << "\n";
    return kExitOk;
}

int run_simulate(const std::string& profile_path, bool print_transcript) {
    namespace ex = llmsec::exploit;
    const auto profile = llmsec::sim::load_profile(profile_path);
    auto adapter = llmsec::sim::make_adapter(profile);
    const ex::SessionResult result =
        ex::run_session(*adapter, ex::default_catalogue(), {});
    if (print_transcript)
        std::cout << ex::session_to_json(result).dump(2) << "\n";
    std::cout << "expected: "
              << ex::verdict_summary(llmsec::sim::expected_verdict(profile))
              << "\n";
    std::cout << "observed: " << ex::verdict_summary(result.verdict) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"static call-chain scanner and prompt-injection test harness "
                 "for LLM-integrated frameworks and apps"};
    app.require_subcommand(1);

    // scan
    auto* scan = app.add_subcommand("scan", "extract sink-to-API call chains");
    std::string scan_root, scan_config, scan_manifest, scan_out, scan_name,
        scan_version;
    scan->add_option("--root", scan_root, "package root to analyze");
    scan->add_option("--config", scan_config, "scan config JSON");
    scan->add_option("--manifest", scan_manifest, "user-API manifest JSON");
    scan->add_option("--out", scan_out, "report output path");
    scan->add_option("--name", scan_name, "framework name for the report");
    scan->add_option("--version-string", scan_version, "analyzed version");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "print chain metrics");
    std::string metrics_path;
    metrics->add_option("report", metrics_path, "report JSON")->required();

    // diff
    auto* diff = app.add_subcommand("diff", "diff two reports by chain");
    std::string diff_old, diff_new;
    diff->add_option("old", diff_old, "old report")->required();
    diff->add_option("new", diff_new, "new report")->required();

    // collect
    auto* collect =
        app.add_subcommand("collect", "gather candidate app deployment URLs");
    std::string col_repos, col_apis, col_rules, col_out;
    bool col_dns = false;
    collect->add_option("--repos", col_repos, "repo dir or feed .jsonl")
        ->required();
    collect->add_option("--apis", col_apis, "API name list, one per line");
    collect->add_option("--rules", col_rules, "filter ruleset JSON");
    collect->add_option("--out", col_out, "candidate output path");
    collect->add_flag("--dns", col_dns, "resolve kept hosts");

    // exploit
    auto* exploit = app.add_subcommand(
        "exploit", "run the staged prompt-injection protocol");
    std::string ex_adapter = "sim", ex_profile, ex_url, ex_catalogue, ex_out,
                ex_listen, ex_field = "prompt";
    std::uint64_t ex_seed = 0;
    int ex_budget = 40;
    bool ex_no_llm = false, ex_no_code = false, ex_sql = true, ex_own = false;
    exploit->add_option("--adapter", ex_adapter, "sim or http");
    exploit->add_option("--profile", ex_profile, "simulator profile JSON");
    exploit->add_option("--url", ex_url, "target endpoint (http adapter)");
    exploit->add_option("--catalogue", ex_catalogue, "tactic catalogue JSON");
    exploit->add_option("--out", ex_out, "transcript output path");
    exploit->add_option("--seed", ex_seed, "nonce generator seed");
    exploit->add_option("--budget", ex_budget, "prompt budget");
    exploit->add_flag("--no-llm-escape", ex_no_llm, "disable LLM escapes");
    exploit->add_flag("--no-code-escape", ex_no_code, "disable code escapes");
    exploit->add_flag("--sql,!--no-sql", ex_sql, "enable the SQL probe");
    exploit->add_flag("--i-own-this-target", ex_own,
                      "allow the backdoor stage on a real target");
    exploit->add_option("--listen", ex_listen, "callback listener host:port");
    exploit->add_option("--prompt-field", ex_field, "request field name");

    // simulate
    auto* simulate =
        app.add_subcommand("simulate", "replay a session against a profile");
    std::string sim_profile;
    bool sim_transcript = false;
    simulate->add_option("--profile", sim_profile, "profile JSON")->required();
    simulate->add_flag("--transcript", sim_transcript, "print transcript");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (scan->parsed())
            return run_scan(scan_root, scan_config, scan_manifest, scan_out,
                            scan_name, scan_version);
        if (metrics->parsed()) return run_metrics(metrics_path);
        if (diff->parsed()) return run_diff(diff_old, diff_new);
        if (collect->parsed())
            return run_collect(col_repos, col_apis, col_rules, col_out, col_dns);
        if (exploit->parsed())
            return run_exploit(ex_adapter, ex_profile, ex_url, ex_catalogue,
                               ex_out, ex_seed, ex_budget, ex_no_llm,
                               ex_no_code, ex_sql, ex_own, ex_listen, ex_field);
        if (simulate->parsed()) return run_simulate(sim_profile, sim_transcript);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}
