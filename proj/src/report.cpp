#include "llmsec/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace llmsec {

using nlohmann::json;

std::string trigger_name(Trigger t) {
    switch (t) {
        case Trigger::Prompt: return "Prompt";
        case Trigger::ApiPost: return "ApiPost";
        case Trigger::LoadedFile: return "LoadedFile";
    }
    return "Prompt";
}

namespace {

Trigger trigger_from_name(const std::string& name) {
    if (name == "ApiPost") return Trigger::ApiPost;
    if (name == "LoadedFile") return Trigger::LoadedFile;
    return Trigger::Prompt;
}

Trigger classify_trigger(const FunctionRecord& fn) {
    static const std::set<std::string> file_params = {"file", "path", "json"};
    static const std::set<std::string> post_params = {"request", "payload",
                                                      "body"};
    for (const std::string& p : fn.params)
        if (user_input_lexicon().count(p)) return Trigger::Prompt;
    for (const std::string& p : fn.params)
        if (file_params.count(p)) return Trigger::LoadedFile;
    for (const std::string& p : fn.params)
        if (post_params.count(p)) return Trigger::ApiPost;
    return Trigger::Prompt;
}

std::string sink_display_name(const CallChain& chain) {
    if (chain.links.empty()) return "";
    const std::string& last = chain.links.back();
    constexpr std::string_view prefix = "sink:";
    if (last.rfind(prefix, 0) == 0) return last.substr(prefix.size());
    return last;
}

}  // namespace

ScanReport scan_package(const ScanConfig& config) {
    const auto start = std::chrono::steady_clock::now();

    ScanReport report;
    report.framework_name =
        config.framework_name.empty()
            ? std::filesystem::path(config.target_root).filename().string()
            : config.framework_name;
    report.version_string = config.version_string;

    if (config.target_root.empty())
        throw ReportError("scan config has no target root");
    if (config.sinks.empty())
        throw ReportError("scan config has no sinks");

    const ProgramIndex index =
        index_package(config.target_root, config.ignore_globs);

    for (const SinkSpec& sink : config.sinks) {
        auto chains =
            extract_chains(index, sink, config.manifest, config.limits);
        report.chains.insert(report.chains.end(),
                             std::make_move_iterator(chains.begin()),
                             std::make_move_iterator(chains.end()));
    }
    std::sort(report.chains.begin(), report.chains.end(),
              [](const CallChain& a, const CallChain& b) {
                  return a.links < b.links;
              });

    std::set<std::string> apis;
    std::set<std::pair<std::string, std::string>> pairs;
    for (const CallChain& c : report.chains) {
        if (!c.complete || c.links.empty()) continue;
        apis.insert(c.links.front());
        pairs.insert({c.links.front(), sink_display_name(c)});
    }
    report.user_apis.assign(apis.begin(), apis.end());
    for (const auto& [api, sink] : pairs) {
        Candidate cand{api, sink, Trigger::Prompt};
        const auto it = index.functions.find(api);
        if (it != index.functions.end())
            cand.trigger = classify_trigger(it->second);
        report.candidates.push_back(std::move(cand));
    }

    report.metrics = chain_metrics(report.chains);

    const auto elapsed = std::chrono::steady_clock::now() - start;
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    report.timing_seconds = std::max<double>(ms, 1) / 1000.0;
    return report;
}

ReportDiff diff_reports(const ScanReport& old_report,
                        const ScanReport& new_report) {
    if (old_report.framework_name != new_report.framework_name)
        throw ReportError("framework name mismatch: " +
                          old_report.framework_name + " vs " +
                          new_report.framework_name);

    const auto key = [](const CallChain& c) { return c.links; };
    std::set<std::vector<std::string>> old_keys, new_keys;
    for (const auto& c : old_report.chains) old_keys.insert(key(c));
    for (const auto& c : new_report.chains) new_keys.insert(key(c));

    ReportDiff diff;
    for (const auto& c : new_report.chains)
        if (!old_keys.count(key(c))) diff.added.push_back(c);
    for (const auto& c : old_report.chains)
        if (!new_keys.count(key(c))) diff.removed.push_back(c);
    return diff;
}

json chain_to_json(const CallChain& chain) {
    json j;
    j["links"] = chain.links;
    json kinds = json::array();
    for (LinkKind k : chain.link_kinds)
        kinds.push_back(k == LinkKind::Direct ? "direct" : "implicit");
    j["link_kinds"] = kinds;
    j["via_classes"] = chain.via_classes;
    j["files"] = chain.files;
    j["complete"] = chain.complete;
    return j;
}

CallChain chain_from_json(const json& j) {
    CallChain c;
    c.links = j.at("links").get<std::vector<std::string>>();
    for (const auto& k : j.at("link_kinds"))
        c.link_kinds.push_back(k.get<std::string>() == "implicit"
                                   ? LinkKind::Implicit
                                   : LinkKind::Direct);
    if (j.contains("via_classes"))
        c.via_classes = j.at("via_classes").get<std::vector<std::string>>();
    c.files = j.at("files").get<std::vector<std::string>>();
    c.complete = j.at("complete").get<bool>();
    return c;
}

namespace {

json metrics_to_json(const ChainMetrics& m) {
    return json{{"count", m.count},
                {"length", {{"sum", m.length_sum},
                            {"max", m.length_max},
                            {"avg", m.length_avg}}},
                {"files_per_chain", {{"sum", m.files_sum},
                                     {"max", m.files_max},
                                     {"avg", m.files_avg}}}};
}

ChainMetrics metrics_from_json(const json& j) {
    ChainMetrics m;
    m.count = j.at("count").get<int>();
    m.length_sum = j.at("length").at("sum").get<int>();
    m.length_max = j.at("length").at("max").get<int>();
    m.length_avg = j.at("length").at("avg").get<double>();
    m.files_sum = j.at("files_per_chain").at("sum").get<int>();
    m.files_max = j.at("files_per_chain").at("max").get<int>();
    m.files_avg = j.at("files_per_chain").at("avg").get<double>();
    return m;
}

}  // namespace

json report_to_json(const ScanReport& report) {
    json j;
    j["schema"] = report.schema;
    j["framework_name"] = report.framework_name;
    j["version_string"] = report.version_string;
    json chains = json::array();
    for (const CallChain& c : report.chains) chains.push_back(chain_to_json(c));
    j["chains"] = chains;
    j["user_apis"] = report.user_apis;
    json cands = json::array();
    for (const Candidate& c : report.candidates) {
        cands.push_back(json{{"api", c.api},
                             {"sink", c.sink},
                             {"trigger_hypothesis", trigger_name(c.trigger)}});
    }
    j["candidates"] = cands;
    j["metrics"] = metrics_to_json(report.metrics);
    j["timing_seconds"] = report.timing_seconds;
    return j;
}

ScanReport report_from_json(const json& j) {
    ScanReport r;
    r.schema = j.at("schema").get<int>();
    if (r.schema != 1)
        throw ReportError("unsupported report schema " +
                          std::to_string(r.schema));
    r.framework_name = j.at("framework_name").get<std::string>();
    r.version_string = j.at("version_string").get<std::string>();
    for (const auto& c : j.at("chains")) r.chains.push_back(chain_from_json(c));
    r.user_apis = j.at("user_apis").get<std::vector<std::string>>();
    for (const auto& c : j.at("candidates")) {
        r.candidates.push_back(
            {c.at("api").get<std::string>(), c.at("sink").get<std::string>(),
             trigger_from_name(c.at("trigger_hypothesis").get<std::string>())});
    }
    r.metrics = metrics_from_json(j.at("metrics"));
    r.timing_seconds = j.at("timing_seconds").get<double>();
    return r;
}

ScanReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ReportError("cannot open report: " + path);
    json j;
    in >> j;
    return report_from_json(j);
}

void save_report(const ScanReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ReportError("cannot write report: " + path);
    out << report_to_json(report).dump(2) << "\n";
}

ScanConfig load_scan_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ReportError("cannot open config: " + path);
    json j;
    in >> j;

    ScanConfig cfg;
    if (j.contains("target_root"))
        cfg.target_root = j.at("target_root").get<std::string>();
    if (j.contains("framework_name"))
        cfg.framework_name = j.at("framework_name").get<std::string>();
    if (j.contains("version_string"))
        cfg.version_string = j.at("version_string").get<std::string>();
    if (j.contains("ignore_globs"))
        cfg.ignore_globs = j.at("ignore_globs").get<std::vector<std::string>>();
    if (j.contains("report_path"))
        cfg.report_path = j.at("report_path").get<std::string>();
    if (j.contains("sinks")) {
        cfg.sinks.clear();
        for (const auto& s : j.at("sinks")) {
            SinkSpec spec;
            spec.name = s.at("name").get<std::string>();
            for (const auto& t : s.at("match_tokens"))
                spec.match_tokens.insert(t.get<std::string>());
            cfg.sinks.push_back(std::move(spec));
        }
    }
    if (j.contains("limits")) {
        const auto& l = j.at("limits");
        if (l.contains("max_depth"))
            cfg.limits.max_depth = l.at("max_depth").get<int>();
        if (l.contains("node_budget"))
            cfg.limits.node_budget = l.at("node_budget").get<int>();
    }
    if (j.contains("manifest")) {
        const auto& m = j.at("manifest");
        if (m.contains("explicit_apis"))
            for (const auto& a : m.at("explicit_apis"))
                cfg.manifest.explicit_apis.insert(a.get<std::string>());
        if (m.contains("heuristic_enabled"))
            cfg.manifest.heuristic_enabled =
                m.at("heuristic_enabled").get<bool>();
    }
    return cfg;
}

ApiManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ReportError("cannot open manifest: " + path);
    json j;
    in >> j;
    ApiManifest m;
    if (j.contains("explicit_apis"))
        for (const auto& a : j.at("explicit_apis"))
            m.explicit_apis.insert(a.get<std::string>());
    if (j.contains("heuristic_enabled"))
        m.heuristic_enabled = j.at("heuristic_enabled").get<bool>();
    return m;
}

}  // namespace llmsec
