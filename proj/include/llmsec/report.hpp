#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "llmsec/chain_extractor.hpp"

namespace llmsec {

struct ScanConfig {
    std::string target_root;
    std::vector<SinkSpec> sinks = default_sinks();
    ApiManifest manifest;
    ChainLimits limits;
    std::vector<std::string> ignore_globs;
    std::string report_path;
    std::string framework_name;  // defaults to the root directory name
    std::string version_string;
};

enum class Trigger { Prompt, ApiPost, LoadedFile };

std::string trigger_name(Trigger t);

struct Candidate {
    std::string api;
    std::string sink;
    Trigger trigger = Trigger::Prompt;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct ScanReport {
    int schema = 1;
    std::string framework_name;
    std::string version_string;
    std::vector<CallChain> chains;
    std::vector<std::string> user_apis;   // heads of complete chains
    std::vector<Candidate> candidates;    // one per (api, sink) pair
    ChainMetrics metrics;                 // complete chains only
    double timing_seconds = 0.0;

    friend bool operator==(const ScanReport&, const ScanReport&) = default;
};

struct ReportDiff {
    std::vector<CallChain> added;
    std::vector<CallChain> removed;

    bool empty() const { return added.empty() && removed.empty(); }
};

class ReportError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

ScanReport scan_package(const ScanConfig& config);

// Chains are compared by link sequence identity.
ReportDiff diff_reports(const ScanReport& old_report,
                        const ScanReport& new_report);

nlohmann::json chain_to_json(const CallChain& chain);
CallChain chain_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const ScanReport& report);
ScanReport report_from_json(const nlohmann::json& j);

ScanReport load_report(const std::string& path);
void save_report(const ScanReport& report, const std::string& path);

// Config / manifest files are JSON documents mirroring the struct fields.
ScanConfig load_scan_config(const std::string& path);
ApiManifest load_manifest(const std::string& path);

}  // namespace llmsec
