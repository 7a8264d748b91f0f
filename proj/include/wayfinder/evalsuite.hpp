#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wayfinder/agent.hpp"
#include "wayfinder/scenario.hpp"

namespace wayfinder {

struct SuiteBanks {
    TrajectoryBank trajectories;
    ActionBank actions;
};

// Replays the scenario's golden walk through a fresh session to capture the
// observations the demos need, then adds the listed failure demos. Throws
// when the golden walk does not execute cleanly, since that means the
// fixture and the site disagree.
SuiteBanks build_banks(const ScenarioDef& def, const SimSite& site, Provider& provider);

struct ScenarioRunResult {
    std::string id;
    std::string site_id;
    bool solved = false;
    std::string status;  // "finished" or the abort reason
    int steps = 0;       // executed scripts
    int actor_calls = 0;
    int backtracks = 0;
    long reflect_calls = 0;
    std::string answer;
    std::string error;  // non-empty when the episode itself blew up
};

struct SuiteSummary {
    std::vector<ScenarioRunResult> rows;
    int solved = 0;
    int total = 0;
    // Mean actor calls over solved scenarios; 0 when nothing solved.
    double mean_actor_calls_per_success = 0.0;
    std::map<std::string, std::pair<int, int>> per_site;  // solved / total
};

struct SuiteOptions {
    std::string preset = "backtrack";
    int max_steps = 20;
    int max_backtracks = 5;
    int dsl_retries = 2;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string prompt_dir;   // empty uses the built-in asset directory
    std::string model_file;   // optional trained reranker weights
};

ScenarioRunResult run_scenario(const ScenarioDef& def, const SuiteOptions& options,
                               const RerankerParams* reranker);

SuiteSummary run_suite(const std::vector<std::string>& scenario_files,
                       const SuiteOptions& options);

// Plain-text table plus per-site and overall tallies; format is stable and
// ends with the mean_actor_calls_per_success line.
std::string format_suite_report(const SuiteSummary& summary, const std::string& preset);

// All *.json files directly inside dir, sorted by filename.
std::vector<std::string> list_scenario_files(const std::string& dir);

}  // namespace wayfinder
