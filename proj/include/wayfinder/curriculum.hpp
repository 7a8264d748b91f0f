#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wayfinder/agent.hpp"
#include "wayfinder/knowledge_model.hpp"
#include "wayfinder/retrieval.hpp"

namespace wayfinder {

struct CurriculumGoal {
    std::string kind;          // NAV, EXTRACT, ... free-form token
    std::string text;
    std::vector<int> parents;  // 1-based indices into the phase-1 results
};

// One goal per line: "KIND | text" or "KIND | PARENTS=1,3 | text".
// Malformed lines are dropped, not fatal.
std::vector<CurriculumGoal> parse_goal_lines(const std::string& reply);

std::vector<CurriculumGoal> generate_goals(Provider& provider, const PromptLibrary& prompts,
                                           const SimSite& site, int count);

struct EpisodeOutcome {
    std::string goal;
    std::string answer;
    double reward = 0.0;
};

std::vector<CurriculumGoal> generate_followup_goals(Provider& provider,
                                                    const PromptLibrary& prompts,
                                                    const SimSite& site, int count,
                                                    const std::vector<EpisodeOutcome>& prior);

// First number in the reply, clamped to [0,1]; no number reads as 0.
double self_evaluate(Provider& provider, const PromptLibrary& prompts, const std::string& goal,
                     const EpisodeResult& result);
double parse_reward(const std::string& reply);

struct BankUpdate {
    int trajectory_added = 0;
    int actions_added = 0;
};

// Turns a finished episode into one trajectory demo plus one action demo per
// executed step. All embeddings are fetched in a single batch before either
// bank is touched, so a provider failure cannot leave them half-updated.
BankUpdate update_demonstrations(TrajectoryBank& traj_bank, ActionBank& action_bank,
                                 const EpisodeResult& result, const std::string& site_id,
                                 double reward, Provider& provider);

// One reranker training row: the five embedding components and the label.
struct LabeledExample {
    Embedding demo_obs;
    Embedding demo_plan;
    Embedding demo_action;
    Embedding obs;
    Embedding plan;
    double label = 0.0;
};

std::vector<LabeledExample> collect_labeled_examples(const EpisodeResult& result);

void save_training_set(const std::string& path, const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> load_training_set(const std::string& path);
Dataset to_dataset(const std::vector<LabeledExample>& examples);

struct CurriculumConfig {
    std::vector<std::string> site_files;
    std::string out_dir;
    int goals_per_site = 2;  // per phase
    int max_steps = 20;
    int max_backtracks = 5;
    int dsl_retries = 2;
    std::uint64_t seed = 0;
};

struct CurriculumReport {
    int phase1_episodes = 0;
    int phase2_episodes = 0;
    int trajectory_demos = 0;
    int action_demos = 0;
    int labeled_examples = 0;
    double mean_reward = 0.0;
};

// Two-phase goal curriculum over the given sites. Phase 1 explores with
// demonstrations off; phase 2 replays follow-up goals against a frozen
// snapshot of the phase-1 banks, labeling every shown demo by the step
// verdict. Writes trajectory_bank.jsonl, action_bank.jsonl,
// training_set.jsonl and report.json under out_dir; reruns with the same
// seed write byte-identical files.
CurriculumReport run_curriculum(const CurriculumConfig& cfg, Provider& provider,
                                const PromptLibrary& prompts);

}  // namespace wayfinder
