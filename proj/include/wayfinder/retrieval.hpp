#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wayfinder/knowledge_model.hpp"
#include "wayfinder/provider.hpp"

namespace wayfinder {

struct TrajectoryStep {
    std::string plan;
    std::string action;
    std::string dom_digest;
    std::string verdict;  // CONTINUE | FINISH | BACKTRACK
};

struct TrajectoryDemo {
    std::string goal;
    std::string site_id;
    std::vector<TrajectoryStep> steps;
    std::string answer;
    double reward = 0.0;  // self-evaluation in [0,1]
    bool success = false;  // reward >= 0.5
    Embedding goal_embedding;
};

struct ActionDemo {
    std::string observation;  // formatted DOM the actor saw
    std::string plan;
    std::string action;
    bool success = false;  // step verdict was CONTINUE or FINISH
    Embedding obs_embedding;
    Embedding plan_embedding;
    Embedding action_embedding;
};

struct TrajectoryBank {
    std::vector<TrajectoryDemo> entries;
};

struct ActionBank {
    std::vector<ActionDemo> entries;
};

struct GoalRetrieval {
    std::vector<TrajectoryDemo> positives;
    std::vector<TrajectoryDemo> negatives;
};

// Exact linear scan, cosine similarity (embeddings are unit-norm, so plain
// dot). Ties keep insertion order. Top-k first, then split by success.
GoalRetrieval retrieve_for_goal(const TrajectoryBank& bank, const Embedding& goal_embedding,
                                int k);

// Same contract keyed on the plan embedding; the caller splits by success.
std::vector<ActionDemo> retrieve_for_action(const ActionBank& bank,
                                            const Embedding& plan_embedding, int k);

std::vector<ActionDemo> filter_by_success(const std::vector<ActionDemo>& demos, bool success);

struct RerankWeights {
    double alpha1 = 0.5;
    double alpha2 = 0.5;
};

struct ScoredDemo {
    ActionDemo demo;
    double similarity = 0.0;  // a1*(h_od . h_o) + a2*(h_pd . h_p)
    double score = 0.0;       // similarity * MLP(h_od, h_pd, h_ad, h_o, h_p)
};

// Scores every candidate and returns them sorted by score descending,
// stable. The candidate multiset is preserved.
std::vector<ScoredDemo> rerank_actions(const std::vector<ActionDemo>& candidates,
                                       const Embedding& h_o, const Embedding& h_p,
                                       const RerankerParams& model, RerankWeights weights);

// Builds the 7680-dim MLP input for one (demo, context) pair.
std::vector<double> rerank_input(const ActionDemo& demo, const Embedding& h_o,
                                 const Embedding& h_p);

// k_plus distinct draws without replacement, temperature-1 softmax over the
// scores, seeded. Only success=true demos are eligible; when there are at
// most k_plus of them, all come back in the given order.
std::vector<ScoredDemo> sample_positives(const std::vector<ScoredDemo>& scored, int k_plus,
                                         std::mt19937_64& rng);

struct BankError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// JSONL, one record per line, embeddings as plain JSON number arrays at full
// precision. Loaders report the 1-based line number of any corrupt line.
void save_trajectory_bank(const std::string& path, const TrajectoryBank& bank);
TrajectoryBank load_trajectory_bank(const std::string& path);
void save_action_bank(const std::string& path, const ActionBank& bank);
ActionBank load_action_bank(const std::string& path);

}  // namespace wayfinder
