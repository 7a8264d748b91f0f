#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wayfinder/dom.hpp"
#include "wayfinder/environment.hpp"
#include "wayfinder/knowledge_model.hpp"
#include "wayfinder/prompts.hpp"
#include "wayfinder/provider.hpp"
#include "wayfinder/retrieval.hpp"
#include "wayfinder/synthesis.hpp"

namespace wayfinder {

enum class VerdictKind { Continue, Finish, Backtrack };

const char* verdict_name(VerdictKind k);

struct Verdict {
    VerdictKind kind = VerdictKind::Backtrack;
    std::string next_plan;  // set on CONTINUE
    std::string feedback;   // set on BACKTRACK
};

// Pulls VERDICT / PLAN / FEEDBACK lines out of a reflection reply.
// Anything unparseable is treated as BACKTRACK with a note, never a crash.
Verdict parse_verdict(const std::string& reply);

struct AgentConfig {
    int max_steps = 20;       // executed scripts per episode
    int max_backtracks = 5;   // all backtrack-class events count
    int dsl_retries = 2;      // total actor attempts per step
    int k_goal = 20;
    int k_action = 20;
    int k_action_pos = 5;
    RerankWeights rerank;
    bool backtrack_enabled = true;
    bool demos_enabled = true;
    bool synthesis_enabled = true;
    bool reranker_enabled = true;
    bool curriculum_mode = false;  // exploration temperature for the actor
    std::uint64_t seed = 0;

    // zero-shot | backtrack | demos | synthesis | full
    static AgentConfig preset(const std::string& name);
};

// One demonstration shown to the actor, kept with its embeddings so a
// curriculum pass can label it later without re-embedding.
struct ShownDemo {
    std::string action;
    bool success = false;
    Embedding obs_embedding;
    Embedding plan_embedding;
    Embedding action_embedding;
};

struct AgentStep {
    std::string plan;
    std::string action;  // canonical source; empty when no attempt compiled
    std::string url_before;
    std::string url_after;
    std::string dom_before;
    VerdictKind verdict = VerdictKind::Backtrack;
    std::string verdict_source;  // llm | rule | exec | compile | loop
    std::string feedback;
    bool executed = false;
    int actor_attempts = 0;
    std::optional<Embedding> obs_embedding;   // present when demos were on
    std::optional<Embedding> plan_embedding;
    std::vector<ShownDemo> shown_demos;
    std::vector<std::string> extracted_keys;
};

enum class EpisodeStatus { finished, aborted };

struct EpisodeResult {
    EpisodeStatus status = EpisodeStatus::aborted;
    std::string abort_reason;
    std::string goal;
    std::string answer;
    std::string final_url;
    ExtractedText extracted;
    std::vector<AgentStep> steps;
    int actor_calls = 0;
    int backtracks = 0;
    Learnings goal_learnings;
    std::vector<std::string> warnings;
};

// External wiring for an episode; bank and reranker pointers may be null.
struct AgentContext {
    Provider* provider = nullptr;
    const PromptLibrary* prompts = nullptr;
    const TrajectoryBank* trajectory_bank = nullptr;
    const ActionBank* action_bank = nullptr;
    const RerankerParams* reranker = nullptr;
};

EpisodeResult run_episode(Session& session, const std::string& goal,
                          const AgentConfig& cfg, const AgentContext& ctx);

// One JSON object per step: goal, url, action source, verdict, feedback,
// extracted keys. Stable field order so reruns diff cleanly.
void write_trajectory_log(std::ostream& os, const EpisodeResult& result);

}  // namespace wayfinder
