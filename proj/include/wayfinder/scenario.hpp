#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "wayfinder/environment.hpp"
#include "wayfinder/provider.hpp"

namespace wayfinder {

// ====== scripted policies ======
//
// A script document drives every chat tag deterministically. The provider
// reads routed markers (GOAL:, PAGE_URL:, AFTER_URL:, SITE:, ...) out of the
// rendered prompt, so scripts stay robust to prompt wording changes.

struct ReplySeq {
    std::vector<std::string> replies;
    size_t cursor = 0;

    // Consumes the next reply; sticks on the last one once exhausted.
    std::string next();
};

struct ActorRule {
    std::string contains;  // empty matches unconditionally
    ReplySeq seq;
};

struct ActorPage {
    std::string url;
    std::vector<ActorRule> rules;  // first match wins
};

struct ReflectRule {
    std::optional<std::string> after_url;
    std::optional<std::string> before_url;
    std::string action_contains;   // substring of the ACTION line
    std::string extracted_has;     // key present in EXTRACTED_KEYS
    std::string plan_contains;     // substring of CURRENT_PLAN
    std::string verdict;           // CONTINUE | FINISH | BACKTRACK
    std::string plan;              // "$current" echoes the incoming plan
    std::string feedback;
};

struct TaskScript {
    std::string goal;
    std::vector<ActorPage> actor;
    std::vector<ReflectRule> reflect;
    std::string answer;
    std::string self_eval;
};

struct GoalGenRule {
    std::string site_contains;
    bool followup = false;
    ReplySeq seq;
};

struct ScriptDoc {
    std::vector<TaskScript> tasks;
    std::vector<GoalGenRule> goal_gen;
    std::string synthesis_reply = "- prefer the most direct route to the target page";
};

class ScenarioError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

// Deterministic offline provider: chat from the script, embeddings from the
// seeded pseudo-embedder. Unmatched calls throw, they never guess.
class ScenarioProvider : public Provider {
public:
    explicit ScenarioProvider(ScriptDoc doc, std::uint64_t embed_seed = 0x77617966696e64ULL);

protected:
    std::string do_chat(const ChatRequest& request) override;
    std::vector<Embedding> do_embed(const std::vector<std::string>& texts) override;

private:
    TaskScript* find_task(const std::string& goal, const char* tag);

    ScriptDoc doc_;
    std::uint64_t embed_seed_;
    std::mutex mu_;
};

// First line of `text` starting with `marker`, value trimmed.
std::optional<std::string> find_marker_line(const std::string& text, const std::string& marker);

// ====== scenario files ======

struct GoldenStep {
    std::string plan;
    std::string action;   // canonical script source
    std::string verdict;  // CONTINUE | FINISH | BACKTRACK
};

struct NegativeDemo {
    std::string url;  // page the bad action was tried on
    std::string plan;
    std::string action;
};

// One evaluation scenario: a site, a goal, scripted policies, the golden
// walk used to seed demonstration banks, and the success predicate.
struct ScenarioDef {
    std::string id;
    std::string site_file;  // resolved against the scenario file location
    std::string goal;
    bool trap = false;
    std::string answer_contains;
    std::vector<GoldenStep> golden;
    std::string golden_answer;
    double golden_reward = 0.9;
    std::vector<NegativeDemo> negatives;
    ScriptDoc script;
};

ScriptDoc parse_script_doc(const std::string& json_text, const std::string& source_name);
ScenarioDef load_scenario(const std::string& path);

}  // namespace wayfinder
