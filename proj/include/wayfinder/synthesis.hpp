#pragma once

#include <string>
#include <vector>

#include "wayfinder/prompts.hpp"
#include "wayfinder/provider.hpp"
#include "wayfinder/retrieval.hpp"

namespace wayfinder {

// Caps keep synthesis prompts bounded no matter how large the banks grow.
inline constexpr int kGoalPositiveCap = 3;
inline constexpr int kGoalNegativeCap = 2;
inline constexpr int kActionPositiveCap = 5;
inline constexpr int kActionNegativeCap = 5;
inline constexpr size_t kLearningsCharCap = 1500;
inline constexpr size_t kSynthesisPromptBudget = 8000;
inline constexpr int kDomDigestLines = 30;

struct Learnings {
    std::string text;
    int positives_used = 0;
    int negatives_used = 0;
    bool empty() const { return text.empty(); }
};

// First max_lines lines of a formatted page; long pages end with an
// elision marker so the model knows content was dropped.
std::string dom_digest(const std::string& formatted_dom, int max_lines = kDomDigestLines);

// Distills retrieved demonstrations into short guidance. Both lists empty
// means no call is made and the result is empty. Provider failures degrade
// to empty learnings and push a note onto warnings.
Learnings synthesize_goal_learnings(const std::vector<TrajectoryDemo>& positives,
                                    const std::vector<TrajectoryDemo>& negatives,
                                    const std::string& goal,
                                    Provider& provider,
                                    const PromptLibrary& prompts,
                                    std::vector<std::string>* warnings = nullptr);

Learnings synthesize_action_learnings(const std::vector<ActionDemo>& positives,
                                      const std::vector<ActionDemo>& negatives,
                                      const std::string& goal,
                                      const std::string& current_dom,
                                      Provider& provider,
                                      const PromptLibrary& prompts,
                                      std::vector<std::string>* warnings = nullptr);

}  // namespace wayfinder
