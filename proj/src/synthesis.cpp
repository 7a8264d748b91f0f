#include "wayfinder/synthesis.hpp"

#include <algorithm>
#include <sstream>

namespace wayfinder {

namespace {

std::string trim_copy(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string truncate_chars(const std::string& s, size_t cap) {
    static const std::string marker = "\n...[truncated]";
    if (s.size() <= cap) return s;
    if (cap <= marker.size()) return s.substr(0, cap);
    return s.substr(0, cap - marker.size()) + marker;
}

std::string trajectory_block(const TrajectoryDemo& d, int ordinal, bool positive) {
    std::ostringstream os;
    os << "[" << (positive ? "success" : "failure") << " example " << ordinal << "]\n";
    os << "goal: " << d.goal << "\n";
    os << "steps:\n";
    for (size_t i = 0; i < d.steps.size(); ++i) {
        os << "  " << (i + 1) << ". plan: " << d.steps[i].plan
           << " | action: " << d.steps[i].action << "\n";
    }
    os << "answer: " << d.answer << "\n";
    os << "reward: " << d.reward << "\n";
    return os.str();
}

std::string action_block(const ActionDemo& d, int ordinal, bool positive) {
    std::ostringstream os;
    os << "[" << (positive ? "success" : "failure") << " example " << ordinal << "]\n";
    os << "page:\n" << dom_digest(d.observation) << "\n";
    os << "plan: " << d.plan << "\n";
    os << "action: " << d.action << "\n";
    return os.str();
}

// Renders with the full blocks first; only when the result exceeds the
// budget does each block get squeezed to an equal share of the remainder.
std::string fit_examples(const PromptLibrary& prompts, const std::string& tmpl,
                         PromptLibrary::Vars vars, std::vector<std::string> blocks) {
    auto join = [](const std::vector<std::string>& bs) {
        std::string out;
        for (const auto& b : bs) {
            out += b;
            out += "\n";
        }
        return out;
    };
    vars.emplace_back("examples", join(blocks));
    std::string rendered = prompts.render(tmpl, vars);
    if (rendered.size() <= kSynthesisPromptBudget || blocks.empty()) return rendered;

    vars.back().second.clear();
    const std::string base = prompts.render(tmpl, vars);
    size_t room = kSynthesisPromptBudget > base.size() ? kSynthesisPromptBudget - base.size() : 0;
    size_t per_block = room / blocks.size();
    per_block = per_block > 1 ? per_block - 1 : 0;  // joiner newline
    for (auto& b : blocks) b = truncate_chars(b, per_block);
    vars.back().second = join(blocks);
    return prompts.render(tmpl, vars);
}

Learnings run_synthesis(Provider& provider, ChatTag tag, const std::string& prompt,
                        int n_pos, int n_neg, std::vector<std::string>* warnings) {
    Learnings out;
    out.positives_used = n_pos;
    out.negatives_used = n_neg;
    try {
        std::string reply = provider.chat_complete(ChatRequest::make(tag, {{"user", prompt}}));
        out.text = truncate_chars(trim_copy(reply), kLearningsCharCap);
    } catch (const ProviderError& e) {
        if (warnings) warnings->push_back(std::string("synthesis skipped: ") + e.what());
        out.text.clear();
    }
    return out;
}

}  // namespace

std::string dom_digest(const std::string& formatted_dom, int max_lines) {
    std::istringstream in(formatted_dom);
    std::string line, out;
    int n = 0;
    bool elided = false;
    while (std::getline(in, line)) {
        if (n >= max_lines) {
            elided = true;
            break;
        }
        out += line;
        out += "\n";
        ++n;
    }
    if (elided) out += "... (page continues)\n";
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

Learnings synthesize_goal_learnings(const std::vector<TrajectoryDemo>& positives,
                                    const std::vector<TrajectoryDemo>& negatives,
                                    const std::string& goal,
                                    Provider& provider,
                                    const PromptLibrary& prompts,
                                    std::vector<std::string>* warnings) {
    const int n_pos = std::min<int>(kGoalPositiveCap, (int)positives.size());
    const int n_neg = std::min<int>(kGoalNegativeCap, (int)negatives.size());
    if (n_pos == 0 && n_neg == 0) return Learnings{};

    std::vector<std::string> blocks;
    for (int i = 0; i < n_pos; ++i) blocks.push_back(trajectory_block(positives[i], i + 1, true));
    for (int i = 0; i < n_neg; ++i) blocks.push_back(trajectory_block(negatives[i], i + 1, false));

    const std::string prompt =
        fit_examples(prompts, "synthesize_goal", {{"goal", goal}}, std::move(blocks));
    return run_synthesis(provider, ChatTag::synthesize_goal, prompt, n_pos, n_neg, warnings);
}

Learnings synthesize_action_learnings(const std::vector<ActionDemo>& positives,
                                      const std::vector<ActionDemo>& negatives,
                                      const std::string& goal,
                                      const std::string& current_dom,
                                      Provider& provider,
                                      const PromptLibrary& prompts,
                                      std::vector<std::string>* warnings) {
    const int n_pos = std::min<int>(kActionPositiveCap, (int)positives.size());
    const int n_neg = std::min<int>(kActionNegativeCap, (int)negatives.size());
    if (n_pos == 0 && n_neg == 0) return Learnings{};

    std::vector<std::string> blocks;
    for (int i = 0; i < n_pos; ++i) blocks.push_back(action_block(positives[i], i + 1, true));
    for (int i = 0; i < n_neg; ++i) blocks.push_back(action_block(negatives[i], i + 1, false));

    const std::string prompt = fit_examples(
        prompts, "synthesize_action",
        {{"goal", goal}, {"page", dom_digest(current_dom)}}, std::move(blocks));
    return run_synthesis(provider, ChatTag::synthesize_action, prompt, n_pos, n_neg, warnings);
}

}  // namespace wayfinder
