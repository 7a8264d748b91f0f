#include "wayfinder/agent.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace wayfinder {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim_copy(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Canonical script source on a single line; demo blocks, failure lists and
// trajectory lines all use this form.
std::string one_line(const std::string& script_source) {
    std::string out;
    for (char c : script_source) {
        if (c == '\n') {
            out += " ; ";
        } else if (c != '\r') {
            out += c;
        }
    }
    return out;
}

std::string upper_copy(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return (char)std::toupper(c); });
    return s;
}

constexpr int kPromptTailLines = 8;  // trajectory and feedback shown to the actor

struct TrajEntry {
    std::string url;   // where this step ended
    std::string plan;  // plan in force after the step
};

std::string render_demo_block(const ShownDemo& d, int ordinal, const std::string& action_obs) {
    std::ostringstream os;
    os << "[demo " << ordinal << " " << (d.success ? "worked" : "failed") << "]\n";
    os << "page:\n" << dom_digest(action_obs) << "\n";
    os << "action: " << one_line(d.action) << "\n";
    return os.str();
}

std::string render_extracted(const ExtractedText& ex) {
    if (ex.empty()) return "(nothing extracted)";
    std::ostringstream os;
    bool first = true;
    for (const auto& [key, values] : ex.items()) {
        if (!first) os << "\n";
        first = false;
        os << key << ": ";
        for (size_t i = 0; i < values.size(); ++i) {
            if (i) os << " | ";
            os << values[i];
        }
    }
    return os.str();
}

std::string render_trajectory(const std::vector<AgentStep>& steps) {
    if (steps.empty()) return "(no steps yet)";
    size_t start = steps.size() > kPromptTailLines ? steps.size() - kPromptTailLines : 0;
    std::ostringstream os;
    for (size_t i = start; i < steps.size(); ++i) {
        const AgentStep& s = steps[i];
        os << "[" << (i + 1) << "] plan: " << s.plan << " | did: "
           << (s.action.empty() ? "(no valid script)" : one_line(s.action)) << " => "
           << verdict_name(s.verdict) << "\n";
    }
    std::string out = os.str();
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

std::string render_feedback(const std::vector<std::string>& notes) {
    if (notes.empty()) return "(none)";
    size_t start = notes.size() > kPromptTailLines ? notes.size() - kPromptTailLines : 0;
    std::ostringstream os;
    for (size_t i = start; i < notes.size(); ++i) os << "* " << notes[i] << "\n";
    std::string out = os.str();
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

std::string render_failures(const std::set<std::pair<std::string, std::string>>& failures) {
    if (failures.empty()) return "(none)";
    std::ostringstream os;
    for (const auto& [url, action] : failures) os << "- " << url << " :: " << one_line(action) << "\n";
    std::string out = os.str();
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

}  // namespace

const char* verdict_name(VerdictKind k) {
    switch (k) {
        case VerdictKind::Continue: return "CONTINUE";
        case VerdictKind::Finish: return "FINISH";
        case VerdictKind::Backtrack: return "BACKTRACK";
    }
    return "BACKTRACK";
}

Verdict parse_verdict(const std::string& reply) {
    Verdict v;
    bool have_kind = false;
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim_copy(line);
        if (!have_kind && t.rfind("VERDICT:", 0) == 0) {
            const std::string token = upper_copy(trim_copy(t.substr(8)));
            if (token == "CONTINUE") {
                v.kind = VerdictKind::Continue;
                have_kind = true;
            } else if (token == "FINISH") {
                v.kind = VerdictKind::Finish;
                have_kind = true;
            } else if (token == "BACKTRACK") {
                v.kind = VerdictKind::Backtrack;
                have_kind = true;
            }
        } else if (t.rfind("PLAN:", 0) == 0 && v.next_plan.empty()) {
            v.next_plan = trim_copy(t.substr(5));
        } else if (t.rfind("FEEDBACK:", 0) == 0 && v.feedback.empty()) {
            v.feedback = trim_copy(t.substr(9));
        }
    }
    if (!have_kind) {
        v.kind = VerdictKind::Backtrack;
        v.feedback = "unparseable reflection reply";
    }
    return v;
}

AgentConfig AgentConfig::preset(const std::string& name) {
    AgentConfig cfg;
    if (name == "zero-shot" || name == "zero_shot") {
        cfg.backtrack_enabled = false;
        cfg.demos_enabled = false;
        cfg.synthesis_enabled = false;
        cfg.reranker_enabled = false;
    } else if (name == "backtrack") {
        cfg.backtrack_enabled = true;
        cfg.demos_enabled = false;
        cfg.synthesis_enabled = false;
        cfg.reranker_enabled = false;
    } else if (name == "demos") {
        cfg.backtrack_enabled = true;
        cfg.demos_enabled = true;
        cfg.synthesis_enabled = false;
        cfg.reranker_enabled = false;
    } else if (name == "synthesis") {
        cfg.backtrack_enabled = true;
        cfg.demos_enabled = true;
        cfg.synthesis_enabled = true;
        cfg.reranker_enabled = false;
    } else if (name == "full") {
        cfg.backtrack_enabled = true;
        cfg.demos_enabled = true;
        cfg.synthesis_enabled = true;
        cfg.reranker_enabled = true;
    } else {
        throw std::invalid_argument("unknown preset: " + name +
                                    " (expected zero-shot|backtrack|demos|synthesis|full)");
    }
    return cfg;
}

EpisodeResult run_episode(Session& session, const std::string& goal, const AgentConfig& cfg,
                          const AgentContext& ctx) {
    if (!ctx.provider || !ctx.prompts)
        throw std::invalid_argument("run_episode needs a provider and a prompt library");
    Provider& provider = *ctx.provider;
    const PromptLibrary& prompts = *ctx.prompts;

    EpisodeResult result;
    result.goal = goal;

    ObservedState obs = session.observe();
    const std::string initial_url = obs.url;
    std::string plan = goal;

    std::vector<TrajEntry> trail;
    std::vector<std::string> feedback_notes;
    std::set<std::pair<std::string, std::string>> failures;
    std::mt19937_64 rng(cfg.seed ^ fnv1a64(goal));

    const bool have_traj_bank =
        cfg.demos_enabled && ctx.trajectory_bank && !ctx.trajectory_bank->entries.empty();
    const bool have_action_bank =
        cfg.demos_enabled && ctx.action_bank && !ctx.action_bank->entries.empty();

    // Goal-level retrieval happens once per episode.
    if (have_traj_bank) {
        try {
            Embedding goal_emb = provider.embed_text({goal})[0];
            GoalRetrieval gr = retrieve_for_goal(*ctx.trajectory_bank, goal_emb, cfg.k_goal);
            if (cfg.synthesis_enabled) {
                result.goal_learnings = synthesize_goal_learnings(
                    gr.positives, gr.negatives, goal, provider, prompts, &result.warnings);
            }
        } catch (const ProviderError& e) {
            result.warnings.push_back(std::string("goal retrieval skipped: ") + e.what());
        }
    }

    const RerankerParams* reranker = ctx.reranker;
    RerankerParams zero_params;
    if (cfg.reranker_enabled && !reranker) {
        // Untrained model scores everything 0.5; sized zeros, not empty tensors.
        zero_params = RerankerParams::zeros();
        reranker = &zero_params;
    }

    int executed_steps = 0;

    while (true) {
        if (executed_steps >= cfg.max_steps) {
            result.abort_reason = "step budget exhausted";
            break;
        }

        AgentStep step;
        step.plan = plan;
        step.url_before = obs.url;
        step.dom_before = format_dom(obs);

        // Per-step demo retrieval and optional action-level synthesis.
        Learnings action_learnings;
        std::string demos_section = "(none)";
        std::vector<std::string> shown_obs;  // formatted pages for the demo blocks
        if (have_action_bank) {
            try {
                auto embs = provider.embed_text({step.dom_before, plan});
                step.obs_embedding = embs[0];
                step.plan_embedding = embs[1];
                auto candidates =
                    retrieve_for_action(*ctx.action_bank, *step.plan_embedding, cfg.k_action);
                auto positives = filter_by_success(candidates, true);
                auto negatives = filter_by_success(candidates, false);

                std::vector<ActionDemo> to_show;
                if (cfg.reranker_enabled) {
                    auto scored = rerank_actions(positives, *step.obs_embedding,
                                                 *step.plan_embedding, *reranker, cfg.rerank);
                    auto picked = sample_positives(scored, cfg.k_action_pos, rng);
                    for (auto& sd : picked) to_show.push_back(sd.demo);
                } else {
                    for (int i = 0; i < (int)positives.size() && i < cfg.k_action_pos; ++i)
                        to_show.push_back(positives[i]);
                }

                std::ostringstream ds;
                for (size_t i = 0; i < to_show.size(); ++i) {
                    const ActionDemo& d = to_show[i];
                    ShownDemo sd;
                    sd.action = d.action;
                    sd.success = d.success;
                    sd.obs_embedding = d.obs_embedding;
                    sd.plan_embedding = d.plan_embedding;
                    sd.action_embedding = d.action_embedding;
                    step.shown_demos.push_back(std::move(sd));
                    ds << render_demo_block(step.shown_demos.back(), (int)i + 1, d.observation);
                    ds << "\n";
                }
                if (!step.shown_demos.empty()) demos_section = ds.str();

                if (cfg.synthesis_enabled) {
                    action_learnings = synthesize_action_learnings(
                        positives, negatives, goal, step.dom_before, provider, prompts,
                        &result.warnings);
                }
            } catch (const ProviderError& e) {
                result.warnings.push_back(std::string("action retrieval skipped: ") + e.what());
            }
        }

        // Actor loop: up to dsl_retries attempts at a script that parses and
        // validates against the current page.
        const std::string actor_prompt = prompts.render(
            "actor", {{"goal", goal},
                      {"url", obs.url},
                      {"plan", plan},
                      {"page", step.dom_before.empty() ? "(empty page)" : step.dom_before},
                      {"learnings_goal",
                       result.goal_learnings.empty() ? "(none)" : result.goal_learnings.text},
                      {"learnings_action",
                       action_learnings.empty() ? "(none)" : action_learnings.text},
                      {"demos", demos_section},
                      {"trajectory", render_trajectory(result.steps)},
                      {"feedback", render_feedback(feedback_notes)},
                      {"failures", render_failures(failures)}});

        std::vector<ChatMessage> messages{{"user", actor_prompt}};
        std::optional<ActionScript> script;
        std::string last_compile_error;
        for (int attempt = 1; attempt <= cfg.dsl_retries; ++attempt) {
            step.actor_attempts = attempt;
            std::string reply;
            try {
                reply = provider.chat_complete(
                    ChatRequest::make(ChatTag::actor, messages, cfg.curriculum_mode));
            } catch (const ProviderError& e) {
                last_compile_error = std::string("actor call failed: ") + e.what();
                result.warnings.push_back(last_compile_error);
                break;
            }
            result.actor_calls++;

            ParseResult parsed = parse_script(reply);
            std::optional<CompileFeedback> problem;
            if (!parsed.ok()) {
                problem = parsed.error;
            } else {
                problem = validate_script(*parsed.script, obs);
                if (!problem) script = std::move(parsed.script);
            }
            if (script) break;

            last_compile_error = problem->to_line();
            feedback_notes.push_back("script rejected: " + last_compile_error);
            messages.push_back({"assistant", reply});
            messages.push_back({"user", "Your script was rejected: " + last_compile_error +
                                            "\nReply with a corrected script only."});
        }

        if (!script) {
            step.verdict = VerdictKind::Backtrack;
            step.verdict_source = "compile";
            step.feedback = last_compile_error.empty()
                                ? "no valid script produced"
                                : "no valid script produced: " + last_compile_error;
            step.extracted_keys = [&] {
                std::vector<std::string> ks;
                for (const auto& kv : session.extracted().items()) ks.push_back(kv.first);
                return ks;
            }();
            feedback_notes.push_back(step.feedback);
            result.steps.push_back(step);

            if (cfg.backtrack_enabled) {
                result.backtracks++;
                if (result.backtracks > cfg.max_backtracks) {
                    result.abort_reason = "backtrack budget exhausted";
                    break;
                }
                // Previous(trail): the latest entry that changed the URL.
                int found = -1;
                for (int i = (int)trail.size() - 1; i >= 0; --i) {
                    const std::string& before = i > 0 ? trail[i - 1].url : initial_url;
                    if (trail[i].url != before) {
                        found = i;
                        break;
                    }
                }
                if (found >= 0) {
                    obs = session.revert_to(trail[found].url);
                    plan = trail[found].plan;
                    trail.resize(found + 1);
                } else {
                    obs = session.revert_to(initial_url);
                    plan = goal;
                    trail.clear();
                }
            } else {
                executed_steps++;  // keeps the episode bounded without reverts
            }
            continue;
        }

        const std::string canonical = print_script(*script);
        step.action = canonical;

        // Loop detection: an action that already failed on this URL is not
        // re-run; it backtracks immediately and costs no reflection call.
        if (cfg.backtrack_enabled && failures.count({obs.url, canonical})) {
            step.verdict = VerdictKind::Backtrack;
            step.verdict_source = "loop";
            step.feedback = "this action already failed on this page";
        } else {
            ExecResult exec = session.execute_script(*script);
            executed_steps++;
            step.executed = true;
            ObservedState after = exec.state;
            step.url_after = after.url;
            StateDiff diff = diff_observations(obs, after);

            if (!exec.feedback.step_ok) {
                step.verdict = VerdictKind::Backtrack;
                step.verdict_source = "exec";
                step.feedback = exec.feedback.joined();
            } else if (!diff.any()) {
                // The page ignored the action entirely; no reflection needed.
                step.verdict = VerdictKind::Backtrack;
                step.verdict_source = "rule";
                step.feedback = "action had no visible effect";
                if (!exec.feedback.messages.empty())
                    step.feedback += " (" + exec.feedback.joined() + ")";
            } else {
                std::ostringstream changes;
                changes << "url=" << (diff.url_changed ? "changed" : "same")
                        << " dom=" << (diff.dom_changed ? "changed" : "same")
                        << " extraction=" << (diff.extraction_changed ? "changed" : "same");
                const std::string reflect_prompt = prompts.render(
                    "reflect",
                    {{"goal", goal},
                     {"plan", plan},
                     {"action", one_line(canonical)},
                     {"before_url", step.url_before},
                     {"after_url", after.url},
                     {"changes", changes.str()},
                     {"extracted_keys",
                      after.extracted.empty() ? "(none)" : after.extracted.keys_joined()},
                     {"notes",
                      exec.feedback.messages.empty() ? "(none)" : exec.feedback.joined()},
                     {"page", format_dom(after).empty() ? "(empty page)" : format_dom(after)}});
                try {
                    const std::string reply = provider.chat_complete(
                        ChatRequest::make(ChatTag::reflect, {{"user", reflect_prompt}}));
                    Verdict v = parse_verdict(reply);
                    step.verdict = v.kind;
                    step.verdict_source = "llm";
                    step.feedback = v.feedback;
                    if (v.kind == VerdictKind::Continue) {
                        if (v.next_plan.empty()) {
                            step.verdict = VerdictKind::Backtrack;
                            step.feedback = "reflection reply had no PLAN line";
                        } else {
                            plan = v.next_plan;
                        }
                    }
                } catch (const ProviderError& e) {
                    step.verdict = VerdictKind::Backtrack;
                    step.verdict_source = "llm";
                    step.feedback = std::string("reflection call failed: ") + e.what();
                    result.warnings.push_back(step.feedback);
                }
            }
            obs = std::move(after);
        }

        step.extracted_keys = [&] {
            std::vector<std::string> ks;
            for (const auto& kv : session.extracted().items()) ks.push_back(kv.first);
            return ks;
        }();

        const VerdictKind verdict = step.verdict;
        const bool executed = step.executed;
        if (!step.feedback.empty() && verdict == VerdictKind::Backtrack)
            feedback_notes.push_back(step.feedback);
        result.steps.push_back(step);

        if (verdict == VerdictKind::Finish) {
            result.status = EpisodeStatus::finished;
            break;
        }

        if (verdict == VerdictKind::Continue) {
            trail.push_back({obs.url, plan});
            continue;
        }

        // BACKTRACK of any flavor.
        if (!canonical.empty()) failures.insert({step.url_before, canonical});
        if (cfg.backtrack_enabled) {
            result.backtracks++;
            if (result.backtracks > cfg.max_backtracks) {
                result.abort_reason = "backtrack budget exhausted";
                break;
            }
            int found = -1;
            for (int i = (int)trail.size() - 1; i >= 0; --i) {
                const std::string& before = i > 0 ? trail[i - 1].url : initial_url;
                if (trail[i].url != before) {
                    found = i;
                    break;
                }
            }
            if (found >= 0) {
                obs = session.revert_to(trail[found].url);
                plan = trail[found].plan;
                trail.resize(found + 1);
            } else {
                obs = session.revert_to(initial_url);
                plan = goal;
                trail.clear();
            }
        } else if (executed) {
            // Without backtracking the episode just keeps going forward.
            trail.push_back({obs.url, plan});
        }
    }

    result.final_url = session.current_url();
    result.extracted = session.extracted();

    // Episodes always end with an answer, aborted ones included.
    const std::string status_note = result.status == EpisodeStatus::finished
                                        ? "goal reached"
                                        : "gave up: " + result.abort_reason;
    const std::string answer_prompt =
        prompts.render("answer", {{"goal", goal},
                                  {"final_url", result.final_url},
                                  {"status_note", status_note},
                                  {"trajectory", render_trajectory(result.steps)},
                                  {"extracted", render_extracted(result.extracted)}});
    std::string answer;
    try {
        answer = trim_copy(provider.chat_complete(
            ChatRequest::make(ChatTag::answer, {{"user", answer_prompt}})));
    } catch (const ProviderError& e) {
        result.warnings.push_back(std::string("answer call failed: ") + e.what());
        answer = render_extracted(result.extracted);
    }
    if (result.status == EpisodeStatus::aborted)
        answer = "PARTIAL: episode aborted; " + answer;
    result.answer = answer;
    return result;
}

void write_trajectory_log(std::ostream& os, const EpisodeResult& result) {
    for (const AgentStep& s : result.steps) {
        ordered_json rec;
        rec["goal"] = result.goal;
        rec["url"] = s.url_before;
        rec["action"] = s.action;
        rec["verdict"] = verdict_name(s.verdict);
        rec["verdict_source"] = s.verdict_source;
        rec["feedback"] = s.feedback;
        rec["extracted_keys"] = s.extracted_keys;
        os << rec.dump() << "\n";
    }
}

}  // namespace wayfinder
