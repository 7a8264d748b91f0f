#include "wayfinder/curriculum.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

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

std::string page_listing(const SimSite& site) {
    std::ostringstream os;
    for (const auto& [url, page] : site.pages) os << "- " << url << "\n";
    std::string out = os.str();
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

std::string results_listing(const std::vector<EpisodeOutcome>& prior) {
    std::ostringstream os;
    for (size_t i = 0; i < prior.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", prior[i].reward);
        os << (i + 1) << ". " << prior[i].goal << " => " << prior[i].answer << " [reward " << buf
           << "]\n";
    }
    std::string out = os.str();
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

bool step_succeeded(const AgentStep& s) {
    return s.verdict == VerdictKind::Continue || s.verdict == VerdictKind::Finish;
}

ordered_json embedding_to_json(const Embedding& e) {
    ordered_json arr = ordered_json::array();
    for (double v : e) arr.push_back(v);
    return arr;
}

Embedding embedding_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != kEmbeddingDim)
        throw BankError(where + ": embedding must be an array of " +
                        std::to_string(kEmbeddingDim) + " numbers");
    Embedding e(kEmbeddingDim);
    for (size_t i = 0; i < kEmbeddingDim; ++i) e[i] = j[i].get<double>();
    return e;
}

}  // namespace

std::vector<CurriculumGoal> parse_goal_lines(const std::string& reply) {
    std::vector<CurriculumGoal> goals;
    std::istringstream in(reply);
    std::string line;
    while (std::getline(in, line)) {
        line = trim_copy(line);
        if (line.empty()) continue;
        size_t bar = line.find(" | ");
        if (bar == std::string::npos) continue;
        CurriculumGoal g;
        g.kind = trim_copy(line.substr(0, bar));
        std::string rest = trim_copy(line.substr(bar + 3));
        if (g.kind.empty() || g.kind.find(' ') != std::string::npos) continue;
        if (rest.rfind("PARENTS=", 0) == 0) {
            size_t bar2 = rest.find(" | ");
            if (bar2 == std::string::npos) continue;
            std::string list = rest.substr(8, bar2 - 8);
            std::istringstream ls(list);
            std::string tok;
            while (std::getline(ls, tok, ',')) {
                tok = trim_copy(tok);
                if (!tok.empty()) g.parents.push_back(std::atoi(tok.c_str()));
            }
            rest = trim_copy(rest.substr(bar2 + 3));
        }
        if (rest.empty()) continue;
        g.text = rest;
        goals.push_back(std::move(g));
    }
    return goals;
}

std::vector<CurriculumGoal> generate_goals(Provider& provider, const PromptLibrary& prompts,
                                           const SimSite& site, int count) {
    const std::string prompt = prompts.render("goal_gen", {{"site", site.site_id},
                                                           {"pages", page_listing(site)},
                                                           {"count", std::to_string(count)}});
    const std::string reply =
        provider.chat_complete(ChatRequest::make(ChatTag::goal_gen, {{"user", prompt}}));
    auto goals = parse_goal_lines(reply);
    if ((int)goals.size() > count) goals.resize(count);
    return goals;
}

std::vector<CurriculumGoal> generate_followup_goals(Provider& provider,
                                                    const PromptLibrary& prompts,
                                                    const SimSite& site, int count,
                                                    const std::vector<EpisodeOutcome>& prior) {
    const std::string prompt =
        prompts.render("goal_gen_followup", {{"site", site.site_id},
                                             {"pages", page_listing(site)},
                                             {"count", std::to_string(count)},
                                             {"results", results_listing(prior)}});
    const std::string reply =
        provider.chat_complete(ChatRequest::make(ChatTag::goal_gen, {{"user", prompt}}));
    auto goals = parse_goal_lines(reply);
    if ((int)goals.size() > count) goals.resize(count);
    return goals;
}

double parse_reward(const std::string& reply) {
    for (size_t i = 0; i < reply.size(); ++i) {
        const char c = reply[i];
        if (std::isdigit((unsigned char)c) ||
            (c == '.' && i + 1 < reply.size() && std::isdigit((unsigned char)reply[i + 1]))) {
            const double v = std::strtod(reply.c_str() + i, nullptr);
            return std::clamp(v, 0.0, 1.0);
        }
    }
    return 0.0;
}

double self_evaluate(Provider& provider, const PromptLibrary& prompts, const std::string& goal,
                     const EpisodeResult& result) {
    std::ostringstream digest;
    digest << "steps=" << result.steps.size() << " backtracks=" << result.backtracks << " status="
           << (result.status == EpisodeStatus::finished ? "finished" : "aborted");
    const std::string prompt = prompts.render(
        "self_eval",
        {{"goal", goal},
         {"answer", result.answer},
         {"status", digest.str()},
         {"extracted_keys",
          result.extracted.empty() ? "(none)" : result.extracted.keys_joined()}});
    try {
        const std::string reply =
            provider.chat_complete(ChatRequest::make(ChatTag::self_eval, {{"user", prompt}}));
        return parse_reward(reply);
    } catch (const ProviderError&) {
        return 0.0;
    }
}

BankUpdate update_demonstrations(TrajectoryBank& traj_bank, ActionBank& action_bank,
                                 const EpisodeResult& result, const std::string& site_id,
                                 double reward, Provider& provider) {
    std::vector<const AgentStep*> executed;
    for (const auto& s : result.steps)
        if (s.executed) executed.push_back(&s);

    // One batch: goal first, then obs/plan/action per step.
    std::vector<std::string> texts{result.goal};
    for (const AgentStep* s : executed) {
        texts.push_back(s->dom_before);
        texts.push_back(s->plan);
        texts.push_back(s->action);
    }
    std::vector<Embedding> embs = provider.embed_text(texts);

    TrajectoryDemo demo;
    demo.goal = result.goal;
    demo.site_id = site_id;
    demo.answer = result.answer;
    demo.reward = reward;
    demo.success = reward >= 0.5;
    demo.goal_embedding = embs[0];
    for (const AgentStep* s : executed) {
        TrajectoryStep ts;
        ts.plan = s->plan;
        ts.action = s->action;
        ts.dom_digest = dom_digest(s->dom_before);
        ts.verdict = verdict_name(s->verdict);
        demo.steps.push_back(std::move(ts));
    }
    traj_bank.entries.push_back(std::move(demo));

    BankUpdate update;
    update.trajectory_added = 1;
    for (size_t i = 0; i < executed.size(); ++i) {
        const AgentStep* s = executed[i];
        ActionDemo ad;
        ad.observation = s->dom_before;
        ad.plan = s->plan;
        ad.action = s->action;
        ad.success = step_succeeded(*s);
        ad.obs_embedding = embs[1 + 3 * i];
        ad.plan_embedding = embs[2 + 3 * i];
        ad.action_embedding = embs[3 + 3 * i];
        action_bank.entries.push_back(std::move(ad));
        update.actions_added++;
    }
    return update;
}

std::vector<LabeledExample> collect_labeled_examples(const EpisodeResult& result) {
    std::vector<LabeledExample> out;
    for (const auto& s : result.steps) {
        if (!s.obs_embedding || !s.plan_embedding) continue;
        const double label = step_succeeded(s) ? 1.0 : 0.0;
        for (const auto& d : s.shown_demos) {
            LabeledExample ex;
            ex.demo_obs = d.obs_embedding;
            ex.demo_plan = d.plan_embedding;
            ex.demo_action = d.action_embedding;
            ex.obs = *s.obs_embedding;
            ex.plan = *s.plan_embedding;
            ex.label = label;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

void save_training_set(const std::string& path, const std::vector<LabeledExample>& examples) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw BankError("cannot open " + path + " for writing");
    for (const auto& ex : examples) {
        ordered_json rec;
        rec["demo_obs"] = embedding_to_json(ex.demo_obs);
        rec["demo_plan"] = embedding_to_json(ex.demo_plan);
        rec["demo_action"] = embedding_to_json(ex.demo_action);
        rec["obs"] = embedding_to_json(ex.obs);
        rec["plan"] = embedding_to_json(ex.plan);
        rec["label"] = ex.label;
        out << rec.dump() << "\n";
    }
}

std::vector<LabeledExample> load_training_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BankError("cannot open " + path);
    std::vector<LabeledExample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        lineno++;
        const std::string where = path + ": line " + std::to_string(lineno);
        if (trim_copy(line).empty()) throw BankError(where + ": blank line");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw BankError(where + ": " + e.what());
        }
        try {
            LabeledExample ex;
            ex.demo_obs = embedding_from_json(j.at("demo_obs"), where);
            ex.demo_plan = embedding_from_json(j.at("demo_plan"), where);
            ex.demo_action = embedding_from_json(j.at("demo_action"), where);
            ex.obs = embedding_from_json(j.at("obs"), where);
            ex.plan = embedding_from_json(j.at("plan"), where);
            ex.label = j.at("label").get<double>();
            if (ex.label != 0.0 && ex.label != 1.0)
                throw BankError(where + ": label must be 0 or 1");
            out.push_back(std::move(ex));
        } catch (const nlohmann::json::exception& e) {
            throw BankError(where + ": " + e.what());
        }
    }
    return out;
}

Dataset to_dataset(const std::vector<LabeledExample>& examples) {
    Dataset ds;
    ds.reserve(examples.size());
    std::vector<double> row(kModelInputDim);
    for (const auto& ex : examples) {
        double* p = row.data();
        auto put = [&p](const Embedding& e) {
            std::copy(e.begin(), e.end(), p);
            p += e.size();
        };
        put(ex.demo_obs);
        put(ex.demo_plan);
        put(ex.demo_action);
        put(ex.obs);
        put(ex.plan);
        ds.add(row.data(), ex.label != 0.0 ? 1 : 0);
    }
    return ds;
}

CurriculumReport run_curriculum(const CurriculumConfig& cfg, Provider& provider,
                                const PromptLibrary& prompts) {
    if (cfg.site_files.empty()) throw std::invalid_argument("curriculum needs at least one site");
    std::filesystem::create_directories(cfg.out_dir);

    TrajectoryBank traj_bank;
    ActionBank action_bank;
    std::vector<LabeledExample> labeled;
    CurriculumReport report;
    double reward_sum = 0.0;
    int episodes = 0;

    struct SiteRun {
        SimSite site;
        std::vector<EpisodeOutcome> outcomes;
        std::vector<CurriculumGoal> phase1_goals;
        std::vector<CurriculumGoal> phase2_goals;
        std::vector<double> rewards;  // phase order
    };
    std::vector<SiteRun> runs;
    for (const auto& f : cfg.site_files) runs.push_back({load_site(f), {}, {}, {}, {}});

    AgentConfig base;
    base.max_steps = cfg.max_steps;
    base.max_backtracks = cfg.max_backtracks;
    base.dsl_retries = cfg.dsl_retries;
    base.curriculum_mode = true;
    base.seed = cfg.seed;

    // Phase 1: explore with demonstrations off.
    for (auto& run : runs) {
        run.phase1_goals = generate_goals(provider, prompts, run.site, cfg.goals_per_site);
        for (const auto& goal : run.phase1_goals) {
            Session session(run.site);
            AgentConfig acfg = base;
            acfg.backtrack_enabled = true;
            acfg.demos_enabled = false;
            acfg.synthesis_enabled = false;
            acfg.reranker_enabled = false;
            AgentContext ctx;
            ctx.provider = &provider;
            ctx.prompts = &prompts;
            EpisodeResult result = run_episode(session, goal.text, acfg, ctx);
            const double reward = self_evaluate(provider, prompts, goal.text, result);
            update_demonstrations(traj_bank, action_bank, result, run.site.site_id, reward,
                                  provider);
            run.outcomes.push_back({goal.text, result.answer, reward});
            run.rewards.push_back(reward);
            reward_sum += reward;
            episodes++;
            report.phase1_episodes++;
        }
    }

    // Phase 2: follow-up goals against a frozen snapshot of the phase-1
    // banks; new demos accumulate separately and merge afterwards.
    const TrajectoryBank snapshot_traj = traj_bank;
    const ActionBank snapshot_actions = action_bank;
    TrajectoryBank delta_traj;
    ActionBank delta_actions;
    for (auto& run : runs) {
        run.phase2_goals = generate_followup_goals(provider, prompts, run.site,
                                                   cfg.goals_per_site, run.outcomes);
        for (const auto& goal : run.phase2_goals) {
            Session session(run.site);
            AgentConfig acfg = base;
            acfg.backtrack_enabled = true;
            acfg.demos_enabled = true;
            acfg.synthesis_enabled = true;
            acfg.reranker_enabled = false;
            AgentContext ctx;
            ctx.provider = &provider;
            ctx.prompts = &prompts;
            ctx.trajectory_bank = &snapshot_traj;
            ctx.action_bank = &snapshot_actions;
            EpisodeResult result = run_episode(session, goal.text, acfg, ctx);
            const double reward = self_evaluate(provider, prompts, goal.text, result);
            update_demonstrations(delta_traj, delta_actions, result, run.site.site_id, reward,
                                  provider);
            auto examples = collect_labeled_examples(result);
            labeled.insert(labeled.end(), examples.begin(), examples.end());
            run.rewards.push_back(reward);
            reward_sum += reward;
            episodes++;
            report.phase2_episodes++;
        }
    }
    traj_bank.entries.insert(traj_bank.entries.end(), delta_traj.entries.begin(),
                             delta_traj.entries.end());
    action_bank.entries.insert(action_bank.entries.end(), delta_actions.entries.begin(),
                               delta_actions.entries.end());

    report.trajectory_demos = (int)traj_bank.entries.size();
    report.action_demos = (int)action_bank.entries.size();
    report.labeled_examples = (int)labeled.size();
    report.mean_reward = episodes ? reward_sum / episodes : 0.0;

    save_trajectory_bank(cfg.out_dir + "/trajectory_bank.jsonl", traj_bank);
    save_action_bank(cfg.out_dir + "/action_bank.jsonl", action_bank);
    save_training_set(cfg.out_dir + "/training_set.jsonl", labeled);

    ordered_json rj;
    rj["sites"] = (int)runs.size();
    rj["phase1_episodes"] = report.phase1_episodes;
    rj["phase2_episodes"] = report.phase2_episodes;
    rj["trajectory_demos"] = report.trajectory_demos;
    rj["action_demos"] = report.action_demos;
    rj["labeled_examples"] = report.labeled_examples;
    rj["mean_reward"] = report.mean_reward;
    ordered_json goals = ordered_json::array();
    for (const auto& run : runs) {
        size_t ri = 0;
        for (int phase = 1; phase <= 2; ++phase) {
            const auto& list = phase == 1 ? run.phase1_goals : run.phase2_goals;
            for (const auto& g : list) {
                ordered_json gj;
                gj["site"] = run.site.site_id;
                gj["phase"] = phase;
                gj["kind"] = g.kind;
                gj["text"] = g.text;
                gj["reward"] = ri < run.rewards.size() ? run.rewards[ri] : 0.0;
                goals.push_back(std::move(gj));
                ri++;
            }
        }
    }
    rj["goals"] = std::move(goals);
    std::ofstream rf(cfg.out_dir + "/report.json", std::ios::binary | std::ios::trunc);
    if (!rf) throw BankError("cannot open " + cfg.out_dir + "/report.json for writing");
    rf << rj.dump(2) << "\n";

    return report;
}

}  // namespace wayfinder
