#include "wayfinder/evalsuite.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <thread>

namespace wayfinder {

SuiteBanks build_banks(const ScenarioDef& def, const SimSite& site, Provider& provider) {
    SuiteBanks banks;

    // Walk the golden path to see what the actor saw.
    Session session(site);
    struct StepCapture {
        std::string dom;
        const GoldenStep* step;
    };
    std::vector<StepCapture> captures;
    for (const auto& gs : def.golden) {
        ObservedState obs = session.observe();
        captures.push_back({format_dom(obs), &gs});
        ParseResult parsed = parse_script(gs.action);
        if (!parsed.ok())
            throw ScenarioError(def.id + ": golden action does not parse: " + gs.action + " (" +
                                parsed.error->to_line() + ")");
        ExecResult exec = session.execute_script(*parsed.script);
        if (!exec.feedback.step_ok)
            throw ScenarioError(def.id + ": golden action failed: " + gs.action + " (" +
                                exec.feedback.joined() + ")");
    }

    struct NegCapture {
        std::string dom;
        const NegativeDemo* demo;
    };
    std::vector<NegCapture> neg_captures;
    for (const auto& nd : def.negatives) {
        Session neg_session(site);
        ObservedState obs = neg_session.revert_to(nd.url);
        neg_captures.push_back({format_dom(obs), &nd});
    }

    std::vector<std::string> texts{def.goal};
    for (const auto& c : captures) {
        texts.push_back(c.dom);
        texts.push_back(c.step->plan);
        texts.push_back(c.step->action);
    }
    for (const auto& c : neg_captures) {
        texts.push_back(c.dom);
        texts.push_back(c.demo->plan);
        texts.push_back(c.demo->action);
    }
    std::vector<Embedding> embs = provider.embed_text(texts);

    TrajectoryDemo demo;
    demo.goal = def.goal;
    demo.site_id = site.site_id;
    demo.answer = def.golden_answer;
    demo.reward = def.golden_reward;
    demo.success = def.golden_reward >= 0.5;
    demo.goal_embedding = embs[0];
    size_t e = 1;
    for (const auto& c : captures) {
        TrajectoryStep ts;
        ts.plan = c.step->plan;
        ts.action = c.step->action;
        ts.dom_digest = dom_digest(c.dom);
        ts.verdict = c.step->verdict;
        demo.steps.push_back(std::move(ts));

        ActionDemo ad;
        ad.observation = c.dom;
        ad.plan = c.step->plan;
        ad.action = c.step->action;
        ad.success = c.step->verdict == "CONTINUE" || c.step->verdict == "FINISH";
        ad.obs_embedding = embs[e];
        ad.plan_embedding = embs[e + 1];
        ad.action_embedding = embs[e + 2];
        e += 3;
        banks.actions.entries.push_back(std::move(ad));
    }
    banks.trajectories.entries.push_back(std::move(demo));

    for (const auto& c : neg_captures) {
        ActionDemo ad;
        ad.observation = c.dom;
        ad.plan = c.demo->plan;
        ad.action = c.demo->action;
        ad.success = false;
        ad.obs_embedding = embs[e];
        ad.plan_embedding = embs[e + 1];
        ad.action_embedding = embs[e + 2];
        e += 3;
        banks.actions.entries.push_back(std::move(ad));
    }
    return banks;
}

ScenarioRunResult run_scenario(const ScenarioDef& def, const SuiteOptions& options,
                               const RerankerParams* reranker) {
    ScenarioRunResult row;
    row.id = def.id;
    try {
        const SimSite site = load_site(def.site_file);
        row.site_id = site.site_id;

        ScenarioProvider provider(def.script);
        PromptLibrary prompts(options.prompt_dir);

        AgentConfig cfg = AgentConfig::preset(options.preset);
        cfg.max_steps = options.max_steps;
        cfg.max_backtracks = options.max_backtracks;
        cfg.dsl_retries = options.dsl_retries;
        cfg.seed = options.seed;

        SuiteBanks banks;
        AgentContext ctx;
        ctx.provider = &provider;
        ctx.prompts = &prompts;
        if (cfg.demos_enabled) {
            banks = build_banks(def, site, provider);
            ctx.trajectory_bank = &banks.trajectories;
            ctx.action_bank = &banks.actions;
        }
        ctx.reranker = reranker;

        Session session(site);
        EpisodeResult result = run_episode(session, def.goal, cfg, ctx);

        row.status = result.status == EpisodeStatus::finished ? "finished" : result.abort_reason;
        for (const auto& s : result.steps)
            if (s.executed) row.steps++;
        row.actor_calls = result.actor_calls;
        row.backtracks = result.backtracks;
        row.reflect_calls = provider.ledger().chat_count(ChatTag::reflect);
        row.answer = result.answer;
        row.solved = result.status == EpisodeStatus::finished &&
                     (def.answer_contains.empty() ||
                      result.answer.find(def.answer_contains) != std::string::npos);
    } catch (const std::exception& e) {
        row.error = e.what();
        row.status = "error";
        row.solved = false;
    }
    return row;
}

SuiteSummary run_suite(const std::vector<std::string>& scenario_files,
                       const SuiteOptions& options) {
    std::vector<ScenarioDef> defs;
    defs.reserve(scenario_files.size());
    for (const auto& f : scenario_files) defs.push_back(load_scenario(f));

    const RerankerParams* reranker = nullptr;
    RerankerParams loaded;
    if (!options.model_file.empty()) {
        loaded = load_model(options.model_file).params;
        reranker = &loaded;
    }

    SuiteSummary summary;
    summary.rows.resize(defs.size());
    summary.total = (int)defs.size();

    const int jobs = std::max(1, options.jobs);
    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= defs.size()) return;
            summary.rows[i] = run_scenario(defs[i], options, reranker);
        }
    };
    if (jobs == 1 || defs.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    long actor_calls_on_solved = 0;
    for (const auto& row : summary.rows) {
        auto& site = summary.per_site[row.site_id.empty() ? "?" : row.site_id];
        site.second++;
        if (row.solved) {
            site.first++;
            summary.solved++;
            actor_calls_on_solved += row.actor_calls;
        }
    }
    summary.mean_actor_calls_per_success =
        summary.solved ? (double)actor_calls_on_solved / summary.solved : 0.0;
    return summary;
}

std::string format_suite_report(const SuiteSummary& summary, const std::string& preset) {
    std::ostringstream os;
    os << "preset: " << preset << "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s %-10s %-8s %5s %6s %11s\n", "scenario", "site",
                  "result", "steps", "actor", "backtracks");
    os << line;
    os << std::string(68, '-') << "\n";
    for (const auto& row : summary.rows) {
        std::snprintf(line, sizeof(line), "%-24s %-10s %-8s %5d %6d %11d\n", row.id.c_str(),
                      row.site_id.c_str(), row.solved ? "SOLVED" : "FAILED", row.steps,
                      row.actor_calls, row.backtracks);
        os << line;
        if (!row.error.empty()) os << "  ! " << row.error << "\n";
    }
    for (const auto& [site, counts] : summary.per_site)
        os << "site " << site << ": " << counts.first << "/" << counts.second << "\n";
    os << "overall: " << summary.solved << "/" << summary.total << "\n";
    std::snprintf(line, sizeof(line), "mean_actor_calls_per_success: %.2f\n",
                  summary.mean_actor_calls_per_success);
    os << line;
    return os.str();
}

std::vector<std::string> list_scenario_files(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() == ".json") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace wayfinder
