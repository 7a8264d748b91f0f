#include "wayfinder/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "wayfinder/agent.hpp"
#include "wayfinder/curriculum.hpp"
#include "wayfinder/evalsuite.hpp"
#include "wayfinder/scenario.hpp"

namespace wayfinder {

namespace {

using nlohmann::json;

struct CommonOpts {
    std::string config_file;
    std::string preset = "full";
    std::string prompts_dir;
    std::string fixtures;  // directory (fixture store) or file (script doc)
    std::string record_dir;
    std::string model_file;
    int max_steps = 20;
    int max_backtracks = 5;
    int dsl_retries = 2;
    int jobs = 1;
    std::uint64_t seed = 0;
    ProviderConfig provider;
};

// The config file is plain JSON with comments allowed; flags given on the
// command line win over it.
void apply_config_file(const std::string& path, CommonOpts& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        throw CLI::ValidationError("--config", path + ": " + e.what());
    }
    opts.preset = j.value("preset", opts.preset);
    opts.prompts_dir = j.value("prompts", opts.prompts_dir);
    opts.fixtures = j.value("fixtures", opts.fixtures);
    opts.record_dir = j.value("record", opts.record_dir);
    opts.model_file = j.value("model", opts.model_file);
    opts.max_steps = j.value("max_steps", opts.max_steps);
    opts.max_backtracks = j.value("max_backtracks", opts.max_backtracks);
    opts.dsl_retries = j.value("dsl_retries", opts.dsl_retries);
    opts.jobs = j.value("jobs", opts.jobs);
    opts.seed = j.value("seed", opts.seed);
    if (j.contains("provider")) {
        const json& p = j.at("provider");
        opts.provider.base_url = p.value("base_url", opts.provider.base_url);
        opts.provider.chat_path = p.value("chat_path", opts.provider.chat_path);
        opts.provider.embed_path = p.value("embed_path", opts.provider.embed_path);
        opts.provider.api_key_env = p.value("api_key_env", opts.provider.api_key_env);
        opts.provider.chat_model = p.value("chat_model", opts.provider.chat_model);
        opts.provider.embed_model = p.value("embed_model", opts.provider.embed_model);
        opts.provider.timeout_seconds = p.value("timeout_seconds", opts.provider.timeout_seconds);
        opts.provider.max_attempts = p.value("max_attempts", opts.provider.max_attempts);
        opts.provider.max_in_flight = p.value("max_in_flight", opts.provider.max_in_flight);
    }
}

// --fixtures picks the offline provider form: a directory replays recorded
// completions, a JSON file drives the scripted scenario policies. Without it
// requests go over HTTP.
std::unique_ptr<Provider> make_provider(const CommonOpts& opts) {
    std::unique_ptr<Provider> provider;
    if (!opts.fixtures.empty()) {
        if (std::filesystem::is_directory(opts.fixtures)) {
            provider = std::make_unique<FixtureProvider>(opts.fixtures);
        } else {
            std::ifstream in(opts.fixtures, std::ios::binary);
            if (!in) throw ProviderError("cannot open fixtures: " + opts.fixtures);
            std::ostringstream buf;
            buf << in.rdbuf();
            json j;
            try {
                j = json::parse(buf.str(), nullptr, true, true);
            } catch (const json::exception& e) {
                throw ProviderError(opts.fixtures + ": " + e.what());
            }
            ScriptDoc doc = j.contains("llm")
                                ? parse_script_doc(j.at("llm").dump(), opts.fixtures + ".llm")
                                : parse_script_doc(buf.str(), opts.fixtures);
            provider = std::make_unique<ScenarioProvider>(std::move(doc));
        }
    } else {
        provider = std::make_unique<HttpProvider>(opts.provider);
    }
    return provider;
}

int cmd_run(const CommonOpts& opts, const std::string& site_file, const std::string& goal,
            const std::string& traj_bank_file, const std::string& action_bank_file,
            const std::string& log_file) {
    const SimSite site = load_site(site_file);
    std::unique_ptr<Provider> provider = make_provider(opts);
    std::unique_ptr<Provider> recorder;
    Provider* active = provider.get();
    if (!opts.record_dir.empty()) {
        recorder = std::make_unique<RecordingProvider>(*provider, opts.record_dir);
        active = recorder.get();
    }
    PromptLibrary prompts(opts.prompts_dir);

    AgentConfig cfg = AgentConfig::preset(opts.preset);
    cfg.max_steps = opts.max_steps;
    cfg.max_backtracks = opts.max_backtracks;
    cfg.dsl_retries = opts.dsl_retries;
    cfg.seed = opts.seed;

    TrajectoryBank traj_bank;
    ActionBank action_bank;
    RerankerParams params;
    AgentContext ctx;
    ctx.provider = active;
    ctx.prompts = &prompts;
    if (!traj_bank_file.empty()) {
        traj_bank = load_trajectory_bank(traj_bank_file);
        ctx.trajectory_bank = &traj_bank;
    }
    if (!action_bank_file.empty()) {
        action_bank = load_action_bank(action_bank_file);
        ctx.action_bank = &action_bank;
    }
    if (!opts.model_file.empty()) {
        params = load_model(opts.model_file).params;
        ctx.reranker = &params;
    }

    Session session(site);
    EpisodeResult result = run_episode(session, goal, cfg, ctx);

    if (!log_file.empty()) {
        std::ofstream log(log_file, std::ios::binary | std::ios::trunc);
        if (!log) throw BankError("cannot open " + log_file + " for writing");
        write_trajectory_log(log, result);
    }
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";

    std::cout << "status: "
              << (result.status == EpisodeStatus::finished ? "finished" : result.abort_reason)
              << "\n";
    std::cout << "final_url: " << result.final_url << "\n";
    int executed = 0;
    for (const auto& s : result.steps)
        if (s.executed) executed++;
    std::cout << "steps: " << executed << " actor_calls: " << result.actor_calls
              << " backtracks: " << result.backtracks << "\n";
    std::cout << "answer: " << result.answer << "\n";
    return result.status == EpisodeStatus::finished ? 0 : 1;
}

int cmd_eval(const CommonOpts& opts, const std::string& scenario_dir,
             std::vector<std::string> scenario_files, const std::string& out_file) {
    if (!scenario_dir.empty()) {
        auto listed = list_scenario_files(scenario_dir);
        scenario_files.insert(scenario_files.end(), listed.begin(), listed.end());
    }
    if (scenario_files.empty())
        throw CLI::ValidationError("--scenarios", "no scenario files found");

    SuiteOptions so;
    so.preset = opts.preset;
    so.max_steps = opts.max_steps;
    so.max_backtracks = opts.max_backtracks;
    so.dsl_retries = opts.dsl_retries;
    so.seed = opts.seed;
    so.jobs = opts.jobs;
    so.prompt_dir = opts.prompts_dir;
    so.model_file = opts.model_file;

    SuiteSummary summary = run_suite(scenario_files, so);
    const std::string report = format_suite_report(summary, so.preset);
    std::cout << report;
    if (!out_file.empty()) {
        std::ofstream out(out_file, std::ios::binary | std::ios::trunc);
        if (!out) throw BankError("cannot open " + out_file + " for writing");
        out << report;
    }
    for (const auto& row : summary.rows)
        if (!row.error.empty()) return 1;
    return 0;
}

int cmd_curriculum(const CommonOpts& opts, const std::vector<std::string>& site_files,
                   const std::string& out_dir, int goals_per_site) {
    std::unique_ptr<Provider> provider = make_provider(opts);
    PromptLibrary prompts(opts.prompts_dir);

    CurriculumConfig cfg;
    cfg.site_files = site_files;
    cfg.out_dir = out_dir;
    cfg.goals_per_site = goals_per_site;
    cfg.max_steps = opts.max_steps;
    cfg.max_backtracks = opts.max_backtracks;
    cfg.dsl_retries = opts.dsl_retries;
    cfg.seed = opts.seed;

    CurriculumReport report = run_curriculum(cfg, *provider, prompts);
    std::cout << "episodes: " << (report.phase1_episodes + report.phase2_episodes) << " (phase1 "
              << report.phase1_episodes << ", phase2 " << report.phase2_episodes << ")\n";
    std::cout << "trajectory_demos: " << report.trajectory_demos << "\n";
    std::cout << "action_demos: " << report.action_demos << "\n";
    std::cout << "labeled_examples: " << report.labeled_examples << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", report.mean_reward);
    std::cout << "mean_reward: " << buf << "\n";
    std::cout << "wrote " << out_dir << "/{trajectory_bank,action_bank,training_set}.jsonl\n";
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_file, const std::string& out_file,
              int epochs, int batch_size, double lr) {
    auto examples = load_training_set(data_file);
    if (examples.empty()) throw BankError(data_file + ": training set is empty");
    Dataset all = to_dataset(examples);

    Dataset train_split, eval_split;
    split_dataset(all, opts.seed, train_split, eval_split);
    if (train_split.count == 0 || eval_split.count == 0) {
        train_split = all;
        eval_split = all;
    }

    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.learning_rate = lr;
    tc.seed = opts.seed;
    TrainResult tr = train(train_split, tc);
    EvalMetrics em = evaluate(tr.params, eval_split);

    for (size_t i = 0; i < tr.epochs.size(); ++i) {
        char line[96];
        std::snprintf(line, sizeof(line), "epoch %zu: loss %.6f acc %.4f\n", i + 1,
                      tr.epochs[i].loss, tr.epochs[i].accuracy);
        std::cout << line;
    }
    char line[128];
    std::snprintf(line, sizeof(line), "eval: acc %.4f f1 %.4f (tp %ld fp %ld tn %ld fn %ld)\n",
                  em.accuracy, em.f1, em.tp, em.fp, em.tn, em.fn);
    std::cout << line;

    nlohmann::ordered_json mj;
    mj["train_examples"] = train_split.count;
    mj["eval_examples"] = eval_split.count;
    mj["final_train_loss"] = tr.epochs.empty() ? 0.0 : tr.epochs.back().loss;
    mj["eval_accuracy"] = em.accuracy;
    mj["eval_f1"] = em.f1;
    save_model(out_file, tr.params, tc, mj.dump());
    std::cout << "wrote " << out_file << "\n";
    return 0;
}

int cmd_bank(const std::string& scenario_file, const std::string& traj_out,
             const std::string& action_out) {
    ScenarioDef def = load_scenario(scenario_file);
    const SimSite site = load_site(def.site_file);
    ScenarioProvider provider(def.script);
    SuiteBanks banks = build_banks(def, site, provider);
    if (!traj_out.empty()) save_trajectory_bank(traj_out, banks.trajectories);
    if (!action_out.empty()) save_action_bank(action_out, banks.actions);
    std::cout << "trajectories: " << banks.trajectories.entries.size()
              << " actions: " << banks.actions.entries.size() << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, int batch, int coords, double h) {
    std::mt19937_64 rng(seed);
    RerankerParams params = RerankerParams::he_uniform(rng());
    Dataset data;
    data.reserve(batch);
    std::vector<double> row(kModelInputDim);
    for (int i = 0; i < batch; ++i) {
        for (auto& v : row) {
            // Uniform in [-1, 1) from the raw 64-bit stream.
            v = (double)(rng() >> 11) * (1.0 / 4503599627370496.0) - 1.0;
        }
        data.add(row.data(), (uint8_t)(rng() & 1));
    }
    GradCheckReport report = gradient_check(params, data, rng(), h, coords);
    char line[128];
    std::snprintf(line, sizeof(line), "max_rel_error: %.3e (checked %d, skipped %d)\n",
                  report.max_rel_error, report.checked, report.skipped);
    std::cout << line;
    return report.max_rel_error < 1e-4 ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"web agent with demonstration retrieval and backtracking"};
    app.require_subcommand(1);

    CommonOpts opts;
    // The config file must be read before the flag values land, so scan for
    // it first; CLI11 then overwrites whatever the command line provides.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") opts.config_file = argv[i + 1];
    }
    try {
        if (!opts.config_file.empty()) apply_config_file(opts.config_file, opts);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_file, "JSON config file (comments allowed)");
        cmd->add_option("--preset", opts.preset,
                        "zero-shot | backtrack | demos | synthesis | full");
        cmd->add_option("--prompts", opts.prompts_dir, "prompt template directory");
        cmd->add_option("--fixtures", opts.fixtures,
                        "offline provider: fixture directory or scenario script file");
        cmd->add_option("--record", opts.record_dir, "record completions to this directory");
        cmd->add_option("--model", opts.model_file, "trained reranker weights");
        cmd->add_option("--max-steps", opts.max_steps, "step budget per episode");
        cmd->add_option("--max-backtracks", opts.max_backtracks, "backtrack budget per episode");
        cmd->add_option("--dsl-retries", opts.dsl_retries, "actor attempts per step");
        cmd->add_option("--jobs", opts.jobs, "parallel scenario workers");
        cmd->add_option("--seed", opts.seed, "rng seed");
    };

    // run
    auto* run_cmd = app.add_subcommand("run", "run one episode against a site");
    std::string site_file, goal, traj_bank_file, action_bank_file, log_file;
    run_cmd->add_option("--site", site_file, "site definition file")->required();
    run_cmd->add_option("--goal", goal, "goal text")->required();
    run_cmd->add_option("--traj-bank", traj_bank_file, "trajectory bank jsonl");
    run_cmd->add_option("--action-bank", action_bank_file, "action bank jsonl");
    run_cmd->add_option("--log", log_file, "write per-step jsonl log here");
    add_common(run_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "run a scenario suite and report");
    std::string scenario_dir, out_file;
    std::vector<std::string> scenario_files;
    eval_cmd->add_option("--scenarios", scenario_dir, "directory of scenario files");
    eval_cmd->add_option("--scenario", scenario_files, "individual scenario file (repeatable)");
    eval_cmd->add_option("--out", out_file, "also write the report here");
    add_common(eval_cmd);

    // curriculum
    auto* cur_cmd = app.add_subcommand("curriculum", "self-directed goal curriculum over sites");
    std::vector<std::string> site_files;
    std::string cur_out = "curriculum_out";
    int goals_per_site = 2;
    cur_cmd->add_option("--site", site_files, "site definition file (repeatable)")->required();
    cur_cmd->add_option("--out", cur_out, "output directory");
    cur_cmd->add_option("--goals-per-site", goals_per_site, "goals per site per phase");
    add_common(cur_cmd);

    // train-km
    auto* train_cmd = app.add_subcommand("train-km", "train the demo reranker");
    std::string data_file, model_out = "model.bin";
    int epochs = 8, batch_size = 32;
    double lr = 0.001;
    train_cmd->add_option("--data", data_file, "training_set.jsonl")->required();
    train_cmd->add_option("--out", model_out, "model output file");
    train_cmd->add_option("--epochs", epochs, "training epochs");
    train_cmd->add_option("--batch", batch_size, "mini-batch size");
    train_cmd->add_option("--lr", lr, "learning rate");
    add_common(train_cmd);

    // bank
    auto* bank_cmd = app.add_subcommand("bank", "build demo banks from a scenario's golden walk");
    std::string bank_scenario, traj_out, action_out;
    bank_cmd->add_option("--scenario", bank_scenario, "scenario file")->required();
    bank_cmd->add_option("--traj-out", traj_out, "trajectory bank output");
    bank_cmd->add_option("--action-out", action_out, "action bank output");
    add_common(bank_cmd);

    // gradcheck
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the reranker");
    int gc_batch = 16, gc_coords = 100;
    double gc_h = 1e-5;
    grad_cmd->add_option("--batch", gc_batch, "batch size");
    grad_cmd->add_option("--coords", gc_coords, "coordinates per tensor");
    grad_cmd->add_option("--eps", gc_h, "finite-difference step");
    add_common(grad_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run_cmd->parsed())
            return cmd_run(opts, site_file, goal, traj_bank_file, action_bank_file, log_file);
        if (eval_cmd->parsed()) return cmd_eval(opts, scenario_dir, scenario_files, out_file);
        if (cur_cmd->parsed()) return cmd_curriculum(opts, site_files, cur_out, goals_per_site);
        if (train_cmd->parsed())
            return cmd_train(opts, data_file, model_out, epochs, batch_size, lr);
        if (bank_cmd->parsed()) return cmd_bank(bank_scenario, traj_out, action_out);
        if (grad_cmd->parsed()) return cmd_gradcheck(opts.seed, gc_batch, gc_coords, gc_h);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace wayfinder
