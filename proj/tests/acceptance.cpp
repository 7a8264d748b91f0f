// End-to-end acceptance gate. Each numbered check prints one PASS/FAIL line;
// the process exits nonzero when any of them fails. Run it from anywhere,
// the fixture directory is compiled in.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wayfinder/agent.hpp"
#include "wayfinder/curriculum.hpp"
#include "wayfinder/dsl.hpp"
#include "wayfinder/evalsuite.hpp"
#include "wayfinder/knowledge_model.hpp"
#include "wayfinder/retrieval.hpp"
#include "wayfinder/scenario.hpp"

using namespace wayfinder;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int n, bool ok, const std::string& what) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", n, what.c_str());
    std::fflush(stdout);
    if (!ok) g_failures++;
}

void run_criterion(int n, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        auto [ok, detail] = fn();
        report(n, ok, detail);
    } catch (const std::exception& e) {
        report(n, false, std::string("unexpected exception: ") + e.what());
    }
}

double secs_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fixture(const std::string& rel) {
    return std::string(WAYFINDER_FIXTURE_DIR) + "/" + rel;
}

fs::path scratch_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("wayfinder_accept_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Embedding random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Embedding e(kEmbeddingDim);
    for (auto& v : e) v = g(rng);
    normalize_embedding(e);
    return e;
}

char fmtbuf[512];

// ====== criterion 1: rerank scalar against the closed form ======

std::pair<bool, std::string> check_rerank_oracle() {
    const auto t0 = clock_type::now();
    std::mt19937_64 rng(101);
    const RerankerParams model = RerankerParams::he_uniform(rng());
    auto u01 = [&rng] { return (double)(rng() >> 11) * (1.0 / 9007199254740992.0); };

    double worst = 0.0;
    std::vector<double> x(kModelInputDim);
    for (int set = 0; set < 200; ++set) {
        const int n = 1 + (int)(rng() % 12);
        std::vector<ActionDemo> cands(n);
        for (int i = 0; i < n; ++i) {
            cands[i].action = "cand_" + std::to_string(i);
            cands[i].obs_embedding = random_unit(rng);
            cands[i].plan_embedding = random_unit(rng);
            cands[i].action_embedding = random_unit(rng);
        }
        const Embedding h_o = random_unit(rng);
        const Embedding h_p = random_unit(rng);
        RerankWeights w;
        w.alpha1 = 0.1 + 0.9 * u01();
        w.alpha2 = 0.1 + 0.9 * u01();

        std::string argmax;
        for (double scale : {1.0, 0.1, 10.0}) {
            RerankWeights ws;
            ws.alpha1 = w.alpha1 * scale;
            ws.alpha2 = w.alpha2 * scale;
            auto scored = rerank_actions(cands, h_o, h_p, model, ws);
            if ((int)scored.size() != n)
                return {false, "reranker changed the candidate count"};
            if (scale == 1.0) {
                // The returned multiset must be the input multiset.
                std::vector<std::string> got, want;
                for (const auto& s : scored) got.push_back(s.demo.action);
                for (const auto& c : cands) want.push_back(c.action);
                std::sort(got.begin(), got.end());
                std::sort(want.begin(), want.end());
                if (got != want) return {false, "reranker lost or duplicated a candidate"};

                for (size_t i = 0; i + 1 < scored.size(); ++i)
                    if (scored[i].score < scored[i + 1].score)
                        return {false, "reranker output is not sorted by score"};

                for (const auto& s : scored) {
                    const ActionDemo& c = cands[(size_t)std::stoul(s.demo.action.substr(5))];
                    const double sim =
                        ws.alpha1 * dot(c.obs_embedding, h_o) + ws.alpha2 * dot(c.plan_embedding, h_p);
                    double* p = x.data();
                    for (const Embedding* part : {&c.obs_embedding, &c.plan_embedding,
                                                  &c.action_embedding, &h_o, &h_p}) {
                        std::copy(part->begin(), part->end(), p);
                        p += part->size();
                    }
                    const double mlp = km_forward(model, x);
                    worst = std::max(worst, std::abs(s.similarity - sim));
                    worst = std::max(worst, std::abs(s.score - sim * mlp));
                    if (worst > 1e-12)
                        return {false, "score deviates from the closed form by " +
                                           std::to_string(worst)};
                }
                argmax = scored.front().demo.action;
            } else if (scored.front().demo.action != argmax) {
                return {false, "argmax moved when both weights were scaled"};
            }
        }
    }
    const double dt = secs_since(t0);
    if (dt >= 5.0) return {false, "took too long"};
    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "rerank scores match the closed form on 200 candidate sets (max dev %.2e), "
                  "argmax invariant under weight scaling, %.2fs",
                  worst, dt);
    return {true, fmtbuf};
}

// ====== criterion 2: retrieval equals brute force ======

std::pair<bool, std::string> check_retrieval_brute_force() {
    const auto t0 = clock_type::now();
    std::mt19937_64 rng(202);
    const int kBank = 1000;

    TrajectoryBank traj;
    ActionBank actions;
    const Embedding hot = random_unit(rng);
    for (int i = 0; i < kBank; ++i) {
        TrajectoryDemo d;
        d.goal = "goal_" + std::to_string(i);
        d.site_id = "site";
        d.success = i % 3 == 0;
        d.reward = d.success ? 0.9 : 0.1;
        // Three exact ties at the top, plus scattered tie pairs further down.
        if (i < 3)
            d.goal_embedding = hot;
        else if (i % 50 == 0)
            d.goal_embedding = traj.entries[i - 1].goal_embedding;
        else
            d.goal_embedding = random_unit(rng);
        traj.entries.push_back(std::move(d));

        ActionDemo a;
        a.action = "act_" + std::to_string(i);
        a.plan = "plan";
        a.observation = "obs";
        a.success = i % 2 == 0;
        if (i < 3)
            a.plan_embedding = hot;
        else if (i % 50 == 0)
            a.plan_embedding = actions.entries[i - 1].plan_embedding;
        else
            a.plan_embedding = random_unit(rng);
        a.obs_embedding = a.plan_embedding;
        a.action_embedding = a.plan_embedding;
        actions.entries.push_back(std::move(a));
    }
    const Embedding query = hot;

    for (int k : {1, 5, 20}) {
        // Brute force on the trajectory bank: stable order, then success split.
        std::vector<int> order(kBank);
        for (int i = 0; i < kBank; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return dot(traj.entries[a].goal_embedding, query) >
                   dot(traj.entries[b].goal_embedding, query);
        });
        std::vector<std::string> want_pos, want_neg;
        for (int i = 0; i < k; ++i) {
            const TrajectoryDemo& d = traj.entries[order[i]];
            (d.success ? want_pos : want_neg).push_back(d.goal);
        }
        GoalRetrieval got = retrieve_for_goal(traj, query, k);
        std::vector<std::string> got_pos, got_neg;
        for (const auto& d : got.positives) got_pos.push_back(d.goal);
        for (const auto& d : got.negatives) got_neg.push_back(d.goal);
        if (got_pos != want_pos || got_neg != want_neg)
            return {false, "goal retrieval disagrees with brute force at k=" + std::to_string(k)};

        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return dot(actions.entries[a].plan_embedding, query) >
                   dot(actions.entries[b].plan_embedding, query);
        });
        std::vector<std::string> want_act;
        for (int i = 0; i < k; ++i) want_act.push_back(actions.entries[order[i]].action);
        std::vector<std::string> got_act;
        for (const auto& d : retrieve_for_action(actions, query, k))
            got_act.push_back(d.action);
        if (got_act != want_act)
            return {false,
                    "action retrieval disagrees with brute force at k=" + std::to_string(k)};
        // The planted three-way tie must come back in insertion order.
        if (got_act.front() != "act_0")
            return {false, "tie order lost at k=" + std::to_string(k)};
    }
    const double dt = secs_since(t0);
    if (dt >= 5.0) return {false, "took too long"};
    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "top-k retrieval equals brute force on 1000-entry banks for k in {1,5,20}, "
                  "ties in insertion order, %.2fs",
                  dt);
    return {true, fmtbuf};
}

// ====== criterion 3: gradients against finite differences ======

std::pair<bool, std::string> check_gradients() {
    double worst = 0.0;
    int checked_total = 0;
    for (int draw = 0; draw < 10; ++draw) {
        std::mt19937_64 rng(7000 + draw);
        RerankerParams params = RerankerParams::he_uniform(rng());
        Dataset batch;
        const int n = 4 + draw % 3;
        batch.reserve(n);
        std::vector<double> row(kModelInputDim);
        for (int i = 0; i < n; ++i) {
            for (auto& v : row) v = (double)(rng() >> 11) * (1.0 / 4503599627370496.0) - 1.0;
            batch.add(row.data(), (uint8_t)(rng() & 1));
        }
        GradCheckReport rep = gradient_check(params, batch, rng(), 1e-5, 100);
        worst = std::max(worst, rep.max_rel_error);
        checked_total += rep.checked;
        if (rep.checked == 0) return {false, "gradient check sampled nothing"};
        if (rep.max_rel_error >= 1e-4) {
            std::snprintf(fmtbuf, sizeof(fmtbuf),
                          "draw %d relative error %.3e exceeds 1e-4", draw, rep.max_rel_error);
            return {false, fmtbuf};
        }
    }
    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "analytic gradients within 1e-4 of central differences on 10 draws "
                  "(worst %.3e, %d coordinates)",
                  worst, checked_total);
    return {true, fmtbuf};
}

// ====== criterion 4: training quality, determinism, speed ======

Dataset planted_dataset(size_t n, uint64_t seed, std::vector<double>* w_out) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> w(kModelInputDim);
    double n2 = 0.0;
    for (auto& v : w) {
        v = g(rng);
        n2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& v : w) v *= inv;

    Dataset d;
    d.reserve(n);
    std::vector<double> x(kModelInputDim);
    const double scale = std::sqrt(kModelInputDim / 5.0);
    for (size_t i = 0; i < n; ++i) {
        const uint8_t y = (uint8_t)(i % 2);
        for (size_t k = 0; k < x.size(); ++k) x[k] = g(rng) + (y ? 1.0 : -1.0) * w[k] * scale;
        d.add(x.data(), y);
    }
    if (w_out) *w_out = std::move(w);
    return d;
}

std::pair<bool, std::string> check_training() {
    std::vector<double> w_star;
    Dataset all = planted_dataset(6250, 404, &w_star);

    // The labels must agree with the planted direction, or the dataset
    // itself proves nothing.
    int agree = 0;
    for (size_t i = 0; i < all.count; ++i) {
        double proj = 0.0;
        const double* row = all.row(i);
        for (size_t k = 0; k < kModelInputDim; ++k) proj += row[k] * w_star[k];
        if ((proj > 0.0) == (all.labels[i] != 0)) agree++;
    }
    if (agree < (int)(0.99 * all.count))
        return {false, "planted labels disagree with their own direction"};

    Dataset train_split, eval_split;
    split_dataset(all, 404, train_split, eval_split);
    if (train_split.count != 5000 || eval_split.count != 1250)
        return {false, "split sizes are off"};

    TrainConfig tc;
    tc.epochs = 8;
    tc.batch_size = 32;
    tc.learning_rate = 0.001;
    tc.seed = 505;
    TrainResult t1 = train(train_split, tc);
    EvalMetrics em = evaluate(t1.params, eval_split);
    if (em.accuracy < 0.95 || em.f1 < 0.95) {
        std::snprintf(fmtbuf, sizeof(fmtbuf), "eval acc %.4f f1 %.4f below 0.95", em.accuracy,
                      em.f1);
        return {false, fmtbuf};
    }

    TrainResult t2 = train(train_split, tc);
    if (!t1.params.bitwise_equal(t2.params))
        return {false, "same-seed retrain produced different weights"};

    Dataset all2 = planted_dataset(5399, 606, nullptr);
    Dataset train2, eval2;
    split_dataset(all2, 707, train2, eval2);
    if (train2.count != 4319 || eval2.count != 1080)
        return {false, "bank-scale split sizes are off"};
    const auto t0 = clock_type::now();
    TrainResult t3 = train(train2, tc);
    const double dt = secs_since(t0);
    EvalMetrics em2 = evaluate(t3.params, eval2);
    if (dt >= 60.0) {
        std::snprintf(fmtbuf, sizeof(fmtbuf), "4319-example training took %.1fs", dt);
        return {false, fmtbuf};
    }
    if (em2.accuracy < 0.95) return {false, "bank-scale training underfits"};

    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "5000/1250 training reaches acc %.4f f1 %.4f, same-seed retrain is bitwise "
                  "identical, 4319/1080 run takes %.1fs",
                  em.accuracy, em.f1, dt);
    return {true, fmtbuf};
}

// ====== criterion 5: action language corpus ======

std::pair<bool, std::string> check_dsl_corpus() {
    const std::vector<std::string> accept = {
        "click(0)",
        "click(12)",
        "click(999)",
        "press_enter(3)",
        "press_enter(0)",
        "go_back()",
        "go_back()\ngo_back()",
        "save_text(2, \"title\")",
        "save_text(15, \"deep index\")",
        "save_text(1, \"\")",
        "save_text(0, \"punct !?.,:;\")",
        "save_text(1, \"line\\nbreak\")",
        "save_text(2, \"tab\\tstop\")",
        "save_text(9, \"price with \\\"quotes\\\"\")",
        "save_text(4, \"backslash \\\\ here\")",
        "save_link(4, \"first result\")",
        "save_link(0, \"home\")",
        "save_link(1, \"nav\")\ngo_back()",
        "save_list(3, 7)",
        "save_list(0, 1)",
        "save_list(6, 10)\nsave_text(11, \"heading\")",
        "type_input(1, \"red mug\")",
        "type_input(0, \"\")",
        "type_input(5, \"query with spaces and 123\")",
        "x = save_text(0, \"header\")",
        "items = save_list(2, 5)",
        "result = save_text(4, \"the answer\")",
        "a = save_text(1, \"x\")\nb = save_link(2, \"y\")",
        "click(3)\nsave_text(1, \"result\")",
        "type_input(2, \"laptop\")\npress_enter(2)",
        "save_text(0, \"a\")\nsave_text(1, \"b\")\nsave_text(2, \"c\")",
        "go_back()\nclick(1)",
        "x = save_list(4, 9)\nsave_text(0, \"total\")",
        "click(2)\nclick(3)\nclick(4)",
        "\nclick(1)\n\nsave_text(0, \"t\")\n",
        "  click(7)  ",
        "click(1)\ntype_input(2, \"abc\")\npress_enter(2)\nsave_text(3, \"out\")",
        "click(0)\ngo_back()\nclick(0)",
        "click(0)\nclick(1)\nclick(2)\nclick(3)\nclick(4)\nclick(5)\nclick(6)\nclick(7)\n"
        "click(8)\nclick(9)",
        "save_text(3, \"multi word value here\")",
    };
    const std::vector<std::pair<std::string, CompileErrorKind>> reject = {
        {"", CompileErrorKind::syntax},
        {"   \n  ", CompileErrorKind::syntax},
        {"click 3", CompileErrorKind::syntax},
        {"click(3", CompileErrorKind::syntax},
        {"click(3))", CompileErrorKind::syntax},
        {"click(3) save_text(0, \"x\")", CompileErrorKind::syntax},
        {"click(-1)", CompileErrorKind::syntax},
        {"click(\"3\")", CompileErrorKind::syntax},
        {"save_text(1, unbound)", CompileErrorKind::syntax},
        {"if (1) { click(1) }", CompileErrorKind::syntax},
        {"for x in items: click(x)", CompileErrorKind::syntax},
        {"save_list(1, 2)\nsave_list(3, 4)", CompileErrorKind::syntax},
        {"click(0)\nclick(1)\nclick(2)\nclick(3)\nclick(4)\nclick(5)\nclick(6)\nclick(7)\n"
         "click(8)\nclick(9)\nclick(10)",
         CompileErrorKind::syntax},
        {"if(1)", CompileErrorKind::unknown_builtin},
        {"while(1)", CompileErrorKind::unknown_builtin},
        {"scroll(3)", CompileErrorKind::unknown_builtin},
        {"hover(2)", CompileErrorKind::unknown_builtin},
        {"click()", CompileErrorKind::arity},
        {"click(1, 2)", CompileErrorKind::arity},
        {"save_text(1)", CompileErrorKind::arity},
        {"go_back(1)", CompileErrorKind::arity},
    };
    if (accept.size() != 40) return {false, "accept corpus is not 40 cases"};
    if (reject.size() < 20) return {false, "reject corpus is under 20 cases"};

    std::vector<bool> seen((size_t)Builtin::go_back + 1, false);
    for (size_t i = 0; i < accept.size(); ++i) {
        ParseResult r = parse_script(accept[i]);
        if (!r.ok())
            return {false, "accept case " + std::to_string(i) + " failed to parse: " +
                               r.error->message};
        for (const auto& call : r.script->calls) seen[(size_t)call.builtin] = true;

        const std::string printed = print_script(*r.script);
        ParseResult r2 = parse_script(printed);
        if (!r2.ok())
            return {false, "reprint of accept case " + std::to_string(i) + " failed to parse"};
        if (!(*r2.script == *r.script))
            return {false, "round trip changed accept case " + std::to_string(i)};
        if (print_script(*r2.script) != printed)
            return {false, "reprint is not a fixed point for case " + std::to_string(i)};
    }
    for (bool s : seen)
        if (!s) return {false, "accept corpus misses a builtin"};

    for (size_t i = 0; i < reject.size(); ++i) {
        ParseResult r = parse_script(reject[i].first);
        if (r.ok()) return {false, "reject case " + std::to_string(i) + " parsed"};
        if (r.error->kind != reject[i].second)
            return {false, "reject case " + std::to_string(i) + " reported " +
                               compile_error_kind_name(r.error->kind)};
    }
    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "40 accepted scripts cover every builtin and round-trip through the printer, "
                  "%zu rejects carry the right error kinds",
                  reject.size());
    return {true, fmtbuf};
}

// ====== criteria 6, 7, 10: scenario suites ======

std::map<std::string, bool> trap_map(const std::vector<std::string>& files) {
    std::map<std::string, bool> traps;
    for (const auto& f : files) {
        ScenarioDef def = load_scenario(f);
        traps[def.id] = def.trap;
    }
    return traps;
}

SuiteSummary run_preset(const std::vector<std::string>& files, const std::string& preset) {
    SuiteOptions so;
    so.preset = preset;
    so.seed = 7;
    return run_suite(files, so);
}

std::pair<bool, std::string> check_base_suite() {
    const auto t0 = clock_type::now();
    auto files = list_scenario_files(fixture("scenarios/base"));
    if (files.size() != 10) return {false, "base suite is not 10 scenarios"};
    auto traps = trap_map(files);
    int ntraps = 0;
    for (const auto& [id, trap] : traps)
        if (trap) ntraps++;
    if (ntraps < 3) return {false, "base suite has fewer than 3 trap scenarios"};

    SuiteSummary with = run_preset(files, "backtrack");
    for (const auto& row : with.rows)
        if (!row.error.empty()) return {false, row.id + " errored: " + row.error};
    if (with.solved != 10) {
        std::snprintf(fmtbuf, sizeof(fmtbuf), "backtracking solved only %d/10", with.solved);
        return {false, fmtbuf};
    }

    SuiteSummary without = run_preset(files, "zero-shot");
    for (const auto& row : without.rows) {
        if (!row.error.empty()) return {false, row.id + " errored: " + row.error};
        if (traps.at(row.id) && row.solved)
            return {false, "zero-shot solved the trap " + row.id};
        if (!traps.at(row.id) && !row.solved)
            return {false, "zero-shot failed the plain scenario " + row.id};
    }
    const double dt = secs_since(t0);
    if (dt >= 30.0) return {false, "took too long"};
    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "backtracking solves 10/10; zero-shot fails all %d traps and solves the rest "
                  "(%d/10), %.1fs",
                  ntraps, without.solved, dt);
    return {true, fmtbuf};
}

std::pair<bool, std::string> check_demo_gated_suite() {
    auto files = list_scenario_files(fixture("scenarios/demo_gated"));
    if (files.size() != 10) return {false, "demo-gated suite is not 10 scenarios"};

    SuiteSummary demos = run_preset(files, "demos");
    SuiteSummary full = run_preset(files, "full");
    SuiteSummary plain = run_preset(files, "backtrack");
    for (const auto* s : {&demos, &full, &plain})
        for (const auto& row : s->rows)
            if (!row.error.empty()) return {false, row.id + " errored: " + row.error};

    if (demos.solved < 8 || full.solved < 8) {
        std::snprintf(fmtbuf, sizeof(fmtbuf), "demos %d/10 full %d/10, need at least 8",
                      demos.solved, full.solved);
        return {false, fmtbuf};
    }
    if (plain.solved > 5) {
        std::snprintf(fmtbuf, sizeof(fmtbuf),
                      "suite is not demo-gated, backtracking alone solved %d/10", plain.solved);
        return {false, fmtbuf};
    }
    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "demonstrations solve %d/10 and full %d/10 where backtracking alone manages "
                  "%d/10",
                  demos.solved, full.solved, plain.solved);
    return {true, fmtbuf};
}

std::pair<bool, std::string> check_actor_call_economy() {
    auto files = list_scenario_files(fixture("scenarios/base"));
    SuiteSummary demos = run_preset(files, "demos");
    SuiteSummary zero = run_preset(files, "zero-shot");
    for (const auto* s : {&demos, &zero})
        for (const auto& row : s->rows)
            if (!row.error.empty()) return {false, row.id + " errored: " + row.error};

    const std::string rep = format_suite_report(demos, "demos");
    if (rep.find("mean_actor_calls_per_success:") == std::string::npos)
        return {false, "report drops the mean actor call line"};
    if (demos.solved == 0 || zero.solved == 0)
        return {false, "one of the presets solved nothing"};
    if (!(demos.mean_actor_calls_per_success < zero.mean_actor_calls_per_success)) {
        std::snprintf(fmtbuf, sizeof(fmtbuf), "demos mean %.2f is not below zero-shot mean %.2f",
                      demos.mean_actor_calls_per_success, zero.mean_actor_calls_per_success);
        return {false, fmtbuf};
    }
    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "mean actor calls per solved episode: %.2f with demonstrations vs %.2f "
                  "zero-shot",
                  demos.mean_actor_calls_per_success, zero.mean_actor_calls_per_success);
    return {true, fmtbuf};
}

// ====== criterion 8: curriculum determinism ======

CurriculumReport run_curriculum_once(const fs::path& out_dir) {
    const std::string text = slurp(fixture("curriculum/script.json"));
    ScriptDoc doc = parse_script_doc(text, "script.json");
    ScenarioProvider provider(std::move(doc));
    PromptLibrary prompts("");
    CurriculumConfig cfg;
    cfg.site_files = {fixture("sites/shop.json"), fixture("sites/docs.json")};
    cfg.out_dir = out_dir.string();
    cfg.goals_per_site = 2;
    cfg.seed = 11;
    return run_curriculum(cfg, provider, prompts);
}

std::pair<bool, std::string> check_curriculum() {
    const fs::path dir_a = scratch_dir("curriculum_a");
    const fs::path dir_b = scratch_dir("curriculum_b");
    CurriculumReport ra = run_curriculum_once(dir_a);
    CurriculumReport rb = run_curriculum_once(dir_b);

    if (ra.phase1_episodes != 4 || ra.phase2_episodes != 4)
        return {false, "episode counts are off"};
    if (ra.trajectory_demos != 8)
        return {false, "trajectory bank should hold one demo per episode"};
    if (ra.action_demos != 18) {
        std::snprintf(fmtbuf, sizeof(fmtbuf), "action bank holds %d demos, expected 18",
                      ra.action_demos);
        return {false, fmtbuf};
    }
    if (ra.labeled_examples <= 0) return {false, "training set came out empty"};
    if (rb.labeled_examples != ra.labeled_examples) return {false, "reruns disagree on counts"};

    for (const char* name :
         {"trajectory_bank.jsonl", "action_bank.jsonl", "training_set.jsonl", "report.json"}) {
        const std::string a = slurp(dir_a / name);
        const std::string b = slurp(dir_b / name);
        if (a.empty()) return {false, std::string(name) + " is empty"};
        if (a != b) return {false, std::string(name) + " differs between same-seed runs"};
    }
    std::snprintf(fmtbuf, sizeof(fmtbuf),
                  "two sites produce 8 trajectory demos, 18 action demos, %d labeled rows; "
                  "same-seed reruns are byte-identical",
                  ra.labeled_examples);
    return {true, fmtbuf};
}

// ====== criterion 9: rule-based backtrack needs no reflection ======

std::pair<bool, std::string> check_rule_backtrack() {
    ScenarioDef def = load_scenario(fixture("scenarios/base/10_kiosk_ticket.json"));
    const SimSite site = load_site(def.site_file);
    ScenarioProvider provider(def.script);
    PromptLibrary prompts("");

    AgentConfig cfg = AgentConfig::preset("backtrack");
    cfg.max_steps = 1;
    AgentContext ctx;
    ctx.provider = &provider;
    ctx.prompts = &prompts;

    Session session(site);
    EpisodeResult result = run_episode(session, def.goal, cfg, ctx);
    if (result.steps.empty()) return {false, "episode recorded no steps"};
    const AgentStep& first = result.steps[0];
    if (first.verdict != VerdictKind::Backtrack || first.verdict_source != "rule")
        return {false, "first step verdict came from '" + first.verdict_source +
                           "', expected the no-effect rule"};
    if (first.feedback.find("no visible effect") == std::string::npos)
        return {false, "rule feedback does not name the dead action"};
    const long reflections = provider.ledger().chat_count(ChatTag::reflect);
    if (reflections != 0) {
        std::snprintf(fmtbuf, sizeof(fmtbuf), "%ld reflection calls went out", reflections);
        return {false, fmtbuf};
    }
    return {true,
            "a click with no page effect backtracks by rule with zero reflection calls"};
}

}  // namespace

int main() {
    run_criterion(1, check_rerank_oracle);
    run_criterion(2, check_retrieval_brute_force);
    run_criterion(3, check_gradients);
    run_criterion(4, check_training);
    run_criterion(5, check_dsl_corpus);
    run_criterion(6, check_base_suite);
    run_criterion(7, check_demo_gated_suite);
    run_criterion(8, check_curriculum);
    run_criterion(9, check_rule_backtrack);
    run_criterion(10, check_actor_call_economy);
    if (g_failures) {
        std::printf("%d of 10 criteria failed\n", g_failures);
        return 1;
    }
    std::printf("all 10 criteria passed\n");
    return 0;
}
