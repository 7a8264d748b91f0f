#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"
#include "wayfinder/agent.hpp"
#include "wayfinder/scenario.hpp"

using namespace wayfinder;

namespace {

SimSite kiosk_site() { return load_site(fixture_path("sites/kiosk.json")); }

ScenarioProvider make_provider(const std::string& doc_json) {
    return ScenarioProvider(parse_script_doc(doc_json, "inline"));
}

AgentContext ctx_for(Provider& p, const PromptLibrary& prompts) {
    AgentContext ctx;
    ctx.provider = &p;
    ctx.prompts = &prompts;
    return ctx;
}

const char* kGoal = "Find the counter hours.";

// Straightforward two-step success: panel -> help -> save the hours.
std::string happy_doc() {
    return R"JSON({
      "tasks": [{
        "goal": "Find the counter hours.",
        "actor": [
          {"url": "https://kiosk.test/panel", "rules": [{"reply": "click(4)"}]},
          {"url": "https://kiosk.test/help", "rules": [{"reply": "save_text(2, \"hours\")"}]}
        ],
        "reflect": [
          {"extracted_has": "hours", "verdict": "FINISH"},
          {"after_url": "https://kiosk.test/help", "verdict": "CONTINUE",
           "plan": "save the counter hours text"}
        ],
        "answer": "Counter hours: 9-17."
      }]
    })JSON";
}

}  // namespace

TEST_CASE("parse_verdict reads the three verdict shapes") {
    Verdict v = parse_verdict("VERDICT: FINISH");
    CHECK(v.kind == VerdictKind::Finish);

    v = parse_verdict("VERDICT: CONTINUE\nPLAN: open the garden page\nFEEDBACK: fine");
    CHECK(v.kind == VerdictKind::Continue);
    CHECK(v.next_plan == "open the garden page");
    CHECK(v.feedback == "fine");

    v = parse_verdict("  VERDICT:  backtrack  \nFEEDBACK: wrong branch");
    CHECK(v.kind == VerdictKind::Backtrack);
    CHECK(v.feedback == "wrong branch");

    // prose around the lines is ignored
    v = parse_verdict("Thinking it over.\nVERDICT: CONTINUE\nPLAN: next page\nmore prose");
    CHECK(v.kind == VerdictKind::Continue);
    CHECK(v.next_plan == "next page");

    v = parse_verdict("nothing useful at all");
    CHECK(v.kind == VerdictKind::Backtrack);
    CHECK(v.feedback == "unparseable reflection reply");

    v = parse_verdict("");
    CHECK(v.kind == VerdictKind::Backtrack);

    // only the first VERDICT line counts
    v = parse_verdict("VERDICT: FINISH\nVERDICT: BACKTRACK");
    CHECK(v.kind == VerdictKind::Finish);
}

TEST_CASE("verdict_name matches the wire strings") {
    CHECK(std::string(verdict_name(VerdictKind::Continue)) == "CONTINUE");
    CHECK(std::string(verdict_name(VerdictKind::Finish)) == "FINISH");
    CHECK(std::string(verdict_name(VerdictKind::Backtrack)) == "BACKTRACK");
}

TEST_CASE("presets toggle the four capabilities") {
    AgentConfig c = AgentConfig::preset("zero-shot");
    CHECK(!c.backtrack_enabled);
    CHECK(!c.demos_enabled);
    CHECK(!c.synthesis_enabled);
    CHECK(!c.reranker_enabled);

    // underscore spelling is accepted
    AgentConfig c2 = AgentConfig::preset("zero_shot");
    CHECK(!c2.backtrack_enabled);

    c = AgentConfig::preset("backtrack");
    CHECK(c.backtrack_enabled);
    CHECK(!c.demos_enabled);
    CHECK(!c.synthesis_enabled);
    CHECK(!c.reranker_enabled);

    c = AgentConfig::preset("demos");
    CHECK(c.backtrack_enabled);
    CHECK(c.demos_enabled);
    CHECK(!c.synthesis_enabled);
    CHECK(!c.reranker_enabled);

    c = AgentConfig::preset("synthesis");
    CHECK(c.backtrack_enabled);
    CHECK(c.demos_enabled);
    CHECK(c.synthesis_enabled);
    CHECK(!c.reranker_enabled);

    c = AgentConfig::preset("full");
    CHECK(c.backtrack_enabled);
    CHECK(c.demos_enabled);
    CHECK(c.synthesis_enabled);
    CHECK(c.reranker_enabled);

    CHECK_THROWS(AgentConfig::preset("turbo"));
}

TEST_CASE("a scripted episode runs to FINISH") {
    SimSite site = kiosk_site();
    Session session(site);
    ScenarioProvider provider = make_provider(happy_doc());
    PromptLibrary prompts;

    EpisodeResult r = run_episode(session, kGoal, AgentConfig::preset("backtrack"),
                                  ctx_for(provider, prompts));

    CHECK(r.status == EpisodeStatus::finished);
    CHECK(r.abort_reason.empty());
    CHECK(r.goal == kGoal);
    CHECK(r.answer == "Counter hours: 9-17.");
    CHECK(r.final_url == "https://kiosk.test/help");
    CHECK(r.actor_calls == 2);
    CHECK(r.backtracks == 0);

    REQUIRE(r.steps.size() == 2);
    CHECK(r.steps[0].plan == kGoal);
    CHECK(r.steps[0].action == "click(4)");
    CHECK(r.steps[0].url_before == "https://kiosk.test/panel");
    CHECK(r.steps[0].url_after == "https://kiosk.test/help");
    CHECK(r.steps[0].executed);
    CHECK(r.steps[0].verdict == VerdictKind::Continue);
    CHECK(r.steps[0].verdict_source == "llm");
    CHECK(r.steps[0].actor_attempts == 1);
    CHECK(!r.steps[0].obs_embedding.has_value());  // demos were off
    CHECK(r.steps[0].shown_demos.empty());

    CHECK(r.steps[1].plan == "save the counter hours text");
    CHECK(r.steps[1].verdict == VerdictKind::Finish);
    REQUIRE(r.steps[1].extracted_keys.size() == 1);
    CHECK(r.steps[1].extracted_keys[0] == "hours");

    const auto* hours = r.extracted.find("hours");
    REQUIRE(hours != nullptr);
    CHECK((*hours)[0] == "Counter hours: 9-17");

    // two actor calls, a reflection per executed step, one answer, nothing else
    CHECK(provider.ledger().chat_count(ChatTag::actor) == 2);
    CHECK(provider.ledger().chat_count(ChatTag::reflect) == 2);
    CHECK(provider.ledger().chat_count(ChatTag::answer) == 1);
    CHECK(provider.ledger().chat_count(ChatTag::synthesize_goal) == 0);
}

TEST_CASE("an ineffective action backtracks by rule without a reflection call") {
    SimSite site = kiosk_site();
    Session session(site);
    // the disabled print button swallows the click
    ScenarioProvider provider = make_provider(R"JSON({
      "tasks": [{
        "goal": "Print a ticket.",
        "actor": [{"url": "https://kiosk.test/panel", "rules": [{"reply": "click(3)"}]}],
        "reflect": [],
        "answer": "The printer is offline."
      }]
    })JSON");
    PromptLibrary prompts;

    AgentConfig cfg = AgentConfig::preset("backtrack");
    cfg.max_steps = 1;
    EpisodeResult r = run_episode(session, "Print a ticket.", cfg, ctx_for(provider, prompts));

    CHECK(r.status == EpisodeStatus::aborted);
    CHECK(r.abort_reason == "step budget exhausted");
    REQUIRE(r.steps.size() == 1);
    CHECK(r.steps[0].verdict == VerdictKind::Backtrack);
    CHECK(r.steps[0].verdict_source == "rule");
    CHECK(r.steps[0].feedback.find("action had no visible effect") != std::string::npos);
    CHECK(r.steps[0].feedback.find("printer offline") != std::string::npos);
    CHECK(r.backtracks == 1);
    CHECK(provider.ledger().chat_count(ChatTag::reflect) == 0);
    CHECK(provider.ledger().chat_count(ChatTag::answer) == 1);
    CHECK(r.answer.rfind("PARTIAL: episode aborted", 0) == 0);
}

TEST_CASE("a repeated failing action trips loop detection") {
    SimSite site = kiosk_site();
    Session session(site);
    ScenarioProvider provider = make_provider(R"JSON({
      "tasks": [{
        "goal": "Print a ticket.",
        "actor": [{"url": "https://kiosk.test/panel", "rules": [{"reply": "click(3)"}]}],
        "reflect": [],
        "answer": "no"
      }]
    })JSON");
    PromptLibrary prompts;

    EpisodeResult r = run_episode(session, "Print a ticket.",
                                  AgentConfig::preset("backtrack"),
                                  ctx_for(provider, prompts));

    CHECK(r.status == EpisodeStatus::aborted);
    CHECK(r.abort_reason == "backtrack budget exhausted");
    // first failure executes, the next five are caught before execution
    REQUIRE(r.steps.size() == 6);
    CHECK(r.steps[0].verdict_source == "rule");
    CHECK(r.steps[0].executed);
    for (size_t i = 1; i < r.steps.size(); ++i) {
        CHECK(r.steps[i].verdict_source == "loop");
        CHECK(!r.steps[i].executed);
        CHECK(r.steps[i].feedback.find("already failed") != std::string::npos);
    }
    CHECK(r.backtracks == 6);
    CHECK(provider.ledger().chat_count(ChatTag::reflect) == 0);
}

TEST_CASE("rejected scripts are retried with compiler feedback") {
    SimSite site = kiosk_site();
    Session session(site);
    ScenarioProvider provider = make_provider(R"JSON({
      "tasks": [{
        "goal": "Find the counter hours.",
        "actor": [
          {"url": "https://kiosk.test/panel",
           "rules": [{"replies": ["click(99)", "click(4)"]}]},
          {"url": "https://kiosk.test/help", "rules": [{"reply": "save_text(2, \"hours\")"}]}
        ],
        "reflect": [
          {"extracted_has": "hours", "verdict": "FINISH"},
          {"after_url": "https://kiosk.test/help", "verdict": "CONTINUE", "plan": "save it"}
        ],
        "answer": "9-17"
      }]
    })JSON");
    PromptLibrary prompts;

    EpisodeResult r = run_episode(session, kGoal, AgentConfig::preset("backtrack"),
                                  ctx_for(provider, prompts));

    CHECK(r.status == EpisodeStatus::finished);
    REQUIRE(r.steps.size() == 2);
    CHECK(r.steps[0].actor_attempts == 2);  // out-of-range index, then the fix
    CHECK(r.steps[0].action == "click(4)");
    CHECK(r.actor_calls == 3);
}

TEST_CASE("exhausting the retry budget is a compile backtrack") {
    SimSite site = kiosk_site();
    Session session(site);
    ScenarioProvider provider = make_provider(R"JSON({
      "tasks": [{
        "goal": "Print a ticket.",
        "actor": [{"url": "https://kiosk.test/panel", "rules": [{"reply": "not a script !!"}]}],
        "reflect": [],
        "answer": "no"
      }]
    })JSON");
    PromptLibrary prompts;

    AgentConfig cfg = AgentConfig::preset("zero-shot");
    cfg.max_steps = 2;
    EpisodeResult r = run_episode(session, "Print a ticket.", cfg, ctx_for(provider, prompts));

    CHECK(r.status == EpisodeStatus::aborted);
    CHECK(r.abort_reason == "step budget exhausted");
    REQUIRE(r.steps.size() == 2);
    for (const auto& s : r.steps) {
        CHECK(s.verdict_source == "compile");
        CHECK(s.action.empty());
        CHECK(!s.executed);
        CHECK(s.actor_attempts == 2);
        CHECK(s.feedback.find("no valid script produced") != std::string::npos);
    }
    CHECK(r.actor_calls == 4);
    CHECK(r.backtracks == 0);  // zero-shot never counts backtracks
}

TEST_CASE("zero-shot keeps moving instead of reverting") {
    SimSite site = kiosk_site();
    Session session(site);
    // first a dead click, then the useful path; no reverts along the way
    ScenarioProvider provider = make_provider(R"JSON({
      "tasks": [{
        "goal": "Find the counter hours.",
        "actor": [
          {"url": "https://kiosk.test/panel",
           "rules": [{"replies": ["click(3)", "click(4)"]}]},
          {"url": "https://kiosk.test/help", "rules": [{"reply": "save_text(2, \"hours\")"}]}
        ],
        "reflect": [
          {"extracted_has": "hours", "verdict": "FINISH"},
          {"after_url": "https://kiosk.test/help", "verdict": "CONTINUE", "plan": "save it"}
        ],
        "answer": "9-17"
      }]
    })JSON");
    PromptLibrary prompts;

    EpisodeResult r = run_episode(session, kGoal, AgentConfig::preset("zero-shot"),
                                  ctx_for(provider, prompts));

    CHECK(r.status == EpisodeStatus::finished);
    REQUIRE(r.steps.size() == 3);
    CHECK(r.steps[0].verdict_source == "rule");  // dead click, no effect
    CHECK(r.steps[1].action == "click(4)");      // same page, next scripted reply
    CHECK(r.steps[2].verdict == VerdictKind::Finish);
    CHECK(r.backtracks == 0);
}

TEST_CASE("demos from the action bank are shown and recorded") {
    SimSite site = kiosk_site();
    Session session(site);
    ScenarioProvider provider = make_provider(happy_doc());
    PromptLibrary prompts;

    ActionBank bank;
    for (int i = 0; i < 3; ++i) {
        ActionDemo d;
        d.observation = "<0: [h1] text: \"Ticket kiosk\"/>";
        d.plan = "demo plan " + std::to_string(i);
        d.action = i == 0 ? "click(4)" : "click(" + std::to_string(i) + ")";
        d.success = i < 2;  // third demo is a failure
        d.obs_embedding = pseudo_embedding(d.observation);
        d.plan_embedding = pseudo_embedding(d.plan);
        d.action_embedding = pseudo_embedding(d.action);
        bank.entries.push_back(d);
    }

    AgentContext ctx = ctx_for(provider, prompts);
    ctx.action_bank = &bank;

    EpisodeResult r = run_episode(session, kGoal, AgentConfig::preset("demos"), ctx);
    CHECK(r.status == EpisodeStatus::finished);
    REQUIRE(r.steps.size() == 2);

    // embeddings captured, positive demos shown, the failure held back
    REQUIRE(r.steps[0].obs_embedding.has_value());
    REQUIRE(r.steps[0].plan_embedding.has_value());
    CHECK(*r.steps[0].plan_embedding == pseudo_embedding(kGoal));
    REQUIRE(r.steps[0].shown_demos.size() == 2);
    for (const auto& sd : r.steps[0].shown_demos) {
        CHECK(sd.success);
        CHECK(sd.action != "click(2)");
    }
    CHECK(provider.ledger().chat_count(ChatTag::synthesize_action) == 0);  // demos preset
}

TEST_CASE("the full preset falls back to an untrained reranker") {
    SimSite site = kiosk_site();
    Session session(site);
    ScenarioProvider provider = make_provider(happy_doc());
    PromptLibrary prompts;

    ActionBank bank;
    for (int i = 0; i < 2; ++i) {
        ActionDemo d;
        d.observation = "<0: [h1] text: \"Ticket kiosk\"/>";
        d.plan = "demo plan " + std::to_string(i);
        d.action = "click(4)";
        d.success = true;
        d.obs_embedding = pseudo_embedding(d.observation);
        d.plan_embedding = pseudo_embedding(d.plan);
        d.action_embedding = pseudo_embedding(d.action);
        bank.entries.push_back(d);
    }

    AgentContext ctx = ctx_for(provider, prompts);
    ctx.action_bank = &bank;
    // No trained weights wired in: scoring must still work, with every demo
    // at similarity * 0.5.
    REQUIRE(ctx.reranker == nullptr);

    EpisodeResult r = run_episode(session, kGoal, AgentConfig::preset("full"), ctx);
    CHECK(r.status == EpisodeStatus::finished);
    REQUIRE(!r.steps.empty());
    CHECK(r.steps[0].shown_demos.size() == 2);
}

TEST_CASE("an empty bank behaves exactly like no bank") {
    SimSite site = kiosk_site();
    Session session(site);
    ScenarioProvider provider = make_provider(happy_doc());
    PromptLibrary prompts;

    ActionBank empty_bank;
    TrajectoryBank empty_traj;
    AgentContext ctx = ctx_for(provider, prompts);
    ctx.action_bank = &empty_bank;
    ctx.trajectory_bank = &empty_traj;

    EpisodeResult r = run_episode(session, kGoal, AgentConfig::preset("demos"), ctx);
    CHECK(r.status == EpisodeStatus::finished);
    CHECK(!r.steps[0].obs_embedding.has_value());
    CHECK(provider.ledger().embed_calls() == 0);
}

TEST_CASE("write_trajectory_log emits one stable JSON object per step") {
    SimSite site = kiosk_site();
    Session session(site);
    ScenarioProvider provider = make_provider(happy_doc());
    PromptLibrary prompts;
    EpisodeResult r = run_episode(session, kGoal, AgentConfig::preset("backtrack"),
                                  ctx_for(provider, prompts));

    std::ostringstream os;
    write_trajectory_log(os, r);
    std::istringstream in(os.str());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);  // every line parses alone
        CHECK(j.contains("goal"));
        CHECK(j.contains("url"));
        CHECK(j.contains("action"));
        CHECK(j.contains("verdict"));
        CHECK(j.contains("feedback"));
        CHECK(j.contains("extracted_keys"));
        n++;
    }
    CHECK(n == 2);

    // a rerun of the same episode logs byte-identically
    Session again(site);
    ScenarioProvider p2 = make_provider(happy_doc());
    EpisodeResult r2 = run_episode(again, kGoal, AgentConfig::preset("backtrack"),
                                   ctx_for(p2, prompts));
    std::ostringstream os2;
    write_trajectory_log(os2, r2);
    CHECK(os.str() == os2.str());
}
