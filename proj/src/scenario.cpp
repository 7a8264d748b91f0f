#include "wayfinder/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace wayfinder {

namespace {

using nlohmann::json;

std::string trim_copy(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

ReplySeq parse_replies(const json& j, const std::string& where) {
    ReplySeq seq;
    if (j.contains("reply")) {
        seq.replies.push_back(j.at("reply").get<std::string>());
    } else if (j.contains("replies")) {
        for (const auto& r : j.at("replies")) seq.replies.push_back(r.get<std::string>());
    }
    if (seq.replies.empty())
        throw ScenarioError(where + ": needs a non-empty \"reply\" or \"replies\"");
    return seq;
}

std::vector<std::string> split_keys(const std::string& joined) {
    std::vector<std::string> keys;
    size_t pos = 0;
    while (pos <= joined.size()) {
        size_t comma = joined.find(", ", pos);
        if (comma == std::string::npos) {
            keys.push_back(joined.substr(pos));
            break;
        }
        keys.push_back(joined.substr(pos, comma - pos));
        pos = comma + 2;
    }
    return keys;
}

}  // namespace

std::string ReplySeq::next() {
    if (replies.empty()) return "";
    size_t i = cursor < replies.size() ? cursor : replies.size() - 1;
    cursor++;
    return replies[i];
}

std::optional<std::string> find_marker_line(const std::string& text, const std::string& marker) {
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = trim_copy(text.substr(pos, eol - pos));
        if (line.rfind(marker, 0) == 0) return trim_copy(line.substr(marker.size()));
        pos = eol + 1;
    }
    return std::nullopt;
}

ScenarioProvider::ScenarioProvider(ScriptDoc doc, std::uint64_t embed_seed)
    : doc_(std::move(doc)), embed_seed_(embed_seed) {}

TaskScript* ScenarioProvider::find_task(const std::string& goal, const char* tag) {
    for (auto& t : doc_.tasks)
        if (t.goal == goal) return &t;
    throw ScenarioError(std::string("scenario miss: no task for goal \"") + goal + "\" (" + tag +
                        " call)");
}

std::string ScenarioProvider::do_chat(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mu_);
    if (request.messages.empty()) throw ScenarioError("scenario miss: empty message list");
    const std::string& content = request.messages.front().content;

    switch (request.tag) {
        case ChatTag::actor: {
            auto goal = find_marker_line(content, "GOAL:");
            auto url = find_marker_line(content, "PAGE_URL:");
            if (!goal || !url)
                throw ScenarioError("scenario miss: actor prompt lacks GOAL/PAGE_URL markers");
            TaskScript* task = find_task(*goal, "actor");
            for (auto& page : task->actor) {
                if (page.url != *url) continue;
                for (auto& rule : page.rules) {
                    if (rule.contains.empty() || content.find(rule.contains) != std::string::npos)
                        return rule.seq.next();
                }
                throw ScenarioError("scenario miss: no actor rule matched at " + *url);
            }
            throw ScenarioError("scenario miss: no actor page entry for " + *url + " (goal \"" +
                                *goal + "\")");
        }
        case ChatTag::reflect: {
            auto goal = find_marker_line(content, "GOAL:");
            if (!goal) throw ScenarioError("scenario miss: reflect prompt lacks GOAL marker");
            TaskScript* task = find_task(*goal, "reflect");
            const std::string after = find_marker_line(content, "AFTER_URL:").value_or("");
            const std::string before = find_marker_line(content, "BEFORE_URL:").value_or("");
            const std::string action = find_marker_line(content, "ACTION:").value_or("");
            const std::string plan = find_marker_line(content, "CURRENT_PLAN:").value_or("");
            const std::string keys_line = find_marker_line(content, "EXTRACTED_KEYS:").value_or("");
            const auto keys = split_keys(keys_line);
            for (auto& rule : task->reflect) {
                if (rule.after_url && *rule.after_url != after) continue;
                if (rule.before_url && *rule.before_url != before) continue;
                if (!rule.action_contains.empty() &&
                    action.find(rule.action_contains) == std::string::npos)
                    continue;
                if (!rule.plan_contains.empty() &&
                    plan.find(rule.plan_contains) == std::string::npos)
                    continue;
                if (!rule.extracted_has.empty()) {
                    bool hit = false;
                    for (const auto& k : keys)
                        if (k == rule.extracted_has) { hit = true; break; }
                    if (!hit) continue;
                }
                std::ostringstream os;
                os << "VERDICT: " << rule.verdict << "\n";
                if (!rule.plan.empty())
                    os << "PLAN: " << (rule.plan == "$current" ? plan : rule.plan) << "\n";
                if (!rule.feedback.empty()) os << "FEEDBACK: " << rule.feedback << "\n";
                return os.str();
            }
            throw ScenarioError("scenario miss: no reflect rule matched (goal \"" + *goal +
                                "\", after " + after + ", action \"" + action + "\")");
        }
        case ChatTag::answer: {
            auto goal = find_marker_line(content, "GOAL:");
            if (!goal) throw ScenarioError("scenario miss: answer prompt lacks GOAL marker");
            TaskScript* task = find_task(*goal, "answer");
            return task->answer.empty() ? "done" : task->answer;
        }
        case ChatTag::self_eval: {
            auto goal = find_marker_line(content, "GOAL:");
            if (!goal) throw ScenarioError("scenario miss: self_eval prompt lacks GOAL marker");
            TaskScript* task = find_task(*goal, "self_eval");
            return task->self_eval.empty() ? "1.0" : task->self_eval;
        }
        case ChatTag::synthesize_goal:
        case ChatTag::synthesize_action:
            return doc_.synthesis_reply;
        case ChatTag::goal_gen: {
            const std::string site = find_marker_line(content, "SITE:").value_or("");
            const bool followup = content.find("RESULTS:") != std::string::npos;
            for (auto& rule : doc_.goal_gen) {
                if (rule.followup != followup) continue;
                if (!rule.site_contains.empty() &&
                    site.find(rule.site_contains) == std::string::npos)
                    continue;
                return rule.seq.next();
            }
            throw ScenarioError("scenario miss: no goal_gen rule for site \"" + site + "\"" +
                                (followup ? " (followup)" : ""));
        }
    }
    throw ScenarioError("scenario miss: unhandled chat tag");
}

std::vector<Embedding> ScenarioProvider::do_embed(const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(pseudo_embedding(t, embed_seed_));
    return out;
}

// ====== file loading ======

namespace {

ReflectRule parse_reflect_rule(const json& j, const std::string& where) {
    ReflectRule r;
    if (j.contains("after_url")) r.after_url = j.at("after_url").get<std::string>();
    if (j.contains("before_url")) r.before_url = j.at("before_url").get<std::string>();
    r.action_contains = j.value("action_contains", "");
    r.extracted_has = j.value("extracted_has", "");
    r.plan_contains = j.value("plan_contains", "");
    r.verdict = j.value("verdict", "");
    if (r.verdict != "CONTINUE" && r.verdict != "FINISH" && r.verdict != "BACKTRACK")
        throw ScenarioError(where + ": verdict must be CONTINUE, FINISH or BACKTRACK");
    r.plan = j.value("plan", "");
    r.feedback = j.value("feedback", "");
    return r;
}

TaskScript parse_task(const json& j, const std::string& where) {
    TaskScript t;
    t.goal = j.at("goal").get<std::string>();
    if (j.contains("actor")) {
        int pi = 0;
        for (const auto& pj : j.at("actor")) {
            ActorPage page;
            page.url = pj.at("url").get<std::string>();
            const std::string pwhere = where + ".actor[" + std::to_string(pi) + "]";
            if (pj.contains("rules")) {
                int ri = 0;
                for (const auto& rj : pj.at("rules")) {
                    ActorRule rule;
                    rule.contains = rj.value("contains", "");
                    rule.seq = parse_replies(rj, pwhere + ".rules[" + std::to_string(ri) + "]");
                    page.rules.push_back(std::move(rule));
                    ri++;
                }
            } else {
                ActorRule rule;
                rule.seq = parse_replies(pj, pwhere);
                page.rules.push_back(std::move(rule));
            }
            t.actor.push_back(std::move(page));
            pi++;
        }
    }
    if (j.contains("reflect")) {
        int ri = 0;
        for (const auto& rj : j.at("reflect")) {
            t.reflect.push_back(
                parse_reflect_rule(rj, where + ".reflect[" + std::to_string(ri) + "]"));
            ri++;
        }
    }
    t.answer = j.value("answer", "");
    t.self_eval = j.value("self_eval", "");
    return t;
}

ScriptDoc parse_script_doc_json(const json& j, const std::string& source_name) {
    ScriptDoc doc;
    if (j.contains("synthesis_reply")) doc.synthesis_reply = j.at("synthesis_reply");
    if (j.contains("goal_gen")) {
        int gi = 0;
        for (const auto& gj : j.at("goal_gen")) {
            GoalGenRule rule;
            rule.site_contains = gj.value("site_contains", "");
            rule.followup = gj.value("followup", false);
            rule.seq = parse_replies(gj, source_name + ".goal_gen[" + std::to_string(gi) + "]");
            doc.goal_gen.push_back(std::move(rule));
            gi++;
        }
    }
    if (j.contains("tasks")) {
        int ti = 0;
        for (const auto& tj : j.at("tasks")) {
            doc.tasks.push_back(parse_task(tj, source_name + ".tasks[" + std::to_string(ti) + "]"));
            ti++;
        }
    }
    return doc;
}

json parse_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot open " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, true);  // comments allowed
    } catch (const json::exception& e) {
        throw ScenarioError(path + ": " + e.what());
    }
    return j;
}

}  // namespace

ScriptDoc parse_script_doc(const std::string& json_text, const std::string& source_name) {
    json j;
    try {
        j = json::parse(json_text, nullptr, true, true);
    } catch (const json::exception& e) {
        throw ScenarioError(source_name + ": " + e.what());
    }
    return parse_script_doc_json(j, source_name);
}

ScenarioDef load_scenario(const std::string& path) {
    const json j = parse_json_file(path);
    ScenarioDef def;
    try {
        def.id = j.at("id").get<std::string>();
        def.goal = j.at("goal").get<std::string>();
        const std::string site = j.at("site").get<std::string>();
        std::filesystem::path sp(site);
        if (sp.is_relative()) sp = std::filesystem::path(path).parent_path() / sp;
        def.site_file = sp.lexically_normal().string();
        def.trap = j.value("trap", false);
        if (j.contains("expect")) def.answer_contains = j.at("expect").value("answer_contains", "");
        if (j.contains("golden")) {
            const json& g = j.at("golden");
            for (const auto& sj : g.at("steps")) {
                GoldenStep s;
                s.plan = sj.at("plan").get<std::string>();
                s.action = sj.at("action").get<std::string>();
                s.verdict = sj.value("verdict", "CONTINUE");
                def.golden.push_back(std::move(s));
            }
            def.golden_answer = g.value("answer", "");
            def.golden_reward = g.value("reward", 0.9);
        }
        if (j.contains("negatives")) {
            for (const auto& nj : j.at("negatives")) {
                NegativeDemo n;
                n.url = nj.at("url").get<std::string>();
                n.plan = nj.at("plan").get<std::string>();
                n.action = nj.at("action").get<std::string>();
                def.negatives.push_back(std::move(n));
            }
        }
        def.script = parse_script_doc_json(j.at("llm"), path + ".llm");
    } catch (const json::exception& e) {
        throw ScenarioError(path + ": " + e.what());
    }
    return def;
}

}  // namespace wayfinder
