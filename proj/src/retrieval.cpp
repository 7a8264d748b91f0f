#include "wayfinder/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace wayfinder {

using ordered_json = nlohmann::ordered_json;

namespace {

// Indices of the k best by similarity, ties resolved by insertion order.
std::vector<size_t> top_k_indices(const std::vector<double>& sims, int k) {
    std::vector<size_t> idx(sims.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return sims[a] > sims[b]; });
    if (k >= 0 && idx.size() > static_cast<size_t>(k)) idx.resize(k);
    return idx;
}

}  // namespace

GoalRetrieval retrieve_for_goal(const TrajectoryBank& bank, const Embedding& goal_embedding,
                                int k) {
    std::vector<double> sims(bank.entries.size());
    for (size_t i = 0; i < bank.entries.size(); ++i)
        sims[i] = dot(bank.entries[i].goal_embedding, goal_embedding);
    GoalRetrieval out;
    for (size_t i : top_k_indices(sims, k)) {
        const auto& d = bank.entries[i];
        (d.success ? out.positives : out.negatives).push_back(d);
    }
    return out;
}

std::vector<ActionDemo> retrieve_for_action(const ActionBank& bank,
                                            const Embedding& plan_embedding, int k) {
    std::vector<double> sims(bank.entries.size());
    for (size_t i = 0; i < bank.entries.size(); ++i)
        sims[i] = dot(bank.entries[i].plan_embedding, plan_embedding);
    std::vector<ActionDemo> out;
    for (size_t i : top_k_indices(sims, k)) out.push_back(bank.entries[i]);
    return out;
}

std::vector<ActionDemo> filter_by_success(const std::vector<ActionDemo>& demos, bool success) {
    std::vector<ActionDemo> out;
    for (const auto& d : demos) {
        if (d.success == success) out.push_back(d);
    }
    return out;
}

std::vector<double> rerank_input(const ActionDemo& demo, const Embedding& h_o,
                                 const Embedding& h_p) {
    std::vector<double> x;
    x.reserve(kModelInputDim);
    x.insert(x.end(), demo.obs_embedding.begin(), demo.obs_embedding.end());
    x.insert(x.end(), demo.plan_embedding.begin(), demo.plan_embedding.end());
    x.insert(x.end(), demo.action_embedding.begin(), demo.action_embedding.end());
    x.insert(x.end(), h_o.begin(), h_o.end());
    x.insert(x.end(), h_p.begin(), h_p.end());
    return x;
}

std::vector<ScoredDemo> rerank_actions(const std::vector<ActionDemo>& candidates,
                                       const Embedding& h_o, const Embedding& h_p,
                                       const RerankerParams& model, RerankWeights weights) {
    std::vector<ScoredDemo> out;
    out.reserve(candidates.size());
    for (const auto& d : candidates) {
        ScoredDemo s;
        s.similarity = weights.alpha1 * dot(d.obs_embedding, h_o) +
                       weights.alpha2 * dot(d.plan_embedding, h_p);
        s.score = s.similarity * km_forward(model, rerank_input(d, h_o, h_p));
        s.demo = d;
        out.push_back(std::move(s));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ScoredDemo& a, const ScoredDemo& b) { return a.score > b.score; });
    return out;
}

std::vector<ScoredDemo> sample_positives(const std::vector<ScoredDemo>& scored, int k_plus,
                                         std::mt19937_64& rng) {
    std::vector<ScoredDemo> pool;
    for (const auto& s : scored) {
        if (s.demo.success) pool.push_back(s);
    }
    if (static_cast<int>(pool.size()) <= k_plus) return pool;

    std::vector<ScoredDemo> out;
    while (static_cast<int>(out.size()) < k_plus) {
        double max_score = pool[0].score;
        for (const auto& s : pool) max_score = std::max(max_score, s.score);
        std::vector<double> weights(pool.size());
        double total = 0.0;
        for (size_t i = 0; i < pool.size(); ++i) {
            weights[i] = std::exp(pool[i].score - max_score);
            total += weights[i];
        }
        double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0) * total;
        size_t chosen = pool.size() - 1;
        double acc = 0.0;
        for (size_t i = 0; i < pool.size(); ++i) {
            acc += weights[i];
            if (u < acc) {
                chosen = i;
                break;
            }
        }
        out.push_back(pool[chosen]);
        pool.erase(pool.begin() + chosen);
    }
    return out;
}

// ====== persistence ======

namespace {

ordered_json embedding_to_json(const Embedding& e) {
    ordered_json arr = ordered_json::array();
    for (double v : e) arr.push_back(v);
    return arr;
}

Embedding embedding_from_json(const ordered_json& j, const std::string& where) {
    if (!j.is_array() || j.size() != kEmbeddingDim)
        throw BankError(where + ": embedding must be an array of " +
                        std::to_string(kEmbeddingDim) + " numbers");
    Embedding e;
    e.reserve(kEmbeddingDim);
    for (const auto& v : j) {
        if (!v.is_number()) throw BankError(where + ": embedding holds a non-number");
        e.push_back(v.get<double>());
    }
    return e;
}

template <typename PerLine>
void for_each_jsonl_line(const std::string& path, PerLine&& per_line) {
    std::ifstream in(path);
    if (!in) throw BankError(path + ": cannot open");
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty())
            throw BankError(path + ": line " + std::to_string(line_no) + ": empty line");
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw BankError(path + ": line " + std::to_string(line_no) +
                            ": corrupt record: " + e.what());
        }
        per_line(j, path + ": line " + std::to_string(line_no));
    }
}

}  // namespace

void save_trajectory_bank(const std::string& path, const TrajectoryBank& bank) {
    std::ofstream out(path);
    if (!out) throw BankError(path + ": cannot open for writing");
    for (const auto& d : bank.entries) {
        ordered_json j;
        j["goal"] = d.goal;
        j["site_id"] = d.site_id;
        j["answer"] = d.answer;
        j["reward"] = d.reward;
        j["success"] = d.success;
        ordered_json steps = ordered_json::array();
        for (const auto& s : d.steps) {
            steps.push_back({{"plan", s.plan},
                             {"action", s.action},
                             {"dom_digest", s.dom_digest},
                             {"verdict", s.verdict}});
        }
        j["steps"] = steps;
        j["goal_embedding"] = embedding_to_json(d.goal_embedding);
        out << j.dump() << "\n";
    }
    if (!out) throw BankError(path + ": write failed");
}

TrajectoryBank load_trajectory_bank(const std::string& path) {
    TrajectoryBank bank;
    for_each_jsonl_line(path, [&](const ordered_json& j, const std::string& where) {
        if (!j.is_object()) throw BankError(where + ": expected an object");
        TrajectoryDemo d;
        try {
            d.goal = j.at("goal").get<std::string>();
            d.site_id = j.at("site_id").get<std::string>();
            d.answer = j.at("answer").get<std::string>();
            d.reward = j.at("reward").get<double>();
            d.success = j.at("success").get<bool>();
            for (const auto& s : j.at("steps")) {
                TrajectoryStep step;
                step.plan = s.at("plan").get<std::string>();
                step.action = s.at("action").get<std::string>();
                step.dom_digest = s.at("dom_digest").get<std::string>();
                step.verdict = s.at("verdict").get<std::string>();
                d.steps.push_back(std::move(step));
            }
        } catch (const nlohmann::json::exception& e) {
            throw BankError(where + ": " + e.what());
        }
        if (d.reward < 0.0 || d.reward > 1.0)
            throw BankError(where + ": reward " + std::to_string(d.reward) +
                            " outside [0, 1]");
        if (d.success != (d.reward >= 0.5))
            throw BankError(where + ": success flag does not match reward");
        d.goal_embedding = embedding_from_json(j.at("goal_embedding"), where);
        bank.entries.push_back(std::move(d));
    });
    return bank;
}

void save_action_bank(const std::string& path, const ActionBank& bank) {
    std::ofstream out(path);
    if (!out) throw BankError(path + ": cannot open for writing");
    for (const auto& d : bank.entries) {
        ordered_json j;
        j["observation"] = d.observation;
        j["plan"] = d.plan;
        j["action"] = d.action;
        j["success"] = d.success;
        j["obs_embedding"] = embedding_to_json(d.obs_embedding);
        j["plan_embedding"] = embedding_to_json(d.plan_embedding);
        j["action_embedding"] = embedding_to_json(d.action_embedding);
        out << j.dump() << "\n";
    }
    if (!out) throw BankError(path + ": write failed");
}

ActionBank load_action_bank(const std::string& path) {
    ActionBank bank;
    for_each_jsonl_line(path, [&](const ordered_json& j, const std::string& where) {
        if (!j.is_object()) throw BankError(where + ": expected an object");
        ActionDemo d;
        try {
            d.observation = j.at("observation").get<std::string>();
            d.plan = j.at("plan").get<std::string>();
            d.action = j.at("action").get<std::string>();
            d.success = j.at("success").get<bool>();
        } catch (const nlohmann::json::exception& e) {
            throw BankError(where + ": " + e.what());
        }
        d.obs_embedding = embedding_from_json(j.at("obs_embedding"), where);
        d.plan_embedding = embedding_from_json(j.at("plan_embedding"), where);
        d.action_embedding = embedding_from_json(j.at("action_embedding"), where);
        bank.entries.push_back(std::move(d));
    });
    return bank;
}

}  // namespace wayfinder
