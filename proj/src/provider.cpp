#include "wayfinder/provider.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

// HTTPS needed for real endpoints; tests never touch the network.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace wayfinder {

using nlohmann::json;

const char* chat_tag_name(ChatTag t) {
    switch (t) {
        case ChatTag::actor: return "actor";
        case ChatTag::reflect: return "reflect";
        case ChatTag::synthesize_goal: return "synthesize_goal";
        case ChatTag::synthesize_action: return "synthesize_action";
        case ChatTag::answer: return "answer";
        case ChatTag::goal_gen: return "goal_gen";
        case ChatTag::self_eval: return "self_eval";
    }
    return "?";
}

std::optional<ChatTag> chat_tag_from_name(const std::string& name) {
    for (int i = 0; i < kChatTagCount; ++i) {
        ChatTag t = static_cast<ChatTag>(i);
        if (name == chat_tag_name(t)) return t;
    }
    return std::nullopt;
}

double temperature_for(ChatTag tag, bool curriculum_actor) {
    if (tag == ChatTag::actor && curriculum_actor) return 0.4;
    return 0.0;
}

ChatRequest ChatRequest::make(ChatTag tag, std::vector<ChatMessage> messages,
                              bool curriculum_actor) {
    ChatRequest r;
    r.tag = tag;
    r.messages = std::move(messages);
    r.temperature = temperature_for(tag, curriculum_actor);
    return r;
}

long CallLedger::total_chat() const {
    long n = 0;
    for (const auto& c : chat_) n += c;
    return n;
}

void CallLedger::reset() {
    for (auto& c : chat_) c = 0;
    embed_calls_ = 0;
    embed_texts_ = 0;
}

uint64_t fnv1a64(const std::string& data) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string prompt_hash(const ChatRequest& request) {
    std::string blob = chat_tag_name(request.tag);
    blob += '\0';
    for (const auto& m : request.messages) {
        blob += m.role;
        blob += '\0';
        blob += m.content;
        blob += '\0';
    }
    uint64_t h = fnv1a64(blob);
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

Embedding pseudo_embedding(const std::string& text, uint64_t seed) {
    Embedding v(kEmbeddingDim, 0.0);
    auto scatter = [&](const std::string& gram) {
        uint64_t state = fnv1a64(gram) ^ seed;
        uint64_t a = splitmix64(state);
        uint64_t b = splitmix64(state);
        size_t idx = a % kEmbeddingDim;
        // Map to [-1, 1); exact in binary64, so identical across platforms.
        double w = static_cast<double>(b >> 11) * (1.0 / 4503599627370496.0) - 1.0;
        v[idx] += w;
    };
    if (text.size() < 3) {
        scatter(text);
    } else {
        for (size_t i = 0; i + 3 <= text.size(); ++i) scatter(text.substr(i, 3));
    }
    normalize_embedding(v);
    return v;
}

void normalize_embedding(Embedding& v) {
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 <= 0.0) {
        v.assign(kEmbeddingDim, 0.0);
        v[0] = 1.0;
        return;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
}

double dot(const Embedding& a, const Embedding& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size() && i < b.size(); ++i) s += a[i] * b[i];
    return s;
}

// ====== HttpProvider ======

HttpProvider::HttpProvider(ProviderConfig config)
    : config_(std::move(config)), free_slots_(config_.max_in_flight) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

HttpProvider::~HttpProvider() = default;

std::string HttpProvider::post_json(const std::string& path, const std::string& body) {
    {
        std::unique_lock<std::mutex> lk(slots_mu_);
        slots_cv_.wait(lk, [&] { return free_slots_ > 0; });
        free_slots_--;
    }
    struct SlotGuard {
        HttpProvider* p;
        ~SlotGuard() {
            std::lock_guard<std::mutex> lk(p->slots_mu_);
            p->free_slots_++;
            p->slots_cv_.notify_one();
        }
    } guard{this};

    std::string last_error;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(250 << (2 * (attempt - 1))));
        }
        httplib::Client cli(config_.base_url);
        cli.set_connection_timeout(config_.timeout_seconds);
        cli.set_read_timeout(config_.timeout_seconds);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = cli.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw ProviderError("provider request failed: HTTP " +
                                std::to_string(res->status) + ": " + res->body);
        }
        return res->body;
    }
    throw ProviderError("provider unreachable after " + std::to_string(config_.max_attempts) +
                        " attempts (" + last_error + ")");
}

std::string HttpProvider::do_chat(const ChatRequest& request) {
    json body;
    body["model"] = config_.chat_model;
    body["temperature"] = request.temperature;
    body["messages"] = json::array();
    for (const auto& m : request.messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    std::string raw = post_json(config_.chat_path, body.dump());

    json resp;
    try {
        resp = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ProviderError(std::string("chat response is not JSON: ") + e.what());
    }
    if (!resp.contains("choices") || !resp["choices"].is_array() || resp["choices"].empty())
        throw ProviderError("chat response has no choices");
    const auto& choice = resp["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content") ||
        !choice["message"]["content"].is_string())
        throw ProviderError("chat response choice has no message content");
    return choice["message"]["content"].get<std::string>();
}

std::vector<Embedding> HttpProvider::do_embed(const std::vector<std::string>& texts) {
    json body;
    body["model"] = config_.embed_model;
    body["input"] = texts;
    body["dimensions"] = kEmbeddingDim;
    std::string raw = post_json(config_.embed_path, body.dump());

    json resp;
    try {
        resp = json::parse(raw);
    } catch (const json::parse_error& e) {
        throw ProviderError(std::string("embedding response is not JSON: ") + e.what());
    }
    if (!resp.contains("data") || !resp["data"].is_array() || resp["data"].size() != texts.size())
        throw ProviderError("embedding response data does not match the input count");

    std::vector<Embedding> out(texts.size());
    for (const auto& item : resp["data"]) {
        if (!item.contains("index") || !item.contains("embedding") ||
            !item["embedding"].is_array())
            throw ProviderError("embedding response item is malformed");
        size_t idx = item["index"].get<size_t>();
        if (idx >= out.size()) throw ProviderError("embedding response index out of range");
        Embedding v = item["embedding"].get<std::vector<double>>();
        if (v.size() != kEmbeddingDim)
            throw ProviderError("embedding has " + std::to_string(v.size()) +
                                " dims, expected " + std::to_string(kEmbeddingDim));
        normalize_embedding(v);
        out[idx] = std::move(v);
    }
    return out;
}

// ====== FixtureProvider ======

FixtureProvider::FixtureProvider(std::string fixture_dir, uint64_t embed_seed)
    : dir_(std::move(fixture_dir)), embed_seed_(embed_seed) {}

std::string FixtureProvider::fixture_filename(const ChatRequest& request) {
    return std::string(chat_tag_name(request.tag)) + "_" + prompt_hash(request) + ".json";
}

std::string FixtureProvider::do_chat(const ChatRequest& request) {
    std::filesystem::path file = std::filesystem::path(dir_) / fixture_filename(request);
    std::ifstream in(file);
    if (!in) {
        throw ProviderError("fixture miss: tag '" + std::string(chat_tag_name(request.tag)) +
                            "' prompt hash " + prompt_hash(request) + " (looked for " +
                            file.string() + ")");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ProviderError("fixture " + file.string() + " is not valid JSON: " + e.what());
    }
    if (!j.contains("completion") || !j["completion"].is_string())
        throw ProviderError("fixture " + file.string() + " has no completion string");
    return j["completion"].get<std::string>();
}

std::vector<Embedding> FixtureProvider::do_embed(const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(pseudo_embedding(t, embed_seed_));
    return out;
}

// ====== RecordingProvider ======

RecordingProvider::RecordingProvider(Provider& inner, std::string fixture_dir)
    : inner_(inner), dir_(std::move(fixture_dir)) {
    std::filesystem::create_directories(dir_);
}

std::string RecordingProvider::do_chat(const ChatRequest& request) {
    std::string completion = inner_.chat_complete(request);
    json j;
    j["tag"] = chat_tag_name(request.tag);
    j["prompt_hash"] = prompt_hash(request);
    json messages = json::array();
    for (const auto& m : request.messages)
        messages.push_back({{"role", m.role}, {"content", m.content}});
    j["messages"] = messages;
    j["completion"] = completion;

    std::lock_guard<std::mutex> lk(write_mu_);
    std::filesystem::path file =
        std::filesystem::path(dir_) / FixtureProvider::fixture_filename(request);
    std::ofstream out(file);
    out << j.dump(2) << "\n";
    return completion;
}

std::vector<Embedding> RecordingProvider::do_embed(const std::vector<std::string>& texts) {
    return inner_.embed_text(texts);
}

}  // namespace wayfinder
