#pragma once

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wayfinder {

constexpr size_t kEmbeddingDim = 1536;
using Embedding = std::vector<double>;  // always kEmbeddingDim, unit norm

enum class ChatTag {
    actor,
    reflect,
    synthesize_goal,
    synthesize_action,
    answer,
    goal_gen,
    self_eval,
};
constexpr int kChatTagCount = 7;

const char* chat_tag_name(ChatTag t);
std::optional<ChatTag> chat_tag_from_name(const std::string& name);

struct ChatMessage {
    std::string role;
    std::string content;
};

// Temperature policy: 0 everywhere, except the actor while the curriculum is
// generating demonstrations (0.4).
double temperature_for(ChatTag tag, bool curriculum_actor);

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    ChatTag tag = ChatTag::actor;

    static ChatRequest make(ChatTag tag, std::vector<ChatMessage> messages,
                            bool curriculum_actor = false);
};

struct ProviderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-tag chat counts plus embedding traffic; shared across threads.
class CallLedger {
public:
    void count_chat(ChatTag tag) { chat_[static_cast<int>(tag)]++; }
    void count_embed(size_t texts) {
        embed_calls_++;
        embed_texts_ += static_cast<long>(texts);
    }
    long chat_count(ChatTag tag) const { return chat_[static_cast<int>(tag)]; }
    long total_chat() const;
    long embed_calls() const { return embed_calls_; }
    long embed_texts() const { return embed_texts_; }
    void reset();

private:
    std::array<std::atomic<long>, kChatTagCount> chat_{};
    std::atomic<long> embed_calls_{0};
    std::atomic<long> embed_texts_{0};
};

class Provider {
public:
    virtual ~Provider() = default;

    std::string chat_complete(const ChatRequest& request) {
        ledger_.count_chat(request.tag);
        return do_chat(request);
    }
    // Batched; every output has kEmbeddingDim components and unit norm.
    // Throws ProviderError on an empty input list.
    std::vector<Embedding> embed_text(const std::vector<std::string>& texts) {
        if (texts.empty()) throw ProviderError("embed_text requires at least one input");
        ledger_.count_embed(texts.size());
        return do_embed(texts);
    }

    CallLedger& ledger() { return ledger_; }

protected:
    virtual std::string do_chat(const ChatRequest& request) = 0;
    virtual std::vector<Embedding> do_embed(const std::vector<std::string>& texts) = 0;

private:
    CallLedger ledger_;
};

// 16 hex chars of FNV-1a over the tag name and every message; keys the
// fixture store.
std::string prompt_hash(const ChatRequest& request);
uint64_t fnv1a64(const std::string& data);

// Embedding stand-in for offline runs: seeded hash of character trigrams
// scattered over the 1536 dims, then normalized. Similar strings land close.
Embedding pseudo_embedding(const std::string& text, uint64_t seed = 0x77617966696e64ULL);

void normalize_embedding(Embedding& v);
double dot(const Embedding& a, const Embedding& b);

struct ProviderConfig {
    std::string base_url = "https://api.openai.com";
    std::string chat_path = "/v1/chat/completions";
    std::string embed_path = "/v1/embeddings";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string chat_model = "gpt-4o-mini";
    std::string embed_model = "text-embedding-3-large";
    int timeout_seconds = 60;
    int max_attempts = 3;       // exponential backoff between attempts
    int max_in_flight = 4;      // request-rate cap
};

// OpenAI-compatible JSON-over-HTTP client.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(ProviderConfig config);
    ~HttpProvider() override;

protected:
    std::string do_chat(const ChatRequest& request) override;
    std::vector<Embedding> do_embed(const std::vector<std::string>& texts) override;

private:
    std::string post_json(const std::string& path, const std::string& body);

    ProviderConfig config_;
    std::string api_key_;

    // Counting semaphore with a runtime-configured limit.
    std::mutex slots_mu_;
    std::condition_variable slots_cv_;
    int free_slots_;
};

// Replays completions from a directory of JSON fixtures keyed by
// (tag, prompt hash). Strict: a miss is an error naming both.
class FixtureProvider : public Provider {
public:
    explicit FixtureProvider(std::string fixture_dir, uint64_t embed_seed = 0x77617966696e64ULL);

    static std::string fixture_filename(const ChatRequest& request);

protected:
    std::string do_chat(const ChatRequest& request) override;
    std::vector<Embedding> do_embed(const std::vector<std::string>& texts) override;

private:
    std::string dir_;
    uint64_t embed_seed_;
};

// Decorator that persists every completion as a FixtureProvider-compatible
// file, so a live (or scenario) run can be replayed offline later.
class RecordingProvider : public Provider {
public:
    RecordingProvider(Provider& inner, std::string fixture_dir);

protected:
    std::string do_chat(const ChatRequest& request) override;
    std::vector<Embedding> do_embed(const std::vector<std::string>& texts) override;

private:
    Provider& inner_;
    std::string dir_;
    std::mutex write_mu_;
};

}  // namespace wayfinder
