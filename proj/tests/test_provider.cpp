#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"
#include "wayfinder/provider.hpp"

using namespace wayfinder;

namespace {

// Canned inner provider for decorator tests.
class CannedProvider : public Provider {
protected:
    std::string do_chat(const ChatRequest& request) override {
        return "reply to " + std::string(chat_tag_name(request.tag));
    }
    std::vector<Embedding> do_embed(const std::vector<std::string>& texts) override {
        std::vector<Embedding> out;
        for (const auto& t : texts) out.push_back(pseudo_embedding(t));
        return out;
    }
};

}  // namespace

TEST_CASE("chat tag names round trip") {
    const ChatTag all[] = {ChatTag::actor,       ChatTag::reflect, ChatTag::synthesize_goal,
                           ChatTag::synthesize_action, ChatTag::answer,  ChatTag::goal_gen,
                           ChatTag::self_eval};
    REQUIRE(static_cast<int>(sizeof(all) / sizeof(all[0])) == kChatTagCount);
    for (ChatTag t : all) {
        auto back = chat_tag_from_name(chat_tag_name(t));
        REQUIRE(back.has_value());
        CHECK(*back == t);
    }
    CHECK(!chat_tag_from_name("planner").has_value());
}

TEST_CASE("temperature policy singles out the curriculum actor") {
    CHECK(temperature_for(ChatTag::actor, false) == 0.0);
    CHECK(temperature_for(ChatTag::actor, true) == 0.4);
    CHECK(temperature_for(ChatTag::reflect, true) == 0.0);
    CHECK(temperature_for(ChatTag::answer, true) == 0.0);

    ChatRequest r = ChatRequest::make(ChatTag::actor, {{"user", "hi"}}, true);
    CHECK(r.temperature == 0.4);
    CHECK(r.tag == ChatTag::actor);
    REQUIRE(r.messages.size() == 1);
    CHECK(r.messages[0].role == "user");

    CHECK(ChatRequest::make(ChatTag::actor, {{"user", "hi"}}).temperature == 0.0);
    CHECK(ChatRequest::make(ChatTag::reflect, {{"user", "hi"}}, true).temperature == 0.0);
}

TEST_CASE("pseudo_embedding is deterministic, unit norm, and seed sensitive") {
    Embedding a = pseudo_embedding("walnut desk");
    Embedding b = pseudo_embedding("walnut desk");
    REQUIRE(a.size() == kEmbeddingDim);
    CHECK(a == b);  // bitwise

    double norm = std::sqrt(dot(a, a));
    CHECK(std::abs(norm - 1.0) < 1e-9);

    Embedding c = pseudo_embedding("oak shelf");
    CHECK(a != c);
    CHECK(dot(a, c) < 1.0 - 1e-6);

    Embedding d = pseudo_embedding("walnut desk", 12345);
    CHECK(a != d);

    // related strings land closer than unrelated ones
    double near = dot(pseudo_embedding("find the walnut desk price"),
                      pseudo_embedding("find the walnut table price"));
    double far = dot(pseudo_embedding("find the walnut desk price"),
                     pseudo_embedding("zq xv jj kk ww yy"));
    CHECK(near > far);
}

TEST_CASE("normalize_embedding and dot behave") {
    Embedding v(kEmbeddingDim, 0.0);
    v[0] = 3.0;
    v[5] = 4.0;
    normalize_embedding(v);
    CHECK(std::abs(v[0] - 0.6) < 1e-12);
    CHECK(std::abs(v[5] - 0.8) < 1e-12);
    CHECK(std::abs(dot(v, v) - 1.0) < 1e-12);
}

TEST_CASE("fnv1a64 and prompt_hash are stable and input sensitive") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);  // offset basis
    CHECK(fnv1a64("a") != fnv1a64("b"));

    ChatRequest r1 = ChatRequest::make(ChatTag::actor, {{"user", "hello"}});
    ChatRequest r2 = ChatRequest::make(ChatTag::actor, {{"user", "hello"}});
    ChatRequest r3 = ChatRequest::make(ChatTag::actor, {{"user", "hello!"}});
    ChatRequest r4 = ChatRequest::make(ChatTag::reflect, {{"user", "hello"}});

    CHECK(prompt_hash(r1) == prompt_hash(r2));
    CHECK(prompt_hash(r1) != prompt_hash(r3));
    CHECK(prompt_hash(r1) != prompt_hash(r4));  // tag is part of the key
    CHECK(prompt_hash(r1).size() == 16);
}

TEST_CASE("ledger counts chats per tag and embedding traffic") {
    CannedProvider p;
    CHECK(p.ledger().total_chat() == 0);

    p.chat_complete(ChatRequest::make(ChatTag::actor, {{"user", "x"}}));
    p.chat_complete(ChatRequest::make(ChatTag::actor, {{"user", "y"}}));
    p.chat_complete(ChatRequest::make(ChatTag::reflect, {{"user", "z"}}));
    p.embed_text({"a", "b", "c"});
    p.embed_text({"d"});

    CHECK(p.ledger().chat_count(ChatTag::actor) == 2);
    CHECK(p.ledger().chat_count(ChatTag::reflect) == 1);
    CHECK(p.ledger().chat_count(ChatTag::answer) == 0);
    CHECK(p.ledger().total_chat() == 3);
    CHECK(p.ledger().embed_calls() == 2);
    CHECK(p.ledger().embed_texts() == 4);

    p.ledger().reset();
    CHECK(p.ledger().total_chat() == 0);
    CHECK(p.ledger().embed_calls() == 0);
    CHECK(p.ledger().embed_texts() == 0);
}

TEST_CASE("embed_text rejects an empty batch") {
    CannedProvider p;
    CHECK_THROWS_AS(p.embed_text({}), ProviderError);
    CHECK(p.ledger().embed_calls() == 0);  // rejected before counting
}

TEST_CASE("fixture provider replays stored completions") {
    std::string dir = make_scratch_dir("fixtures");
    ChatRequest req = ChatRequest::make(ChatTag::answer, {{"user", "what is the price?"}});

    std::string fname = FixtureProvider::fixture_filename(req);
    CHECK(fname.substr(0, 7) == "answer_");
    CHECK(fname.size() == 7 + 16 + 5);  // tag _ hash .json
    write_file_text(dir + "/" + fname, "{\"completion\": \"$489\"}");

    FixtureProvider p(dir);
    CHECK(p.chat_complete(req) == "$489");
    CHECK(p.chat_complete(req) == "$489");  // replay is idempotent
    CHECK(p.ledger().chat_count(ChatTag::answer) == 2);

    // embeddings come from the pseudo hash, still unit norm
    auto embs = p.embed_text({"alpha", "beta"});
    REQUIRE(embs.size() == 2);
    CHECK(embs[0] == pseudo_embedding("alpha"));
    CHECK(std::abs(dot(embs[1], embs[1]) - 1.0) < 1e-9);
}

TEST_CASE("fixture provider misses are strict errors naming the key") {
    std::string dir = make_scratch_dir("fixtures_miss");
    FixtureProvider p(dir);
    ChatRequest req = ChatRequest::make(ChatTag::actor, {{"user", "nothing stored"}});
    try {
        p.chat_complete(req);
        FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
        std::string msg = e.what();
        CHECK(msg.find("actor") != std::string::npos);
        CHECK(msg.find(prompt_hash(req)) != std::string::npos);
    }
}

TEST_CASE("recording provider writes fixtures a FixtureProvider can replay") {
    std::string dir = make_scratch_dir("recorded");
    CannedProvider inner;
    RecordingProvider rec(inner, dir);

    ChatRequest req = ChatRequest::make(ChatTag::reflect, {{"user", "how did it go?"}});
    std::string live = rec.chat_complete(req);
    CHECK(live == "reply to reflect");
    CHECK(inner.ledger().chat_count(ChatTag::reflect) == 1);

    // the recorded file is valid fixture JSON
    std::string path = dir + "/" + FixtureProvider::fixture_filename(req);
    REQUIRE(std::filesystem::exists(path));
    auto doc = nlohmann::json::parse(read_file_text(path));
    CHECK(doc["completion"] == "reply to reflect");

    FixtureProvider replay(dir);
    CHECK(replay.chat_complete(req) == live);

    // embeddings pass straight through
    auto embs = rec.embed_text({"pass through"});
    CHECK(embs[0] == pseudo_embedding("pass through"));
}
