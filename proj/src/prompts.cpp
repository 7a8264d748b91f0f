#include "wayfinder/prompts.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef WAYFINDER_DEFAULT_PROMPT_DIR
#define WAYFINDER_DEFAULT_PROMPT_DIR "assets/prompts"
#endif

namespace wayfinder {

PromptLibrary::PromptLibrary(std::string dir) : dir_(std::move(dir)) {
    if (dir_.empty()) dir_ = WAYFINDER_DEFAULT_PROMPT_DIR;
}

const std::string& PromptLibrary::raw(const std::string& name) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;

    const std::string path = dir_ + "/" + name + ".txt";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("prompt template not found: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    auto [pos, inserted] = cache_.emplace(name, buf.str());
    (void)inserted;
    return pos->second;
}

std::string substitute_placeholders(const std::string& text, const PromptLibrary::Vars& vars) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            size_t close = text.find('}', i + 1);
            if (close != std::string::npos) {
                const std::string key = text.substr(i + 1, close - i - 1);
                const std::pair<std::string, std::string>* hit = nullptr;
                for (const auto& kv : vars) {
                    if (kv.first == key) { hit = &kv; break; }
                }
                if (hit) {
                    out += hit->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += text[i];
        ++i;
    }
    return out;
}

std::string PromptLibrary::render(const std::string& name, const Vars& vars) const {
    return substitute_placeholders(raw(name), vars);
}

}  // namespace wayfinder
