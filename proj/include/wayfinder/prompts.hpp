#pragma once

#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace wayfinder {

// Loads prompt templates from a directory of .txt assets and substitutes
// {name} placeholders. Templates are cached after first use.
class PromptLibrary {
public:
    // Empty dir means the compiled-in default asset directory.
    explicit PromptLibrary(std::string dir = "");

    using Vars = std::vector<std::pair<std::string, std::string>>;

    // Replaces every "{key}" for the given vars; unknown braces are left
    // alone so templates can contain literal examples.
    std::string render(const std::string& name, const Vars& vars) const;
    const std::string& raw(const std::string& name) const;
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    mutable std::mutex mu_;
    mutable std::map<std::string, std::string> cache_;
};

std::string substitute_placeholders(const std::string& text, const PromptLibrary::Vars& vars);

}  // namespace wayfinder
