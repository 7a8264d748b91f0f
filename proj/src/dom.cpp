#include "wayfinder/dom.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace wayfinder {

namespace {

constexpr size_t kTextCap = 200;

// Keeps every element on one line regardless of what the site put in it.
std::string escape_text(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

std::string quoted_text(const std::string& raw) {
    std::string t = raw;
    if (t.size() > kTextCap) {
        t = t.substr(0, kTextCap) + "...";
    }
    return "\"" + escape_text(t) + "\"";
}

}  // namespace

void ExtractedText::append(const std::string& key, const std::string& value) {
    for (auto& [k, vs] : items_) {
        if (k == key) {
            vs.push_back(value);
            return;
        }
    }
    items_.push_back({key, {value}});
}

const std::vector<std::string>* ExtractedText::find(const std::string& key) const {
    for (const auto& [k, vs] : items_) {
        if (k == key) return &vs;
    }
    return nullptr;
}

std::string ExtractedText::keys_joined(const std::string& sep) const {
    std::string out;
    for (const auto& [k, vs] : items_) {
        if (!out.empty()) out += sep;
        out += k;
    }
    return out;
}

bool is_formatting_tag(const std::string& tag) {
    static const char* kTags[] = {"b", "i",   "em",  "strong", "u",  "s", "small",
                                  "sub", "sup", "mark", "br", "wbr", "hr"};
    for (const char* t : kTags) {
        if (tag == t) return true;
    }
    return false;
}

std::string format_element(const DomElement& e) {
    std::vector<std::string> attrs;
    if (e.required) attrs.push_back(std::string("required: ") + (*e.required ? "True" : "False"));
    if (e.name) attrs.push_back("name: " + *e.name);
    if (e.input_type) attrs.push_back("type: " + *e.input_type);
    if (e.aria_label) attrs.push_back("ariaLabel: " + *e.aria_label);
    if (e.role) attrs.push_back("role: " + *e.role);
    if (e.alt) attrs.push_back("alt: " + *e.alt);
    if (e.text) attrs.push_back("text: " + quoted_text(*e.text));
    if (e.href) attrs.push_back("href: " + *e.href);

    std::string line = "<" + std::to_string(e.index) + ": [" + e.tag + "]";
    for (size_t i = 0; i < attrs.size(); ++i) {
        line += (i == 0 ? " " : ", ") + attrs[i];
    }
    line += "/>";
    return line;
}

std::string format_dom(const ObservedState& state) {
    std::string out;
    bool first = true;
    for (const auto& e : state.elements) {
        if (is_formatting_tag(e.tag)) continue;
        if (!first) out += "\n";
        out += format_element(e);
        first = false;
    }
    return out;
}

std::string strip_element_index(const std::string& line) {
    // "<12: [a] .../>" -> "<[a] .../>"
    size_t colon = line.find(": ");
    if (line.empty() || line[0] != '<' || colon == std::string::npos) return line;
    return "<" + line.substr(colon + 2);
}

namespace {

std::vector<std::string> stripped_lines(const ObservedState& s) {
    std::vector<std::string> out;
    for (const auto& e : s.elements) {
        if (is_formatting_tag(e.tag)) continue;
        out.push_back(strip_element_index(format_element(e)));
    }
    return out;
}

}  // namespace

StateDiff diff_observations(const ObservedState& before, const ObservedState& after) {
    StateDiff d;
    d.url_changed = before.url != after.url;
    d.extraction_changed = !(before.extracted == after.extracted);

    auto lb = stripped_lines(before);
    auto la = stripped_lines(after);
    d.dom_changed = lb != la;

    std::map<std::string, int> counts;
    for (const auto& l : lb) counts[l]++;
    for (const auto& l : la) counts[l]--;
    for (const auto& [line, n] : counts) {
        if (n > 0) d.removed += n;
        if (n < 0) d.added += -n;
    }
    return d;
}

}  // namespace wayfinder
