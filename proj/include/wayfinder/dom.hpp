#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wayfinder {

// One component of a CSS-ish selector path: tag plus 1-based child position.
struct PathStep {
    std::string tag;
    int nth = 1;

    bool operator==(const PathStep&) const = default;
};

struct DomElement {
    int index = 0;
    std::string tag;
    std::optional<std::string> text;
    std::optional<std::string> role;
    std::optional<std::string> alt;
    std::optional<std::string> aria_label;
    std::optional<std::string> name;
    std::optional<std::string> input_type;
    std::optional<bool> required;
    std::optional<std::string> href;   // anchors only
    std::vector<PathStep> selector_path;
    bool interactable = false;
    bool visible = true;
    std::optional<std::string> list_group;

    bool operator==(const DomElement&) const = default;
};

// Insertion-ordered key -> values map. save_text/save_link append; list mode
// appends one value per matched element, document order.
class ExtractedText {
public:
    void append(const std::string& key, const std::string& value);
    const std::vector<std::string>* find(const std::string& key) const;
    bool has(const std::string& key) const { return find(key) != nullptr; }
    bool empty() const { return items_.empty(); }
    size_t size() const { return items_.size(); }
    const std::vector<std::pair<std::string, std::vector<std::string>>>& items() const {
        return items_;
    }
    std::string keys_joined(const std::string& sep = ", ") const;

    bool operator==(const ExtractedText&) const = default;

private:
    std::vector<std::pair<std::string, std::vector<std::string>>> items_;
};

struct ObservedState {
    std::string url;
    std::vector<DomElement> elements;
    ExtractedText extracted;
};

struct StateDiff {
    bool url_changed = false;
    bool dom_changed = false;
    bool extraction_changed = false;
    int added = 0;
    int removed = 0;

    bool any() const { return url_changed || dom_changed || extraction_changed; }
};

// `<idx: [tag] attr: value, ..., text: "..."/>`. Attribute order is fixed:
// required, name, type, ariaLabel, role, alt, text, href. Text is capped at
// 200 chars and always double-quoted; other values are bare.
std::string format_element(const DomElement& e);

// One line per element, document order. Formatting-only tags (b, i, em, ...)
// are skipped. Empty element list formats to an empty string.
std::string format_dom(const ObservedState& state);

bool is_formatting_tag(const std::string& tag);

// Element line with the leading index removed; used so that diffs ignore
// pure renumbering.
std::string strip_element_index(const std::string& line);

// Symmetric in the boolean fields; added/removed counts swap when the
// arguments swap.
StateDiff diff_observations(const ObservedState& before, const ObservedState& after);

}  // namespace wayfinder
