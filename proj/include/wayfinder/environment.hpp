#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wayfinder/dom.hpp"
#include "wayfinder/dsl.hpp"

namespace wayfinder {

struct ElementPatch {
    int index = 0;  // page-definition index
    std::optional<std::string> text;
    std::optional<bool> visible;
    std::optional<bool> interactable;
};

struct Effect {
    enum class Kind { navigate, mutate, noop, disabled };
    Kind kind = Kind::noop;
    std::string url;                    // navigate
    std::vector<ElementPatch> patches;  // mutate
    std::string note;
};

struct Transition {
    int element_index = 0;
    std::string action;  // "click" | "type_input" | "press_enter"
    std::optional<std::string> value;  // type_input only; absent matches any input
    Effect effect;
};

struct PageDef {
    std::string url;
    std::vector<DomElement> elements;  // dense indices 0..n-1
    std::vector<Transition> transitions;
    std::map<std::string, std::vector<int>> list_groups;
};

struct SimSite {
    std::string site_id;
    std::string start_url;
    std::map<std::string, PageDef> pages;
};

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Throws SchemaError naming the offending JSON-pointer-style path.
SimSite load_site(const std::string& file_path);
SimSite load_site_from_string(const std::string& json_text, const std::string& source_name);

struct ExecutionFeedback {
    bool step_ok = true;
    std::vector<std::string> messages;

    std::string joined(const std::string& sep = "; ") const;
};

struct ExecResult {
    ObservedState state;
    ExecutionFeedback feedback;
};

// One browsing session over a SimSite. Mutations live on the current page
// only; any navigation loads the pristine page definition. Extractions
// persist for the whole session.
class Session {
public:
    explicit Session(const SimSite& site);

    const std::string& current_url() const { return current_url_; }
    const ExtractedText& extracted() const { return extracted_; }

    // Visible elements only, densely renumbered.
    ObservedState observe() const;

    // Runs calls in order; the first failing call aborts the remainder with
    // step_ok=false and earlier mutations kept. Element references resolve
    // through selector paths snapshotted at entry, so a mid-script navigation
    // makes later references fail rather than act on the wrong page.
    ExecResult execute_script(const ActionScript& script);

    // Backtracking: load `url` pristine. History rewinds to just before that
    // URL was left, or clears when the URL never appears in it.
    ObservedState revert_to(const std::string& url);

private:
    struct SnapshotTarget {
        std::vector<PathStep> path;
    };

    void load_page(const std::string& url);
    int find_visible_by_path(const std::vector<PathStep>& path) const;
    std::vector<int> match_targets(const SnapshotTarget& target,
                                   const std::optional<ListScope>& scope) const;
    const Transition* find_transition(int pagedef_index, const std::string& action,
                                      const std::optional<std::string>& typed) const;
    // False when the effect failed (unknown navigation target).
    bool apply_effect(const Effect& effect, ExecutionFeedback& fb);

    const SimSite& site_;
    std::string current_url_;
    std::vector<DomElement> page_elements_;  // page-definition indices, current mutations
    std::vector<std::string> history_;
    ExtractedText extracted_;
};

}  // namespace wayfinder
