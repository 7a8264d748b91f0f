#pragma once

#include <optional>
#include <string>
#include <vector>

#include "wayfinder/dom.hpp"

namespace wayfinder {

enum class Builtin { save_text, save_link, save_list, type_input, press_enter, click, go_back };

const char* builtin_name(Builtin b);
std::optional<Builtin> builtin_from_name(const std::string& name);
int builtin_arity(Builtin b);

// Any builtin that can change page state. save_* only read.
bool is_state_changing(Builtin b);

struct SourceLoc {
    int line = 1;    // 1-based
    int column = 1;  // 1-based
};

enum class CompileErrorKind {
    syntax,
    arity,
    unknown_builtin,
    index_out_of_range,
    not_interactable,
    not_anchor,
};

const char* compile_error_kind_name(CompileErrorKind k);

struct CompileFeedback {
    CompileErrorKind kind = CompileErrorKind::syntax;
    std::string message;
    SourceLoc location;

    // Single line suitable for feeding back to the actor.
    std::string to_line() const;
};

struct Arg {
    enum class Kind { element_index, string_lit, identifier };
    Kind kind = Kind::element_index;
    long index = 0;    // element_index
    std::string text;  // string_lit / identifier
    SourceLoc location;

    static Arg element(long i) { return {Kind::element_index, i, "", {}}; }
    static Arg string(std::string s) { return {Kind::string_lit, 0, std::move(s), {}}; }
    static Arg ident(std::string s) { return {Kind::identifier, 0, std::move(s), {}}; }

    bool operator==(const Arg& o) const {
        return kind == o.kind && index == o.index && text == o.text;
    }
};

struct ActionCall {
    Builtin builtin = Builtin::click;
    std::vector<Arg> args;
    std::string assigned_name;  // empty when the statement has no "x ="
    SourceLoc location;

    bool operator==(const ActionCall& o) const {
        return builtin == o.builtin && args == o.args && assigned_name == o.assigned_name;
    }
};

// Max 10 calls, at most one save_list. source_text keeps what the actor
// actually wrote; print_script() gives the canonical form.
struct ActionScript {
    std::vector<ActionCall> calls;
    std::string source_text;

    bool has_save_list() const;
    bool has_state_changing_call() const;

    bool operator==(const ActionScript& o) const { return calls == o.calls; }
};

struct ParseResult {
    std::optional<ActionScript> script;
    std::optional<CompileFeedback> error;
    bool ok() const { return script.has_value(); }

    static ParseResult success(ActionScript s) { return {std::move(s), std::nullopt}; }
    static ParseResult failure(CompileFeedback f) { return {std::nullopt, std::move(f)}; }
};

// Grammar: stmt := [ident "="] ident "(" [arg ("," arg)*] ")", one per line.
// Args are non-negative integers, double-quoted strings, or identifiers that
// an earlier assignment introduced. No control flow, no nesting, no
// arithmetic.
ParseResult parse_script(const std::string& source);

// Canonical reprint; parse_script(print_script(s)) reproduces s.
std::string print_script(const ActionScript& script);

// Static checks against one observation: indices in range, click/type/press
// targets interactable, save_link targets carry an href.
std::optional<CompileFeedback> validate_script(const ActionScript& script,
                                               const ObservedState& state);

// "tag:nth-child(k) > tag:nth-child(k) > ..."
std::string render_selector_path(const std::vector<PathStep>& path);

// Scope covering every item of the list that holds the two given elements:
// longest common path prefix, then the diverging component with its
// positional qualifier dropped. Symmetric in the two arguments.
struct ListScope {
    std::vector<PathStep> prefix;
    std::string item_tag;

    std::string selector() const;
    bool operator==(const ListScope&) const = default;
};

ListScope compute_list_scope(const std::vector<PathStep>& a, const std::vector<PathStep>& b);

// CSS selector for one element. Under a list scope whose item contains the
// element, the shared prefix is replaced by the scope selector.
std::string resolve_selector(int index, const ObservedState& state,
                             const std::optional<ListScope>& scope);

}  // namespace wayfinder
