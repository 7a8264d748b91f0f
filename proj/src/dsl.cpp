#include "wayfinder/dsl.hpp"

#include <cctype>
#include <set>
#include <sstream>

namespace wayfinder {

namespace {
constexpr int kMaxCalls = 10;
}

const char* builtin_name(Builtin b) {
    switch (b) {
        case Builtin::save_text: return "save_text";
        case Builtin::save_link: return "save_link";
        case Builtin::save_list: return "save_list";
        case Builtin::type_input: return "type_input";
        case Builtin::press_enter: return "press_enter";
        case Builtin::click: return "click";
        case Builtin::go_back: return "go_back";
    }
    return "?";
}

std::optional<Builtin> builtin_from_name(const std::string& name) {
    static const std::pair<const char*, Builtin> kTable[] = {
        {"save_text", Builtin::save_text},   {"save_link", Builtin::save_link},
        {"save_list", Builtin::save_list},   {"type_input", Builtin::type_input},
        {"press_enter", Builtin::press_enter}, {"click", Builtin::click},
        {"go_back", Builtin::go_back},
    };
    for (const auto& [n, b] : kTable) {
        if (name == n) return b;
    }
    return std::nullopt;
}

int builtin_arity(Builtin b) {
    switch (b) {
        case Builtin::save_text:
        case Builtin::save_link:
        case Builtin::save_list:
        case Builtin::type_input: return 2;
        case Builtin::press_enter:
        case Builtin::click: return 1;
        case Builtin::go_back: return 0;
    }
    return 0;
}

bool is_state_changing(Builtin b) {
    switch (b) {
        case Builtin::click:
        case Builtin::type_input:
        case Builtin::press_enter:
        case Builtin::go_back: return true;
        default: return false;
    }
}

const char* compile_error_kind_name(CompileErrorKind k) {
    switch (k) {
        case CompileErrorKind::syntax: return "syntax";
        case CompileErrorKind::arity: return "arity";
        case CompileErrorKind::unknown_builtin: return "unknown_builtin";
        case CompileErrorKind::index_out_of_range: return "index_out_of_range";
        case CompileErrorKind::not_interactable: return "not_interactable";
        case CompileErrorKind::not_anchor: return "not_anchor";
    }
    return "?";
}

std::string CompileFeedback::to_line() const {
    std::ostringstream os;
    os << "DSL error (" << compile_error_kind_name(kind) << ") at line " << location.line
       << ", column " << location.column << ": " << message;
    return os.str();
}

bool ActionScript::has_save_list() const {
    for (const auto& c : calls) {
        if (c.builtin == Builtin::save_list) return true;
    }
    return false;
}

bool ActionScript::has_state_changing_call() const {
    for (const auto& c : calls) {
        if (is_state_changing(c.builtin)) return true;
    }
    return false;
}

// ====== lexer ======

namespace {

struct Token {
    enum class Type { ident, integer, string, lparen, rparen, comma, equals, newline, end };
    Type type;
    std::string text;
    long value = 0;
    SourceLoc loc;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    // Returns nullopt on a lex error and fills `error`.
    std::optional<Token> next(CompileFeedback& error) {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) advance();
        SourceLoc loc{line_, col_};
        if (pos_ >= src_.size()) return Token{Token::Type::end, "", 0, loc};

        char c = src_[pos_];
        if (c == '\n' || c == '\r') {
            if (c == '\r' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') advance();
            advance();
            line_++;
            col_ = 1;
            return Token{Token::Type::newline, "\n", 0, loc};
        }
        if (c == '(') { advance(); return Token{Token::Type::lparen, "(", 0, loc}; }
        if (c == ')') { advance(); return Token{Token::Type::rparen, ")", 0, loc}; }
        if (c == ',') { advance(); return Token{Token::Type::comma, ",", 0, loc}; }
        if (c == '=') { advance(); return Token{Token::Type::equals, "=", 0, loc}; }
        if (c == '"') return lex_string(loc, error);
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::string digits;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                digits += src_[pos_];
                advance();
            }
            long v = 0;
            try {
                v = std::stol(digits);
            } catch (const std::exception&) {
                error = {CompileErrorKind::syntax, "integer literal out of range", loc};
                return std::nullopt;
            }
            return Token{Token::Type::integer, digits, v, loc};
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string name;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                name += src_[pos_];
                advance();
            }
            return Token{Token::Type::ident, name, 0, loc};
        }
        error = {CompileErrorKind::syntax,
                 std::string("unexpected character '") + c + "'", loc};
        return std::nullopt;
    }

private:
    void advance() {
        pos_++;
        col_++;
    }

    std::optional<Token> lex_string(SourceLoc loc, CompileFeedback& error) {
        advance();  // opening quote
        std::string out;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '"') {
                advance();
                return Token{Token::Type::string, out, 0, loc};
            }
            if (c == '\n' || c == '\r') break;
            if (c == '\\') {
                advance();
                if (pos_ >= src_.size()) break;
                char e = src_[pos_];
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default:
                        error = {CompileErrorKind::syntax,
                                 std::string("unknown escape '\\") + e + "' in string",
                                 SourceLoc{line_, col_}};
                        return std::nullopt;
                }
                advance();
                continue;
            }
            out += c;
            advance();
        }
        error = {CompileErrorKind::syntax, "unterminated string literal", loc};
        return std::nullopt;
    }

    const std::string& src_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

const char* arg_slot_description(Builtin b, size_t i) {
    switch (b) {
        case Builtin::save_text: return i == 0 ? "an element index" : "a key string";
        case Builtin::save_link: return i == 0 ? "an element index" : "a key string";
        case Builtin::save_list: return "an element index";
        case Builtin::type_input: return i == 0 ? "an element index" : "a text string";
        default: return "an element index";
    }
}

bool slot_wants_element(Builtin b, size_t i) {
    if (b == Builtin::save_list) return true;
    return i == 0;
}

}  // namespace

ParseResult parse_script(const std::string& source) {
    Lexer lex(source);
    CompileFeedback lex_err;
    std::vector<Token> tokens;
    for (;;) {
        auto t = lex.next(lex_err);
        if (!t) return ParseResult::failure(lex_err);
        tokens.push_back(*t);
        if (t->type == Token::Type::end) break;
    }

    ActionScript script;
    script.source_text = source;
    std::set<std::string> known_idents;
    size_t pos = 0;

    auto peek = [&]() -> const Token& { return tokens[pos]; };
    auto take = [&]() -> const Token& { return tokens[pos++]; };

    for (;;) {
        while (peek().type == Token::Type::newline) take();
        if (peek().type == Token::Type::end) break;

        if (peek().type != Token::Type::ident) {
            return ParseResult::failure({CompileErrorKind::syntax,
                                         "expected a call, got '" + peek().text + "'",
                                         peek().loc});
        }
        Token first = take();
        std::string assigned;
        Token callee = first;
        if (peek().type == Token::Type::equals) {
            take();
            if (peek().type != Token::Type::ident) {
                return ParseResult::failure({CompileErrorKind::syntax,
                                             "expected a call after '='", peek().loc});
            }
            assigned = first.text;
            callee = take();
        }

        auto builtin = builtin_from_name(callee.text);
        if (!builtin) {
            return ParseResult::failure({CompileErrorKind::unknown_builtin,
                                         "'" + callee.text + "' is not a known call",
                                         callee.loc});
        }

        if (peek().type != Token::Type::lparen) {
            return ParseResult::failure({CompileErrorKind::syntax,
                                         "expected '(' after '" + callee.text + "'",
                                         peek().loc});
        }
        take();

        std::vector<Arg> args;
        if (peek().type != Token::Type::rparen) {
            for (;;) {
                const Token& t = peek();
                Arg a;
                a.location = t.loc;
                if (t.type == Token::Type::integer) {
                    a.kind = Arg::Kind::element_index;
                    a.index = t.value;
                    take();
                } else if (t.type == Token::Type::string) {
                    a.kind = Arg::Kind::string_lit;
                    a.text = t.text;
                    take();
                } else if (t.type == Token::Type::ident) {
                    if (!known_idents.count(t.text)) {
                        return ParseResult::failure({CompileErrorKind::syntax,
                                                     "unknown identifier '" + t.text + "'",
                                                     t.loc});
                    }
                    a.kind = Arg::Kind::identifier;
                    a.text = t.text;
                    take();
                } else {
                    return ParseResult::failure({CompileErrorKind::syntax,
                                                 "expected an argument, got '" + t.text + "'",
                                                 t.loc});
                }
                args.push_back(std::move(a));
                if (peek().type == Token::Type::comma) {
                    take();
                    continue;
                }
                break;
            }
        }
        if (peek().type != Token::Type::rparen) {
            return ParseResult::failure({CompileErrorKind::syntax,
                                         "expected ')' to close the call", peek().loc});
        }
        take();
        if (peek().type != Token::Type::newline && peek().type != Token::Type::end) {
            return ParseResult::failure({CompileErrorKind::syntax,
                                         "unexpected '" + peek().text + "' after call",
                                         peek().loc});
        }

        int want = builtin_arity(*builtin);
        if (static_cast<int>(args.size()) != want) {
            std::ostringstream os;
            os << callee.text << " takes " << want << (want == 1 ? " argument" : " arguments")
               << ", got " << args.size();
            return ParseResult::failure({CompileErrorKind::arity, os.str(), callee.loc});
        }
        for (size_t i = 0; i < args.size(); ++i) {
            bool want_elem = slot_wants_element(*builtin, i);
            bool is_elem = args[i].kind == Arg::Kind::element_index;
            if (want_elem != is_elem) {
                std::ostringstream os;
                os << "argument " << (i + 1) << " of " << callee.text << " must be "
                   << arg_slot_description(*builtin, i);
                return ParseResult::failure({CompileErrorKind::syntax, os.str(),
                                             args[i].location});
            }
        }

        ActionCall call;
        call.builtin = *builtin;
        call.args = std::move(args);
        call.assigned_name = assigned;
        call.location = callee.loc;

        if (call.builtin == Builtin::save_list && script.has_save_list()) {
            return ParseResult::failure({CompileErrorKind::syntax,
                                         "only one save_list call is allowed per script",
                                         callee.loc});
        }
        script.calls.push_back(std::move(call));
        if (static_cast<int>(script.calls.size()) > kMaxCalls) {
            std::ostringstream os;
            os << "script exceeds the limit of " << kMaxCalls << " calls";
            return ParseResult::failure({CompileErrorKind::syntax, os.str(), callee.loc});
        }
        if (!assigned.empty()) known_idents.insert(assigned);
    }

    if (script.calls.empty()) {
        return ParseResult::failure({CompileErrorKind::syntax, "script has no calls",
                                     SourceLoc{1, 1}});
    }
    return ParseResult::success(std::move(script));
}

std::string print_script(const ActionScript& script) {
    std::string out;
    for (size_t i = 0; i < script.calls.size(); ++i) {
        const auto& c = script.calls[i];
        if (i) out += "\n";
        if (!c.assigned_name.empty()) out += c.assigned_name + " = ";
        out += builtin_name(c.builtin);
        out += "(";
        for (size_t j = 0; j < c.args.size(); ++j) {
            if (j) out += ", ";
            const auto& a = c.args[j];
            switch (a.kind) {
                case Arg::Kind::element_index: out += std::to_string(a.index); break;
                case Arg::Kind::identifier: out += a.text; break;
                case Arg::Kind::string_lit: {
                    out += '"';
                    for (char ch : a.text) {
                        switch (ch) {
                            case '"': out += "\\\""; break;
                            case '\\': out += "\\\\"; break;
                            case '\n': out += "\\n"; break;
                            case '\t': out += "\\t"; break;
                            default: out += ch;
                        }
                    }
                    out += '"';
                    break;
                }
            }
        }
        out += ")";
    }
    return out;
}

std::optional<CompileFeedback> validate_script(const ActionScript& script,
                                               const ObservedState& state) {
    const long n = static_cast<long>(state.elements.size());
    for (const auto& c : script.calls) {
        for (const auto& a : c.args) {
            if (a.kind != Arg::Kind::element_index) continue;
            if (a.index < 0 || a.index >= n) {
                std::ostringstream os;
                os << "element index " << a.index << " out of range (page has " << n
                   << (n == 1 ? " element)" : " elements)");
                return CompileFeedback{CompileErrorKind::index_out_of_range, os.str(),
                                       a.location};
            }
        }
        if (c.builtin == Builtin::click || c.builtin == Builtin::type_input ||
            c.builtin == Builtin::press_enter) {
            const auto& target = state.elements[c.args[0].index];
            if (!target.interactable) {
                std::ostringstream os;
                os << "element " << c.args[0].index << " ([" << target.tag
                   << "]) is not interactable";
                return CompileFeedback{CompileErrorKind::not_interactable, os.str(),
                                       c.args[0].location};
            }
        }
        if (c.builtin == Builtin::save_link) {
            const auto& target = state.elements[c.args[0].index];
            if (!target.href) {
                std::ostringstream os;
                os << "element " << c.args[0].index << " ([" << target.tag
                   << "]) has no link";
                return CompileFeedback{CompileErrorKind::not_anchor, os.str(),
                                       c.args[0].location};
            }
        }
    }
    return std::nullopt;
}

std::string render_selector_path(const std::vector<PathStep>& path) {
    std::string out;
    for (size_t i = 0; i < path.size(); ++i) {
        if (i) out += " > ";
        out += path[i].tag + ":nth-child(" + std::to_string(path[i].nth) + ")";
    }
    return out;
}

std::string ListScope::selector() const {
    std::string out = render_selector_path(prefix);
    if (!item_tag.empty()) {
        if (!out.empty()) out += " > ";
        out += item_tag;
    }
    return out;
}

ListScope compute_list_scope(const std::vector<PathStep>& a, const std::vector<PathStep>& b) {
    ListScope scope;
    size_t shared = 0;
    while (shared < a.size() && shared < b.size() && a[shared] == b[shared]) shared++;
    scope.prefix.assign(a.begin(), a.begin() + shared);

    if (shared == a.size() && shared == b.size()) {
        // Same element twice: treat its own container position as the item.
        if (!scope.prefix.empty()) {
            scope.item_tag = scope.prefix.back().tag;
            scope.prefix.pop_back();
        }
        return scope;
    }
    const std::string tag_a = shared < a.size() ? a[shared].tag : "";
    const std::string tag_b = shared < b.size() ? b[shared].tag : "";
    if (!tag_a.empty() && !tag_b.empty()) {
        if (tag_a == tag_b) scope.item_tag = tag_a;
        // Diverging tags: the scope stays at the shared prefix.
    } else {
        scope.item_tag = tag_a.empty() ? tag_b : tag_a;
    }
    return scope;
}

std::string resolve_selector(int index, const ObservedState& state,
                             const std::optional<ListScope>& scope) {
    const auto& path = state.elements.at(index).selector_path;
    if (scope && !scope->item_tag.empty() && path.size() > scope->prefix.size()) {
        bool under = true;
        for (size_t i = 0; i < scope->prefix.size(); ++i) {
            if (!(path[i] == scope->prefix[i])) {
                under = false;
                break;
            }
        }
        if (under && path[scope->prefix.size()].tag == scope->item_tag) {
            std::string out = scope->selector();
            std::vector<PathStep> suffix(path.begin() + scope->prefix.size() + 1, path.end());
            if (!suffix.empty()) out += " > " + render_selector_path(suffix);
            return out;
        }
    }
    return render_selector_path(path);
}

}  // namespace wayfinder
