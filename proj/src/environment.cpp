#include "wayfinder/environment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace wayfinder {

using nlohmann::json;

namespace {

std::string pointer_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

[[noreturn]] void fail(const std::string& source, const std::string& pointer,
                       const std::string& what) {
    throw SchemaError(source + ": " + pointer + ": " + what);
}

std::string req_string(const json& j, const std::string& source, const std::string& ptr,
                       const std::string& key) {
    if (!j.contains(key)) fail(source, ptr + "/" + key, "missing required field");
    if (!j[key].is_string()) fail(source, ptr + "/" + key, "expected a string");
    return j[key].get<std::string>();
}

std::optional<std::string> opt_string(const json& j, const std::string& source,
                                      const std::string& ptr, const std::string& key) {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_string()) fail(source, ptr + "/" + key, "expected a string");
    return j[key].get<std::string>();
}

std::optional<bool> opt_bool(const json& j, const std::string& source, const std::string& ptr,
                             const std::string& key) {
    if (!j.contains(key)) return std::nullopt;
    if (!j[key].is_boolean()) fail(source, ptr + "/" + key, "expected a boolean");
    return j[key].get<bool>();
}

DomElement parse_element(const json& j, const std::string& source, const std::string& ptr) {
    if (!j.is_object()) fail(source, ptr, "expected an object");
    DomElement e;
    if (!j.contains("index") || !j["index"].is_number_integer())
        fail(source, ptr + "/index", "expected an integer");
    e.index = j["index"].get<int>();
    e.tag = req_string(j, source, ptr, "tag");
    e.text = opt_string(j, source, ptr, "text");
    e.aria_label = opt_string(j, source, ptr, "ariaLabel");
    e.role = opt_string(j, source, ptr, "role");
    e.alt = opt_string(j, source, ptr, "alt");
    e.name = opt_string(j, source, ptr, "name");
    e.input_type = opt_string(j, source, ptr, "type");
    e.required = opt_bool(j, source, ptr, "required");
    e.href = opt_string(j, source, ptr, "href");
    e.visible = opt_bool(j, source, ptr, "visible").value_or(true);
    e.interactable = opt_bool(j, source, ptr, "interactable").value_or(false);
    e.list_group = opt_string(j, source, ptr, "listGroup");

    if (e.href && e.tag != "a")
        fail(source, ptr + "/href", "href is only valid on anchor elements");

    if (!j.contains("path") || !j["path"].is_array() || j["path"].empty())
        fail(source, ptr + "/path", "expected a non-empty array of [tag, position] pairs");
    for (size_t i = 0; i < j["path"].size(); ++i) {
        const auto& step = j["path"][i];
        std::string sptr = ptr + "/path/" + std::to_string(i);
        if (!step.is_array() || step.size() != 2 || !step[0].is_string() ||
            !step[1].is_number_integer())
            fail(source, sptr, "expected a [tag, position] pair");
        int nth = step[1].get<int>();
        if (nth < 1) fail(source, sptr + "/1", "child position must be >= 1");
        e.selector_path.push_back({step[0].get<std::string>(), nth});
    }
    return e;
}

Effect parse_effect(const json& j, const std::string& source, const std::string& ptr,
                    size_t n_elements) {
    if (!j.is_object()) fail(source, ptr, "expected an object");
    Effect eff;
    std::string kind = req_string(j, source, ptr, "kind");
    if (kind == "navigate") {
        eff.kind = Effect::Kind::navigate;
        eff.url = req_string(j, source, ptr, "url");
    } else if (kind == "mutate") {
        eff.kind = Effect::Kind::mutate;
        if (!j.contains("patches") || !j["patches"].is_array() || j["patches"].empty())
            fail(source, ptr + "/patches", "expected a non-empty array");
        for (size_t i = 0; i < j["patches"].size(); ++i) {
            const auto& p = j["patches"][i];
            std::string pptr = ptr + "/patches/" + std::to_string(i);
            if (!p.is_object() || !p.contains("index") || !p["index"].is_number_integer())
                fail(source, pptr + "/index", "expected an integer");
            ElementPatch patch;
            patch.index = p["index"].get<int>();
            if (patch.index < 0 || patch.index >= static_cast<int>(n_elements))
                fail(source, pptr + "/index", "patch references a missing element");
            patch.text = opt_string(p, source, pptr, "text");
            patch.visible = opt_bool(p, source, pptr, "visible");
            patch.interactable = opt_bool(p, source, pptr, "interactable");
            eff.patches.push_back(std::move(patch));
        }
    } else if (kind == "noop") {
        eff.kind = Effect::Kind::noop;
    } else if (kind == "disabled") {
        eff.kind = Effect::Kind::disabled;
    } else {
        fail(source, ptr + "/kind", "unknown effect kind '" + kind + "'");
    }
    eff.note = opt_string(j, source, ptr, "note").value_or("");
    return eff;
}

}  // namespace

SimSite load_site_from_string(const std::string& json_text, const std::string& source_name) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(source_name + ": parse error: " + e.what());
    }
    const std::string& src = source_name;
    if (!root.is_object()) fail(src, "", "expected a JSON object");

    SimSite site;
    site.site_id = req_string(root, src, "", "site_id");
    site.start_url = req_string(root, src, "", "start_url");
    if (!root.contains("pages") || !root["pages"].is_object() || root["pages"].empty())
        fail(src, "/pages", "expected a non-empty object of pages");

    for (const auto& [url, pj] : root["pages"].items()) {
        std::string pptr = "/pages/" + pointer_escape(url);
        PageDef page;
        page.url = url;
        if (!pj.is_object()) fail(src, pptr, "expected an object");
        if (!pj.contains("elements") || !pj["elements"].is_array())
            fail(src, pptr + "/elements", "expected an array");
        for (size_t i = 0; i < pj["elements"].size(); ++i) {
            std::string eptr = pptr + "/elements/" + std::to_string(i);
            DomElement e = parse_element(pj["elements"][i], src, eptr);
            if (e.index != static_cast<int>(i))
                fail(src, eptr + "/index",
                     "indices must be dense and in order (expected " + std::to_string(i) + ")");
            page.elements.push_back(std::move(e));
        }

        if (pj.contains("transitions")) {
            if (!pj["transitions"].is_array()) fail(src, pptr + "/transitions", "expected an array");
            for (size_t i = 0; i < pj["transitions"].size(); ++i) {
                const auto& tj = pj["transitions"][i];
                std::string tptr = pptr + "/transitions/" + std::to_string(i);
                if (!tj.is_object()) fail(src, tptr, "expected an object");
                Transition t;
                if (!tj.contains("index") || !tj["index"].is_number_integer())
                    fail(src, tptr + "/index", "expected an integer");
                t.element_index = tj["index"].get<int>();
                if (t.element_index < 0 ||
                    t.element_index >= static_cast<int>(page.elements.size()))
                    fail(src, tptr + "/index", "transition references a missing element");
                t.action = req_string(tj, src, tptr, "action");
                if (t.action != "click" && t.action != "type_input" && t.action != "press_enter")
                    fail(src, tptr + "/action", "unknown action '" + t.action + "'");
                t.value = opt_string(tj, src, tptr, "value");
                if (!tj.contains("effect"))
                    fail(src, tptr + "/effect", "missing required field");
                t.effect = parse_effect(tj["effect"], src, tptr + "/effect",
                                        page.elements.size());
                page.transitions.push_back(std::move(t));
            }
        }

        if (pj.contains("listGroups")) {
            if (!pj["listGroups"].is_object())
                fail(src, pptr + "/listGroups", "expected an object");
            for (const auto& [gid, members] : pj["listGroups"].items()) {
                std::string gptr = pptr + "/listGroups/" + pointer_escape(gid);
                if (!members.is_array() || members.empty())
                    fail(src, gptr, "expected a non-empty array of element indices");
                std::vector<int> idxs;
                for (size_t i = 0; i < members.size(); ++i) {
                    if (!members[i].is_number_integer())
                        fail(src, gptr + "/" + std::to_string(i), "expected an integer");
                    int idx = members[i].get<int>();
                    if (idx < 0 || idx >= static_cast<int>(page.elements.size()))
                        fail(src, gptr + "/" + std::to_string(i),
                             "group references a missing element");
                    idxs.push_back(idx);
                }
                page.list_groups[gid] = std::move(idxs);
            }
        }
        for (size_t i = 0; i < page.elements.size(); ++i) {
            const auto& e = page.elements[i];
            if (!e.list_group) continue;
            auto it = page.list_groups.find(*e.list_group);
            std::string eptr = pptr + "/elements/" + std::to_string(i) + "/listGroup";
            if (it == page.list_groups.end())
                fail(src, eptr, "element names an undefined list group '" + *e.list_group + "'");
            if (std::find(it->second.begin(), it->second.end(), e.index) == it->second.end())
                fail(src, eptr, "element is not listed among its group's members");
        }

        site.pages[url] = std::move(page);
    }

    if (!site.pages.count(site.start_url))
        fail(src, "/start_url", "start_url '" + site.start_url + "' is not a defined page");
    for (const auto& [url, page] : site.pages) {
        for (size_t i = 0; i < page.transitions.size(); ++i) {
            const auto& t = page.transitions[i];
            if (t.effect.kind == Effect::Kind::navigate && !site.pages.count(t.effect.url))
                fail(src,
                     "/pages/" + pointer_escape(url) + "/transitions/" + std::to_string(i) +
                         "/effect/url",
                     "navigation target '" + t.effect.url + "' is not a defined page");
        }
    }
    return site;
}

SimSite load_site(const std::string& file_path) {
    std::ifstream in(file_path);
    if (!in) throw SchemaError(file_path + ": cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_site_from_string(ss.str(), file_path);
}

std::string ExecutionFeedback::joined(const std::string& sep) const {
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty()) out += sep;
        out += m;
    }
    return out;
}

// ====== Session ======

Session::Session(const SimSite& site) : site_(site) {
    load_page(site.start_url);
}

void Session::load_page(const std::string& url) {
    current_url_ = url;
    page_elements_ = site_.pages.at(url).elements;
}

ObservedState Session::observe() const {
    ObservedState s;
    s.url = current_url_;
    s.extracted = extracted_;
    int next = 0;
    for (const auto& e : page_elements_) {
        if (!e.visible) continue;
        DomElement copy = e;
        copy.index = next++;
        s.elements.push_back(std::move(copy));
    }
    return s;
}

int Session::find_visible_by_path(const std::vector<PathStep>& path) const {
    for (size_t i = 0; i < page_elements_.size(); ++i) {
        if (page_elements_[i].visible && page_elements_[i].selector_path == path)
            return static_cast<int>(i);
    }
    return -1;
}

std::vector<int> Session::match_targets(const SnapshotTarget& target,
                                        const std::optional<ListScope>& scope) const {
    std::vector<int> out;
    if (!scope || scope->item_tag.empty() || target.path.size() <= scope->prefix.size()) {
        int i = find_visible_by_path(target.path);
        if (i >= 0) out.push_back(i);
        return out;
    }
    // List mode: match every visible element whose path is the target's path
    // with the item-level component swapped for any position.
    const size_t depth = scope->prefix.size();
    bool target_under = target.path[depth].tag == scope->item_tag;
    for (size_t i = 0; i < depth && target_under; ++i) {
        if (!(target.path[i] == scope->prefix[i])) target_under = false;
    }
    if (!target_under) {
        int i = find_visible_by_path(target.path);
        if (i >= 0) out.push_back(i);
        return out;
    }
    for (size_t i = 0; i < page_elements_.size(); ++i) {
        const auto& e = page_elements_[i];
        if (!e.visible || e.selector_path.size() != target.path.size()) continue;
        bool match = true;
        for (size_t k = 0; k < target.path.size() && match; ++k) {
            if (k == depth) {
                if (e.selector_path[k].tag != scope->item_tag) match = false;
            } else if (!(e.selector_path[k] == target.path[k])) {
                match = false;
            }
        }
        if (match) out.push_back(static_cast<int>(i));
    }
    return out;
}

const Transition* Session::find_transition(int pagedef_index, const std::string& action,
                                           const std::optional<std::string>& typed) const {
    const auto& page = site_.pages.at(current_url_);
    for (const auto& t : page.transitions) {
        if (t.element_index != pagedef_index || t.action != action) continue;
        if (t.value && (!typed || *t.value != *typed)) continue;
        return &t;
    }
    return nullptr;
}

bool Session::apply_effect(const Effect& effect, ExecutionFeedback& fb) {
    switch (effect.kind) {
        case Effect::Kind::navigate:
            history_.push_back(current_url_);
            load_page(effect.url);
            break;
        case Effect::Kind::mutate:
            for (const auto& p : effect.patches) {
                for (auto& e : page_elements_) {
                    if (e.index != p.index) continue;
                    if (p.text) e.text = *p.text;
                    if (p.visible) e.visible = *p.visible;
                    if (p.interactable) e.interactable = *p.interactable;
                }
            }
            break;
        case Effect::Kind::noop:
        case Effect::Kind::disabled:
            break;
    }
    if (!effect.note.empty()) fb.messages.push_back(effect.note);
    return true;
}

ExecResult Session::execute_script(const ActionScript& script) {
    ExecutionFeedback fb;
    // Element references are resolved against the observation the script was
    // written for; snapshot those selector paths before anything mutates.
    std::vector<SnapshotTarget> snapshot;
    for (const auto& e : page_elements_) {
        if (e.visible) snapshot.push_back({e.selector_path});
    }
    auto snapshot_for = [&](long observed_index) -> const SnapshotTarget* {
        if (observed_index < 0 || observed_index >= static_cast<long>(snapshot.size()))
            return nullptr;
        return &snapshot[observed_index];
    };

    std::optional<ListScope> list_scope;

    for (const auto& call : script.calls) {
        auto fail_step = [&](const std::string& msg) {
            fb.step_ok = false;
            fb.messages.push_back(std::string(builtin_name(call.builtin)) + ": " + msg);
        };

        if (call.builtin == Builtin::go_back) {
            if (history_.empty()) {
                fb.messages.push_back("go_back: no previous page in history");
            } else {
                std::string prev = history_.back();
                history_.pop_back();
                load_page(prev);
            }
            continue;
        }

        const SnapshotTarget* target = snapshot_for(call.args[0].index);
        if (!target) {
            fail_step("element index " + std::to_string(call.args[0].index) +
                      " does not exist on the page the script was written for");
            break;
        }

        if (call.builtin == Builtin::save_list) {
            const SnapshotTarget* second = snapshot_for(call.args[1].index);
            if (!second) {
                fail_step("element index " + std::to_string(call.args[1].index) +
                          " does not exist on the page the script was written for");
                break;
            }
            int a = find_visible_by_path(target->path);
            int b = find_visible_by_path(second->path);
            if (a < 0 || b < 0) {
                fail_step("selector matched nothing on the current page");
                break;
            }
            const auto& ga = page_elements_[a].list_group;
            const auto& gb = page_elements_[b].list_group;
            if (!ga || !gb || *ga != *gb) {
                fail_step("arguments are not members of the same list");
                break;
            }
            list_scope = compute_list_scope(target->path, second->path);
            continue;
        }

        std::vector<int> matches = match_targets(*target, list_scope);
        if (matches.empty()) {
            fail_step("selector '" + render_selector_path(target->path) +
                      "' matched nothing on the current page");
            break;
        }

        bool ok = true;
        for (int idx : matches) {
            DomElement& el = page_elements_[idx];
            switch (call.builtin) {
                case Builtin::save_text:
                    extracted_.append(call.args[1].text, el.text.value_or(""));
                    break;
                case Builtin::save_link:
                    if (!el.href) {
                        fail_step("element " + std::to_string(call.args[0].index) +
                                  " has no link");
                        ok = false;
                        break;
                    }
                    extracted_.append(call.args[1].text, *el.href);
                    break;
                case Builtin::type_input: {
                    el.text = call.args[1].text;
                    const Transition* t =
                        find_transition(el.index, "type_input", call.args[1].text);
                    if (t) apply_effect(t->effect, fb);
                    break;
                }
                case Builtin::click: {
                    const Transition* t = find_transition(el.index, "click", std::nullopt);
                    if (t) apply_effect(t->effect, fb);
                    break;
                }
                case Builtin::press_enter: {
                    const Transition* t =
                        find_transition(el.index, "press_enter", std::nullopt);
                    if (t) {
                        apply_effect(t->effect, fb);
                    } else {
                        fb.messages.push_back("press_enter had no visible effect");
                    }
                    break;
                }
                default: break;
            }
            if (!ok) break;
        }
        if (!ok) break;
    }

    return {observe(), fb};
}

ObservedState Session::revert_to(const std::string& url) {
    if (!site_.pages.count(url))
        throw SchemaError("revert_to: unknown url '" + url + "'");
    auto it = std::find(history_.rbegin(), history_.rend(), url);
    if (it != history_.rend()) {
        history_.erase(it.base() - 1, history_.end());
    } else if (url != current_url_) {
        history_.clear();
    }
    load_page(url);
    return observe();
}

}  // namespace wayfinder
