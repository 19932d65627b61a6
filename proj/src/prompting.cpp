#include "specfsm/prompting.hpp"

#include "specfsm/error.hpp"
#include "specfsm/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

namespace specfsm {

std::string_view to_string(ProtocolStyle style) {
    return style == ProtocolStyle::StateOriented ? "state_oriented" : "procedure_oriented";
}

ProtocolStyle parse_protocol_style(std::string_view s) {
    if (s == "state_oriented") return ProtocolStyle::StateOriented;
    if (s == "procedure_oriented") return ProtocolStyle::ProcedureOriented;
    throw Error(ErrorKind::Config, "unknown protocol style '" + std::string(s) + "'");
}

std::string_view to_string(Phase phase) {
    return phase == Phase::StateExtraction ? "state_extraction" : "transition_extraction";
}

// ---------------------------------------------------------------------------
// Context digest

std::size_t ContextDigest::word_count() const { return empty() ? 0 : text::word_count(render()); }

std::string ContextDigest::render() const {
    if (empty()) return "(none)";
    std::ostringstream out;
    if (!prior_states.empty()) {
        out << "States identified so far:";
        for (const auto& s : prior_states) out << "\n" << s.str();
    }
    if (!prior_tail.empty()) {
        if (out.tellp() > 0) out << "\n";
        out << "Recent transitions:";
        for (const auto& [from, to] : prior_tail) out << "\n" << from.str() << " -> " << to.str();
    }
    if (!prior_summary.empty()) {
        if (out.tellp() > 0) out << "\n";
        out << "Summary: " << prior_summary;
    }
    return out.str();
}

ContextDigest update_context(ContextDigest ctx, std::span<const StateName> accepted_states,
                             std::span<const StatePair> accepted_transitions, const ContextPolicy& policy) {
    for (const auto& s : accepted_states) {
        if (std::find(ctx.prior_states.begin(), ctx.prior_states.end(), s) == ctx.prior_states.end()) {
            ctx.prior_states.push_back(s);
        }
    }
    for (const auto& pair : accepted_transitions) ctx.prior_tail.push_back(pair);
    while (ctx.prior_tail.size() > policy.tail_k) ctx.prior_tail.pop_front();

    while (ctx.word_count() > policy.word_budget) {
        if (!ctx.prior_summary.empty()) {
            auto words = text::split_words(ctx.prior_summary);
            std::size_t excess = ctx.word_count() - policy.word_budget;
            std::size_t drop = std::min(excess, words.size());
            std::vector<std::string> kept(words.begin() + static_cast<std::ptrdiff_t>(drop), words.end());
            ctx.prior_summary = text::join(kept, " ");
        } else if (!ctx.prior_states.empty()) {
            ctx.prior_states.erase(ctx.prior_states.begin());
        } else if (!ctx.prior_tail.empty()) {
            ctx.prior_tail.pop_front();
        } else {
            break;
        }
    }
    return ctx;
}

// ---------------------------------------------------------------------------
// Cross references

namespace {

void subtree_text(const SectionNode& node, std::vector<std::string>& out) {
    out.push_back(node.number + " " + node.title);
    for (const auto& p : node.paragraphs) out.push_back(p);
    for (const auto& c : node.children) subtree_text(c, out);
}

void index_node(const SectionNode& node, std::map<std::string, std::string, std::less<>>& sections) {
    if (!node.is_root() && !sections.contains(node.number)) {
        std::vector<std::string> parts;
        subtree_text(node, parts);
        sections.emplace(node.number, text::join(parts, "\n\n"));
    }
    for (const auto& c : node.children) index_node(c, sections);
}

}  // namespace

SectionIndex SectionIndex::from_tree(const SectionNode& root) {
    SectionIndex index;
    index.add_tree(root);
    return index;
}

void SectionIndex::add_tree(const SectionNode& root) { index_node(root, sections_); }

std::optional<std::string_view> SectionIndex::find(std::string_view number) const {
    auto it = sections_.find(number);
    if (it == sections_.end()) return std::nullopt;
    return std::string_view(it->second);
}

std::vector<ResolvedReference> resolve_cross_references(const Window& window, const SectionIndex& index,
                                                        const ReferencePolicy& policy) {
    static const std::regex kReference(R"(\b(?:(?:sub)?clause|section)\s+(\d+(?:\.\d+)*)|\bannex\s+([A-Za-z](?:\.\d+)*)\b)",
                                       std::regex::ECMAScript | std::regex::icase);
    std::vector<ResolvedReference> out;
    std::set<std::string> seen;
    for (auto it = std::sregex_iterator(window.text.begin(), window.text.end(), kReference);
         it != std::sregex_iterator() && out.size() < policy.max_references; ++it) {
        std::string number = (*it)[1].matched ? (*it)[1].str() : (*it)[2].str();
        if ((*it)[2].matched) number[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(number[0])));
        if (!seen.insert(number).second) continue;
        if (std::find(window.section_numbers.begin(), window.section_numbers.end(), number) !=
            window.section_numbers.end()) {
            continue;
        }
        auto found = index.find(number);
        if (!found) {
            spdlog::warn("window {}: unresolved cross-reference to section {}", window.window_id, number);
            out.push_back({number, ""});
            continue;
        }
        out.push_back({number, text::truncate_words(*found, policy.words_per_reference)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Templates

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set = [] {
        TemplateSet t;
        t.texts_ = builtin_template_texts();
        return t;
    }();
    return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    TemplateSet t;
    for (auto name : {kSystem, kStateStateOriented, kStateProcedureOriented, kTransition}) {
        auto path = dir / (std::string(name) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorKind::Config, "missing template file " + path.string());
        std::ostringstream buf;
        buf << in.rdbuf();
        t.texts_.emplace(std::string(name), buf.str());
    }
    return t;
}

const std::string& TemplateSet::text(std::string_view name) const {
    auto it = texts_.find(name);
    if (it == texts_.end()) throw Error(ErrorKind::Template, "no template named '" + std::string(name) + "'");
    return it->second;
}

std::string TemplateSet::render(std::string_view name,
                                const std::map<std::string, std::string, std::less<>>& values) const {
    const std::string& tpl = text(name);
    std::string out;
    out.reserve(tpl.size() + 1024);
    std::size_t pos = 0;
    while (true) {
        std::size_t open = tpl.find("{{", pos);
        if (open == std::string::npos) break;
        std::size_t close = tpl.find("}}", open + 2);
        if (close == std::string::npos) break;
        std::string_view key(tpl.data() + open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end()) {
            throw Error(ErrorKind::Template,
                        "template '" + std::string(name) + "' uses unknown placeholder {{" + std::string(key) + "}}");
        }
        out.append(tpl, pos, open - pos);
        out.append(it->second);
        pos = close + 2;
    }
    out.append(tpl, pos, std::string::npos);
    return out;
}

std::size_t template_fixed_words(const TemplateSet& templates, std::string_view name) {
    static const std::map<std::string, std::string, std::less<>> kBlank{
        {"PROTOCOL", ""}, {"SECTIONS", ""}, {"PREFIXES", ""},    {"CATALOG", ""},
        {"CONTEXT", ""},  {"REFERENCES", ""}, {"WINDOW_TEXT", ""},
    };
    return text::word_count(templates.render(name, kBlank));
}

// ---------------------------------------------------------------------------
// Bundles

std::string render_references(const std::vector<ResolvedReference>& refs) {
    if (refs.empty()) return "(none)";
    std::vector<std::string> parts;
    for (const auto& r : refs) {
        parts.push_back("[" + r.section_number + "] " + (r.excerpt.empty() ? "(not available)" : r.excerpt));
    }
    return text::join(parts, "\n\n");
}

std::string render_catalog(const std::set<StateName>& catalog) {
    std::vector<std::string> names;
    for (const auto& s : catalog) names.push_back(s.str());
    return text::join(names, "\n");
}

namespace {

std::map<std::string, std::string, std::less<>> common_values(const Window& window, const ProtocolProfile& profile,
                                                               const std::string& context,
                                                               const std::vector<ResolvedReference>& refs) {
    return {
        {"PROTOCOL", profile.protocol},
        {"SECTIONS", window.section_numbers.empty() ? "(preamble)" : text::join(window.section_numbers, ", ")},
        {"PREFIXES", profile.known_prefixes.empty() ? "(none)" : text::join(profile.known_prefixes, ", ")},
        {"CONTEXT", context},
        {"REFERENCES", render_references(refs)},
        {"WINDOW_TEXT", window.text},
        {"CATALOG", ""},
    };
}

}  // namespace

PromptBundle build_state_prompt(const Window& window, const ProtocolProfile& profile, const ContextDigest& ctx,
                                const TemplateSet& templates, std::vector<ResolvedReference> refs) {
    PromptBundle b;
    b.phase = Phase::StateExtraction;
    b.window_id = window.window_id;
    b.context_digest = ctx.render();
    auto values = common_values(window, profile, b.context_digest, refs);
    b.system_text = templates.render(TemplateSet::kSystem, values);
    b.user_text = templates.render(profile.style == ProtocolStyle::StateOriented ? TemplateSet::kStateStateOriented
                                                                                 : TemplateSet::kStateProcedureOriented,
                                   values);
    b.resolved_refs = std::move(refs);
    return b;
}

PromptBundle build_transition_prompt(const Window& window, const ProtocolProfile& profile,
                                     const std::set<StateName>& catalog, const ContextDigest& ctx,
                                     const TemplateSet& templates, std::vector<ResolvedReference> refs) {
    if (catalog.empty()) {
        throw Error(ErrorKind::EmptyCatalog, "transition prompt for window " + std::to_string(window.window_id) +
                                                 " needs a non-empty state catalog");
    }
    PromptBundle b;
    b.phase = Phase::TransitionExtraction;
    b.window_id = window.window_id;
    b.context_digest = ctx.render();
    auto values = common_values(window, profile, b.context_digest, refs);
    values["CATALOG"] = render_catalog(catalog);
    b.system_text = templates.render(TemplateSet::kSystem, values);
    b.user_text = templates.render(TemplateSet::kTransition, values);
    b.resolved_refs = std::move(refs);
    return b;
}

}  // namespace specfsm
