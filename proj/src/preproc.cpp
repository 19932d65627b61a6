#include "specfsm/preproc.hpp"

#include "specfsm/error.hpp"
#include "specfsm/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>

namespace specfsm {
namespace {

bool is_blank(std::string_view line) { return text::trim(line).empty(); }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Unicode superscript digits used as footnote markers in converted documents.
std::string strip_superscripts(std::string_view line) {
    std::string out;
    out.reserve(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
        auto b = static_cast<unsigned char>(line[i]);
        if (b == 0xC2 && i + 1 < line.size()) {
            auto n = static_cast<unsigned char>(line[i + 1]);
            if (n == 0xB9 || n == 0xB2 || n == 0xB3) {
                ++i;
                continue;
            }
        }
        if (b == 0xE2 && i + 2 < line.size() && static_cast<unsigned char>(line[i + 1]) == 0x81) {
            auto n = static_cast<unsigned char>(line[i + 2]);
            if (n == 0xB0 || (n >= 0xB4 && n <= 0xB9)) {
                i += 2;
                continue;
            }
        }
        out.push_back(line[i]);
    }
    return out;
}

// Scans "d+(.d+)*" at the start of s; returns the consumed length or 0.
std::size_t scan_dotted_number(std::string_view s) {
    std::size_t i = 0;
    if (i >= s.size() || !is_digit(s[i])) return 0;
    while (true) {
        std::size_t start = i;
        while (i < s.size() && is_digit(s[i])) ++i;
        if (i == start) return 0;
        if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
            ++i;
            continue;
        }
        return i;
    }
}

std::optional<SectionHeading> heading_from(std::string number, std::string_view rest) {
    if (rest.empty() || (rest[0] != ' ' && rest[0] != '\t')) return std::nullopt;
    auto title = text::trim(rest);
    if (title.empty()) return std::nullopt;
    return SectionHeading{std::move(number), std::string(title), 0};
}

enum class LineKind { Blank, Heading, Body };

struct ScannedLine {
    std::string_view text;
    std::size_t offset;
    LineKind kind;
};

std::vector<ScannedLine> scan_lines(std::string_view doc) {
    std::vector<ScannedLine> out;
    std::size_t offset = 0;
    for (auto line : text::split_lines(doc)) {
        LineKind kind = LineKind::Body;
        if (is_blank(line)) {
            kind = LineKind::Blank;
        } else if (parse_heading_line(line)) {
            kind = LineKind::Heading;
        }
        out.push_back({line, offset, kind});
        offset += line.size() + 1;
    }
    return out;
}

std::string render_part(const SectionNode& node) {
    std::vector<std::string> pieces;
    if (!node.is_root()) pieces.push_back(node.number + " " + node.title);
    for (const auto& p : node.paragraphs) pieces.push_back(p);
    return text::join(pieces, "\n\n");
}

struct PendingWindow {
    std::size_t sort_key;
    Window window;
};

std::optional<PendingWindow> make_window(const std::vector<const SectionNode*>& parts) {
    Window w;
    std::vector<std::string> rendered;
    std::optional<std::size_t> key;
    for (const auto* node : parts) {
        if (!node->is_root()) w.section_numbers.push_back(node->number);
        if (auto part = render_part(*node); !part.empty()) rendered.push_back(std::move(part));
        if (!node->paragraphs.empty() && !key) key = node->ordinal;
        w.paragraphs.insert(w.paragraphs.end(), node->paragraphs.begin(), node->paragraphs.end());
    }
    if (!key) return std::nullopt;
    w.text = text::join(rendered, "\n\n");
    w.word_count = text::word_count(w.text);
    return PendingWindow{*key, std::move(w)};
}

void collect_windows(SectionNode& node, std::size_t max_words, std::vector<PendingWindow>& out) {
    if (node.is_leaf()) return;

    std::vector<const SectionNode*> leaf_children;
    for (const auto& c : node.children) {
        if (c.is_leaf()) leaf_children.push_back(&c);
    }

    if (!leaf_children.empty()) {
        if (!node.all_children_merged) {
            std::vector<const SectionNode*> parts{&node};
            parts.insert(parts.end(), leaf_children.begin(), leaf_children.end());
            std::vector<std::string> rendered;
            for (const auto* p : parts) {
                if (auto part = render_part(*p); !part.empty()) rendered.push_back(std::move(part));
            }
            node.merged_content = text::join(rendered, "\n\n");
            node.all_children_merged = true;

            auto merged = make_window(parts);
            if (merged && merged->window.word_count > max_words) {
                if (auto own = make_window({&node})) out.push_back(std::move(*own));
                for (const auto* leaf : leaf_children) {
                    if (auto w = make_window({leaf})) out.push_back(std::move(*w));
                }
            } else if (merged) {
                out.push_back(std::move(*merged));
            }
        }
    } else if (auto own = make_window({&node})) {
        // Interior node whose children are all interior: its own text still
        // needs a home.
        out.push_back(std::move(*own));
    }

    for (auto& c : node.children) collect_windows(c, max_words, out);
}

}  // namespace

CleaningRules CleaningRules::defaults() {
    CleaningRules rules;
    rules.drop_line_patterns = {
        // Table of contents: "Contents" banner, dotted leaders or tab + page number.
        R"(^\s*(Contents|Table of Contents)\s*$)",
        R"(^.*\S\s*(\.\s*){4,}\d+\s*$)",
        R"(^\s*(\d+(\.\d+)*|[A-Z](\.\d+)*|Annex\s+[A-Z])\t[^\t]+\t\d+\s*$)",
        // Page headers and footers of 3GPP documents.
        R"(^\s*(Release\s+\d+\s+(\d+\s+)?)?3GPP\s+TS\s+\d+\.\d+\s+V\d+\.\d+\.\d+(\s+\(\d{4}-\d{2}\))?(\s+\d+)?\s*$)",
        R"(^\s*(Page\s+\d+(\s+of\s+\d+)?|\d{1,4}|-\s*\d{1,4}\s*-)\s*$)",
        // Figure and table captions.
        R"(^\s*(Figure|Table)\s+[0-9A-Z][0-9A-Za-z.\-]*\s*:.*$)",
    };
    return rules;
}

RawDocument clean_document(const RawDocument& raw, const CleaningRules& rules) {
    std::vector<std::regex> patterns;
    patterns.reserve(rules.drop_line_patterns.size());
    for (const auto& p : rules.drop_line_patterns) {
        try {
            patterns.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw Error(ErrorKind::Config, "invalid cleaning pattern '" + p + "': " + e.what());
        }
    }

    const auto lines = text::split_lines(raw.text);
    std::vector<std::string> kept;
    kept.reserve(lines.size());
    for (auto line : lines) {
        std::string l = rules.strip_footnote_markers ? strip_superscripts(line) : std::string(line);
        bool drop = false;
        if (!is_blank(l) && l.size() <= rules.max_noise_line_length) {
            for (const auto& re : patterns) {
                if (std::regex_match(l, re)) {
                    drop = true;
                    break;
                }
            }
        }
        if (!drop) kept.push_back(std::move(l));
    }

    std::vector<std::string> collapsed;
    collapsed.reserve(kept.size());
    for (std::size_t i = 0; i < kept.size();) {
        if (!is_blank(kept[i])) {
            collapsed.push_back(std::move(kept[i]));
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < kept.size() && is_blank(kept[j])) ++j;
        if (j - i >= 3) {
            collapsed.emplace_back();
        } else {
            for (std::size_t k = i; k < j; ++k) collapsed.push_back(std::move(kept[k]));
        }
        i = j;
    }

    RawDocument out = raw;
    out.text = text::join(collapsed, "\n");
    if (!raw.text.empty() && raw.text.back() == '\n' && !collapsed.empty()) out.text.push_back('\n');
    if (text::trim(out.text).empty()) {
        throw Error(ErrorKind::EmptyAfterClean, "document '" + raw.doc_id + "' has no content after cleaning");
    }
    return out;
}

std::optional<SectionHeading> parse_heading_line(std::string_view line) {
    if (line.empty()) return std::nullopt;
    if (is_digit(line[0])) {
        std::size_t n = scan_dotted_number(line);
        if (n == 0) return std::nullopt;
        return heading_from(std::string(line.substr(0, n)), line.substr(n));
    }
    if (line.rfind("Annex ", 0) == 0 && line.size() > 6 && line[6] >= 'A' && line[6] <= 'Z' &&
        (line.size() == 7 || !std::isalnum(static_cast<unsigned char>(line[7])))) {
        auto rest = text::trim(line.substr(7));
        std::string title(rest);
        if (title.empty()) title = "Annex";
        return SectionHeading{std::string(1, line[6]), title, 0};
    }
    if (line[0] >= 'A' && line[0] <= 'Z' && line.size() > 2 && line[1] == '.' && is_digit(line[2])) {
        std::size_t n = scan_dotted_number(line.substr(2));
        if (n == 0) return std::nullopt;
        return heading_from(std::string(line.substr(0, 2 + n)), line.substr(2 + n));
    }
    return std::nullopt;
}

std::vector<SectionHeading> extract_section_numbers(const RawDocument& doc) {
    std::vector<SectionHeading> out;
    for (const auto& line : scan_lines(doc.text)) {
        if (line.kind != LineKind::Heading) continue;
        auto h = parse_heading_line(line.text);
        h->offset = line.offset;
        out.push_back(std::move(*h));
    }
    if (out.empty()) {
        throw Error(ErrorKind::NoSectionsFound, "no section headings in document '" + doc.doc_id + "'");
    }
    return out;
}

int section_depth(std::string_view number) noexcept {
    if (number.empty()) return 0;
    return static_cast<int>(std::count(number.begin(), number.end(), '.')) + 1;
}

std::string parent_number(std::string_view number) {
    auto dot = number.rfind('.');
    if (dot == std::string_view::npos) return {};
    return std::string(number.substr(0, dot));
}

std::vector<std::string> body_paragraphs(const RawDocument& doc) {
    std::vector<std::string> out;
    std::string current;
    bool open = false;
    auto flush = [&] {
        if (open) out.push_back(std::move(current));
        current.clear();
        open = false;
    };
    for (const auto& line : scan_lines(doc.text)) {
        if (line.kind == LineKind::Body) {
            if (open) current.push_back('\n');
            current.append(line.text);
            open = true;
        } else {
            flush();
        }
    }
    flush();
    return out;
}

std::vector<SectionNode> map_paragraphs_to_sections(const RawDocument& doc,
                                                    std::span<const SectionHeading> sections) {
    std::vector<SectionNode> nodes(1);
    nodes.reserve(sections.size() + 1);
    for (std::size_t i = 0; i < sections.size(); ++i) {
        SectionNode n;
        n.number = sections[i].number;
        n.title = sections[i].title;
        n.depth = section_depth(n.number);
        n.ordinal = i + 1;
        nodes.push_back(std::move(n));
    }

    std::size_t next_heading = 0;
    std::size_t owner = 0;
    std::string current;
    bool open = false;
    auto flush = [&] {
        if (open) nodes[owner].paragraphs.push_back(std::move(current));
        current.clear();
        open = false;
    };
    for (const auto& line : scan_lines(doc.text)) {
        if (next_heading < sections.size() && line.offset == sections[next_heading].offset) {
            flush();
            owner = ++next_heading;
            continue;
        }
        if (line.kind == LineKind::Body || (line.kind == LineKind::Heading)) {
            // Heading-shaped lines not in `sections` are ordinary text here.
            if (open) current.push_back('\n');
            current.append(line.text);
            open = true;
        } else {
            flush();
        }
    }
    flush();
    return nodes;
}

SectionNode build_section_tree(std::vector<SectionNode> sections) {
    struct Slot {
        SectionNode node;
        std::vector<std::size_t> children;
    };
    std::vector<Slot> arena;
    arena.reserve(sections.size() + 1);

    std::size_t first = 0;
    if (!sections.empty() && sections.front().is_root()) {
        arena.push_back({std::move(sections.front()), {}});
        first = 1;
    } else {
        arena.push_back({SectionNode{}, {}});
    }
    arena[0].node.children.clear();

    std::map<std::string, std::size_t, std::less<>> latest;
    for (std::size_t i = first; i < sections.size(); ++i) {
        SectionNode node = std::move(sections[i]);
        node.children.clear();
        node.depth = section_depth(node.number);
        if (node.ordinal == 0) node.ordinal = i + (first == 0 ? 1 : 0);

        std::size_t parent = 0;
        bool gap = false;
        std::string candidate = parent_number(node.number);
        bool immediate = true;
        while (!candidate.empty()) {
            auto it = latest.find(candidate);
            if (it != latest.end()) {
                parent = it->second;
                break;
            }
            immediate = false;
            candidate = parent_number(candidate);
        }
        if (candidate.empty() && node.depth > 1) gap = true;
        if (!immediate) gap = true;
        node.ancestor_gap = gap;

        const std::size_t idx = arena.size();
        latest[node.number] = idx;
        arena.push_back({std::move(node), {}});
        arena[parent].children.push_back(idx);
    }

    // Materialize bottom-up: children always have larger indices than parents.
    for (std::size_t i = arena.size(); i-- > 0;) {
        for (std::size_t c : arena[i].children) arena[i].node.children.push_back(std::move(arena[c].node));
    }
    return std::move(arena[0].node);
}

SectionNode build_section_tree(std::span<const std::string> numbers) {
    std::vector<SectionNode> nodes;
    nodes.reserve(numbers.size());
    for (std::size_t i = 0; i < numbers.size(); ++i) {
        SectionNode n;
        n.number = numbers[i];
        n.ordinal = i + 1;
        nodes.push_back(std::move(n));
    }
    return build_section_tree(std::move(nodes));
}

std::vector<Window> merge_windows(SectionNode& root, std::size_t max_words) {
    std::vector<PendingWindow> pending;
    collect_windows(root, std::max<std::size_t>(max_words, 1), pending);
    // A root without children still carries its preamble.
    if (root.is_leaf()) {
        if (auto w = make_window({&root})) pending.push_back(std::move(*w));
    }
    std::stable_sort(pending.begin(), pending.end(),
                     [](const PendingWindow& a, const PendingWindow& b) { return a.sort_key < b.sort_key; });
    std::vector<Window> out;
    out.reserve(pending.size());
    for (auto& p : pending) {
        p.window.window_id = static_cast<int>(out.size());
        out.push_back(std::move(p.window));
    }
    return out;
}

Segmentation segment_document(const RawDocument& raw, const CleaningRules& rules, std::size_t max_words) {
    Segmentation s;
    s.cleaned = clean_document(raw, rules);
    s.headings = extract_section_numbers(s.cleaned);
    s.tree = build_section_tree(map_paragraphs_to_sections(s.cleaned, s.headings));
    s.windows = merge_windows(s.tree, max_words);
    return s;
}

nlohmann::json windows_to_json(const std::vector<Window>& windows) {
    auto arr = nlohmann::json::array();
    for (const auto& w : windows) {
        arr.push_back({{"window_id", w.window_id}, {"section_numbers", w.section_numbers}, {"text", w.text}});
    }
    return arr;
}

}  // namespace specfsm
