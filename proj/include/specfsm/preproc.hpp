#pragma once

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace specfsm {

struct RawDocument {
    std::string doc_id;
    std::string text;
    std::string protocol;
    std::string spec_version;
};

/// Line-level noise filters applied by clean_document. Patterns are ECMAScript
/// regexes matched against whole lines; a matching line is dropped.
struct CleaningRules {
    std::vector<std::string> drop_line_patterns;
    bool strip_footnote_markers = true;
    /// Longer lines are body text; the patterns are only tried on shorter ones.
    std::size_t max_noise_line_length = 400;

    static CleaningRules defaults();
};

/// Removes tables of contents, page headers/footers, footnote markers, caption
/// fragments and collapses runs of three or more blank lines into one.
/// Throws Error(EmptyAfterClean) when nothing but whitespace survives.
RawDocument clean_document(const RawDocument& raw, const CleaningRules& rules = CleaningRules::defaults());

struct SectionHeading {
    std::string number;
    std::string title;
    std::size_t offset = 0;  // byte offset of the heading line in the cleaned text
};

/// Parses a heading line ("5.5.1 Title", "Annex B (normative): Title", "B.2 Title").
std::optional<SectionHeading> parse_heading_line(std::string_view line);

/// Throws Error(NoSectionsFound) when the document has no heading lines.
std::vector<SectionHeading> extract_section_numbers(const RawDocument& doc);

struct SectionNode {
    std::string number;  // empty for the synthetic root
    std::string title;
    int depth = 0;
    std::vector<std::string> paragraphs;
    std::vector<SectionNode> children;
    std::optional<std::string> merged_content;
    bool all_children_merged = false;
    /// Set when the node hangs below an ancestor further up than its immediate
    /// parent number because that parent heading is absent from the document.
    bool ancestor_gap = false;
    std::size_t ordinal = 0;  // document order; 0 is the root

    bool is_root() const noexcept { return number.empty(); }
    bool is_leaf() const noexcept { return children.empty(); }
};

/// Number of dotted components ("5.5.1" -> 3).
int section_depth(std::string_view number) noexcept;

/// Parent number by dropping the last component; empty at top level.
std::string parent_number(std::string_view number);

/// Assigns each body paragraph to the nearest preceding heading. The result is
/// flat: element 0 is the synthetic root holding any preamble, followed by one
/// childless node per heading in document order.
std::vector<SectionNode> map_paragraphs_to_sections(const RawDocument& doc,
                                                    std::span<const SectionHeading> sections);

/// Nests flat section nodes by their numbers under a synthetic root. A section
/// whose parent number never appeared is attached to its deepest existing
/// ancestor (or the root) and flagged with ancestor_gap.
SectionNode build_section_tree(std::vector<SectionNode> sections);
SectionNode build_section_tree(std::span<const std::string> numbers);

struct Window {
    int window_id = 0;
    std::vector<std::string> section_numbers;
    std::string text;
    std::size_t word_count = 0;
    std::vector<std::string> paragraphs;  // body paragraphs carried, in order
};

inline constexpr std::size_t kDefaultMaxWords = 3000;

/// Single-level bottom-up merge of leaves into their parents. A merged parent
/// larger than max_words is emitted as its own paragraphs plus one window per
/// leaf child. Marks merged parents in the tree (merged_content and
/// all_children_merged).
std::vector<Window> merge_windows(SectionNode& root, std::size_t max_words = kDefaultMaxWords);

struct Segmentation {
    RawDocument cleaned;
    std::vector<SectionHeading> headings;
    SectionNode tree;
    std::vector<Window> windows;
};

Segmentation segment_document(const RawDocument& raw, const CleaningRules& rules = CleaningRules::defaults(),
                              std::size_t max_words = kDefaultMaxWords);

/// Body paragraphs of a cleaned document in order (heading lines excluded).
std::vector<std::string> body_paragraphs(const RawDocument& doc);

nlohmann::json windows_to_json(const std::vector<Window>& windows);

}  // namespace specfsm
