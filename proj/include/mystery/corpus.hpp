#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mystery {

/// A part-of-speech tag together with the number printed on grammar-game cards.
struct PosTag {
    std::string name;
    int number = 0;

    friend bool operator==(const PosTag&, const PosTag&) = default;
};

/// A phrase-level category and the color of its annotation strip.
struct PhraseCategory {
    std::string name;
    std::string color;

    friend bool operator==(const PhraseCategory&, const PhraseCategory&) = default;
};

struct Token {
    std::string surface;
    std::string pos;

    friend bool operator==(const Token&, const Token&) = default;
    friend auto operator<=>(const Token&, const Token&) = default;
};

/// A labeled bracketing node. Preterminals carry a surface and a POS label;
/// internal nodes carry children and a phrase-category label.
struct ConstituentTree {
    std::string label;
    std::vector<ConstituentTree> children;
    std::optional<std::string> surface;

    static ConstituentTree leaf(std::string pos, std::string surface);
    static ConstituentTree node(std::string category, std::vector<ConstituentTree> children);

    bool is_preterminal() const { return surface.has_value(); }
    std::size_t node_count() const;
    /// Left-to-right preterminal sequence.
    std::vector<Token> leaves() const;

    friend bool operator==(const ConstituentTree&, const ConstituentTree&) = default;
};

struct AnnotatedSentence {
    int id = 0;
    ConstituentTree tree;

    std::vector<Token> tokens() const { return tree.leaves(); }
    std::vector<std::string> surfaces() const;

    friend bool operator==(const AnnotatedSentence&, const AnnotatedSentence&) = default;
};

inline constexpr std::size_t kMaxPhraseCategories = 5;

struct AnnotatedCorpus {
    std::string language_tag = "und";
    std::string start = "S";
    std::vector<PosTag> tagset;
    std::vector<PhraseCategory> categories;
    std::vector<AnnotatedSentence> sentences;

    const PosTag* find_tag(std::string_view name) const;
    const PhraseCategory* find_category(std::string_view name) const;
    bool is_tag(std::string_view name) const { return find_tag(name) != nullptr; }
    bool is_category(std::string_view name) const { return find_category(name) != nullptr; }

    friend bool operator==(const AnnotatedCorpus&, const AnnotatedCorpus&) = default;
};

/// ART=1 N=2 V=3 PREP=4 ADJ=5 ADV=6 PRON=7 CONJ=8.
std::vector<PosTag> default_tagset();

/// S, NP, VP, PP, SUB with distinct colors.
std::vector<PhraseCategory> default_categories();

/// Parses the corpus format: a legend header followed by one labeled
/// bracketing per sentence. See docs/corpus-format.md.
/// Throws ParseError carrying line and column.
AnnotatedCorpus parse_corpus(std::string_view text);

std::string serialize_corpus(const AnnotatedCorpus& corpus);

/// Checks every corpus invariant; throws Error on the first violation.
void validate_corpus(const AnnotatedCorpus& corpus);

/// One surface list per sentence, in sentence order.
std::vector<std::vector<std::string>> tokens_of(const AnnotatedCorpus& corpus);

/// Single-line bracketing of one tree, as written by serialize_corpus.
std::string bracketed(const ConstituentTree& tree);

/// Space-joined surfaces of a sentence.
std::string sentence_text(const AnnotatedSentence& sentence);

/// Reserved characters that may not appear in surfaces or labels.
bool is_valid_surface(std::string_view surface);
bool is_valid_label(std::string_view label);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);
AnnotatedCorpus load_corpus(const std::filesystem::path& path);

}  // namespace mystery
