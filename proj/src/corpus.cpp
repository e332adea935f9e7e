#include "mystery/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "mystery/error.hpp"
#include "mystery/text.hpp"

namespace mystery {

ConstituentTree ConstituentTree::leaf(std::string pos, std::string surface) {
    ConstituentTree t;
    t.label = std::move(pos);
    t.surface = std::move(surface);
    return t;
}

ConstituentTree ConstituentTree::node(std::string category, std::vector<ConstituentTree> children) {
    ConstituentTree t;
    t.label = std::move(category);
    t.children = std::move(children);
    return t;
}

std::size_t ConstituentTree::node_count() const {
    std::size_t n = 1;
    for (const auto& c : children) n += c.node_count();
    return n;
}

namespace {

void collect_leaves(const ConstituentTree& t, std::vector<Token>& out) {
    if (t.is_preterminal()) {
        out.push_back({*t.surface, t.label});
        return;
    }
    for (const auto& c : t.children) collect_leaves(c, out);
}

}  // namespace

std::vector<Token> ConstituentTree::leaves() const {
    std::vector<Token> out;
    collect_leaves(*this, out);
    return out;
}

std::vector<std::string> AnnotatedSentence::surfaces() const {
    std::vector<std::string> out;
    for (auto& t : tokens()) out.push_back(std::move(t.surface));
    return out;
}

const PosTag* AnnotatedCorpus::find_tag(std::string_view name) const {
    for (const auto& t : tagset) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

const PhraseCategory* AnnotatedCorpus::find_category(std::string_view name) const {
    for (const auto& c : categories) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

std::vector<PosTag> default_tagset() {
    return {{"ART", 1}, {"N", 2}, {"V", 3}, {"PREP", 4},
            {"ADJ", 5}, {"ADV", 6}, {"PRON", 7}, {"CONJ", 8}};
}

std::vector<PhraseCategory> default_categories() {
    return {{"S", "red"}, {"NP", "blue"}, {"VP", "green"}, {"PP", "orange"}, {"SUB", "purple"}};
}

bool is_valid_surface(std::string_view surface) {
    if (surface.empty() || text::has_whitespace(surface)) return false;
    return surface.find_first_of("()") == std::string_view::npos && text::is_valid_utf8(surface);
}

bool is_valid_label(std::string_view label) {
    if (!is_valid_surface(label)) return false;
    return label.find_first_of(":=@#") == std::string_view::npos;
}

// ---------------------------------------------------------------------------
// Legend and tree validation
// ---------------------------------------------------------------------------

namespace {

struct Position {
    std::size_t line = 1;
    std::size_t column = 1;
};

[[noreturn]] void fail(ErrorCode code, Position at, const std::string& message) {
    throw ParseError(code, at.line, at.column, message);
}

void validate_legend(const AnnotatedCorpus& c, Position at) {
    if (c.language_tag.empty() || text::has_whitespace(c.language_tag)) {
        fail(ErrorCode::syntax, at, "language tag must be a single non-empty word");
    }
    std::set<std::string> names;
    std::set<int> numbers;
    for (const auto& tag : c.tagset) {
        if (!is_valid_label(tag.name)) fail(ErrorCode::syntax, at, "invalid tag name '" + tag.name + "'");
        if (tag.number <= 0) fail(ErrorCode::structure, at, "tag " + tag.name + " needs a positive number");
        if (!names.insert(tag.name).second) fail(ErrorCode::structure, at, "duplicate tag " + tag.name);
        if (!numbers.insert(tag.number).second) {
            fail(ErrorCode::structure, at, "duplicate tag number " + std::to_string(tag.number));
        }
    }
    if (c.categories.size() > kMaxPhraseCategories) {
        fail(ErrorCode::structure, at,
             "at most " + std::to_string(kMaxPhraseCategories) + " phrase categories are allowed");
    }
    std::set<std::string> colors;
    for (const auto& cat : c.categories) {
        if (!is_valid_label(cat.name)) fail(ErrorCode::syntax, at, "invalid category name '" + cat.name + "'");
        if (!is_valid_label(cat.color)) fail(ErrorCode::syntax, at, "invalid color '" + cat.color + "'");
        if (!names.insert(cat.name).second) {
            fail(ErrorCode::structure, at, "name " + cat.name + " is used twice in the legend");
        }
        if (!colors.insert(cat.color).second) fail(ErrorCode::structure, at, "duplicate color " + cat.color);
    }
    if ((!c.categories.empty() || !c.sentences.empty()) && !c.is_category(c.start)) {
        fail(ErrorCode::unknown_label, at, "start category " + c.start + " is not in the legend");
    }
}

void validate_node(const AnnotatedCorpus& c, const ConstituentTree& t, Position at) {
    if (t.is_preterminal()) {
        if (!t.children.empty()) fail(ErrorCode::structure, at, "node " + t.label + " mixes a token with subtrees");
        if (!c.is_tag(t.label)) {
            if (c.is_category(t.label)) {
                fail(ErrorCode::structure, at, "phrase category " + t.label + " labels a token");
            }
            fail(ErrorCode::unknown_label, at, "unknown tag " + t.label);
        }
        if (!is_valid_surface(*t.surface)) fail(ErrorCode::syntax, at, "invalid token '" + *t.surface + "'");
        return;
    }
    if (!c.is_category(t.label)) {
        if (c.is_tag(t.label)) fail(ErrorCode::structure, at, "POS tag " + t.label + " labels a phrase");
        fail(ErrorCode::unknown_label, at, "unknown category " + t.label);
    }
    if (t.children.empty()) fail(ErrorCode::structure, at, "empty constituent " + t.label);
    for (const auto& child : t.children) validate_node(c, child, at);
}

void validate_sentence(const AnnotatedCorpus& c, const ConstituentTree& t, Position at) {
    validate_node(c, t, at);
    if (t.is_preterminal() || t.label != c.start) {
        fail(ErrorCode::structure, at, "sentence root must be the start category " + c.start);
    }
}

// ---------------------------------------------------------------------------
// Bracketing reader
// ---------------------------------------------------------------------------

class BracketReader {
public:
    BracketReader(std::string_view body, std::size_t first_line) : s_(body) { pos_.line = first_line; }

    bool at_end() {
        skip_space();
        return i_ >= s_.size();
    }

    Position position() const { return pos_; }

    ConstituentTree read_tree() {
        skip_space();
        const Position open = pos_;
        expect('(');
        skip_space();
        const Position label_at = pos_;
        std::string label = read_atom();
        if (label.empty()) fail(ErrorCode::syntax, label_at, "expected a label after '('");
        skip_space();
        if (peek() == ')') fail(ErrorCode::syntax, pos_, "empty constituent " + label);
        if (peek() != '(') {
            std::string surface = read_atom();
            if (surface.empty()) fail(ErrorCode::syntax, pos_, "unexpected end of input");
            skip_space();
            if (peek() == '(') fail(ErrorCode::structure, pos_, "node " + label + " mixes a token with subtrees");
            if (peek() != ')') fail(ErrorCode::structure, pos_, "preterminal " + label + " must hold exactly one token");
            advance();
            return ConstituentTree::leaf(std::move(label), std::move(surface));
        }
        std::vector<ConstituentTree> children;
        while (true) {
            skip_space();
            if (i_ >= s_.size()) fail(ErrorCode::syntax, open, "unbalanced '('");
            if (peek() == ')') {
                advance();
                break;
            }
            if (peek() != '(') fail(ErrorCode::structure, pos_, "node " + label + " mixes a token with subtrees");
            children.push_back(read_tree());
        }
        return ConstituentTree::node(std::move(label), std::move(children));
    }

private:
    char peek() const { return i_ < s_.size() ? s_[i_] : '\0'; }

    void advance() {
        const auto c = static_cast<unsigned char>(s_[i_++]);
        if (c == '\n') {
            ++pos_.line;
            pos_.column = 1;
        } else if ((c & 0xC0) != 0x80) {
            ++pos_.column;
        }
    }

    void expect(char c) {
        if (peek() != c) {
            if (i_ >= s_.size()) fail(ErrorCode::syntax, pos_, std::string("expected '") + c + "' before end of input");
            fail(ErrorCode::syntax, pos_, std::string("expected '") + c + "'");
        }
        advance();
    }

    void skip_space() {
        bool line_start = pos_.column == 1;
        while (i_ < s_.size()) {
            const char c = s_[i_];
            if (c == '\n') {
                advance();
                line_start = true;
            } else if (c == ' ' || c == '\t' || c == '\r') {
                advance();
            } else if (c == '#' && line_start) {
                while (i_ < s_.size() && s_[i_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    std::string read_atom() {
        const auto start = i_;
        while (i_ < s_.size()) {
            const char c = s_[i_];
            if (c == '(' || c == ')' || c == ' ' || c == '\t' || c == '\n' || c == '\r') break;
            advance();
        }
        return std::string(s_.substr(start, i_ - start));
    }

    std::string_view s_;
    std::size_t i_ = 0;
    Position pos_;
};

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string_view strip_comment(std::string_view line) {
    const auto hash = line.find('#');
    return hash == std::string_view::npos ? line : line.substr(0, hash);
}

}  // namespace

AnnotatedCorpus parse_corpus(std::string_view text) {
    if (!text::is_valid_utf8(text)) throw ParseError(ErrorCode::syntax, 1, 1, "document is not valid UTF-8");

    AnnotatedCorpus corpus;
    corpus.start.clear();
    const auto lines = split_lines(text);

    enum class Section { top, tagset, categories };
    Section section = Section::top;
    std::size_t body_line = lines.size();  // 0-based index of the first bracketing line
    std::size_t body_offset = text.size();
    std::size_t offset = 0;

    for (std::size_t n = 0; n < lines.size(); ++n) {
        const auto raw = lines[n];
        const Position at{n + 1, 1};
        const auto content = text::trim(strip_comment(raw));
        const auto line_offset = offset;
        offset += raw.size() + 1;
        if (content.empty()) continue;
        if (content == "---") {
            body_line = n + 1;
            body_offset = std::min(offset, text.size());
            break;
        }
        if (content.front() == '(') {
            body_line = n;
            body_offset = line_offset;
            break;
        }
        const bool indented = raw.front() == ' ' || raw.front() == '\t';
        const auto colon = content.find(':');
        if (colon == std::string_view::npos) fail(ErrorCode::syntax, at, "expected 'key: value'");
        const auto key = text::trim(content.substr(0, colon));
        const auto value = text::trim(content.substr(colon + 1));

        if (indented && section != Section::top) {
            if (section == Section::tagset) {
                int number = 0;
                const auto* end = value.data() + value.size();
                const auto [ptr, ec] = std::from_chars(value.data(), end, number);
                if (ec != std::errc{} || ptr != end) {
                    fail(ErrorCode::syntax, at, "tag " + std::string(key) + " needs an integer number");
                }
                corpus.tagset.push_back({std::string(key), number});
            } else {
                corpus.categories.push_back({std::string(key), std::string(value)});
            }
            continue;
        }
        if (indented) fail(ErrorCode::syntax, at, "unexpected indented line");
        section = Section::top;
        if (key == "language") {
            corpus.language_tag = std::string(value);
        } else if (key == "start") {
            corpus.start = std::string(value);
        } else if (key == "tagset" && value.empty()) {
            section = Section::tagset;
        } else if (key == "categories" && value.empty()) {
            section = Section::categories;
        } else {
            fail(ErrorCode::syntax, at, "unknown header key '" + std::string(key) + "'");
        }
    }

    if (corpus.start.empty()) {
        corpus.start = corpus.categories.empty() ? "S" : corpus.categories.front().name;
    }
    validate_legend(corpus, {1, 1});

    BracketReader reader(text.substr(body_offset), body_line + 1);
    while (!reader.at_end()) {
        const Position at = reader.position();
        ConstituentTree tree = reader.read_tree();
        validate_sentence(corpus, tree, at);
        AnnotatedSentence sentence;
        sentence.id = static_cast<int>(corpus.sentences.size()) + 1;
        sentence.tree = std::move(tree);
        corpus.sentences.push_back(std::move(sentence));
    }
    return corpus;
}

void validate_corpus(const AnnotatedCorpus& corpus) {
    validate_legend(corpus, {1, 1});
    for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
        const auto& s = corpus.sentences[i];
        if (s.id != static_cast<int>(i) + 1) {
            throw Error(ErrorCode::structure, "sentence ids must be dense 1..N");
        }
        validate_sentence(corpus, s.tree, {i + 1, 1});
    }
}

namespace {

void write_tree(const ConstituentTree& t, std::string& out) {
    out += '(';
    out += t.label;
    if (t.is_preterminal()) {
        out += ' ';
        out += *t.surface;
    } else {
        for (const auto& c : t.children) {
            out += ' ';
            write_tree(c, out);
        }
    }
    out += ')';
}

}  // namespace

std::string bracketed(const ConstituentTree& tree) {
    std::string out;
    write_tree(tree, out);
    return out;
}

std::string serialize_corpus(const AnnotatedCorpus& corpus) {
    std::string out;
    out += "language: " + corpus.language_tag + "\n";
    out += "start: " + corpus.start + "\n";
    out += "tagset:\n";
    for (const auto& t : corpus.tagset) out += "  " + t.name + ": " + std::to_string(t.number) + "\n";
    out += "categories:\n";
    for (const auto& c : corpus.categories) out += "  " + c.name + ": " + c.color + "\n";
    out += "---\n";
    for (const auto& s : corpus.sentences) {
        write_tree(s.tree, out);
        out += '\n';
    }
    return out;
}

std::vector<std::vector<std::string>> tokens_of(const AnnotatedCorpus& corpus) {
    std::vector<std::vector<std::string>> out;
    out.reserve(corpus.sentences.size());
    for (const auto& s : corpus.sentences) out.push_back(s.surfaces());
    return out;
}

std::string sentence_text(const AnnotatedSentence& sentence) {
    return text::join(sentence.surfaces(), " ");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

AnnotatedCorpus load_corpus(const std::filesystem::path& path) {
    return parse_corpus(read_text_file(path));
}

}  // namespace mystery
