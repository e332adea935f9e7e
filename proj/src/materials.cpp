#include "mystery/materials.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "mystery/error.hpp"
#include "mystery/text.hpp"

namespace mystery {

std::string_view visibility_name(Visibility v) {
    switch (v) {
    case Visibility::none: return "none";
    case Visibility::pos: return "pos";
    case Visibility::pos_constituents: return "pos+constituents";
    }
    return "none";
}

Visibility parse_visibility(std::string_view name) {
    if (name == "none") return Visibility::none;
    if (name == "pos") return Visibility::pos;
    if (name == "pos+constituents") return Visibility::pos_constituents;
    throw Error(ErrorCode::invalid_argument, "unknown visibility '" + std::string(name) + "'");
}

namespace {

struct PageSize {
    std::string_view name;
    int width_mm;
    int height_mm;
    std::size_t columns;
};

constexpr PageSize kPageSizes[] = {
    {"A3", 420, 297, 10},
    {"A4", 297, 210, 7},
};

const PageSize& page_size(std::string_view name) {
    for (const auto& p : kPageSizes) {
        if (p.name == name) return p;
    }
    throw Error(ErrorCode::invalid_argument, "unknown page size '" + std::string(name) + "'");
}

constexpr int kCharWidth = 9;
constexpr int kMargin = 24;
constexpr int kLabelWidth = 40;
constexpr int kTextLine = 30;
constexpr int kPosLine = 18;
constexpr int kBand = 7;

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string two_digits(std::size_t n) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%02zu", n);
    return buf;
}

std::size_t tree_depth(const ConstituentTree& t) {
    if (t.is_preterminal()) return 0;
    std::size_t d = 0;
    for (const auto& c : t.children) d = std::max(d, tree_depth(c));
    return d + 1;
}

/// Page geometry shared by sheets and overlays.
struct Geometry {
    int cell_width = 0;
    int row_height = 0;
    int width = 0;
    int height = 0;
    const PageSize* size = nullptr;

    int x(std::size_t column) const { return kMargin + kLabelWidth + static_cast<int>(column) * cell_width; }
    int y(std::size_t row) const { return kMargin + static_cast<int>(row) * row_height + kTextLine - 8; }
};

Geometry geometry_for(const AnnotatedCorpus& corpus, const SheetSpec& spec, const PageLayout& page) {
    Geometry g;
    g.size = &page_size(spec.page_size);
    g.cell_width = static_cast<int>(spec.cell_chars) * kCharWidth + 12;
    std::size_t depth = 0;
    if (spec.visibility == Visibility::pos_constituents) {
        for (auto s : page.sentences) depth = std::max(depth, tree_depth(corpus.sentences[s].tree));
    }
    g.row_height = kTextLine + (spec.visibility == Visibility::none ? 0 : kPosLine) + static_cast<int>(depth) * kBand;
    g.width = 2 * kMargin + kLabelWidth + static_cast<int>(g.size->columns) * g.cell_width;
    const int content = 2 * kMargin + static_cast<int>(page.rows) * g.row_height;
    g.height = std::max(g.width * g.size->height_mm / g.size->width_mm, content);
    return g;
}

std::string html_open(const std::string& title, const std::string& lang, const Geometry& g) {
    std::string out;
    out += "<!DOCTYPE html>\n<html lang=\"" + escape(lang) + "\">\n<head>\n<meta charset=\"utf-8\">\n";
    out += "<title>" + escape(title) + "</title>\n";
    out += "<style>@page { size: " + std::string(g.size->name) + " landscape; margin: 0 } body { margin: 0 } svg { display: block }</style>\n";
    out += "</head>\n<body>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(g.size->width_mm) + "mm\" height=\"" +
           std::to_string(g.size->height_mm) + "mm\" viewBox=\"0 0 " + std::to_string(g.width) + " " +
           std::to_string(g.height) + "\" font-family=\"monospace\">\n";
    return out;
}

const char* html_close() {
    return "</svg>\n</body>\n</html>\n";
}

/// Text placed in a grid cell; long words are squeezed to the cell width.
std::string cell_text(const std::string& cls, const Geometry& g, const GridCell& cell, int y, int font,
                      const std::string& value, std::string_view extra = {}) {
    const int inner = g.cell_width - 12;
    const auto chars = static_cast<int>(text::code_points(value).size());
    std::string out = "<text class=\"" + cls + "\" data-row=\"" + std::to_string(cell.row) + "\" data-col=\"" +
                      std::to_string(cell.column) + "\" x=\"" + std::to_string(g.x(cell.column) + 6) + "\" y=\"" +
                      std::to_string(y) + "\" font-size=\"" + std::to_string(font) + "\"";
    if (chars * kCharWidth * font / 15 > inner) {
        out += " textLength=\"" + std::to_string(inner) + "\" lengthAdjust=\"spacingAndGlyphs\"";
    }
    out += std::string(extra);
    out += ">" + escape(value) + "</text>\n";
    return out;
}

struct Span {
    const ConstituentTree* node;
    std::size_t begin;
    std::size_t end;
    std::size_t depth;
};

void collect_spans(const ConstituentTree& t, std::size_t& next, std::size_t depth, std::vector<Span>& out) {
    if (t.is_preterminal()) {
        ++next;
        return;
    }
    const auto begin = next;
    for (const auto& c : t.children) collect_spans(c, next, depth + 1, out);
    out.push_back({&t, begin, next, depth});
}

}  // namespace

std::vector<PageLayout> layout_pages(const AnnotatedCorpus& corpus, const SheetSpec& spec) {
    if (spec.sentences_per_page == 0) throw Error(ErrorCode::invalid_argument, "sentences per page must be positive");
    const auto columns = page_size(spec.page_size).columns;
    std::vector<PageLayout> pages;
    for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
        if (s % spec.sentences_per_page == 0) {
            pages.emplace_back();
            pages.back().number = pages.size();
        }
        auto& page = pages.back();
        page.sentences.push_back(s);
        const auto count = corpus.sentences[s].tree.leaves().size();
        for (std::size_t t = 0; t < count; ++t) {
            page.cells.push_back({s, t, page.rows + t / columns, t % columns});
        }
        page.rows += (count + columns - 1) / columns;
    }
    return pages;
}

std::vector<Document> render_corpus_sheets(const AnnotatedCorpus& corpus, const SheetSpec& spec) {
    const auto pages = layout_pages(corpus, spec);
    std::vector<Document> docs;
    for (const auto& page : pages) {
        const auto g = geometry_for(corpus, spec, page);
        std::string out = html_open("Corpus sheet " + std::to_string(page.number) + " of " + std::to_string(pages.size()),
                                    corpus.language_tag, g);
        out += "<rect class=\"sheet\" x=\"0\" y=\"0\" width=\"" + std::to_string(g.width) + "\" height=\"" +
               std::to_string(g.height) + "\" fill=\"#ffffff\"/>\n";
        std::size_t cell_index = 0;
        for (auto s : page.sentences) {
            const auto& sentence = corpus.sentences[s];
            const auto tokens = sentence.tokens();
            const auto first_row = page.cells[cell_index].row;
            out += "<g class=\"sentence\" data-sentence=\"" + std::to_string(sentence.id) + "\" data-text=\"" +
                   escape(sentence_text(sentence)) + "\">\n";
            out += "<text class=\"number\" x=\"" + std::to_string(kMargin) + "\" y=\"" + std::to_string(g.y(first_row)) +
                   "\" font-size=\"13\">" + std::to_string(sentence.id) + "</text>\n";
            std::vector<GridCell> cells(page.cells.begin() + static_cast<std::ptrdiff_t>(cell_index),
                                        page.cells.begin() + static_cast<std::ptrdiff_t>(cell_index + tokens.size()));
            cell_index += tokens.size();
            for (std::size_t t = 0; t < tokens.size(); ++t) {
                out += cell_text("token", g, cells[t], g.y(cells[t].row), 15, tokens[t].surface);
                if (spec.visibility != Visibility::none) {
                    const auto* tag = corpus.find_tag(tokens[t].pos);
                    const auto label = tag ? std::to_string(tag->number) : tokens[t].pos;
                    out += cell_text("pos", g, cells[t], g.y(cells[t].row) + kPosLine, 11, label);
                }
            }
            if (spec.visibility == Visibility::pos_constituents) {
                std::vector<Span> spans;
                std::size_t next = 0;
                collect_spans(sentence.tree, next, 0, spans);
                for (const auto& span : spans) {
                    const auto* cat = corpus.find_category(span.node->label);
                    const auto color = cat ? cat->color : std::string("gray");
                    // One bar per grid row the constituent crosses.
                    std::size_t t = span.begin;
                    while (t < span.end) {
                        const auto row = cells[t].row;
                        std::size_t last = t;
                        while (last + 1 < span.end && cells[last + 1].row == row) ++last;
                        const int x0 = g.x(cells[t].column) + 2;
                        const int x1 = g.x(cells[last].column) + g.cell_width - 2;
                        const int y = g.y(row) + kPosLine + 6 + static_cast<int>(span.depth) * kBand;
                        out += "<rect class=\"constituent\" data-category=\"" + escape(span.node->label) + "\" x=\"" +
                               std::to_string(x0) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
                               std::to_string(x1 - x0) + "\" height=\"" + std::to_string(kBand - 2) + "\" fill=\"" +
                               escape(color) + "\"/>\n";
                        t = last + 1;
                    }
                }
            }
            out += "</g>\n";
        }
        out += html_close();
        docs.push_back({"sheet-" + two_digits(page.number) + ".html", std::move(out)});
    }
    return docs;
}

namespace {

bool valid_deck_id(std::string_view id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    });
}

constexpr int kCardWidth = 150;
constexpr int kCardHeight = 96;
constexpr int kCardGap = 16;
constexpr int kCardsPerRow = 5;

}  // namespace

std::vector<Document> render_deck(const std::vector<CardSpec>& cards) {
    if (cards.empty()) throw Error(ErrorCode::invalid_argument, "cannot render an empty deck");
    std::vector<std::string> order;
    std::map<std::string, std::vector<const CardSpec*>> decks;
    for (const auto& c : cards) {
        if (!valid_deck_id(c.deck_id)) throw Error(ErrorCode::invalid_argument, "invalid deck id '" + c.deck_id + "'");
        if ((c.style == CardStyle::grammar) != c.pos_number.has_value()) {
            throw Error(ErrorCode::invalid_argument, "card '" + c.surface + "': POS numbers belong on grammar cards only");
        }
        if (!decks.count(c.deck_id)) order.push_back(c.deck_id);
        decks[c.deck_id].push_back(&c);
    }

    std::vector<Document> docs;
    for (const auto& id : order) {
        const auto& deck = decks[id];
        const auto rows = (deck.size() + kCardsPerRow - 1) / kCardsPerRow;
        const int width = kCardGap + kCardsPerRow * (kCardWidth + kCardGap);
        const int height = kCardGap + static_cast<int>(rows) * (kCardHeight + kCardGap);
        std::string out = "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Deck " + escape(id) +
                          "</title>\n<style>body { margin: 0 } svg { display: block }</style>\n</head>\n<body>\n";
        out += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + std::to_string(width) + " " +
               std::to_string(height) + "\" font-family=\"monospace\">\n";
        for (std::size_t i = 0; i < deck.size(); ++i) {
            const auto& card = *deck[i];
            const int x = kCardGap + static_cast<int>(i % kCardsPerRow) * (kCardWidth + kCardGap);
            const int y = kCardGap + static_cast<int>(i / kCardsPerRow) * (kCardHeight + kCardGap);
            const bool grammar = card.style == CardStyle::grammar;
            out += "<g class=\"card " + std::string(grammar ? "grammar" : "bracelet") + "\" data-index=\"" +
                   std::to_string(i) + "\" transform=\"translate(" + std::to_string(x) + "," + std::to_string(y) + ")\">\n";
            out += "<rect width=\"" + std::to_string(kCardWidth) + "\" height=\"" + std::to_string(kCardHeight) +
                   "\" rx=\"8\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";
            if (!grammar) {
                out += "<circle class=\"buttonhole\" cx=\"" + std::to_string(kCardWidth / 2) +
                       "\" cy=\"12\" r=\"5\" fill=\"none\" stroke=\"#000000\"/>\n";
            }
            out += "<text class=\"surface\" x=\"" + std::to_string(kCardWidth / 2) + "\" y=\"" +
                   std::to_string(kCardHeight / 2 + 6) + "\" text-anchor=\"middle\" font-size=\"18\">" +
                   escape(card.surface) + "</text>\n";
            if (grammar) {
                out += "<text class=\"pos-number\" x=\"" + std::to_string(kCardWidth / 2) + "\" y=\"" +
                       std::to_string(kCardHeight - 10) + "\" text-anchor=\"middle\" font-size=\"14\">" +
                       std::to_string(*card.pos_number) + "</text>\n";
            }
            out += "</g>\n";
        }
        out += "</svg>\n</body>\n</html>\n";
        docs.push_back({"deck-" + id + ".html", std::move(out)});
    }
    return docs;
}

std::vector<Document> render_reveal_overlay(const AnnotatedCorpus& masked, const MaskingTable& table,
                                            const SheetSpec& spec) {
    const auto clear = unmask(masked, table);
    const auto pages = layout_pages(masked, spec);
    if (layout_pages(clear, spec) != pages) {
        throw Error(ErrorCode::layout_mismatch, "overlay pagination differs from the corpus sheets");
    }
    std::vector<Document> docs;
    for (const auto& page : pages) {
        // Geometry comes from the masked corpus so every cell sits exactly over its sheet cell.
        const auto g = geometry_for(masked, spec, page);
        std::string out = html_open("Reveal overlay " + std::to_string(page.number) + " of " + std::to_string(pages.size()),
                                    clear.language_tag, g);
        std::size_t cell_index = 0;
        for (auto s : page.sentences) {
            const auto clear_tokens = clear.sentences[s].surfaces();
            const auto masked_tokens = masked.sentences[s].surfaces();
            out += "<g class=\"sentence\" data-sentence=\"" + std::to_string(clear.sentences[s].id) + "\" data-text=\"" +
                   escape(sentence_text(clear.sentences[s])) + "\">\n";
            for (std::size_t t = 0; t < clear_tokens.size(); ++t) {
                const auto& cell = page.cells[cell_index++];
                out += cell_text("guide", g, cell, g.y(cell.row), 15, masked_tokens[t], " fill=\"#bbbbbb\"");
                out += cell_text("token", g, cell, g.y(cell.row) - 14, 13, clear_tokens[t], " fill=\"#8b0000\"");
            }
            out += "</g>\n";
        }
        out += html_close();
        docs.push_back({"overlay-" + two_digits(page.number) + ".html", std::move(out)});
    }
    return docs;
}

std::vector<CardSpec> cards_for(const AnnotatedCorpus& corpus, const AnnotatedSentence& sentence, std::string deck_id,
                                CardStyle style) {
    std::vector<CardSpec> cards;
    for (const auto& t : sentence.tokens()) {
        CardSpec c{t.surface, std::nullopt, deck_id, style};
        if (style == CardStyle::grammar) {
            const auto* tag = corpus.find_tag(t.pos);
            c.pos_number = tag ? tag->number : 0;
        }
        cards.push_back(std::move(c));
    }
    return cards;
}

void write_documents(const std::filesystem::path& dir, const std::vector<Document>& documents) {
    std::filesystem::create_directories(dir);
    for (const auto& d : documents) write_text_file(dir / d.name, d.content);
}

}  // namespace mystery
