#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mystery/corpus.hpp"
#include "mystery/masking.hpp"

namespace mystery {

enum class Visibility { none, pos, pos_constituents };

std::string_view visibility_name(Visibility v);
Visibility parse_visibility(std::string_view name);

struct SheetSpec {
    std::size_t sentences_per_page = 12;
    Visibility visibility = Visibility::pos_constituents;
    std::string page_size = "A3";
    /// Width of one grid cell in monospace characters.
    std::size_t cell_chars = 14;
};

enum class CardStyle { bracelet, grammar };

struct CardSpec {
    std::string surface;
    std::optional<int> pos_number;
    std::string deck_id;
    CardStyle style = CardStyle::bracelet;
};

/// A rendered file: stable name plus self-contained HTML.
struct Document {
    std::string name;
    std::string content;

    friend bool operator==(const Document&, const Document&) = default;
};

/// Where one token lands on a page grid.
struct GridCell {
    std::size_t sentence = 0;  ///< index into corpus.sentences
    std::size_t token = 0;
    std::size_t row = 0;
    std::size_t column = 0;

    friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct PageLayout {
    std::size_t number = 0;  ///< 1-based
    std::vector<std::size_t> sentences;
    std::vector<GridCell> cells;
    std::size_t rows = 0;

    friend bool operator==(const PageLayout&, const PageLayout&) = default;
};

/// Fixed monospace grid: each sentence starts a new row and wraps at the page
/// width. Depends only on token counts, so a corpus and its masked or clear
/// counterpart always share a layout.
std::vector<PageLayout> layout_pages(const AnnotatedCorpus& corpus, const SheetSpec& spec);

/// sheet-NN.html, one per page.
std::vector<Document> render_corpus_sheets(const AnnotatedCorpus& corpus, const SheetSpec& spec);

/// deck-<id>.html, one per deck id in first-seen order.
std::vector<Document> render_deck(const std::vector<CardSpec>& cards);

/// overlay-NN.html: clear words placed on the cells of the masked sheets.
/// Throws Error(layout_mismatch) if the clear and masked layouts differ.
std::vector<Document> render_reveal_overlay(const AnnotatedCorpus& masked, const MaskingTable& table,
                                            const SheetSpec& spec);

/// Cards for a whole sentence; grammar decks carry POS numbers.
std::vector<CardSpec> cards_for(const AnnotatedCorpus& corpus, const AnnotatedSentence& sentence,
                                std::string deck_id, CardStyle style);

void write_documents(const std::filesystem::path& dir, const std::vector<Document>& documents);

}  // namespace mystery
