#include "mystery/masking.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "mystery/error.hpp"
#include "mystery/text.hpp"

namespace mystery {

std::string_view mask_mode_name(MaskMode mode) {
    return mode == MaskMode::symbols ? "symbols" : "nonwords";
}

MaskMode parse_mask_mode(std::string_view name) {
    if (name == "symbols") return MaskMode::symbols;
    if (name == "nonwords") return MaskMode::nonwords;
    throw Error(ErrorCode::invalid_argument, "unknown mask mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Syllable templates and profiles
// ---------------------------------------------------------------------------

std::string SyllableTemplate::to_string() const {
    std::string out;
    if (onset) out += onset_optional ? "(C)" : "C";
    out += "V";
    if (coda) out += coda_optional ? "(C)" : "C";
    return out;
}

SyllableTemplate SyllableTemplate::parse(std::string_view pattern) {
    SyllableTemplate t;
    t.onset = false;
    const auto v = pattern.find('V');
    if (v == std::string_view::npos || pattern.find('V', v + 1) != std::string_view::npos) {
        throw Error(ErrorCode::syntax, "syllable template '" + std::string(pattern) + "' needs exactly one V");
    }
    auto slot = [&](std::string_view part, bool& present, bool& optional) {
        if (part.empty()) return;
        if (part == "C") {
            present = true;
        } else if (part == "(C)") {
            present = true;
            optional = true;
        } else {
            throw Error(ErrorCode::syntax, "bad syllable template '" + std::string(pattern) + "'");
        }
    };
    slot(pattern.substr(0, v), t.onset, t.onset_optional);
    slot(pattern.substr(v + 1), t.coda, t.coda_optional);
    return t;
}

namespace {

bool valid_segment(const std::string& s, bool allow_empty) {
    if (s.empty()) return allow_empty;
    return is_valid_surface(s);
}

std::string join_segments(const std::vector<std::string>& segments) {
    std::vector<std::string> shown;
    for (const auto& s : segments) shown.push_back(s.empty() ? "-" : s);
    return text::join(shown, " ");
}

}  // namespace

void PhonotacticProfile::validate() const {
    if (nuclei.empty()) throw Error(ErrorCode::invalid_argument, "profile needs at least one nucleus");
    if (templates.empty()) throw Error(ErrorCode::invalid_argument, "profile needs at least one syllable template");
    if (min_syllables < 1 || min_syllables > max_syllables || max_syllables > 16) {
        throw Error(ErrorCode::invalid_argument, "syllable bounds must satisfy 1 <= min <= max <= 16");
    }
    for (const auto& n : nuclei) {
        if (!valid_segment(n, false)) throw Error(ErrorCode::invalid_argument, "invalid nucleus '" + n + "'");
    }
    for (const auto& o : onsets) {
        if (!valid_segment(o, true)) throw Error(ErrorCode::invalid_argument, "invalid onset '" + o + "'");
    }
    for (const auto& c : codas) {
        if (!valid_segment(c, true)) throw Error(ErrorCode::invalid_argument, "invalid coda '" + c + "'");
    }
    for (const auto& t : templates) {
        if (t.onset && onsets.empty()) throw Error(ErrorCode::invalid_argument, "template " + t.to_string() + " needs onsets");
        if (t.coda && codas.empty()) throw Error(ErrorCode::invalid_argument, "template " + t.to_string() + " needs codas");
    }
}

namespace {

void slot_ends(std::string_view word, std::size_t pos, bool present, bool optional,
               const std::vector<std::string>& options, std::vector<std::size_t>& out) {
    if (!present || optional) out.push_back(pos);
    if (!present) return;
    for (const auto& o : options) {
        if (word.substr(pos).starts_with(o)) out.push_back(pos + o.size());
    }
}

}  // namespace

bool PhonotacticProfile::admits(std::string_view word) const {
    if (word.empty()) return false;
    // reach[k] holds the prefix lengths that split into exactly k syllables.
    const auto n = word.size();
    std::vector<std::vector<bool>> reach(static_cast<std::size_t>(max_syllables) + 1, std::vector<bool>(n + 1, false));
    reach[0][0] = true;
    for (int k = 0; k < max_syllables; ++k) {
        for (std::size_t pos = 0; pos < n; ++pos) {
            if (!reach[k][pos]) continue;
            for (const auto& t : templates) {
                std::vector<std::size_t> after_onset;
                slot_ends(word, pos, t.onset, t.onset_optional, onsets, after_onset);
                for (auto a : after_onset) {
                    std::vector<std::size_t> after_nucleus;
                    slot_ends(word, a, true, false, nuclei, after_nucleus);
                    for (auto b : after_nucleus) {
                        std::vector<std::size_t> after_coda;
                        slot_ends(word, b, t.coda, t.coda_optional, codas, after_coda);
                        for (auto c : after_coda) {
                            if (c > pos) reach[k + 1][c] = true;
                        }
                    }
                }
            }
        }
    }
    for (int k = min_syllables; k <= max_syllables; ++k) {
        if (reach[k][n]) return true;
    }
    return false;
}

std::string PhonotacticProfile::canonical() const {
    std::vector<std::string> shapes;
    for (const auto& t : templates) shapes.push_back(t.to_string());
    std::string words;
    for (const auto& w : blocklist) {
        words += w;
        words += '\n';
    }
    std::ostringstream out;
    out << "onsets: " << join_segments(onsets) << "\n"
        << "nuclei: " << join_segments(nuclei) << "\n"
        << "codas: " << join_segments(codas) << "\n"
        << "templates: " << text::join(shapes, " ") << "\n"
        << "syllables: " << min_syllables << " " << max_syllables << "\n"
        << "blocklist-hash: " << text::hex64(text::fnv1a64(words)) << "\n";
    return out.str();
}

std::string PhonotacticProfile::hash() const {
    return text::hex64(text::fnv1a64(canonical()));
}

PhonotacticProfile default_profile() {
    PhonotacticProfile p;
    p.onsets = {"p", "t", "k", "b", "d", "g", "f", "s", "m", "n", "l", "r",
                "v", "z", "pr", "tr", "kr", "br", "dr", "gr", "fr", "st", "sp"};
    p.nuclei = {"a", "e", "i", "o", "u"};
    p.codas = {"", "n", "r", "l", "s"};
    p.templates = {SyllableTemplate::parse("CVC")};
    p.min_syllables = 2;
    p.max_syllables = 4;
    return p;
}

std::set<std::string> load_blocklist(const std::filesystem::path& path) {
    std::set<std::string> words;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        for (auto& w : text::split_words(line)) words.insert(text::fold_case(w));
    }
    return words;
}

PhonotacticProfile parse_profile(std::string_view doc, const std::filesystem::path& base_dir) {
    PhonotacticProfile p;
    p.templates.clear();
    std::istringstream in{std::string(doc)};
    std::string line;
    std::size_t line_no = 0;
    auto segments = [](std::string_view value) {
        std::vector<std::string> out;
        for (auto& w : text::split_words(value)) out.push_back(w == "-" ? "" : w);
        return out;
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto content = text::trim(line);
        if (content.empty()) continue;
        const auto colon = content.find(':');
        if (colon == std::string_view::npos) throw ParseError(ErrorCode::syntax, line_no, 1, "expected 'key: value'");
        const auto key = text::trim(content.substr(0, colon));
        const auto value = text::trim(content.substr(colon + 1));
        if (key == "onsets") {
            p.onsets = segments(value);
        } else if (key == "nuclei") {
            p.nuclei = segments(value);
        } else if (key == "codas") {
            p.codas = segments(value);
        } else if (key == "templates") {
            for (const auto& t : text::split_words(value)) p.templates.push_back(SyllableTemplate::parse(t));
        } else if (key == "syllables") {
            const auto parts = text::split_words(value);
            if (parts.size() != 2) throw ParseError(ErrorCode::syntax, line_no, colon + 2, "syllables needs 'min max'");
            p.min_syllables = std::stoi(parts[0]);
            p.max_syllables = std::stoi(parts[1]);
        } else if (key == "blocklist") {
            p.blocklist = load_blocklist(base_dir / std::string(value));
        } else {
            throw ParseError(ErrorCode::syntax, line_no, 1, "unknown profile key '" + std::string(key) + "'");
        }
    }
    p.validate();
    return p;
}

PhonotacticProfile load_profile(const std::filesystem::path& path) {
    return parse_profile(read_text_file(path), path.parent_path());
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& options, Rng& rng) {
    return options[uniform_index(rng, options.size())];
}

std::string draw_word(const PhonotacticProfile& p, Rng& rng) {
    const auto span = static_cast<std::uint64_t>(p.max_syllables - p.min_syllables + 1);
    const auto syllables = p.min_syllables + static_cast<int>(uniform_index(rng, span));
    std::string word;
    for (int i = 0; i < syllables; ++i) {
        const auto& t = pick(p.templates, rng);
        if (t.onset && (!t.onset_optional || uniform_index(rng, 2) == 1)) word += pick(p.onsets, rng);
        word += pick(p.nuclei, rng);
        if (t.coda && (!t.coda_optional || uniform_index(rng, 2) == 1)) word += pick(p.codas, rng);
    }
    return word;
}

}  // namespace

std::string generate_nonword(const PhonotacticProfile& profile, Rng& rng) {
    for (int attempt = 0; attempt < kMaxRejectionsPerWord; ++attempt) {
        auto word = draw_word(profile, rng);
        if (!profile.is_blocked(word)) return word;
    }
    throw Error(ErrorCode::capacity, "profile keeps producing blocklisted words");
}

std::vector<std::string> default_symbol_alphabet() {
    return {"☉", "☽", "☿", "♀", "♁", "♂", "♃", "♄", "♅", "♆", "♇", "★", "☆", "✦",
            "✧", "◆", "◇", "■", "□", "▲", "△", "▼", "▽", "●", "○", "◐", "◑", "◒",
            "◓", "◔", "◕", "⬟", "⬠", "⬡", "⬢", "✶", "✷", "✸", "✹", "◈", "◉", "◭",
            "◮", "⊕", "⊗", "⊙", "⊛", "⋈"};
}

// ---------------------------------------------------------------------------
// Masking table
// ---------------------------------------------------------------------------

void MaskingTable::add(const std::string& source, const std::string& mask) {
    if (forward_.count(source)) throw Error(ErrorCode::invalid_argument, "source '" + source + "' is already mapped");
    if (reverse_.count(mask)) throw Error(ErrorCode::invalid_argument, "mask '" + mask + "' is already used");
    forward_.emplace(source, mask);
    reverse_.emplace(mask, source);
}

const std::string* MaskingTable::mask_of(std::string_view source) const {
    const auto it = forward_.find(source);
    return it == forward_.end() ? nullptr : &it->second;
}

const std::string* MaskingTable::source_of(std::string_view mask) const {
    const auto it = reverse_.find(mask);
    return it == reverse_.end() ? nullptr : &it->second;
}

std::vector<std::string> lexicon_of(const AnnotatedCorpus& corpus) {
    std::vector<std::string> order;
    std::set<std::string> seen;
    for (const auto& s : corpus.sentences) {
        for (const auto& t : s.tokens()) {
            auto folded = text::fold_case(t.surface);
            if (seen.insert(folded).second) order.push_back(std::move(folded));
        }
    }
    return order;
}

namespace {

std::string alphabet_hash(const std::vector<std::string>& alphabet) {
    return text::hex64(text::fnv1a64(text::join(alphabet, "\n")));
}

MaskingTable build_symbols(const std::vector<std::string>& lexicon, const MaskConfig& config) {
    std::set<std::string> distinct;
    for (const auto& symbol : config.alphabet) {
        if (text::code_points(symbol).size() != 1 || !is_valid_surface(symbol)) {
            throw Error(ErrorCode::invalid_argument, "alphabet entries must be single printable code points");
        }
        if (!distinct.insert(symbol).second) throw Error(ErrorCode::invalid_argument, "duplicate alphabet symbol " + symbol);
    }
    std::set<std::string> inventory;
    for (const auto& word : lexicon) {
        for (auto& cp : text::code_points(word)) inventory.insert(std::move(cp));
    }
    if (config.alphabet.size() < inventory.size()) {
        throw Error(ErrorCode::alphabet_too_small,
                    "alphabet has " + std::to_string(config.alphabet.size()) + " symbols but the corpus uses " +
                        std::to_string(inventory.size()) + " characters");
    }
    Rng rng(config.seed);
    auto symbols = config.alphabet;
    shuffle(symbols, rng);
    std::map<std::string, std::string> cipher;
    std::size_t next = 0;
    for (const auto& cp : inventory) cipher.emplace(cp, symbols[next++]);

    MaskingTable table;
    table.mode = MaskMode::symbols;
    table.seed = config.seed;
    table.config_hash = alphabet_hash(config.alphabet);
    for (const auto& word : lexicon) {
        std::string masked;
        for (const auto& cp : text::code_points(word)) masked += cipher.at(cp);
        table.add(word, masked);
    }
    return table;
}

MaskingTable build_nonwords(const std::vector<std::string>& lexicon, const MaskConfig& config) {
    config.profile.validate();
    const std::set<std::string> sources(lexicon.begin(), lexicon.end());
    Rng rng(config.seed);
    MaskingTable table;
    table.mode = MaskMode::nonwords;
    table.seed = config.seed;
    table.config_hash = config.profile.hash();
    for (const auto& word : lexicon) {
        int rejections = 0;
        while (true) {
            auto candidate = generate_nonword(config.profile, rng);
            if (!sources.count(candidate) && !table.source_of(candidate)) {
                table.add(word, candidate);
                break;
            }
            if (++rejections >= kMaxRejectionsPerWord) {
                throw Error(ErrorCode::capacity, "profile cannot yield enough distinct non-words (stuck on word " +
                                                     std::to_string(table.size() + 1) + " of " +
                                                     std::to_string(lexicon.size()) + ")");
            }
        }
    }
    return table;
}

}  // namespace

MaskingTable build_masking_table(const AnnotatedCorpus& corpus, const MaskConfig& config) {
    const auto lexicon = lexicon_of(corpus);
    auto table = config.mode == MaskMode::symbols ? build_symbols(lexicon, config) : build_nonwords(lexicon, config);
    table.source_language = corpus.language_tag;
    return table;
}

namespace {

template <typename Lookup>
void rewrite_leaves(ConstituentTree& t, const Lookup& lookup) {
    if (t.is_preterminal()) {
        t.surface = lookup(*t.surface);
        return;
    }
    for (auto& c : t.children) rewrite_leaves(c, lookup);
}

}  // namespace

AnnotatedCorpus mask_corpus(const AnnotatedCorpus& corpus, const MaskingTable& table) {
    AnnotatedCorpus out = corpus;
    out.language_tag = std::string(kMysteryLanguage);
    auto lookup = [&](const std::string& surface) {
        const auto folded = text::fold_case(surface);
        const auto* mask = table.mask_of(folded);
        if (!mask) throw Error(ErrorCode::missing_mapping, "no mask for word '" + folded + "'");
        return *mask;
    };
    for (auto& s : out.sentences) rewrite_leaves(s.tree, lookup);
    return out;
}

AnnotatedCorpus unmask(const AnnotatedCorpus& masked, const MaskingTable& table) {
    AnnotatedCorpus out = masked;
    out.language_tag = table.source_language;
    auto lookup = [&](const std::string& surface) {
        const auto* source = table.source_of(surface);
        if (!source) throw Error(ErrorCode::unknown_token, "unknown mask token '" + surface + "'");
        return *source;
    };
    for (auto& s : out.sentences) rewrite_leaves(s.tree, lookup);
    return out;
}

std::vector<std::string> mask_tokens(const std::vector<std::string>& tokens, const MaskingTable& table) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        const auto folded = text::fold_case(t);
        const auto* mask = table.mask_of(folded);
        if (!mask) throw Error(ErrorCode::missing_mapping, "no mask for word '" + folded + "'");
        out.push_back(*mask);
    }
    return out;
}

std::vector<std::string> unmask(const std::vector<std::string>& tokens, const MaskingTable& table) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        const auto* source = table.source_of(t);
        if (!source) throw Error(ErrorCode::unknown_token, "unknown mask token '" + t + "'");
        out.push_back(*source);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Table file format
// ---------------------------------------------------------------------------

std::string serialize_table(const MaskingTable& table) {
    std::string out = "# masking table\n";
    out += "mode: " + std::string(mask_mode_name(table.mode)) + "\n";
    out += "seed: " + std::to_string(table.seed) + "\n";
    out += "source-language: " + table.source_language + "\n";
    out += (table.mode == MaskMode::nonwords ? "profile-hash: " : "alphabet-hash: ") + table.config_hash + "\n";
    out += "---\n";
    for (const auto& [source, mask] : table.forward()) out += source + "\t" + mask + "\n";
    return out;
}

MaskingTable parse_table(std::string_view doc) {
    MaskingTable table;
    std::istringstream in{std::string(doc)};
    std::string line;
    std::size_t line_no = 0;
    bool body = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!body) {
            const auto content = text::trim(line);
            if (content.empty() || content.front() == '#') continue;
            if (content == "---") {
                body = true;
                continue;
            }
            const auto colon = content.find(':');
            if (colon == std::string_view::npos) throw ParseError(ErrorCode::syntax, line_no, 1, "expected 'key: value'");
            const auto key = text::trim(content.substr(0, colon));
            const std::string value(text::trim(content.substr(colon + 1)));
            if (key == "mode") {
                table.mode = parse_mask_mode(value);
            } else if (key == "seed") {
                const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), table.seed);
                if (ec != std::errc{} || ptr != value.data() + value.size()) {
                    throw ParseError(ErrorCode::syntax, line_no, colon + 2, "seed must be an unsigned integer");
                }
            } else if (key == "source-language") {
                table.source_language = value;
            } else if (key == "profile-hash" || key == "alphabet-hash") {
                table.config_hash = value;
            } else {
                throw ParseError(ErrorCode::syntax, line_no, 1, "unknown table header '" + std::string(key) + "'");
            }
            continue;
        }
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
            throw ParseError(ErrorCode::syntax, line_no, 1, "expected 'source<TAB>mask'");
        }
        try {
            table.add(line.substr(0, tab), line.substr(tab + 1));
        } catch (const Error& e) {
            throw ParseError(ErrorCode::structure, line_no, 1, e.what());
        }
    }
    return table;
}

}  // namespace mystery
