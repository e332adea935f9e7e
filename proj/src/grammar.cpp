#include "mystery/grammar.hpp"

#include <algorithm>
#include <functional>
#include <tuple>

#include "mystery/error.hpp"
#include "mystery/text.hpp"

namespace mystery {

std::string Rule::to_string() const {
    return lhs + " = " + text::join(rhs, " ");
}

std::string_view lexicon_mode_name(LexiconMode mode) {
    return mode == LexiconMode::closed ? "closed" : "open";
}

LexiconMode parse_lexicon_mode(std::string_view name) {
    if (name == "closed") return LexiconMode::closed;
    if (name == "open") return LexiconMode::open;
    throw Error(ErrorCode::invalid_argument, "unknown lexicon mode '" + std::string(name) + "'");
}

bool Grammar::is_symbol(std::string_view name) const {
    const std::string key(name);
    return categories.count(key) || tags.count(key);
}

std::vector<Rule> Grammar::rules_for(std::string_view lhs) const {
    std::vector<Rule> out;
    for (const auto& r : rules) {
        if (r.lhs == lhs) out.push_back(r);
    }
    return out;
}

void validate_rule(const Rule& rule, const Grammar& legend) {
    if (!legend.categories.count(rule.lhs)) {
        throw Error(ErrorCode::unknown_label, "rule left side " + rule.lhs + " is not a phrase category");
    }
    if (rule.rhs.empty()) throw Error(ErrorCode::structure, "rule " + rule.lhs + " has an empty right side");
    if (rule.rhs.size() > legend.max_rhs) {
        throw Error(ErrorCode::structure, "rule " + rule.to_string() + " is longer than " +
                                              std::to_string(legend.max_rhs) + " symbols");
    }
    for (const auto& s : rule.rhs) {
        if (!legend.is_symbol(s)) throw Error(ErrorCode::unknown_label, "unknown symbol " + s + " in rule");
    }
    if (rule.rhs.size() == 1 && rule.rhs.front() == rule.lhs) {
        throw Error(ErrorCode::structure, "unit self-loop " + rule.to_string());
    }
}

void Grammar::validate() const {
    if (!categories.count(start)) throw Error(ErrorCode::unknown_label, "start " + start + " is not a category");
    for (const auto& c : categories) {
        if (tags.count(c)) throw Error(ErrorCode::structure, c + " is both a category and a tag");
    }
    for (const auto& r : rules) validate_rule(r, *this);
    for (const auto& [pos, words] : lexicon) {
        if (!tags.count(pos)) throw Error(ErrorCode::unknown_label, "lexicon tag " + pos + " is not in the tagset");
    }
}

Rule parse_rule(std::string_view line, const Grammar& legend) {
    auto words = text::split_words(line);
    if (words.size() < 2 || (words[1] != "=" && words[1] != "->")) {
        throw Error(ErrorCode::syntax, "expected 'LHS = RHS...', got '" + std::string(line) + "'");
    }
    Rule rule{words[0], {words.begin() + 2, words.end()}};
    validate_rule(rule, legend);
    return rule;
}

Grammar legend_of(const AnnotatedCorpus& corpus) {
    Grammar g;
    g.start = corpus.start;
    for (const auto& c : corpus.categories) g.categories.insert(c.name);
    for (const auto& t : corpus.tagset) g.tags.insert(t.name);
    return g;
}

namespace {

void collect_rules(const ConstituentTree& t, Grammar& g) {
    if (t.is_preterminal()) {
        g.lexicon[t.label].insert(*t.surface);
        return;
    }
    Rule r{t.label, {}};
    for (const auto& c : t.children) r.rhs.push_back(c.label);
    validate_rule(r, g);
    g.rules.insert(r);
    ++g.rule_counts[r];
    for (const auto& c : t.children) collect_rules(c, g);
}

}  // namespace

Grammar extract_grammar(const AnnotatedCorpus& corpus, std::size_t max_rhs) {
    if (corpus.sentences.empty()) throw Error(ErrorCode::empty_corpus, "cannot extract a grammar from an empty corpus");
    Grammar g = legend_of(corpus);
    g.max_rhs = max_rhs;
    g.start = corpus.sentences.front().tree.label;
    for (const auto& s : corpus.sentences) {
        if (s.tree.label != g.start) {
            throw Error(ErrorCode::inconsistent_root, "sentence " + std::to_string(s.id) + " has root " + s.tree.label +
                                                          " but sentence 1 has root " + g.start);
        }
        collect_rules(s.tree, g);
    }
    g.validate();
    return g;
}

std::string dump_grammar(const Grammar& grammar) {
    std::string out = "# start: " + grammar.start + "\n";
    for (const auto& r : grammar.rules) out += r.to_string() + "\n";
    for (const auto& [pos, words] : grammar.lexicon) {
        for (const auto& w : words) out += pos + " : " + w + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Derivations
// ---------------------------------------------------------------------------

namespace {

void preorder_rules(const ConstituentTree& t, std::vector<Rule>& out) {
    if (t.is_preterminal()) return;
    Rule r{t.label, {}};
    for (const auto& c : t.children) r.rhs.push_back(c.label);
    out.push_back(std::move(r));
    for (const auto& c : t.children) preorder_rules(c, out);
}

}  // namespace

std::vector<Rule> rule_trace_of(const ConstituentTree& tree) {
    std::vector<Rule> out;
    preorder_rules(tree, out);
    return out;
}

ConstituentTree replay(std::string_view start, const std::vector<Rule>& trace, const std::vector<Token>& leaves) {
    std::size_t next_rule = 0;
    std::size_t next_leaf = 0;
    std::function<ConstituentTree(const std::string&)> expand = [&](const std::string& symbol) {
        if (next_rule < trace.size() && trace[next_rule].lhs == symbol) {
            const Rule& r = trace[next_rule++];
            std::vector<ConstituentTree> children;
            for (const auto& s : r.rhs) children.push_back(expand(s));
            return ConstituentTree::node(symbol, std::move(children));
        }
        if (next_leaf >= leaves.size() || leaves[next_leaf].pos != symbol) {
            throw Error(ErrorCode::structure, "trace does not derive the tokens at symbol " + symbol);
        }
        const auto& tok = leaves[next_leaf++];
        return ConstituentTree::leaf(tok.pos, tok.surface);
    };
    auto tree = expand(std::string(start));
    if (next_rule != trace.size() || next_leaf != leaves.size()) {
        throw Error(ErrorCode::structure, "trace and tokens are not fully consumed");
    }
    return tree;
}

// ---------------------------------------------------------------------------
// Binarization
// ---------------------------------------------------------------------------

int BinaryGrammar::id_of(std::string_view symbol) const {
    const auto it = ids.find(symbol);
    return it == ids.end() ? -1 : it->second;
}

std::vector<Rule> BinaryGrammar::original_rules(const std::vector<int>& origins) const {
    std::vector<Rule> out;
    out.reserve(origins.size());
    for (int id : origins) out.push_back(originals.at(static_cast<std::size_t>(id)));
    return out;
}

BinaryGrammar binarize(const Grammar& grammar) {
    BinaryGrammar b;
    auto intern = [&](const std::string& name, bool tag) {
        const auto it = b.ids.find(name);
        if (it != b.ids.end()) return it->second;
        const int id = static_cast<int>(b.symbols.size());
        b.symbols.push_back(name);
        b.is_tag.push_back(tag);
        b.ids.emplace(name, id);
        return id;
    };
    for (const auto& c : grammar.categories) intern(c, false);
    for (const auto& t : grammar.tags) intern(t, true);
    b.start = b.id_of(grammar.start);

    b.originals.assign(grammar.rules.begin(), grammar.rules.end());
    for (std::size_t r = 0; r < b.originals.size(); ++r) {
        const auto& rule = b.originals[r];
        const int origin = static_cast<int>(r);
        std::vector<int> rhs;
        for (const auto& s : rule.rhs) rhs.push_back(b.id_of(s));
        const int lhs = b.id_of(rule.lhs);
        if (rhs.size() == 1) {
            b.unary.push_back({lhs, rhs[0], origin});
            continue;
        }
        // A -> X1 @1, @1 -> X2 @2, ..., @(n-2) -> X(n-1) Xn
        int current = lhs;
        for (std::size_t k = 0; k + 2 < rhs.size(); ++k) {
            const auto name = "@" + rule.lhs + "->" + text::join(rule.rhs, "_") + "|" + std::to_string(k + 1);
            const int fresh = intern(name, false);
            b.intermediates[fresh] = {origin, k + 1};
            b.binary.push_back({current, rhs[k], fresh, origin, k == 0});
            current = fresh;
        }
        b.binary.push_back({current, rhs[rhs.size() - 2], rhs.back(), origin, rhs.size() == 2});
    }
    return b;
}

// ---------------------------------------------------------------------------
// Chart parsing
// ---------------------------------------------------------------------------

namespace {

struct Item {
    std::size_t cost = 0;
    std::vector<int> trace;

    bool better_than(const Item& other) const {
        if (cost != other.cost) return cost < other.cost;
        return trace < other.trace;
    }
};

using Cell = std::map<int, Item>;

struct Chart {
    std::size_t n = 0;
    std::vector<Cell> cells;  // (i, j) at i * (n + 1) + j

    explicit Chart(std::size_t length) : n(length), cells((length + 1) * (length + 1)) {}
    Cell& at(std::size_t i, std::size_t j) { return cells[i * (n + 1) + j]; }
    const Cell& at(std::size_t i, std::size_t j) const { return cells[i * (n + 1) + j]; }
};

bool relax(Cell& cell, int symbol, Item candidate) {
    auto it = cell.find(symbol);
    if (it == cell.end()) {
        cell.emplace(symbol, std::move(candidate));
        return true;
    }
    if (candidate.better_than(it->second)) {
        it->second = std::move(candidate);
        return true;
    }
    return false;
}

void check_admissible(const Grammar& grammar, const std::vector<Token>& tokens, LexiconMode mode) {
    for (const auto& t : tokens) {
        if (!grammar.tags.count(t.pos)) {
            throw Error(ErrorCode::inadmissible_token, "token '" + t.surface + "' has unknown POS " + t.pos);
        }
        if (mode == LexiconMode::closed) {
            const auto it = grammar.lexicon.find(t.pos);
            if (it == grammar.lexicon.end() || !it->second.count(t.surface)) {
                throw Error(ErrorCode::inadmissible_token,
                            "token '" + t.surface + "/" + t.pos + "' is not attested (closed lexicon)");
            }
        }
    }
}

Chart fill_chart(const BinaryGrammar& b, const std::vector<Token>& tokens) {
    const auto n = tokens.size();
    Chart chart(n);
    std::map<std::pair<int, int>, std::vector<const BinaryGrammar::Binary*>> by_children;
    for (const auto& r : b.binary) by_children[{r.left, r.right}].push_back(&r);

    for (std::size_t len = 1; len <= n; ++len) {
        for (std::size_t i = 0; i + len <= n; ++i) {
            const auto j = i + len;
            Cell& cell = chart.at(i, j);
            if (len == 1) {
                cell.emplace(b.id_of(tokens[i].pos), Item{});
            } else {
                for (std::size_t k = i + 1; k < j; ++k) {
                    const Cell& left = chart.at(i, k);
                    const Cell& right = chart.at(k, j);
                    if (left.empty() || right.empty()) continue;
                    for (const auto& [l, litem] : left) {
                        for (const auto& [r, ritem] : right) {
                            const auto found = by_children.find({l, r});
                            if (found == by_children.end()) continue;
                            for (const auto* rule : found->second) {
                                Item cand;
                                cand.cost = litem.cost + ritem.cost + (rule->top ? 1 : 0);
                                if (rule->top) cand.trace.push_back(rule->origin);
                                cand.trace.insert(cand.trace.end(), litem.trace.begin(), litem.trace.end());
                                cand.trace.insert(cand.trace.end(), ritem.trace.begin(), ritem.trace.end());
                                relax(cell, rule->lhs, std::move(cand));
                            }
                        }
                    }
                }
            }
            // Unary closure; every unary step adds cost, so cycles never improve.
            bool changed = true;
            while (changed) {
                changed = false;
                for (const auto& u : b.unary) {
                    const auto child = cell.find(u.child);
                    if (child == cell.end()) continue;
                    Item cand;
                    cand.cost = child->second.cost + 1;
                    cand.trace.push_back(u.origin);
                    cand.trace.insert(cand.trace.end(), child->second.trace.begin(), child->second.trace.end());
                    changed |= relax(cell, u.lhs, std::move(cand));
                }
            }
        }
    }
    return chart;
}

}  // namespace

std::optional<Derivation> reduce(const Grammar& grammar, const std::vector<Token>& tokens, LexiconMode mode) {
    check_admissible(grammar, tokens, mode);
    if (tokens.empty()) return std::nullopt;
    const auto b = binarize(grammar);
    const auto chart = fill_chart(b, tokens);
    const Cell& top = chart.at(0, tokens.size());
    const auto it = top.find(b.start);
    if (it == top.end()) return std::nullopt;
    Derivation d;
    d.rule_trace = b.original_rules(it->second.trace);
    d.tree = replay(grammar.start, d.rule_trace, tokens);
    return d;
}

namespace {

class ParseEnumerator {
public:
    ParseEnumerator(const Grammar& g, const BinaryGrammar& b, const Chart& chart, const std::vector<Token>& tokens,
                    std::size_t limit)
        : g_(g), b_(b), chart_(chart), tokens_(tokens), limit_(limit) {}

    std::vector<ConstituentTree> trees(const std::string& symbol, std::size_t i, std::size_t j) {
        std::vector<ConstituentTree> out;
        if (g_.tags.count(symbol)) {
            if (j == i + 1 && tokens_[i].pos == symbol) out.push_back(ConstituentTree::leaf(symbol, tokens_[i].surface));
            return out;
        }
        if (!reachable(symbol, i, j)) return out;
        const auto key = std::make_tuple(symbol, i, j);
        if (on_path_.count(key)) return out;  // a unary cycle adds nothing new
        on_path_.insert(key);
        for (const auto& rule : g_.rules_for(symbol)) {
            std::vector<std::vector<ConstituentTree>> pieces;
            splits(rule, 0, i, j, pieces, out);
            if (out.size() >= limit_) break;
        }
        on_path_.erase(key);
        if (out.size() > limit_) out.resize(limit_);
        return out;
    }

private:
    bool reachable(const std::string& symbol, std::size_t i, std::size_t j) const {
        const auto id = b_.id_of(symbol);
        return id >= 0 && chart_.at(i, j).count(id) > 0;
    }

    void splits(const Rule& rule, std::size_t k, std::size_t i, std::size_t j,
                std::vector<std::vector<ConstituentTree>>& pieces, std::vector<ConstituentTree>& out) {
        if (out.size() >= limit_) return;
        const auto left = rule.rhs.size() - k;
        if (left == 1) {
            if (!reachable(rule.rhs[k], i, j)) return;
            auto last = trees(rule.rhs[k], i, j);
            if (last.empty()) return;
            pieces.push_back(std::move(last));
            combine(rule, pieces, 0, {}, out);
            pieces.pop_back();
            return;
        }
        for (std::size_t m = i + 1; m + (left - 1) <= j; ++m) {
            if (!reachable(rule.rhs[k], i, m)) continue;
            auto here = trees(rule.rhs[k], i, m);
            if (here.empty()) continue;
            pieces.push_back(std::move(here));
            splits(rule, k + 1, m, j, pieces, out);
            pieces.pop_back();
            if (out.size() >= limit_) return;
        }
    }

    void combine(const Rule& rule, const std::vector<std::vector<ConstituentTree>>& pieces, std::size_t k,
                 std::vector<ConstituentTree> chosen, std::vector<ConstituentTree>& out) {
        if (out.size() >= limit_) return;
        if (k == pieces.size()) {
            out.push_back(ConstituentTree::node(rule.lhs, std::move(chosen)));
            return;
        }
        for (const auto& option : pieces[k]) {
            auto next = chosen;
            next.push_back(option);
            combine(rule, pieces, k + 1, std::move(next), out);
            if (out.size() >= limit_) return;
        }
    }

    const Grammar& g_;
    const BinaryGrammar& b_;
    const Chart& chart_;
    const std::vector<Token>& tokens_;
    std::size_t limit_;
    std::set<std::tuple<std::string, std::size_t, std::size_t>> on_path_;
};

}  // namespace

std::vector<Derivation> reduce_all(const Grammar& grammar, const std::vector<Token>& tokens, LexiconMode mode,
                                   std::size_t limit) {
    check_admissible(grammar, tokens, mode);
    std::vector<Derivation> out;
    if (tokens.empty() || limit == 0) return out;
    const auto b = binarize(grammar);
    const auto chart = fill_chart(b, tokens);
    ParseEnumerator e(grammar, b, chart, tokens, limit);
    for (auto& tree : e.trees(grammar.start, 0, tokens.size())) {
        Derivation d;
        d.rule_trace = rule_trace_of(tree);
        d.tree = std::move(tree);
        out.push_back(std::move(d));
    }
    std::sort(out.begin(), out.end(), [](const Derivation& a, const Derivation& b) {
        if (a.rule_trace.size() != b.rule_trace.size()) return a.rule_trace.size() < b.rule_trace.size();
        return a.rule_trace < b.rule_trace;
    });
    return out;
}

std::vector<PartialPiece> best_partial_reduction(const Grammar& grammar, const std::vector<Token>& tokens,
                                                 LexiconMode mode) {
    check_admissible(grammar, tokens, mode);
    const auto n = tokens.size();
    if (n == 0) return {};
    const auto b = binarize(grammar);
    const auto chart = fill_chart(b, tokens);

    auto label_for = [&](std::size_t i, std::size_t j) -> std::optional<std::string> {
        const Cell& cell = chart.at(i, j);
        if (cell.count(b.start)) return grammar.start;
        for (const auto& c : grammar.categories) {
            if (cell.count(b.id_of(c))) return c;
        }
        if (j == i + 1) return tokens[i].pos;
        return std::nullopt;
    };

    // best[j]: fewest pieces covering tokens [0, j)
    std::vector<std::size_t> best(n + 1, n + 1);
    std::vector<std::size_t> from(n + 1, 0);
    best[0] = 0;
    for (std::size_t j = 1; j <= n; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (best[i] + 1 < best[j] && label_for(i, j)) {
                best[j] = best[i] + 1;
                from[j] = i;
            }
        }
    }
    std::vector<PartialPiece> pieces;
    for (std::size_t j = n; j > 0; j = from[j]) pieces.push_back({*label_for(from[j], j), from[j], j});
    std::reverse(pieces.begin(), pieces.end());
    return pieces;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace {

struct GenerationFailure {
    bool depth = false;
    std::string message;
};

class Generator {
public:
    Generator(const Grammar& g, Rng& rng, const GenerateOptions& options) : g_(g), rng_(rng), options_(options) {
        if (options_.deck) remaining_ = *options_.deck;
    }

    Derivation run() {
        Derivation d;
        d.tree = expand(g_.start, 0, d.rule_trace);
        return d;
    }

private:
    ConstituentTree expand(const std::string& symbol, std::size_t depth, std::vector<Rule>& trace) {
        if (g_.tags.count(symbol)) return ConstituentTree::leaf(symbol, fill(symbol));
        if (depth >= options_.max_depth) {
            throw GenerationFailure{true, "depth bound " + std::to_string(options_.max_depth) + " exceeded"};
        }
        const auto candidates = g_.rules_for(symbol);
        if (candidates.empty()) throw GenerationFailure{false, "no rule rewrites " + symbol};
        std::size_t pick = 0;
        if (options_.sampling == RuleSampling::frequency) {
            std::vector<std::uint64_t> weights;
            for (const auto& r : candidates) {
                const auto it = g_.rule_counts.find(r);
                weights.push_back(it == g_.rule_counts.end() ? 1 : std::max<std::uint64_t>(it->second, 1));
            }
            pick = weighted_index(rng_, weights);
        } else {
            pick = static_cast<std::size_t>(uniform_index(rng_, candidates.size()));
        }
        const Rule& rule = candidates[pick];
        trace.push_back(rule);
        std::vector<ConstituentTree> children;
        for (const auto& s : rule.rhs) children.push_back(expand(s, depth + 1, trace));
        return ConstituentTree::node(symbol, std::move(children));
    }

    std::string fill(const std::string& pos) {
        if (options_.deck) {
            std::vector<std::size_t> matching;
            for (std::size_t i = 0; i < remaining_.size(); ++i) {
                if (remaining_[i].pos == pos) matching.push_back(i);
            }
            if (matching.empty()) throw GenerationFailure{false, "deck has no card left for " + pos};
            const auto chosen = matching[uniform_index(rng_, matching.size())];
            auto surface = remaining_[chosen].surface;
            remaining_.erase(remaining_.begin() + static_cast<std::ptrdiff_t>(chosen));
            return surface;
        }
        const auto it = g_.lexicon.find(pos);
        if (it == g_.lexicon.end() || it->second.empty()) throw GenerationFailure{false, "lexicon has no word for " + pos};
        auto word = it->second.begin();
        std::advance(word, static_cast<std::ptrdiff_t>(uniform_index(rng_, it->second.size())));
        return *word;
    }

    const Grammar& g_;
    Rng& rng_;
    const GenerateOptions& options_;
    std::vector<Token> remaining_;
};

}  // namespace

Derivation generate(const Grammar& grammar, Rng& rng, const GenerateOptions& options) {
    if (grammar.rules_for(grammar.start).empty()) {
        throw Error(ErrorCode::generation_failed, "no rule rewrites the start category " + grammar.start);
    }
    int depth_failures = 0;
    int deck_failures = 0;
    std::string last;
    for (int attempt = 0; attempt <= options.retries; ++attempt) {
        try {
            return Generator(grammar, rng, options).run();
        } catch (const GenerationFailure& f) {
            (f.depth ? depth_failures : deck_failures)++;
            last = f.message;
        }
    }
    throw Error(ErrorCode::generation_failed,
                "generation failed after " + std::to_string(options.retries + 1) + " attempts (" +
                    std::to_string(depth_failures) + " over depth, " + std::to_string(deck_failures) +
                    " short of cards or words); last: " + last);
}

}  // namespace mystery
