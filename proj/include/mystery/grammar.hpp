#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mystery/corpus.hpp"
#include "mystery/random.hpp"

namespace mystery {

/// A rewrite rule: phrase category -> sequence of categories and POS tags.
struct Rule {
    std::string lhs;
    std::vector<std::string> rhs;

    /// "LHS = A B C", the format of rule cards and grammar dumps.
    std::string to_string() const;

    friend bool operator==(const Rule&, const Rule&) = default;
    friend auto operator<=>(const Rule&, const Rule&) = default;
};

inline constexpr std::size_t kDefaultMaxRhs = 6;

enum class LexiconMode {
    closed,  ///< leaves must be attested (POS, surface) pairs
    open,    ///< any surface is admitted under a known POS
};

std::string_view lexicon_mode_name(LexiconMode mode);
LexiconMode parse_lexicon_mode(std::string_view name);

struct Grammar {
    std::string start;
    std::set<std::string> categories;
    std::set<std::string> tags;
    std::set<Rule> rules;
    /// How often each rule occurs as a local tree in the source corpus.
    std::map<Rule, std::uint64_t> rule_counts;
    std::map<std::string, std::set<std::string>> lexicon;
    std::size_t max_rhs = kDefaultMaxRhs;

    bool is_symbol(std::string_view name) const;
    std::vector<Rule> rules_for(std::string_view lhs) const;

    /// Throws Error on the first broken invariant.
    void validate() const;

    friend bool operator==(const Grammar&, const Grammar&) = default;
};

/// Rule well-formedness against the grammar's legend: known symbols, a
/// category on the left, 1..max_rhs symbols on the right, no X -> X.
void validate_rule(const Rule& rule, const Grammar& legend);

/// Parses "LHS = A B" (or "LHS -> A B") and validates it against the legend.
Rule parse_rule(std::string_view text, const Grammar& legend);

/// An empty grammar that only knows the corpus legend.
Grammar legend_of(const AnnotatedCorpus& corpus);

/// Every local tree of every sentence becomes a rule; every leaf a lexicon
/// entry. Throws Error(inconsistent_root) or Error(empty_corpus).
Grammar extract_grammar(const AnnotatedCorpus& corpus, std::size_t max_rhs = kDefaultMaxRhs);

/// "# start: S", sorted rule lines "LHS = RHS...", then "POS : surface" lines.
std::string dump_grammar(const Grammar& grammar);

struct Derivation {
    ConstituentTree tree;
    /// Rules in leftmost (preorder) application order.
    std::vector<Rule> rule_trace;

    friend bool operator==(const Derivation&, const Derivation&) = default;
};

/// Local trees of a tree in preorder.
std::vector<Rule> rule_trace_of(const ConstituentTree& tree);

/// Rebuilds the tree by applying the trace leftmost from start and filling
/// preterminals with the given tokens. Throws Error(structure) on mismatch.
ConstituentTree replay(std::string_view start, const std::vector<Rule>& trace, const std::vector<Token>& leaves);

/// Right-factored binary form of a grammar. Rules of length >= 3 become a
/// chain through fresh "@" symbols that belong to exactly one original rule.
struct BinaryGrammar {
    struct Binary {
        int lhs = 0;
        int left = 0;
        int right = 0;
        int origin = 0;    ///< index into originals
        bool top = false;  ///< lhs is the original category (counts as one rule application)
    };
    struct Unary {
        int lhs = 0;
        int child = 0;
        int origin = 0;
    };
    struct Intermediate {
        int origin = 0;
        std::size_t position = 0;  ///< first rhs index this symbol still has to cover
    };

    std::vector<std::string> symbols;
    std::map<std::string, int, std::less<>> ids;
    std::vector<bool> is_tag;
    int start = -1;
    /// Original rules in sorted order; a rule's id is its index here.
    std::vector<Rule> originals;
    std::vector<Binary> binary;
    std::vector<Unary> unary;
    std::map<int, Intermediate> intermediates;

    int id_of(std::string_view symbol) const;

    /// Expands a trace of binary-rule applications (preorder) back into the
    /// original rules, which is how chart results are de-binarized.
    std::vector<Rule> original_rules(const std::vector<int>& origins) const;
};

BinaryGrammar binarize(const Grammar& grammar);

/// Fewest rule applications wins; ties go to the lexicographically smallest
/// rule trace. Returns nullopt when the tokens do not reduce to start.
/// Throws Error(inadmissible_token) for unknown POS tags, and for unattested
/// pairs in closed mode.
std::optional<Derivation> reduce(const Grammar& grammar, const std::vector<Token>& tokens,
                                 LexiconMode mode = LexiconMode::open);

inline constexpr std::size_t kMaxParses = 100;

/// All parses (up to limit), ordered like reduce() ranks them.
std::vector<Derivation> reduce_all(const Grammar& grammar, const std::vector<Token>& tokens,
                                   LexiconMode mode = LexiconMode::open, std::size_t limit = kMaxParses);

struct PartialPiece {
    std::string label;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Fewest maximal constituents covering the tokens left to right; a single
/// start piece means a full reduction.
std::vector<PartialPiece> best_partial_reduction(const Grammar& grammar, const std::vector<Token>& tokens,
                                                 LexiconMode mode = LexiconMode::open);

enum class RuleSampling { uniform, frequency };

struct GenerateOptions {
    /// Cards to fill preterminals with, each used at most once.
    std::optional<std::vector<Token>> deck;
    std::size_t max_depth = 12;
    int retries = 50;
    RuleSampling sampling = RuleSampling::uniform;
};

/// Top-down leftmost expansion from start. Throws Error(generation_failed)
/// with diagnostics once the retry bound is spent.
Derivation generate(const Grammar& grammar, Rng& rng, const GenerateOptions& options = {});

}  // namespace mystery
