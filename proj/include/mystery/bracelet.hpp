#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mystery/corpus.hpp"
#include "mystery/random.hpp"

namespace mystery {

/// Boundary markers as they appear in model dumps.
inline constexpr std::string_view kStart = "<s>";
inline constexpr std::string_view kEnd = "</s>";

enum class BoundaryPolicy {
    end_required,  ///< the last word must be attested sentence-finally
    end_optional,  ///< only the start and inner transitions are checked
};

std::string_view boundary_policy_name(BoundaryPolicy policy);
BoundaryPolicy parse_boundary_policy(std::string_view name);

/// Unsmoothed bigram counts with one START and one END per training sentence.
/// Surfaces are case-folded on the way in.
class BigramModel {
public:
    using Row = std::map<std::string, std::uint64_t, std::less<>>;

    const std::set<std::string, std::less<>>& vocabulary() const { return vocabulary_; }
    bool contains(std::string_view word) const { return vocabulary_.count(word) > 0; }
    std::uint64_t sentence_count() const { return sentences_; }

    /// count(left, right); pass kStart / kEnd for the boundaries.
    std::uint64_t count(std::string_view left, std::string_view right) const;
    /// Total mass of a left context.
    std::uint64_t row_total(std::string_view left) const;
    /// P(right | left) = count / row_total, 0 for an empty row.
    double probability(std::string_view left, std::string_view right) const;
    const Row* row(std::string_view left) const;
    const std::map<std::string, Row, std::less<>>& rows() const { return rows_; }

    void add_sentence(const std::vector<std::string>& words);

    friend bool operator==(const BigramModel&, const BigramModel&) = default;

private:
    std::set<std::string, std::less<>> vocabulary_;
    std::map<std::string, Row, std::less<>> rows_;
    std::map<std::string, std::uint64_t, std::less<>> totals_;
    std::uint64_t sentences_ = 0;
};

/// Throws Error(empty_corpus) when there is nothing to train on.
BigramModel train_bigrams(const AnnotatedCorpus& corpus);
BigramModel train_bigrams(const std::vector<std::vector<std::string>>& sentences);

/// Deterministic "left<TAB>right<TAB>count" rows sorted by (left, right).
std::string dump_model(const BigramModel& model);

/// A multiset of cards.
struct Deck {
    std::vector<std::string> cards;
};

/// A candidate ordering and its verdict. step_probabilities[0] is START->t1,
/// then t_i->t_{i+1}, then t_n->END when the policy requires the end.
struct BraceletSentence {
    std::vector<std::string> tokens;
    bool valid = false;
    std::vector<double> step_probabilities;
    /// Index into step_probabilities of the first unattested transition.
    std::optional<std::size_t> first_failure;
    std::string diagnostic;

    friend bool operator==(const BraceletSentence&, const BraceletSentence&) = default;
};

/// Throws Error(unknown_token) naming every out-of-vocabulary token, and
/// Error(invalid_argument) for an empty sequence.
BraceletSentence validate_sequence(const BigramModel& model, const std::vector<std::string>& tokens,
                                   BoundaryPolicy policy);

struct Suggestion {
    std::string token;
    double probability = 0.0;

    friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

/// Deck members attested after the prefix (or after START), by descending
/// model probability and then by surface. Probabilities are the model's own
/// row probabilities, not renormalized over the deck.
std::vector<Suggestion> suggest_next(const BigramModel& model, const std::vector<std::string>& prefix,
                                     const Deck& deck);

inline constexpr std::size_t kDefaultEnumerationBound = 10;

/// Every ordering of the whole deck that validates, sorted lexicographically.
std::vector<std::vector<std::string>> enumerate_bracelets(const BigramModel& model, const Deck& deck,
                                                          BoundaryPolicy policy,
                                                          std::size_t max_deck = kDefaultEnumerationBound);

/// Random walk from START, sampling successors by row counts (restricted to
/// the remaining deck when one is given) until END or max_len. A walk that
/// gets stuck under end_required comes back invalid with a diagnostic.
BraceletSentence generate_sentence(const BigramModel& model, const std::optional<Deck>& deck, Rng& rng,
                                   BoundaryPolicy policy, std::size_t max_len);

}  // namespace mystery
