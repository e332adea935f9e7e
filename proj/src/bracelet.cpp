#include "mystery/bracelet.hpp"

#include <algorithm>

#include "mystery/error.hpp"
#include "mystery/text.hpp"

namespace mystery {

std::string_view boundary_policy_name(BoundaryPolicy policy) {
    return policy == BoundaryPolicy::end_required ? "end-required" : "end-optional";
}

BoundaryPolicy parse_boundary_policy(std::string_view name) {
    if (name == "end-required") return BoundaryPolicy::end_required;
    if (name == "end-optional") return BoundaryPolicy::end_optional;
    throw Error(ErrorCode::invalid_argument, "unknown boundary policy '" + std::string(name) + "'");
}

std::uint64_t BigramModel::count(std::string_view left, std::string_view right) const {
    const auto* r = row(left);
    if (!r) return 0;
    const auto it = r->find(right);
    return it == r->end() ? 0 : it->second;
}

std::uint64_t BigramModel::row_total(std::string_view left) const {
    const auto it = totals_.find(left);
    return it == totals_.end() ? 0 : it->second;
}

double BigramModel::probability(std::string_view left, std::string_view right) const {
    const auto total = row_total(left);
    if (total == 0) return 0.0;
    return static_cast<double>(count(left, right)) / static_cast<double>(total);
}

const BigramModel::Row* BigramModel::row(std::string_view left) const {
    const auto it = rows_.find(left);
    return it == rows_.end() ? nullptr : &it->second;
}

void BigramModel::add_sentence(const std::vector<std::string>& words) {
    if (words.empty()) throw Error(ErrorCode::invalid_argument, "cannot train on an empty sentence");
    std::string previous(kStart);
    for (const auto& w : words) {
        auto folded = text::fold_case(w);
        if (folded == kStart || folded == kEnd) {
            throw Error(ErrorCode::invalid_argument, "'" + folded + "' is reserved for sentence boundaries");
        }
        vocabulary_.insert(folded);
        ++rows_[previous][folded];
        ++totals_[previous];
        previous = std::move(folded);
    }
    ++rows_[previous][std::string(kEnd)];
    ++totals_[previous];
    ++sentences_;
}

BigramModel train_bigrams(const std::vector<std::vector<std::string>>& sentences) {
    if (sentences.empty()) throw Error(ErrorCode::empty_corpus, "cannot train a bigram model on an empty corpus");
    BigramModel model;
    for (const auto& s : sentences) model.add_sentence(s);
    return model;
}

BigramModel train_bigrams(const AnnotatedCorpus& corpus) {
    return train_bigrams(tokens_of(corpus));
}

std::string dump_model(const BigramModel& model) {
    std::string out;
    for (const auto& [left, row] : model.rows()) {
        for (const auto& [right, n] : row) {
            out += left;
            out += '\t';
            out += right;
            out += '\t';
            out += std::to_string(n);
            out += '\n';
        }
    }
    return out;
}

namespace {

std::vector<std::string> folded(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(text::fold_case(t));
    return out;
}

void require_known(const BigramModel& model, const std::vector<std::string>& tokens) {
    std::vector<std::string> unknown;
    for (const auto& t : tokens) {
        if (!model.contains(t) && std::find(unknown.begin(), unknown.end(), t) == unknown.end()) {
            unknown.push_back(t);
        }
    }
    if (!unknown.empty()) {
        throw Error(ErrorCode::unknown_token, "unknown token(s): " + text::join(unknown, ", "));
    }
}

}  // namespace

BraceletSentence validate_sequence(const BigramModel& model, const std::vector<std::string>& tokens,
                                   BoundaryPolicy policy) {
    if (tokens.empty()) throw Error(ErrorCode::invalid_argument, "cannot validate an empty sequence");
    const auto words = folded(tokens);
    require_known(model, words);

    BraceletSentence result;
    result.tokens = words;
    auto step = [&](std::string_view left, std::string_view right) {
        result.step_probabilities.push_back(model.probability(left, right));
        if (!result.first_failure && model.count(left, right) == 0) {
            result.first_failure = result.step_probabilities.size() - 1;
            result.diagnostic = "unattested transition " + std::string(left) + " -> " + std::string(right);
        }
    };
    step(kStart, words.front());
    for (std::size_t i = 0; i + 1 < words.size(); ++i) step(words[i], words[i + 1]);
    if (policy == BoundaryPolicy::end_required) step(words.back(), kEnd);
    result.valid = !result.first_failure.has_value();
    return result;
}

std::vector<Suggestion> suggest_next(const BigramModel& model, const std::vector<std::string>& prefix,
                                     const Deck& deck) {
    const auto words = folded(prefix);
    if (!words.empty()) {
        const auto check = validate_sequence(model, words, BoundaryPolicy::end_optional);
        if (!check.valid) throw Error(ErrorCode::invalid_argument, "prefix is not a valid bracelet: " + check.diagnostic);
    }
    const std::string context = words.empty() ? std::string(kStart) : words.back();
    std::set<std::string> candidates;
    for (const auto& card : deck.cards) candidates.insert(text::fold_case(card));

    std::vector<Suggestion> out;
    for (const auto& c : candidates) {
        if (model.count(context, c) > 0) out.push_back({c, model.probability(context, c)});
    }
    std::stable_sort(out.begin(), out.end(), [](const Suggestion& a, const Suggestion& b) {
        if (a.probability != b.probability) return a.probability > b.probability;
        return a.token < b.token;
    });
    return out;
}

namespace {

struct Enumerator {
    const BigramModel& model;
    BoundaryPolicy policy;
    std::map<std::string, std::size_t> remaining;
    std::size_t left_to_place = 0;
    std::vector<std::string> current;
    std::vector<std::vector<std::string>> found;

    void extend(const std::string& context) {
        if (left_to_place == 0) {
            if (policy == BoundaryPolicy::end_optional || model.count(context, kEnd) > 0) found.push_back(current);
            return;
        }
        // Distinct keys in sorted order keep the output lexicographic and free of duplicates.
        for (auto& [word, n] : remaining) {
            if (n == 0 || model.count(context, word) == 0) continue;
            --n;
            --left_to_place;
            current.push_back(word);
            extend(word);
            current.pop_back();
            ++left_to_place;
            ++n;
        }
    }
};

}  // namespace

std::vector<std::vector<std::string>> enumerate_bracelets(const BigramModel& model, const Deck& deck,
                                                          BoundaryPolicy policy, std::size_t max_deck) {
    if (deck.cards.empty()) throw Error(ErrorCode::invalid_argument, "deck is empty");
    if (deck.cards.size() > max_deck) {
        throw Error(ErrorCode::deck_too_large, "deck has " + std::to_string(deck.cards.size()) +
                                                   " cards; enumeration is bounded at " + std::to_string(max_deck));
    }
    const auto cards = folded(deck.cards);
    require_known(model, cards);
    Enumerator e{model, policy, {}, cards.size(), {}, {}};
    for (const auto& c : cards) ++e.remaining[c];
    e.extend(std::string(kStart));
    return std::move(e.found);
}

BraceletSentence generate_sentence(const BigramModel& model, const std::optional<Deck>& deck, Rng& rng,
                                   BoundaryPolicy policy, std::size_t max_len) {
    if (model.sentence_count() == 0) throw Error(ErrorCode::invalid_argument, "model is empty");
    if (max_len == 0) throw Error(ErrorCode::invalid_argument, "max_len must be positive");

    std::map<std::string, std::size_t, std::less<>> remaining;
    if (deck) {
        for (const auto& c : deck->cards) ++remaining[text::fold_case(c)];
    }
    std::vector<std::string> tokens;
    std::string context(kStart);
    while (true) {
        std::vector<std::string> options;
        std::vector<std::uint64_t> weights;
        for (const auto& [word, n] : *model.row(context)) {
            if (word == kEnd) {
                options.push_back(word);
                weights.push_back(n);
                continue;
            }
            if (tokens.size() >= max_len) continue;
            if (deck) {
                const auto it = remaining.find(word);
                if (it == remaining.end() || it->second == 0) continue;
            }
            options.push_back(word);
            weights.push_back(n);
        }
        if (options.empty()) break;
        const auto& choice = options[weighted_index(rng, weights)];
        if (choice == kEnd) break;
        if (deck) --remaining.find(choice)->second;
        tokens.push_back(choice);
        context = choice;
    }

    if (tokens.empty()) {
        BraceletSentence stuck;
        stuck.diagnostic = "no attested sentence-initial word is available";
        return stuck;
    }
    auto result = validate_sequence(model, tokens, policy);
    // A walk that stops without END has no attested END after its last word,
    // so under end_required validation already reports it invalid.
    if (!result.valid) {
        result.diagnostic = (tokens.size() >= max_len ? "walk truncated at max_len " + std::to_string(max_len)
                                                      : std::string("walk reached a dead end")) +
                            " before an attested sentence end after '" + tokens.back() + "'";
    }
    return result;
}

}  // namespace mystery
