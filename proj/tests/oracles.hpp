#pragma once

// Independent oracles. None of these call into the implementation paths they
// are used to check.

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mystery/corpus.hpp"
#include "mystery/grammar.hpp"
#include "mystery/masking.hpp"

namespace mystery::testing {

// ---------------------------------------------------------------------------
// Phonotactics: a regular expression assembled straight from the inventory.
// ---------------------------------------------------------------------------

inline std::string regex_escape(const std::string& s) {
    static const std::string special = R"(\^$.|?*+()[]{})";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string::npos) out += '\\';
        out += c;
    }
    return out;
}

inline std::string alternation(const std::vector<std::string>& options) {
    std::string out = "(?:";
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (i) out += '|';
        out += regex_escape(options[i]);
    }
    return out + ")";
}

inline std::regex profile_regex(const PhonotacticProfile& p) {
    std::string syllable = "(?:";
    for (std::size_t i = 0; i < p.templates.size(); ++i) {
        const auto& t = p.templates[i];
        if (i) syllable += '|';
        syllable += "(?:";
        if (t.onset) syllable += alternation(p.onsets) + (t.onset_optional ? "?" : "");
        syllable += alternation(p.nuclei);
        if (t.coda) syllable += alternation(p.codas) + (t.coda_optional ? "?" : "");
        syllable += ")";
    }
    syllable += ")";
    return std::regex("^" + syllable + "{" + std::to_string(p.min_syllables) + "," +
                      std::to_string(p.max_syllables) + "}$");
}

// ---------------------------------------------------------------------------
// Bigrams: a flat counter over (left, right) pairs with explicit boundaries.
// ---------------------------------------------------------------------------

using PairCounts = std::map<std::pair<std::string, std::string>, int>;

inline PairCounts count_pairs(const std::vector<std::vector<std::string>>& sentences) {
    PairCounts counts;
    for (const auto& s : sentences) {
        std::vector<std::string> padded{"<s>"};
        padded.insert(padded.end(), s.begin(), s.end());
        padded.push_back("</s>");
        for (std::size_t i = 0; i + 1 < padded.size(); ++i) counts[{padded[i], padded[i + 1]}] += 1;
    }
    return counts;
}

inline int pair_count(const PairCounts& counts, const std::string& l, const std::string& r) {
    const auto it = counts.find({l, r});
    return it == counts.end() ? 0 : it->second;
}

inline bool oracle_valid(const PairCounts& counts, const std::vector<std::string>& tokens, bool end_required) {
    if (pair_count(counts, "<s>", tokens.front()) == 0) return false;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (pair_count(counts, tokens[i], tokens[i + 1]) == 0) return false;
    }
    return !end_required || pair_count(counts, tokens.back(), "</s>") > 0;
}

/// Filters every permutation of the deck through the validity predicate.
inline std::vector<std::vector<std::string>> brute_force_bracelets(const PairCounts& counts,
                                                                   std::vector<std::string> deck, bool end_required) {
    std::sort(deck.begin(), deck.end());
    std::vector<std::vector<std::string>> out;
    do {
        if (oracle_valid(counts, deck, end_required)) out.push_back(deck);
    } while (std::next_permutation(deck.begin(), deck.end()));
    return out;
}

// ---------------------------------------------------------------------------
// Grammar: local-tree collection with an explicit stack, and a derivation
// search over sentential forms.
// ---------------------------------------------------------------------------

inline std::set<std::pair<std::string, std::vector<std::string>>> local_trees(const AnnotatedCorpus& corpus) {
    std::set<std::pair<std::string, std::vector<std::string>>> out;
    std::vector<const ConstituentTree*> stack;
    for (const auto& s : corpus.sentences) stack.push_back(&s.tree);
    while (!stack.empty()) {
        const auto* node = stack.back();
        stack.pop_back();
        if (node->surface) continue;
        std::vector<std::string> labels;
        for (const auto& c : node->children) {
            labels.push_back(c.label);
            stack.push_back(&c);
        }
        out.insert({node->label, labels});
    }
    return out;
}

/// Leftmost derivation search from start. Forms never grow beyond the target
/// length (no empty rules), so the visited set keeps the search finite.
inline bool brute_force_derives(const std::vector<std::pair<std::string, std::vector<std::string>>>& rules,
                                const std::set<std::string>& terminals, const std::string& start,
                                const std::vector<std::string>& target) {
    using Form = std::vector<std::string>;
    std::set<std::pair<std::size_t, Form>> seen;
    std::vector<std::pair<std::size_t, Form>> work{{0, Form{start}}};
    while (!work.empty()) {
        auto [matched, form] = work.back();
        work.pop_back();
        // Strip leading terminals that match the target.
        std::size_t k = 0;
        while (k < form.size() && terminals.count(form[k])) {
            if (matched + k >= target.size() || form[k] != target[matched + k]) break;
            ++k;
        }
        if (k < form.size() && terminals.count(form[k])) continue;  // terminal mismatch
        matched += k;
        form.erase(form.begin(), form.begin() + static_cast<std::ptrdiff_t>(k));
        if (form.empty()) {
            if (matched == target.size()) return true;
            continue;
        }
        if (matched + form.size() > target.size()) continue;
        if (!seen.insert({matched, form}).second) continue;
        for (const auto& [lhs, rhs] : rules) {
            if (lhs != form.front()) continue;
            Form next = rhs;
            next.insert(next.end(), form.begin() + 1, form.end());
            if (matched + next.size() <= target.size()) work.push_back({matched, std::move(next)});
        }
    }
    return false;
}

inline bool brute_force_derives(const Grammar& g, const std::vector<std::string>& tags) {
    std::vector<std::pair<std::string, std::vector<std::string>>> rules;
    for (const auto& r : g.rules) rules.push_back({r.lhs, r.rhs});
    return brute_force_derives(rules, g.tags, g.start, tags);
}

}  // namespace mystery::testing
