// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "http_harness.hpp"
#include "leak_scan.hpp"
#include "mystery/bracelet.hpp"
#include "mystery/error.hpp"
#include "mystery/grammar.hpp"
#include "mystery/masking.hpp"
#include "mystery/materials.hpp"
#include "mystery/random.hpp"
#include "mystery/text.hpp"
#include "oracles.hpp"

using namespace mystery;
using namespace mystery::testing;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

/// Collects failure reasons for one criterion.
struct Check {
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what) {
        if (!ok && failures.size() < 10) failures.push_back(what);
        if (!ok && failures.size() == 10) failures.push_back("...");
    }
    bool ok() const { return failures.empty(); }
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<std::vector<std::string>> folded(const AnnotatedCorpus& c) {
    std::vector<std::vector<std::string>> out;
    for (const auto& s : c.sentences) {
        std::vector<std::string> w;
        for (const auto& t : s.tokens()) w.push_back(text::fold_case(t.surface));
        out.push_back(w);
    }
    return out;
}

std::string show(const std::vector<std::string>& v) { return "[" + text::join(v, " ") + "]"; }

// ---------------------------------------------------------------------------

void masking_round_trip(Check& c) {
    const auto started = Clock::now();
    const auto corpus = snow_white();
    const auto profile = load_profile(data_path("profiles/italian.profile"));
    const auto pattern = profile_regex(profile);
    c.expect(corpus.sentences.size() >= 50, "fixture has " + std::to_string(corpus.sentences.size()) + " sentences");
    c.expect(!profile.blocklist.empty(), "profile carries no blocklist");
    const auto types = lexicon_of(corpus);
    std::size_t masks = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        MaskConfig config;
        config.seed = seed;
        config.profile = profile;
        const auto table = build_masking_table(corpus, config);
        c.expect(unmask(mask_corpus(corpus, table), table) == corpus, "round trip differs, seed " + std::to_string(seed));
        c.expect(table.size() == types.size(), "table size, seed " + std::to_string(seed));
        std::set<std::string> images;
        for (const auto& w : types) {
            const auto* m = table.mask_of(w);
            if (!m) {
                c.expect(false, "unmapped word '" + w + "'");
                continue;
            }
            images.insert(*m);
            ++masks;
            c.expect(std::regex_match(*m, pattern), "mask '" + *m + "' outside the profile");
            c.expect(!profile.blocklist.count(*m), "mask '" + *m + "' is blocklisted");
            const auto* back = table.source_of(*m);
            c.expect(back && *back == w, "inverse of '" + *m + "'");
        }
        c.expect(images.size() == types.size(), "masks collide, seed " + std::to_string(seed));
    }
    const auto took = seconds_since(started);
    c.expect(took < 5.0, "took " + std::to_string(took) + " s");
    c.expect(masks == 100 * types.size(), "mask count");
}

void bracelet_self_closure(Check& c) {
    for (const auto& corpus : {snow_white(), f1()}) {
        const auto model = train_bigrams(corpus);
        for (const auto& s : folded(corpus)) {
            const auto v = validate_sequence(model, s, BoundaryPolicy::end_required);
            c.expect(v.valid, "sentence rejected: " + show(s));
        }
    }
}

void bracelet_oracle(Check& c) {
    const auto started = Clock::now();
    const auto sentences = folded(snow_white());
    const auto model = train_bigrams(sentences);
    const auto counts = count_pairs(sentences);
    Rng rng(20240611);
    std::size_t nonempty = 0;
    for (int trial = 0; trial < 200; ++trial) {
        // a random sub-multiset of one or two fixture sentences
        std::vector<std::string> pool = sentences[uniform_index(rng, sentences.size())];
        if (uniform_index(rng, 3) == 0) {
            const auto& other = sentences[uniform_index(rng, sentences.size())];
            pool.insert(pool.end(), other.begin(), other.end());
        }
        shuffle(pool, rng);
        const auto size = 1 + uniform_index(rng, std::min<std::uint64_t>(7, pool.size()));
        const std::vector<std::string> deck(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
        for (auto policy : {BoundaryPolicy::end_required, BoundaryPolicy::end_optional}) {
            const auto found = enumerate_bracelets(model, Deck{deck}, policy);
            const auto expected = brute_force_bracelets(counts, deck, policy == BoundaryPolicy::end_required);
            c.expect(found == expected, "deck " + show(deck) + " under " + std::string(boundary_policy_name(policy)));
            nonempty += !expected.empty();
        }
    }
    c.expect(nonempty > 0, "every deck came out empty");
    const auto took = seconds_since(started);
    c.expect(took < 30.0, "took " + std::to_string(took) + " s");
}

void f1_regression(Check& c) {
    const auto corpus = f1();
    const auto model = train_bigrams(corpus);
    const std::vector<std::string> deck{"il", "mio", "cane", "è", "nel", "giardino"};
    const auto found = enumerate_bracelets(model, Deck{deck}, BoundaryPolicy::end_required);
    const auto expected = brute_force_bracelets(count_pairs(folded(corpus)), deck, true);
    c.expect(found == expected, "enumeration differs from brute force");
    const std::vector<std::string> s1{"il", "mio", "cane", "è", "nel", "giardino"};
    const std::vector<std::string> s2{"il", "cane", "nel", "giardino", "è", "mio"};
    c.expect(std::find(found.begin(), found.end(), s1) != found.end(), "missing " + show(s1));
    c.expect(std::find(found.begin(), found.end(), s2) != found.end(), "missing " + show(s2));
}

void extraction_completeness(Check& c) {
    for (const auto& corpus : {snow_white(), f1(), mirror(), menu()}) {
        const auto g = extract_grammar(corpus);
        for (const auto& s : corpus.sentences) {
            const auto tokens = s.tokens();
            const auto best = reduce(g, tokens, LexiconMode::closed);
            c.expect(best.has_value(), "sentence " + std::to_string(s.id) + " does not reduce");
            if (!best) continue;
            c.expect(best->tree.label == corpus.start, "wrong root");
            const auto all = reduce_all(g, tokens, LexiconMode::closed, 10000);
            const bool own = std::any_of(all.begin(), all.end(), [&](const Derivation& d) { return d.tree == s.tree; });
            c.expect(own, "sentence " + std::to_string(s.id) + ": own tree not among the parses");
        }
    }
}

void generation_closure(Check& c) {
    const auto started = Clock::now();
    const auto g = extract_grammar(snow_white());
    Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        GenerateOptions options;
        options.sampling = i % 2 ? RuleSampling::frequency : RuleSampling::uniform;
        const auto d = generate(g, rng, options);
        const auto leaves = d.tree.leaves();
        const auto back = reduce(g, leaves, LexiconMode::closed);
        c.expect(back.has_value(), "generated sentence does not reduce: " + bracketed(d.tree));
    }
    const auto took = seconds_since(started);
    c.expect(took < 10.0, "took " + std::to_string(took) + " s");
}

std::vector<Token> tags_only(const std::vector<std::string>& tags) {
    std::vector<Token> out;
    for (const auto& t : tags) out.push_back({t + "1", t});
    return out;
}

/// Random leftmost expansion; nullopt when it grows past max_len or runs long.
std::optional<std::vector<std::string>> sample_string(const Grammar& g, Rng& rng, std::size_t max_len) {
    std::vector<std::string> form{g.start};
    for (int step = 0; step < 60; ++step) {
        const auto it = std::find_if(form.begin(), form.end(), [&](const std::string& x) { return !g.tags.count(x); });
        if (it == form.end()) return form;
        std::vector<const Rule*> options;
        for (const auto& r : g.rules) {
            if (r.lhs == *it) options.push_back(&r);
        }
        if (options.empty()) return std::nullopt;
        const auto* r = options[uniform_index(rng, options.size())];
        const auto at = it - form.begin();
        form.erase(form.begin() + at);
        form.insert(form.begin() + at, r->rhs.begin(), r->rhs.end());
        if (form.size() > max_len) return std::nullopt;
    }
    return std::nullopt;
}

void binarization_equivalence(Check& c) {
    Rng rng(7007);
    const std::vector<std::string> tags{"x", "y", "z"};
    std::size_t accepted = 0;
    std::size_t asked = 0;
    auto compare = [&](const Grammar& g, int trial, const std::vector<std::string>& sequence) {
        const bool chart = reduce(g, tags_only(sequence)).has_value();
        const bool brute = brute_force_derives(g, sequence);
        ++asked;
        accepted += brute;
        c.expect(chart == brute, "grammar " + std::to_string(trial) + " on " + show(sequence));
    };
    for (int trial = 0; trial < 200; ++trial) {
        const auto g = random_grammar(rng, 6);
        // every string up to length 5, samples up to 8
        for (std::size_t len = 1; len <= 5; ++len) {
            std::vector<std::size_t> digits(len, 0);
            while (true) {
                std::vector<std::string> sequence;
                for (auto d : digits) sequence.push_back(tags[d]);
                compare(g, trial, sequence);
                std::size_t k = 0;
                while (k < len && ++digits[k] == tags.size()) digits[k++] = 0;
                if (k == len) break;
            }
        }
        // derivable strings sampled top-down
        for (int q = 0; q < 40; ++q) {
            if (auto sequence = sample_string(g, rng, 8)) compare(g, trial, *sequence);
        }
        for (std::size_t len = 6; len <= 8; ++len) {
            for (int q = 0; q < 10; ++q) {
                std::vector<std::string> sequence;
                for (std::size_t k = 0; k < len; ++k) sequence.push_back(tags[uniform_index(rng, tags.size())]);
                compare(g, trial, sequence);
            }
        }
    }
    c.expect(accepted > 1000, "only " + std::to_string(accepted) + " derivable strings");
    c.expect(asked > accepted, "no rejected strings");
}

void mask_invariance(Check& c) {
    const auto clear = snow_white();
    MaskConfig config;
    config.seed = 5;
    config.profile = load_profile(data_path("profiles/italian.profile"));
    const auto table = build_masking_table(clear, config);
    const auto masked = mask_corpus(clear, table);
    const auto clear_model = train_bigrams(clear);
    const auto masked_model = train_bigrams(masked);
    auto mask = [&](const std::vector<std::string>& words) { return mask_tokens(words, table); };

    Rng rng(8);
    const auto sentences = folded(clear);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        for (int variant = 0; variant < 5; ++variant) {
            auto words = sentences[i];
            if (variant > 0) shuffle(words, rng);
            for (auto policy : {BoundaryPolicy::end_required, BoundaryPolicy::end_optional}) {
                const auto a = validate_sequence(clear_model, words, policy);
                const auto b = validate_sequence(masked_model, mask(words), policy);
                c.expect(a.valid == b.valid && a.first_failure == b.first_failure, "verdicts differ on " + show(words));
                c.expect(a.step_probabilities.size() == b.step_probabilities.size(), "step counts differ");
                for (std::size_t k = 0; k < std::min(a.step_probabilities.size(), b.step_probabilities.size()); ++k) {
                    c.expect(std::fabs(a.step_probabilities[k] - b.step_probabilities[k]) <= 1e-12,
                             "probability differs on " + show(words));
                }
            }
        }
        const auto prefix = std::vector<std::string>(sentences[i].begin(), sentences[i].begin() + 1);
        const auto sa = suggest_next(clear_model, prefix, Deck{sentences[i]});
        const auto sb = suggest_next(masked_model, mask(prefix), Deck{mask(sentences[i])});
        c.expect(sa.size() == sb.size(), "suggestion counts differ");
        std::map<std::string, double> pa;
        for (const auto& s : sa) pa[*table.mask_of(s.token)] = s.probability;
        for (const auto& s : sb) {
            c.expect(pa.count(s.token) && std::fabs(pa[s.token] - s.probability) <= 1e-12, "suggestion differs");
        }
    }

    const auto ga = extract_grammar(clear);
    const auto gb = extract_grammar(masked);
    c.expect(ga.rules == gb.rules, "rule sets differ");
    c.expect(ga.rule_counts == gb.rule_counts, "rule counts differ");
    for (const auto& [pos, words] : ga.lexicon) {
        std::set<std::string> image;
        for (const auto& w : words) image.insert(*table.mask_of(w));
        const auto it = gb.lexicon.find(pos);
        c.expect(it != gb.lexicon.end() && std::set<std::string>(it->second.begin(), it->second.end()) == image,
                 "lexicon for " + pos + " differs");
    }
}

// ---------------------------------------------------------------------------

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun cli_run(std::vector<std::string> args) {
    args.insert(args.begin(), "mystery");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str() + err.str()};
}

std::map<std::string, std::string> directory_bytes(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), dir).string()] = read_text_file(e.path());
    }
    return out;
}

void determinism(Check& c) {
    const auto corpus_path = data_path("corpora/snow-white.corpus").string();
    const auto profile_path = data_path("profiles/italian.profile").string();
    std::vector<std::map<std::string, std::string>> runs;
    for (int round = 0; round < 2; ++round) {
        const auto dir = scratch_dir("determinism-" + std::to_string(round));
        std::map<std::string, std::string> out;
        for (const char* mode : {"nonwords", "symbols"}) {
            const auto mask_dir = dir / (std::string("mask-") + mode);
            const auto r = cli_run({"--corpus", corpus_path, "--seed", "42", "--mode", mode, "--profile", profile_path,
                                    "--out", mask_dir.string(), "mask"});
            c.expect(r.code == 0, std::string("mask failed: ") + r.out);
            for (const auto& [name, bytes] : directory_bytes(mask_dir)) out[std::string("mask/") + mode + "/" + name] = bytes;
        }
        const auto masked = (dir / "mask-nonwords" / "masked.corpus").string();
        const auto table = (dir / "mask-nonwords" / "masking.table").string();
        out["grammar"] = cli_run({"--corpus", corpus_path, "grammar", "extract"}).out;
        out["grammar-masked"] = cli_run({"--corpus", masked, "grammar", "extract"}).out;
        out["model"] = cli_run({"--corpus", corpus_path, "bracelet", "model"}).out;
        out["model-masked"] = cli_run({"--corpus", masked, "bracelet", "model"}).out;
        out["generate"] =
            cli_run({"--corpus", corpus_path, "--seed", "3", "grammar", "generate", "--count", "25", "--trees"}).out;
        out["walks"] = cli_run({"--corpus", corpus_path, "--seed", "3", "bracelet", "generate", "--count", "25"}).out;
        const auto materials_dir = dir / "materials";
        const auto r = cli_run({"--corpus", masked, "--out", materials_dir.string(), "materials", "--deck", "A=1",
                                "--deck", "B=2:grammar", "--table", table});
        c.expect(r.code == 0, "materials failed: " + r.out);
        for (const auto& [name, bytes] : directory_bytes(materials_dir)) out["materials/" + name] = bytes;
        runs.push_back(out);
    }
    c.expect(runs[0].size() == runs[1].size(), "different output sets");
    for (const auto& [name, bytes] : runs[0]) {
        c.expect(!bytes.empty(), name + " is empty");
        const auto it = runs[1].find(name);
        c.expect(it != runs[1].end() && it->second == bytes, name + " differs between runs");
    }
}

// ---------------------------------------------------------------------------

int phase_rank(const std::string& phase) {
    static const std::vector<std::string> order{"lobby", "bracelet", "grammar", "reveal", "closed"};
    const auto it = std::find(order.begin(), order.end(), phase);
    return it == order.end() ? -1 : static_cast<int>(it - order.begin());
}

void service_protocol(Check& c) {
    const auto started = Clock::now();
    LiveServer server;
    std::vector<json> before_reveal;
    int last_rank = -1;
    auto note_phase = [&](const json& body) {
        if (!body.is_object() || !body.contains("phase")) return;
        const int rank = phase_rank(body.at("phase").get<std::string>());
        c.expect(rank >= last_rank, "phase went backwards to " + body.at("phase").get<std::string>());
        last_rank = std::max(last_rank, rank);
    };
    auto call = [&](const Reply& r, int status, const std::string& what) {
        c.expect(r.status == status, what + " returned " + std::to_string(r.status) + " " + r.body.dump());
        note_phase(r.body);
        if (last_rank < phase_rank("reveal")) before_reveal.push_back(r.body);
        return r.body;
    };

    auto created = call(server.post("/sessions", {{"corpus", "snow-white"},
                                                  {"mask", {{"mode", "nonwords"}, {"seed", 2024}}},
                                                  {"teams", {"Rossi", "Blu"}},
                                                  {"policy", "end-required"}}),
                        201, "create");
    if (!created.contains("session")) return;
    const auto base = "/sessions/" + created.at("session").get<std::string>();
    const auto key = created.at("facilitator_key").get<std::string>();

    std::vector<std::string> tokens;
    const std::vector<std::pair<std::string, std::string>> people{
        {"Rossi", "Ada"}, {"Rossi", "Bruno"}, {"Blu", "Carla"}, {"Blu", "Dario"}};
    for (const auto& [team, name] : people) {
        tokens.push_back(call(server.post(base + "/join", {{"team", team}, {"name", name}}), 200, "join").value("token", ""));
    }

    call(server.post(base + "/phase", {{"to", "bracelet"}, {"decks", {{"Rossi", 4}, {"Blu", 9}}}}, key), 200, "bracelet");

    // the masked corpus as participants see it
    const auto opening = call(server.get(base + "/stream?since=0", tokens[0]), 200, "stream");
    std::vector<std::vector<std::string>> published;
    for (const auto& u : opening.value("updates", json::array())) {
        if (u.at("kind") != "created") continue;
        for (const auto& s : u.at("payload").at("sentences")) published.push_back(text::split_words(s.at("text").get<std::string>()));
    }
    c.expect(!published.empty(), "created update carries no corpus");
    const auto client_model = train_bigrams(published);

    auto deck_of = [&](const std::string& token) {
        const auto st = call(server.get(base + "/state", token), 200, "state");
        for (const auto& t : st.at("teams")) {
            if (t.contains("deck")) return t.at("deck").get<std::vector<std::string>>();
        }
        return std::vector<std::string>{};
    };
    const auto rossi = deck_of(tokens[0]);
    const auto blu = deck_of(tokens[2]);
    c.expect(rossi.size() == published[3].size(), "Rossi deck size");
    c.expect(blu.size() == published[8].size(), "Blu deck size");

    auto reversed = published[3];
    std::reverse(reversed.begin(), reversed.end());
    const std::vector<std::pair<std::string, std::vector<std::string>>> plays{
        {tokens[0], published[3]}, {tokens[1], reversed}, {tokens[2], blu}};
    for (const auto& [who, cards] : plays) {
        const auto r = call(server.post(base + "/bracelet", {{"tokens", cards}}, who), 200, "submit");
        if (!r.contains("submission")) continue;
        const auto& v = r.at("submission").at("verdict");
        const auto local = validate_sequence(client_model, cards, BoundaryPolicy::end_required);
        c.expect(v.at("valid").get<bool>() == local.valid, "verdict disagrees for " + show(cards));
        const auto fail = v.at("first_failure");
        c.expect(fail.is_null() == !local.first_failure &&
                     (fail.is_null() || fail.get<std::size_t>() == *local.first_failure),
                 "first failure disagrees");
        const auto steps = v.at("step_probabilities").get<std::vector<double>>();
        c.expect(steps.size() == local.step_probabilities.size(), "step count disagrees");
        for (std::size_t k = 0; k < std::min(steps.size(), local.step_probabilities.size()); ++k) {
            c.expect(std::fabs(steps[k] - local.step_probabilities[k]) <= 1e-12, "probability disagrees");
        }
    }

    call(server.post(base + "/phase", {{"to", "grammar"}}, key), 200, "grammar");
    call(server.post(base + "/rules", {{"rule", "NP = ART N"}}, tokens[1]), 200, "rule 1");
    const auto tally = call(server.post(base + "/rules", {{"lhs", "VP"}, {"rhs", {"V", "NP"}}}, tokens[3]), 200, "rule 2");
    c.expect(tally.value("tally", json::array()).size() == 2, "tally should list two rules");

    for (const auto& who : {tokens[0], tokens[2], key}) {
        call(server.get(base + "/state", who), 200, "state");
        call(server.get(base + "/stream?since=0", who), 200, "stream");
    }
    call(server.get(base + "/reveal", tokens[0]), 409, "early reveal");

    call(server.post(base + "/phase", {{"to", "reveal"}}, key), 200, "reveal phase");
    const auto reveal = call(server.get(base + "/reveal", tokens[0]), 200, "reveal");
    c.expect(reveal.value("corpus", json::array()).size() == published.size(), "reveal corpus size");

    // no clear-language word before the reveal
    const auto& table = server.manager.find(created.at("session").get<std::string>())->assets().table;
    for (const auto& body : before_reveal) {
        const auto leaks = leaked_words(body, table);
        c.expect(leaks.empty(), "clear words leaked: " + text::join({leaks.begin(), leaks.end()}, ", "));
    }

    // gap-free versions, phases monotone over the log
    const auto log = call(server.get(base + "/stream?since=0", key), 200, "final stream");
    std::uint64_t expected = 1;
    int rank = -1;
    for (const auto& u : log.value("updates", json::array())) {
        c.expect(u.at("version").get<std::uint64_t>() == expected, "version gap at " + std::to_string(expected));
        expected = u.at("version").get<std::uint64_t>() + 1;
        const int r = phase_rank(u.at("phase").get<std::string>());
        c.expect(r >= rank, "logged phase went backwards");
        rank = r;
    }
    c.expect(expected - 1 == log.value("version", 0ull), "stream version does not match the last update");
    // 1 created + 4 joins + 3 phases + 3 submissions + 2 proposals
    c.expect(expected - 1 == 13, "expected 13 events, got " + std::to_string(expected - 1));
    for (const auto& who : {tokens[1], tokens[3]}) {
        const auto part = call(server.get(base + "/stream?since=5", who), 200, "participant stream");
        std::uint64_t v = 6;
        for (const auto& u : part.value("updates", json::array())) {
            c.expect(u.at("version").get<std::uint64_t>() == v++, "participant stream has a gap");
        }
    }

    const auto took = seconds_since(started);
    c.expect(took < 10.0, "took " + std::to_string(took) + " s");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria{
        {"masking round trip on 100 seeds", masking_round_trip},
        {"bracelet self-closure", bracelet_self_closure},
        {"bracelet enumeration equals brute force on 200 decks", bracelet_oracle},
        {"F1 deck orderings", f1_regression},
        {"grammar extraction completeness", extraction_completeness},
        {"generation closure over 1000 samples", generation_closure},
        {"binarized parsing equals derivation search", binarization_equivalence},
        {"mask invariance", mask_invariance},
        {"deterministic outputs", determinism},
        {"service protocol session", service_protocol},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        const auto started = Clock::now();
        try {
            criteria[i].second(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        char timing[32];
        std::snprintf(timing, sizeof timing, "%.2f s", seconds_since(started));
        std::cout << (c.ok() ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << " (" << timing << ")\n";
        for (const auto& f : c.failures) std::cout << "    " << f << "\n";
        failed += !c.ok();
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
