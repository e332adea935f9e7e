#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <iomanip>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mystery/bracelet.hpp"
#include "mystery/corpus.hpp"
#include "mystery/error.hpp"
#include "mystery/grammar.hpp"
#include "mystery/http_server.hpp"
#include "mystery/masking.hpp"
#include "mystery/materials.hpp"
#include "mystery/session.hpp"
#include "mystery/text.hpp"

namespace mystery::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Usage problems found after parsing (missing --seed and the like).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    bool as_json = false;
    std::string corpus;
    std::string mode = "nonwords";
    std::optional<std::uint64_t> seed;
    std::string profile;
    std::string policy;
    std::string lexicon = "open";
    std::string out;
    std::string bind = "127.0.0.1:8080";

    std::string ingest_path;
    std::string tokens;
    std::string tags;
    std::string deck;
    std::string prefix;
    std::size_t max_deck = kDefaultEnumerationBound;
    std::size_t max_len = 30;
    std::size_t count = 1;
    std::string sampling = "uniform";
    std::size_t max_depth = 12;
    int retries = 50;
    bool trees = false;

    std::size_t per_page = 12;
    std::string visibility = "pos+constituents";
    std::string page_size = "A3";
    std::vector<std::string> decks;
    std::string table;

    std::string data_dir;
    std::string log_dir;
    std::string static_dir;
};

std::uint64_t require_seed(const Options& o) {
    if (!o.seed) throw UsageError("--seed is required for randomized commands");
    return *o.seed;
}

AnnotatedCorpus corpus_of(const Options& o) {
    if (o.corpus.empty()) throw UsageError("--corpus is required");
    return load_corpus(o.corpus);
}

BoundaryPolicy policy_of(const Options& o, BoundaryPolicy fallback) {
    return o.policy.empty() ? fallback : parse_boundary_policy(o.policy);
}

std::string fixed(double p) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(6) << p;
    return s.str();
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

int cmd_ingest(const Options& o, std::ostream& out) {
    const auto path = o.ingest_path.empty() ? o.corpus : o.ingest_path;
    if (path.empty()) throw UsageError("ingest needs a corpus path");
    const auto c = load_corpus(path);
    std::size_t tokens = 0;
    for (const auto& s : c.sentences) tokens += s.tokens().size();
    const auto types = lexicon_of(c).size();
    if (o.as_json) {
        json tags = json::array();
        for (const auto& t : c.tagset) tags.push_back({{"name", t.name}, {"number", t.number}});
        json cats = json::array();
        for (const auto& k : c.categories) cats.push_back({{"name", k.name}, {"color", k.color}});
        out << json{{"language", c.language_tag}, {"start", c.start}, {"sentences", c.sentences.size()},
                    {"tokens", tokens},           {"types", types},   {"tagset", tags},
                    {"categories", cats}}
                   .dump(2)
            << "\n";
        return 0;
    }
    out << "sentences: " << c.sentences.size() << "\n";
    out << "tokens: " << tokens << "\n";
    out << "types: " << types << "\n";
    out << "language: " << c.language_tag << "\n";
    out << "start: " << c.start << "\n";
    out << "tags:";
    for (const auto& t : c.tagset) out << " " << t.name << "=" << t.number;
    out << "\ncategories:";
    for (const auto& k : c.categories) out << " " << k.name << "=" << k.color;
    out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// mask
// ---------------------------------------------------------------------------

int cmd_mask(const Options& o, std::ostream& out) {
    const auto corpus = corpus_of(o);
    MaskConfig config;
    config.mode = parse_mask_mode(o.mode);
    config.seed = require_seed(o);
    if (!o.profile.empty()) config.profile = load_profile(o.profile);
    if (o.out.empty()) throw UsageError("--out is required");
    const auto table = build_masking_table(corpus, config);
    const auto masked = mask_corpus(corpus, table);

    const std::string header = "# masked corpus; mode " + std::string(mask_mode_name(table.mode)) + ", seed " +
                               std::to_string(table.seed) + ", " +
                               (table.mode == MaskMode::nonwords ? "profile-hash " : "alphabet-hash ") +
                               table.config_hash + "\n";
    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_text_file(dir / "masked.corpus", header + serialize_corpus(masked));
    write_text_file(dir / "masking.table", serialize_table(table));
    if (o.as_json) {
        out << json{{"masked", (dir / "masked.corpus").string()},
                    {"table", (dir / "masking.table").string()},
                    {"types", table.size()},
                    {"mode", mask_mode_name(table.mode)},
                    {"seed", table.seed}}
                   .dump(2)
            << "\n";
    } else {
        out << "masked " << table.size() << " word types (" << mask_mode_name(table.mode) << ", seed " << table.seed
            << ")\n";
        out << "wrote " << (dir / "masked.corpus").string() << "\n";
        out << "wrote " << (dir / "masking.table").string() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// bracelet
// ---------------------------------------------------------------------------

json verdict_json(const BraceletSentence& v) { return server::verdict_to_json(v); }

void print_verdict(const BraceletSentence& v, BoundaryPolicy policy, std::ostream& out) {
    out << (v.valid ? "VALID" : "INVALID") << "\n";
    std::vector<std::string> path{std::string(kStart)};
    path.insert(path.end(), v.tokens.begin(), v.tokens.end());
    if (policy == BoundaryPolicy::end_required) path.emplace_back(kEnd);
    for (std::size_t i = 0; i < v.step_probabilities.size(); ++i) {
        out << "  " << path[i] << " -> " << path[i + 1] << "  " << fixed(v.step_probabilities[i]) << "\n";
    }
    if (v.first_failure) out << "first failure at step " << *v.first_failure + 1 << ": " << v.diagnostic << "\n";
}

int cmd_validate(const Options& o, std::ostream& out) {
    const auto model = train_bigrams(corpus_of(o));
    const auto policy = policy_of(o, BoundaryPolicy::end_required);
    const auto v = validate_sequence(model, text::split_words(o.tokens), policy);
    if (o.as_json) {
        out << verdict_json(v).dump(2) << "\n";
    } else {
        print_verdict(v, policy, out);
    }
    return 0;
}

int cmd_suggest(const Options& o, std::ostream& out) {
    const auto model = train_bigrams(corpus_of(o));
    const auto deck = text::split_words(o.deck);
    const auto suggestions = suggest_next(model, text::split_words(o.prefix), Deck{deck});
    if (o.as_json) {
        json arr = json::array();
        for (const auto& s : suggestions) arr.push_back({{"token", s.token}, {"probability", s.probability}});
        out << arr.dump(2) << "\n";
    } else {
        for (const auto& s : suggestions) out << s.token << "\t" << fixed(s.probability) << "\n";
    }
    return 0;
}

int cmd_enumerate(const Options& o, std::ostream& out) {
    const auto model = train_bigrams(corpus_of(o));
    const auto found = enumerate_bracelets(model, Deck{text::split_words(o.deck)},
                                           policy_of(o, BoundaryPolicy::end_required), o.max_deck);
    if (o.as_json) {
        out << json(found).dump(2) << "\n";
    } else {
        for (const auto& f : found) out << text::join(f, " ") << "\n";
    }
    return 0;
}

int cmd_bracelet_generate(const Options& o, std::ostream& out) {
    const auto model = train_bigrams(corpus_of(o));
    Rng rng(require_seed(o));
    const auto policy = policy_of(o, BoundaryPolicy::end_required);
    std::optional<Deck> deck;
    if (!o.deck.empty()) deck = Deck{text::split_words(o.deck)};
    json arr = json::array();
    for (std::size_t i = 0; i < o.count; ++i) {
        const auto v = generate_sentence(model, deck, rng, policy, o.max_len);
        if (o.as_json) {
            arr.push_back(verdict_json(v));
        } else if (v.valid) {
            out << text::join(v.tokens, " ") << "\n";
        } else {
            out << "# invalid: " << text::join(v.tokens, " ") << " (" << v.diagnostic << ")\n";
        }
    }
    if (o.as_json) out << arr.dump(2) << "\n";
    return 0;
}

int cmd_model(const Options& o, std::ostream& out) {
    out << dump_model(train_bigrams(corpus_of(o)));
    return 0;
}

// ---------------------------------------------------------------------------
// grammar
// ---------------------------------------------------------------------------

int cmd_extract(const Options& o, std::ostream& out) {
    const auto g = extract_grammar(corpus_of(o));
    if (o.as_json) {
        json rules = json::array();
        for (const auto& r : g.rules) rules.push_back({{"rule", r.to_string()}, {"count", g.rule_counts.at(r)}});
        json lexicon = json::object();
        for (const auto& [pos, words] : g.lexicon) lexicon[pos] = words;
        out << json{{"start", g.start}, {"rules", rules}, {"lexicon", lexicon}}.dump(2) << "\n";
    } else {
        out << dump_grammar(g);
    }
    return 0;
}

/// Words plus tags. Without --tags each word takes its single attested tag.
std::vector<Token> tagged_tokens(const Grammar& g, const Options& o) {
    const auto words = text::split_words(o.tokens);
    if (words.empty()) throw UsageError("--tokens is required");
    std::vector<std::string> tags = text::split_words(o.tags);
    if (!tags.empty() && tags.size() != words.size()) {
        throw Error(ErrorCode::invalid_argument, "--tags needs one tag per token");
    }
    std::vector<Token> out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (!tags.empty()) {
            out.push_back({words[i], tags[i]});
            continue;
        }
        std::vector<std::string> candidates;
        for (const auto& [pos, lex] : g.lexicon) {
            if (lex.count(words[i])) candidates.push_back(pos);
        }
        if (candidates.empty()) {
            throw Error(ErrorCode::inadmissible_token, "'" + words[i] + "' is unattested; give its tag with --tags");
        }
        if (candidates.size() > 1) {
            throw Error(ErrorCode::invalid_argument,
                        "'" + words[i] + "' has several tags (" + text::join(candidates, ", ") + "); use --tags");
        }
        out.push_back({words[i], candidates.front()});
    }
    return out;
}

int cmd_check(const Options& o, std::ostream& out) {
    const auto g = extract_grammar(corpus_of(o));
    const auto tokens = tagged_tokens(g, o);
    const auto mode = parse_lexicon_mode(o.lexicon);
    const auto d = reduce(g, tokens, mode);
    if (o.as_json) {
        json j{{"reduces", d.has_value()}, {"start", g.start}};
        if (d) {
            json trace = json::array();
            for (const auto& r : d->rule_trace) trace.push_back(r.to_string());
            j["trace"] = trace;
            j["tree"] = bracketed(d->tree);
        } else {
            json pieces = json::array();
            for (const auto& p : best_partial_reduction(g, tokens, mode)) {
                pieces.push_back({{"label", p.label}, {"begin", p.begin}, {"end", p.end}});
            }
            j["partial"] = pieces;
        }
        out << j.dump(2) << "\n";
        return 0;
    }
    if (d) {
        out << "REDUCES TO " << g.start << "\n";
        for (const auto& r : d->rule_trace) out << "  " << r.to_string() << "\n";
        out << bracketed(d->tree) << "\n";
    } else {
        out << "DOES NOT REDUCE TO " << g.start << "\n";
        out << "best partial:";
        for (const auto& p : best_partial_reduction(g, tokens, mode)) {
            out << " " << p.label << "[" << p.begin << "," << p.end << ")";
        }
        out << "\n";
    }
    return 0;
}

int cmd_grammar_generate(const Options& o, std::ostream& out) {
    const auto g = extract_grammar(corpus_of(o));
    Rng rng(require_seed(o));
    GenerateOptions options;
    options.max_depth = o.max_depth;
    options.retries = o.retries;
    if (o.sampling == "frequency") {
        options.sampling = RuleSampling::frequency;
    } else if (o.sampling != "uniform") {
        throw Error(ErrorCode::invalid_argument, "unknown sampling '" + o.sampling + "'");
    }
    json arr = json::array();
    for (std::size_t i = 0; i < o.count; ++i) {
        const auto d = generate(g, rng, options);
        std::vector<std::string> words;
        for (const auto& t : d.tree.leaves()) words.push_back(t.surface);
        if (o.as_json) {
            json trace = json::array();
            for (const auto& r : d.rule_trace) trace.push_back(r.to_string());
            arr.push_back({{"text", text::join(words, " ")}, {"tree", bracketed(d.tree)}, {"trace", trace}});
        } else {
            out << text::join(words, " ") << "\n";
            if (o.trees) out << bracketed(d.tree) << "\n";
        }
    }
    if (o.as_json) out << arr.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// materials
// ---------------------------------------------------------------------------

int cmd_materials(const Options& o, std::ostream& out) {
    const auto corpus = corpus_of(o);
    if (o.out.empty()) throw UsageError("--out is required");
    SheetSpec spec;
    spec.sentences_per_page = o.per_page;
    spec.visibility = parse_visibility(o.visibility);
    spec.page_size = o.page_size;

    auto docs = render_corpus_sheets(corpus, spec);
    std::vector<CardSpec> cards;
    for (const auto& d : o.decks) {
        // ID=SENTENCE[:grammar|:bracelet]
        const auto eq = d.find('=');
        if (eq == std::string::npos) throw UsageError("--deck expects ID=SENTENCE[:STYLE], got '" + d + "'");
        const auto id = d.substr(0, eq);
        auto rest = d.substr(eq + 1);
        auto style = CardStyle::bracelet;
        if (const auto colon = rest.find(':'); colon != std::string::npos) {
            const auto name = rest.substr(colon + 1);
            if (name == "grammar") {
                style = CardStyle::grammar;
            } else if (name != "bracelet") {
                throw UsageError("unknown card style '" + name + "'");
            }
            rest = rest.substr(0, colon);
        }
        std::size_t n = 0;
        try {
            n = std::stoul(rest);
        } catch (const std::exception&) {
            throw UsageError("--deck sentence must be a number, got '" + rest + "'");
        }
        if (n == 0 || n > corpus.sentences.size()) {
            throw Error(ErrorCode::invalid_argument, "sentence " + std::to_string(n) + " is out of range");
        }
        const auto more = cards_for(corpus, corpus.sentences[n - 1], id, style);
        cards.insert(cards.end(), more.begin(), more.end());
    }
    if (!cards.empty()) {
        const auto deck_docs = render_deck(cards);
        docs.insert(docs.end(), deck_docs.begin(), deck_docs.end());
    }
    if (!o.table.empty()) {
        const auto table = parse_table(read_text_file(o.table));
        const auto overlays = render_reveal_overlay(corpus, table, spec);
        docs.insert(docs.end(), overlays.begin(), overlays.end());
    }
    write_documents(o.out, docs);
    if (o.as_json) {
        json names = json::array();
        for (const auto& d : docs) names.push_back(d.name);
        out << json{{"out", o.out}, {"documents", names}}.dump(2) << "\n";
    } else {
        for (const auto& d : docs) out << "wrote " << (fs::path(o.out) / d.name).string() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

int cmd_serve(const Options& o, std::ostream& out) {
    const auto colon = o.bind.rfind(':');
    if (colon == std::string::npos) throw UsageError("--bind expects HOST:PORT");
    const auto host = o.bind.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(o.bind.substr(colon + 1));
    } catch (const std::exception&) {
        throw UsageError("--bind expects HOST:PORT");
    }
    if (o.data_dir.empty()) throw UsageError("--data is required");
    server::ManagerOptions manager_options;
    if (!o.log_dir.empty()) manager_options.log_dir = o.log_dir;
    server::SessionManager sessions(server::Catalog::scan(o.data_dir), manager_options);
    const auto recovered = sessions.recover();
    server::HttpOptions http_options;
    if (!o.static_dir.empty()) http_options.static_dir = o.static_dir;
    server::HttpServer http(sessions, http_options);
    const auto bound = http.bind(host, port);

    g_stop = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread watcher([&] {
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        http.stop();
    });
    out << "listening on http://" << host << ":" << bound << " (" << recovered << " sessions recovered)" << std::endl;
    http.run();
    g_stop = true;
    watcher.join();
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Mystery-language workshop toolkit", "mystery"};
    app.set_config("--config", "", "Key-value config file; command-line flags win");
    app.config_formatter(std::make_shared<CLI::ConfigINI>());
    app.require_subcommand(1);
    app.fallthrough();

    app.add_flag("--json", o.as_json, "Machine-readable output");
    app.add_option("--corpus", o.corpus, "Corpus file");
    app.add_option("--mode", o.mode, "Mask mode: nonwords or symbols");
    app.add_option("--seed", o.seed, "Seed for randomized commands");
    app.add_option("--profile", o.profile, "Phonotactic profile file");
    app.add_option("--policy", o.policy, "Boundary policy: end-required or end-optional");
    app.add_option("--lexicon", o.lexicon, "Lexicon mode for grammar check: open or closed");
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--bind", o.bind, "Service bind address HOST:PORT");

    auto* ingest = app.add_subcommand("ingest", "Parse a corpus and print statistics");
    ingest->add_option("path", o.ingest_path, "Corpus file");

    auto* mask = app.add_subcommand("mask", "Mask a corpus into a mystery language");

    auto* bracelet = app.add_subcommand("bracelet", "Bigram bracelet game");
    bracelet->require_subcommand(1);
    auto* validate = bracelet->add_subcommand("validate", "Check an ordering against the model");
    validate->add_option("--tokens", o.tokens, "Space-separated tokens")->required();
    auto* suggest = bracelet->add_subcommand("suggest", "Rank next cards");
    suggest->add_option("--deck", o.deck, "Space-separated cards")->required();
    suggest->add_option("--prefix", o.prefix, "Cards already placed");
    auto* enumerate = bracelet->add_subcommand("enumerate", "All valid orderings of a deck");
    enumerate->add_option("--deck", o.deck, "Space-separated cards")->required();
    enumerate->add_option("--max-deck", o.max_deck, "Largest deck to enumerate");
    auto* bgenerate = bracelet->add_subcommand("generate", "Random walks through the model");
    bgenerate->add_option("--deck", o.deck, "Restrict the walk to these cards");
    bgenerate->add_option("--count", o.count, "Number of sentences");
    bgenerate->add_option("--max-len", o.max_len, "Longest walk");
    auto* model = bracelet->add_subcommand("model", "Dump bigram counts");

    auto* grammar = app.add_subcommand("grammar", "Phrase-structure grammar");
    grammar->require_subcommand(1);
    auto* extract = grammar->add_subcommand("extract", "Print the extracted grammar");
    auto* check = grammar->add_subcommand("check", "Reduce a token sequence to the start category");
    check->add_option("--tokens", o.tokens, "Space-separated words")->required();
    check->add_option("--tags", o.tags, "Space-separated POS tags, one per word");
    auto* ggenerate = grammar->add_subcommand("generate", "Generate sentences top-down");
    ggenerate->add_option("--count", o.count, "Number of sentences");
    ggenerate->add_option("--sampling", o.sampling, "uniform or frequency");
    ggenerate->add_option("--max-depth", o.max_depth, "Depth bound");
    ggenerate->add_option("--retries", o.retries, "Attempts before giving up");
    ggenerate->add_flag("--trees", o.trees, "Print bracketed trees too");

    auto* materials = app.add_subcommand("materials", "Render sheets, decks and overlays");
    materials->add_option("--per-page", o.per_page, "Sentences per sheet");
    materials->add_option("--visibility", o.visibility, "none, pos or pos+constituents");
    materials->add_option("--page-size", o.page_size, "A3 or A4");
    materials->add_option("--deck", o.decks, "ID=SENTENCE[:grammar|:bracelet], repeatable");
    materials->add_option("--table", o.table, "Masking table; renders reveal overlays");

    auto* serve = app.add_subcommand("serve", "Run the live session service");
    serve->add_option("--data", o.data_dir, "Directory with corpora/ and profiles/");
    serve->add_option("--log-dir", o.log_dir, "Where session event logs go");
    serve->add_option("--static", o.static_dir, "Web client bundle to serve at /");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*ingest) return cmd_ingest(o, out);
        if (*mask) return cmd_mask(o, out);
        if (*validate) return cmd_validate(o, out);
        if (*suggest) return cmd_suggest(o, out);
        if (*enumerate) return cmd_enumerate(o, out);
        if (*bgenerate) return cmd_bracelet_generate(o, out);
        if (*model) return cmd_model(o, out);
        if (*extract) return cmd_extract(o, out);
        if (*check) return cmd_check(o, out);
        if (*ggenerate) return cmd_grammar_generate(o, out);
        if (*materials) return cmd_materials(o, out);
        if (*serve) return cmd_serve(o, out);
    } catch (const UsageError& e) {
        err << "usage: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        if (o.as_json) {
            out << json{{"error", {{"code", error_code_name(e.code())}, {"message", e.what()}}}}.dump(2) << "\n";
        }
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace mystery::cli
