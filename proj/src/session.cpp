#include "mystery/session.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "mystery/error.hpp"
#include "mystery/text.hpp"

namespace mystery::server {

namespace {

constexpr std::size_t kMaxNameLength = 40;

std::string now_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

Error bad(const std::string& message) { return Error(ErrorCode::invalid_argument, message); }

std::map<std::string, std::size_t> multiset(const std::vector<std::string>& cards) {
    std::map<std::string, std::size_t> out;
    for (const auto& c : cards) ++out[c];
    return out;
}

/// First token that the deck cannot cover, if any.
std::optional<std::string> uncovered(const std::vector<std::string>& deck, const std::vector<std::string>& tokens) {
    auto left = multiset(deck);
    for (const auto& t : tokens) {
        auto it = left.find(t);
        if (it == left.end() || it->second == 0) return t;
        --it->second;
    }
    return std::nullopt;
}

Rule rule_from_string(const std::string& s) {
    const auto words = text::split_words(s);
    if (words.size() < 3 || words[1] != "=") throw Error(ErrorCode::io, "malformed rule in log: " + s);
    return Rule{words[0], std::vector<std::string>(words.begin() + 2, words.end())};
}

json legend_json(const AnnotatedCorpus& c) {
    json tags = json::array();
    for (const auto& t : c.tagset) tags.push_back({{"name", t.name}, {"number", t.number}});
    json cats = json::array();
    for (const auto& k : c.categories) cats.push_back({{"name", k.name}, {"color", k.color}});
    return {{"start", c.start}, {"tags", tags}, {"categories", cats}};
}

json sentences_json(const AnnotatedCorpus& c) {
    json out = json::array();
    for (const auto& s : c.sentences) {
        out.push_back({{"id", s.id}, {"text", sentence_text(s)}, {"bracketed", bracketed(s.tree)}});
    }
    return out;
}

}  // namespace

std::string_view phase_name(Phase phase) {
    switch (phase) {
    case Phase::lobby: return "lobby";
    case Phase::bracelet: return "bracelet";
    case Phase::grammar: return "grammar";
    case Phase::reveal: return "reveal";
    case Phase::closed: return "closed";
    }
    return "closed";
}

Phase parse_phase(std::string_view name) {
    for (auto p : {Phase::lobby, Phase::bracelet, Phase::grammar, Phase::reveal, Phase::closed}) {
        if (phase_name(p) == name) return p;
    }
    throw bad("unknown phase '" + std::string(name) + "'");
}

std::optional<Phase> next_phase(Phase phase) {
    switch (phase) {
    case Phase::lobby: return Phase::bracelet;
    case Phase::bracelet: return Phase::grammar;
    case Phase::grammar: return Phase::reveal;
    case Phase::reveal: return Phase::closed;
    case Phase::closed: return std::nullopt;
    }
    return std::nullopt;
}

std::string random_token(std::size_t bytes) {
    static std::mutex m;
    static std::random_device device;
    std::lock_guard lock(m);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (std::size_t i = 0; i < bytes; ++i) {
        const auto b = device() & 0xff;
        out += digits[b >> 4];
        out += digits[b & 0xf];
    }
    return out;
}

Catalog Catalog::scan(const std::filesystem::path& data_dir) {
    Catalog c;
    auto pick = [](const std::filesystem::path& dir, const std::string& ext, auto& into) {
        std::error_code ec;
        if (!std::filesystem::is_directory(dir, ec)) return;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ext) {
                into[entry.path().stem().string()] = entry.path();
            }
        }
    };
    pick(data_dir / "corpora", ".corpus", c.corpora);
    pick(data_dir / "profiles", ".profile", c.profiles);
    return c;
}

// ---------------------------------------------------------------------------
// Config, assets, events
// ---------------------------------------------------------------------------

json SessionConfig::to_json() const {
    json j{{"corpus", corpus_id},
           {"mask", {{"mode", mask_mode_name(mask_mode)}, {"seed", mask_seed}, {"profile", profile_id}}},
           {"policy", boundary_policy_name(policy)},
           {"hints", hints},
           {"teams", teams},
           {"team_cap", team_cap}};
    j["deal_seed"] = deal_seed ? json(*deal_seed) : json(nullptr);
    return j;
}

SessionConfig SessionConfig::from_json(const json& j) {
    if (!j.is_object()) throw bad("session config must be a JSON object");
    SessionConfig c;
    try {
        c.corpus_id = j.at("corpus").get<std::string>();
        if (j.contains("mask")) {
            const auto& m = j.at("mask");
            if (m.contains("mode")) c.mask_mode = parse_mask_mode(m.at("mode").get<std::string>());
            if (m.contains("seed")) c.mask_seed = m.at("seed").get<std::uint64_t>();
            if (m.contains("profile")) c.profile_id = m.at("profile").get<std::string>();
        }
        if (j.contains("policy")) c.policy = parse_boundary_policy(j.at("policy").get<std::string>());
        if (j.contains("hints")) c.hints = j.at("hints").get<bool>();
        if (j.contains("teams")) c.teams = j.at("teams").get<std::vector<std::string>>();
        if (j.contains("team_cap")) c.team_cap = j.at("team_cap").get<std::size_t>();
        if (j.contains("deal_seed") && !j.at("deal_seed").is_null()) c.deal_seed = j.at("deal_seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw bad(std::string("invalid session config: ") + e.what());
    }
    if (c.teams.empty()) throw bad("session needs at least one team");
    std::set<std::string> names;
    for (const auto& t : c.teams) {
        if (text::trim(t).empty()) throw bad("team names must not be empty");
        if (!names.insert(t).second) throw bad("duplicate team name '" + t + "'");
    }
    return c;
}

std::shared_ptr<const SessionAssets> SessionAssets::build(const SessionConfig& config, const Catalog& catalog) {
    const auto corpus = catalog.corpora.find(config.corpus_id);
    if (corpus == catalog.corpora.end()) throw Error(ErrorCode::not_found, "unknown corpus '" + config.corpus_id + "'");
    auto assets = std::make_shared<SessionAssets>();
    assets->clear = load_corpus(corpus->second);
    MaskConfig mask;
    mask.mode = config.mask_mode;
    mask.seed = config.mask_seed;
    if (!config.profile_id.empty()) {
        const auto profile = catalog.profiles.find(config.profile_id);
        if (profile == catalog.profiles.end()) {
            throw Error(ErrorCode::not_found, "unknown profile '" + config.profile_id + "'");
        }
        mask.profile = load_profile(profile->second);
    }
    assets->table = build_masking_table(assets->clear, mask);
    assets->masked = mask_corpus(assets->clear, assets->table);
    assets->model = train_bigrams(assets->masked);
    assets->legend = legend_of(assets->masked);
    return assets;
}

json Event::to_json() const {
    return {{"version", version}, {"timestamp", timestamp}, {"kind", kind}, {"payload", payload}};
}

Event Event::from_json(const json& j) {
    try {
        return Event{j.at("version").get<std::uint64_t>(), j.at("timestamp").get<std::string>(),
                     j.at("kind").get<std::string>(), j.at("payload")};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::io, std::string("malformed event: ") + e.what());
    }
}

std::vector<Event> read_event_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    std::vector<Event> events;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (text::trim(line).empty()) continue;
        try {
            events.push_back(Event::from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::io, path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return events;
}

json verdict_to_json(const BraceletSentence& v) {
    return {{"tokens", v.tokens},
            {"valid", v.valid},
            {"step_probabilities", v.step_probabilities},
            {"first_failure", v.first_failure ? json(*v.first_failure) : json(nullptr)},
            {"diagnostic", v.diagnostic}};
}

BraceletSentence verdict_from_json(const json& j) {
    BraceletSentence v;
    v.tokens = j.at("tokens").get<std::vector<std::string>>();
    v.valid = j.at("valid").get<bool>();
    v.step_probabilities = j.at("step_probabilities").get<std::vector<double>>();
    if (!j.at("first_failure").is_null()) v.first_failure = j.at("first_failure").get<std::size_t>();
    v.diagnostic = j.at("diagnostic").get<std::string>();
    return v;
}

json tally_to_json(const std::vector<TallyEntry>& tally) {
    json out = json::array();
    for (const auto& e : tally) out.push_back({{"rule", e.rule.to_string()}, {"count", e.count}});
    return out;
}

// ---------------------------------------------------------------------------
// Fold
// ---------------------------------------------------------------------------

std::vector<std::string> Team::remaining() const {
    auto left = multiset(board);
    std::vector<std::string> out;
    for (const auto& c : deck) {
        auto it = left.find(c);
        if (it != left.end() && it->second > 0) {
            --it->second;
            continue;
        }
        out.push_back(c);
    }
    return out;
}

const Team* SessionState::find_team(std::string_view id_or_name) const {
    for (const auto& t : teams) {
        if (t.id == id_or_name || t.name == id_or_name) return &t;
    }
    return nullptr;
}

std::vector<TallyEntry> SessionState::tally(std::uint64_t up_to) const {
    std::map<Rule, std::uint64_t> counts;
    for (const auto& p : proposals) {
        if (p.version <= up_to) ++counts[p.rule];
    }
    std::vector<TallyEntry> out;
    for (const auto& [rule, n] : counts) out.push_back({rule, n});
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
    return out;
}

void SessionState::apply(const Event& e) {
    if (e.version != version + 1) {
        throw Error(ErrorCode::io, "event version " + std::to_string(e.version) + " does not follow " +
                                       std::to_string(version));
    }
    const auto& p = e.payload;
    try {
        if (e.kind == "created") {
            if (version != 0) throw Error(ErrorCode::io, "created event in the middle of a log");
            id = p.at("session").get<std::string>();
            facilitator_key = p.at("facilitator_key").get<std::string>();
            config = SessionConfig::from_json(p.at("config"));
            created_at = e.timestamp;
            for (std::size_t i = 0; i < config.teams.size(); ++i) {
                teams.push_back(Team{"team-" + std::to_string(i + 1), config.teams[i], {}, {}, {}, {}});
            }
            phase = Phase::lobby;
        } else if (e.kind == "joined") {
            Participant who{p.at("token").get<std::string>(), p.at("handle").get<std::string>(),
                            p.at("name").get<std::string>(), p.at("team").get<std::string>()};
            auto team = std::find_if(teams.begin(), teams.end(), [&](const Team& t) { return t.id == who.team; });
            if (team == teams.end()) throw Error(ErrorCode::io, "join names unknown team " + who.team);
            team->members.push_back(who.handle);
            participants.emplace(who.token, who);
        } else if (e.kind == "phase") {
            phase = parse_phase(p.at("to").get<std::string>());
            if (p.contains("decks")) {
                for (const auto& d : p.at("decks")) {
                    const auto team_id = d.at("team").get<std::string>();
                    auto team = std::find_if(teams.begin(), teams.end(), [&](const Team& t) { return t.id == team_id; });
                    if (team == teams.end()) throw Error(ErrorCode::io, "deck for unknown team " + team_id);
                    team->sentence = d.at("sentence").get<std::size_t>();
                    team->deck = d.at("cards").get<std::vector<std::string>>();
                    team->board.clear();
                }
            }
        } else if (e.kind == "submission") {
            Submission s;
            s.index = submissions.size();
            s.version = e.version;
            s.team = p.at("team").get<std::string>();
            s.author = p.at("author").get<std::string>();
            s.tokens = p.at("tokens").get<std::vector<std::string>>();
            s.verdict = verdict_from_json(p.at("verdict"));
            s.submitted_at = e.timestamp;
            auto team = std::find_if(teams.begin(), teams.end(), [&](const Team& t) { return t.id == s.team; });
            if (team == teams.end()) throw Error(ErrorCode::io, "submission for unknown team " + s.team);
            team->board = s.tokens;
            submissions.push_back(std::move(s));
        } else if (e.kind == "proposal") {
            proposals.push_back(
                Proposal{e.version, p.at("author").get<std::string>(), rule_from_string(p.at("rule").get<std::string>())});
        } else if (e.kind == "moderation") {
            const auto index = p.at("index").get<std::size_t>();
            if (index >= submissions.size()) throw Error(ErrorCode::io, "moderation of unknown submission");
            submissions[index].hidden = p.at("hidden").get<bool>();
        } else {
            throw Error(ErrorCode::io, "unknown event kind '" + e.kind + "'");
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::io, "malformed " + e.kind + " event: " + ex.what());
    }
    version = e.version;
    phases.push_back(phase);
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

Session::Session(std::shared_ptr<const SessionAssets> assets, std::optional<std::filesystem::path> log_path)
    : assets_(std::move(assets)), log_path_(std::move(log_path)) {}

void Session::open(std::string id, std::string facilitator_key, const SessionConfig& config) {
    std::unique_lock lock(mutex_);
    commit("created", {{"session", std::move(id)}, {"facilitator_key", std::move(facilitator_key)},
                       {"config", config.to_json()}});
}

void Session::replay(const std::vector<Event>& events) {
    std::unique_lock lock(mutex_);
    SessionState fresh;
    for (const auto& e : events) fresh.apply(e);
    state_ = std::move(fresh);
    log_ = events;
}

std::string Session::id() const {
    std::shared_lock lock(mutex_);
    return state_.id;
}

Phase Session::phase() const {
    std::shared_lock lock(mutex_);
    return state_.phase;
}

std::uint64_t Session::version() const {
    std::shared_lock lock(mutex_);
    return state_.version;
}

SessionState Session::snapshot() const {
    std::shared_lock lock(mutex_);
    return state_;
}

std::vector<Event> Session::events() const {
    std::shared_lock lock(mutex_);
    return log_;
}

void Session::commit(std::string kind, json payload) {
    Event e{state_.version + 1, now_timestamp(), std::move(kind), std::move(payload)};
    auto next = state_;
    next.apply(e);
    if (log_path_) {
        std::ofstream out(*log_path_, std::ios::app | std::ios::binary);
        out << e.to_json().dump() << '\n';
        out.flush();
        if (!out) throw Error(ErrorCode::io, "cannot append to " + log_path_->string());
    }
    state_ = std::move(next);
    log_.push_back(std::move(e));
    changed_.notify_all();
}

Viewer Session::viewer_locked(const std::string& credential) const {
    if (credential.empty()) throw Error(ErrorCode::unauthorized, "participant token or facilitator key required");
    if (credential == state_.facilitator_key) return Viewer{true, {}, {}};
    const auto it = state_.participants.find(credential);
    if (it == state_.participants.end()) throw Error(ErrorCode::forbidden, "unknown participant token");
    return Viewer{false, it->second.team, it->second.handle};
}

Viewer Session::viewer_for(const std::string& credential) const {
    std::shared_lock lock(mutex_);
    return viewer_locked(credential);
}

const Participant& Session::participant_locked(const std::string& token) const {
    if (token.empty()) throw Error(ErrorCode::unauthorized, "participant token required");
    const auto it = state_.participants.find(token);
    if (it == state_.participants.end()) throw Error(ErrorCode::forbidden, "unknown participant token");
    return it->second;
}

namespace {

void require_phase(Phase actual, Phase wanted) {
    if (actual != wanted) {
        throw Error(ErrorCode::wrong_phase, "session phase is " + std::string(phase_name(actual)) + "; expected " +
                                                std::string(phase_name(wanted)));
    }
}

}  // namespace

JoinResult Session::join(const std::string& team_choice, const std::string& raw_name,
                         const std::optional<std::string>& token) {
    std::unique_lock lock(mutex_);
    if (state_.phase != Phase::lobby && state_.phase != Phase::bracelet) {
        throw Error(ErrorCode::wrong_phase, "session is " + std::string(phase_name(state_.phase)) + "; joining is over");
    }
    if (token) {
        const auto it = state_.participants.find(*token);
        if (it == state_.participants.end()) throw Error(ErrorCode::forbidden, "unknown participant token");
        const auto* team = state_.find_team(team_choice);
        if (!team_choice.empty() && (!team || team->id != it->second.team)) {
            throw Error(ErrorCode::conflict, "participant already belongs to " + it->second.team);
        }
        return JoinResult{it->second.token, it->second.handle, it->second.team};
    }
    const auto* team = state_.find_team(team_choice);
    if (!team) throw bad("unknown team '" + team_choice + "'");
    const auto name = text::trim(raw_name);
    if (name.empty()) throw bad("display name must not be empty");
    if (text::code_points(name).size() > kMaxNameLength || !text::is_valid_utf8(name)) {
        throw bad("display name is too long or not UTF-8");
    }
    if (state_.config.team_cap && team->members.size() >= state_.config.team_cap) {
        throw Error(ErrorCode::conflict, "team " + team->name + " is full");
    }
    JoinResult r{random_token(), "p" + std::to_string(state_.participants.size() + 1), team->id};
    commit("joined", {{"token", r.token}, {"handle", r.handle}, {"name", name}, {"team", r.team}});
    return r;
}

Phase Session::advance(const std::string& key, std::optional<Phase> expected,
                       const std::map<std::string, std::size_t>& decks) {
    std::unique_lock lock(mutex_);
    if (key.empty()) throw Error(ErrorCode::unauthorized, "facilitator key required");
    if (key != state_.facilitator_key) throw Error(ErrorCode::forbidden, "wrong facilitator key");
    const auto next = next_phase(state_.phase);
    if (!next) throw Error(ErrorCode::wrong_phase, "session is already closed");
    if (expected && *expected != *next) {
        throw Error(ErrorCode::conflict, "next phase is " + std::string(phase_name(*next)) + ", not " +
                                             std::string(phase_name(*expected)));
    }
    json payload{{"to", phase_name(*next)}};
    if (*next == Phase::bracelet) {
        const auto& sentences = assets_->masked.sentences;
        std::map<std::string, std::size_t> chosen;
        for (const auto& [team, sentence] : decks) {
            const auto* t = state_.find_team(team);
            if (!t) throw bad("unknown team '" + team + "'");
            if (sentence == 0 || sentence > sentences.size()) {
                throw bad("sentence " + std::to_string(sentence) + " is out of range 1.." +
                          std::to_string(sentences.size()));
            }
            chosen[t->id] = sentence;
        }
        std::optional<Rng> picker;
        if (state_.config.deal_seed) picker.emplace(*state_.config.deal_seed);
        Rng shuffler(state_.config.mask_seed ^ 0xdecdecdecULL);
        json dealt = json::array();
        for (std::size_t i = 0; i < state_.teams.size(); ++i) {
            const auto& team = state_.teams[i];
            std::size_t sentence = i % sentences.size() + 1;
            if (picker) sentence = uniform_index(*picker, sentences.size()) + 1;
            if (const auto it = chosen.find(team.id); it != chosen.end()) sentence = it->second;
            auto cards = sentences[sentence - 1].surfaces();
            shuffle(cards, shuffler);
            dealt.push_back({{"team", team.id}, {"sentence", sentence}, {"cards", cards}});
        }
        payload["decks"] = dealt;
    } else if (!decks.empty()) {
        throw bad("decks are only dealt when entering the bracelet phase");
    }
    commit("phase", payload);
    return state_.phase;
}

Submission Session::submit(const std::string& token, const std::vector<std::string>& tokens) {
    std::unique_lock lock(mutex_);
    const auto who = participant_locked(token);
    require_phase(state_.phase, Phase::bracelet);
    if (tokens.empty()) throw bad("submission needs at least one card");
    const auto* team = state_.find_team(who.team);
    if (const auto missing = uncovered(team->deck, tokens)) {
        throw Error(ErrorCode::inadmissible_token, "card '" + *missing + "' is missing from the team deck");
    }
    const auto verdict = validate_sequence(assets_->model, tokens, state_.config.policy);
    commit("submission",
           {{"team", who.team}, {"author", who.handle}, {"tokens", tokens}, {"verdict", verdict_to_json(verdict)}});
    return state_.submissions.back();
}

std::vector<Suggestion> Session::suggest(const std::string& token, const std::vector<std::string>& prefix) const {
    std::shared_lock lock(mutex_);
    const auto& who = participant_locked(token);
    require_phase(state_.phase, Phase::bracelet);
    if (!state_.config.hints) throw Error(ErrorCode::forbidden, "hints are disabled for this session");
    const auto* team = state_.find_team(who.team);
    if (const auto missing = uncovered(team->deck, prefix)) {
        throw Error(ErrorCode::inadmissible_token, "card '" + *missing + "' is missing from the team deck");
    }
    auto left = multiset(prefix);
    std::vector<std::string> remainder;
    for (const auto& c : team->deck) {
        auto it = left.find(c);
        if (it != left.end() && it->second > 0) {
            --it->second;
            continue;
        }
        remainder.push_back(c);
    }
    if (remainder.empty()) return {};
    return suggest_next(assets_->model, prefix, Deck{remainder});
}

std::vector<TallyEntry> Session::propose(const std::string& token, const std::string& rule_text) {
    std::unique_lock lock(mutex_);
    const auto who = participant_locked(token);
    require_phase(state_.phase, Phase::grammar);
    const auto rule = parse_rule(rule_text, assets_->legend);
    commit("proposal", {{"author", who.handle}, {"rule", rule.to_string()}});
    return state_.tally();
}

void Session::moderate(const std::string& key, std::size_t index, bool hidden) {
    std::unique_lock lock(mutex_);
    if (key.empty()) throw Error(ErrorCode::unauthorized, "facilitator key required");
    if (key != state_.facilitator_key) throw Error(ErrorCode::forbidden, "wrong facilitator key");
    if (index >= state_.submissions.size()) throw Error(ErrorCode::not_found, "no submission " + std::to_string(index));
    commit("moderation", {{"index", index}, {"hidden", hidden}});
}

json Session::reveal(const std::string& credential) const {
    std::shared_lock lock(mutex_);
    viewer_locked(credential);
    if (state_.phase != Phase::reveal && state_.phase != Phase::closed) {
        throw Error(ErrorCode::wrong_phase, "translations are only available from the reveal phase on");
    }
    const auto& a = *assets_;
    json corpus = json::array();
    for (std::size_t i = 0; i < a.clear.sentences.size(); ++i) {
        corpus.push_back({{"id", a.clear.sentences[i].id},
                          {"masked", sentence_text(a.masked.sentences[i])},
                          {"clear", sentence_text(a.clear.sentences[i])},
                          {"bracketed", bracketed(a.clear.sentences[i].tree)}});
    }
    json decks = json::array();
    for (const auto& t : state_.teams) {
        if (!t.sentence) continue;
        decks.push_back({{"team", t.id}, {"name", t.name}, {"sentence", *t.sentence}, {"masked", t.deck},
                         {"clear", unmask(t.deck, a.table)}});
    }
    json submissions = json::array();
    for (const auto& s : state_.submissions) {
        submissions.push_back({{"index", s.index}, {"team", s.team}, {"author", s.author}, {"masked", s.tokens},
                               {"clear", unmask(s.tokens, a.table)}, {"valid", s.verdict.valid},
                               {"hidden", s.hidden}});
    }
    json table = json::array();
    for (const auto& [source, mask] : a.table.forward()) table.push_back({{"clear", source}, {"masked", mask}});
    return {{"session", state_.id}, {"language", a.clear.language_tag}, {"corpus", corpus},
            {"decks", decks},       {"submissions", submissions},        {"table", table}};
}

json Session::update_for(const Event& e, const Viewer& viewer) const {
    json u{{"version", e.version},
           {"timestamp", e.timestamp},
           {"kind", e.kind},
           {"phase", phase_name(state_.phases[e.version - 1])}};
    const auto& p = e.payload;
    json out;
    if (e.kind == "created") {
        json teams = json::array();
        for (const auto& t : state_.teams) teams.push_back({{"id", t.id}, {"name", t.name}});
        out = {{"session", state_.id},
               {"corpus", state_.config.corpus_id},
               {"language", assets_->masked.language_tag},
               {"legend", legend_json(assets_->masked)},
               {"sentences", sentences_json(assets_->masked)},
               {"teams", teams},
               {"hints", state_.config.hints},
               {"policy", boundary_policy_name(state_.config.policy)}};
    } else if (e.kind == "joined") {
        out = {{"handle", p.at("handle")}, {"name", p.at("name")}, {"team", p.at("team")}};
    } else if (e.kind == "phase") {
        out = {{"to", p.at("to")}};
        if (p.contains("decks")) {
            json decks = json::array();
            for (const auto& d : p.at("decks")) {
                if (viewer.facilitator) {
                    decks.push_back(d);
                } else if (d.at("team") == viewer.team) {
                    decks.push_back({{"team", d.at("team")}, {"cards", d.at("cards")}});
                }
            }
            out["decks"] = decks;
        }
    } else if (e.kind == "submission") {
        const auto it = std::find_if(state_.submissions.begin(), state_.submissions.end(),
                                     [&](const Submission& s) { return s.version == e.version; });
        const auto& s = *it;
        out = {{"index", s.index}, {"team", s.team}};
        if (viewer.facilitator || viewer.team == s.team) {
            out["author"] = s.author;
            out["hidden"] = s.hidden;
            if (viewer.facilitator || !s.hidden) {
                out["tokens"] = s.tokens;
                out["verdict"] = verdict_to_json(s.verdict);
            }
        }
    } else if (e.kind == "proposal") {
        out = {{"author", p.at("author")}, {"rule", p.at("rule")}, {"tally", tally_to_json(state_.tally(e.version))}};
    } else if (e.kind == "moderation") {
        out = {{"index", p.at("index")}, {"hidden", p.at("hidden")}};
    }
    u["payload"] = out;
    return u;
}

json Session::stream(const std::string& credential, std::uint64_t since, std::chrono::milliseconds wait) const {
    std::shared_lock lock(mutex_);
    const auto viewer = viewer_locked(credential);
    if (wait.count() > 0 && state_.version <= since) {
        changed_.wait_for(lock, wait, [&] { return state_.version > since; });
    }
    json updates = json::array();
    for (std::uint64_t v = since + 1; v <= state_.version; ++v) updates.push_back(update_for(log_[v - 1], viewer));
    return {{"session", state_.id}, {"version", state_.version}, {"phase", phase_name(state_.phase)},
            {"updates", updates}};
}

json Session::state(const std::string& credential) const {
    std::shared_lock lock(mutex_);
    const auto viewer = viewer_locked(credential);
    json teams = json::array();
    for (const auto& t : state_.teams) {
        json members = json::array();
        for (const auto& [token, who] : state_.participants) {
            if (who.team == t.id) members.push_back({{"handle", who.handle}, {"name", who.name}});
        }
        json team{{"id", t.id}, {"name", t.name}, {"members", members}};
        if (viewer.facilitator || viewer.team == t.id) {
            team["deck"] = t.deck;
            team["board"] = t.board;
            team["remaining"] = t.remaining();
            if (viewer.facilitator && t.sentence) team["sentence"] = *t.sentence;
        }
        teams.push_back(team);
    }
    json submissions = json::array();
    for (const auto& s : state_.submissions) {
        if (!viewer.facilitator && viewer.team != s.team) continue;
        json r{{"index", s.index}, {"team", s.team}, {"author", s.author}, {"hidden", s.hidden},
               {"submitted_at", s.submitted_at}};
        if (viewer.facilitator || !s.hidden) {
            r["tokens"] = s.tokens;
            r["verdict"] = verdict_to_json(s.verdict);
        }
        submissions.push_back(r);
    }
    json who = viewer.facilitator ? json{{"role", "facilitator"}}
                                  : json{{"role", "participant"}, {"team", viewer.team}, {"handle", viewer.handle}};
    return {{"session", state_.id},
            {"phase", phase_name(state_.phase)},
            {"version", state_.version},
            {"viewer", who},
            {"language", assets_->masked.language_tag},
            {"legend", legend_json(assets_->masked)},
            {"sentences", sentences_json(assets_->masked)},
            {"teams", teams},
            {"submissions", submissions},
            {"poll", tally_to_json(state_.tally())},
            {"hints", state_.config.hints},
            {"policy", boundary_policy_name(state_.config.policy)}};
}

// ---------------------------------------------------------------------------
// Manager
// ---------------------------------------------------------------------------

SessionManager::SessionManager(Catalog catalog, ManagerOptions options)
    : catalog_(std::move(catalog)), options_(std::move(options)) {
    if (options_.log_dir) std::filesystem::create_directories(*options_.log_dir);
}

CreateResult SessionManager::create(const SessionConfig& config, std::optional<std::string> facilitator_key) {
    if (facilitator_key && facilitator_key->size() < 8) throw bad("facilitator key must have at least 8 characters");
    // Round trip so that a session is only created from a config its own log can reproduce.
    const auto checked = SessionConfig::from_json(config.to_json());
    auto assets = SessionAssets::build(checked, catalog_);
    CreateResult r{random_token(8), facilitator_key ? *facilitator_key : random_token(16)};
    std::optional<std::filesystem::path> log_path;
    if (options_.log_dir) log_path = *options_.log_dir / (r.session_id + ".jsonl");
    auto session = std::make_shared<Session>(std::move(assets), log_path);
    session->open(r.session_id, r.facilitator_key, checked);
    std::unique_lock lock(mutex_);
    sessions_.emplace(r.session_id, std::move(session));
    return r;
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::not_found, "unknown session '" + id + "'");
    return it->second;
}

std::vector<std::string> SessionManager::ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) out.push_back(id);
    return out;
}

std::size_t SessionManager::recover() {
    if (!options_.log_dir) return 0;
    std::size_t n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(*options_.log_dir)) {
        if (entry.path().extension() != ".jsonl") continue;
        const auto events = read_event_log(entry.path());
        if (events.empty() || events.front().kind != "created") continue;
        const auto config = SessionConfig::from_json(events.front().payload.at("config"));
        auto session = std::make_shared<Session>(SessionAssets::build(config, catalog_), entry.path());
        session->replay(events);
        std::unique_lock lock(mutex_);
        sessions_[session->id()] = std::move(session);
        ++n;
    }
    return n;
}

}  // namespace mystery::server
