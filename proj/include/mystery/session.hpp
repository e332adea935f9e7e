#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mystery/bracelet.hpp"
#include "mystery/corpus.hpp"
#include "mystery/grammar.hpp"
#include "mystery/masking.hpp"

namespace mystery::server {

using json = nlohmann::json;

enum class Phase { lobby, bracelet, grammar, reveal, closed };

std::string_view phase_name(Phase phase);
Phase parse_phase(std::string_view name);
std::optional<Phase> next_phase(Phase phase);

/// Corpora and profiles the server may use, by id (file stem).
struct Catalog {
    std::map<std::string, std::filesystem::path> corpora;
    std::map<std::string, std::filesystem::path> profiles;

    /// Picks up <dir>/corpora/*.corpus and <dir>/profiles/*.profile.
    static Catalog scan(const std::filesystem::path& data_dir);
};

struct SessionConfig {
    std::string corpus_id;
    MaskMode mask_mode = MaskMode::nonwords;
    std::uint64_t mask_seed = 0;
    /// Catalog profile id; empty means the built-in profile.
    std::string profile_id;
    BoundaryPolicy policy = BoundaryPolicy::end_optional;
    bool hints = true;
    std::vector<std::string> teams{"Team 1", "Team 2"};
    /// Members per team; 0 is unlimited.
    std::size_t team_cap = 0;
    /// When set, decks are random sentences drawn with this seed unless the
    /// facilitator picks them.
    std::optional<std::uint64_t> deal_seed;

    json to_json() const;
    static SessionConfig from_json(const json& j);
};

/// Everything that follows from a config and the catalog. Rebuilt, never logged.
struct SessionAssets {
    AnnotatedCorpus clear;
    AnnotatedCorpus masked;
    MaskingTable table;
    BigramModel model;
    Grammar legend;

    static std::shared_ptr<const SessionAssets> build(const SessionConfig& config, const Catalog& catalog);
};

struct Event {
    std::uint64_t version = 0;
    std::string timestamp;
    std::string kind;
    json payload;

    json to_json() const;
    static Event from_json(const json& j);
};

struct Participant {
    std::string token;
    std::string handle;
    std::string name;
    std::string team;
};

struct Team {
    std::string id;
    std::string name;
    std::vector<std::string> members;  ///< handles
    std::optional<std::size_t> sentence;
    std::vector<std::string> deck;
    /// Cards laid out by the latest submission.
    std::vector<std::string> board;

    /// Dealt deck minus the board.
    std::vector<std::string> remaining() const;
};

struct Submission {
    std::size_t index = 0;
    std::uint64_t version = 0;
    std::string team;
    std::string author;
    std::vector<std::string> tokens;
    BraceletSentence verdict;
    std::string submitted_at;
    bool hidden = false;
};

struct Proposal {
    std::uint64_t version = 0;
    std::string author;
    Rule rule;
};

struct TallyEntry {
    Rule rule;
    std::uint64_t count = 0;
};

/// Session state is a pure fold over the event log.
struct SessionState {
    std::string id;
    std::string created_at;
    std::string facilitator_key;
    SessionConfig config;
    Phase phase = Phase::lobby;
    std::uint64_t version = 0;
    std::vector<Team> teams;
    std::map<std::string, Participant> participants;  ///< by token
    std::vector<Submission> submissions;
    std::vector<Proposal> proposals;
    /// phases[v - 1] is the phase right after version v.
    std::vector<Phase> phases;

    const Team* find_team(std::string_view id_or_name) const;
    /// Distinct rules with counts over proposals up to version (all by default).
    std::vector<TallyEntry> tally(std::uint64_t up_to = UINT64_MAX) const;

    void apply(const Event& event);
};

/// Who is looking at the session. Facilitators see every team.
struct Viewer {
    bool facilitator = false;
    std::string team;
    std::string handle;
};

struct CreateResult {
    std::string session_id;
    std::string facilitator_key;
};

struct JoinResult {
    std::string token;
    std::string handle;
    std::string team;
};

class Session {
public:
    Session(std::shared_ptr<const SessionAssets> assets, std::optional<std::filesystem::path> log_path);

    /// Writes the "created" event.
    void open(std::string id, std::string facilitator_key, const SessionConfig& config);
    /// Refolds a recovered log.
    void replay(const std::vector<Event>& events);

    std::string id() const;
    Phase phase() const;
    std::uint64_t version() const;
    SessionState snapshot() const;
    std::vector<Event> events() const;
    const SessionAssets& assets() const { return *assets_; }

    /// Token may be an earlier token of the same participant, which makes join idempotent.
    JoinResult join(const std::string& team, const std::string& name, const std::optional<std::string>& token = {});

    /// decks maps team id or name to a 1-based sentence id. Only used on Bracelet entry.
    Phase advance(const std::string& key, std::optional<Phase> expected = {},
                  const std::map<std::string, std::size_t>& decks = {});

    Submission submit(const std::string& token, const std::vector<std::string>& tokens);
    std::vector<Suggestion> suggest(const std::string& token, const std::vector<std::string>& prefix) const;
    std::vector<TallyEntry> propose(const std::string& token, const std::string& rule_text);
    void moderate(const std::string& key, std::size_t index, bool hidden);

    /// Clear corpus, decks and submissions. Only in Reveal and Closed.
    json reveal(const std::string& credential) const;

    /// Participant or facilitator view of the current state.
    json state(const std::string& credential) const;

    /// Updates after since, waiting up to wait for one to arrive.
    json stream(const std::string& credential, std::uint64_t since,
                std::chrono::milliseconds wait = std::chrono::milliseconds(0)) const;

    Viewer viewer_for(const std::string& credential) const;

private:
    void commit(std::string kind, json payload);
    Viewer viewer_locked(const std::string& credential) const;
    json update_for(const Event& event, const Viewer& viewer) const;
    const Participant& participant_locked(const std::string& token) const;

    std::shared_ptr<const SessionAssets> assets_;
    std::optional<std::filesystem::path> log_path_;
    mutable std::shared_mutex mutex_;
    mutable std::condition_variable_any changed_;
    SessionState state_;
    std::vector<Event> log_;
};

struct ManagerOptions {
    /// Event logs go to <log_dir>/<session id>.jsonl when set.
    std::optional<std::filesystem::path> log_dir;
};

class SessionManager {
public:
    explicit SessionManager(Catalog catalog, ManagerOptions options = {});

    CreateResult create(const SessionConfig& config, std::optional<std::string> facilitator_key = {});
    /// Throws Error(not_found).
    std::shared_ptr<Session> find(const std::string& id) const;
    std::vector<std::string> ids() const;
    const Catalog& catalog() const { return catalog_; }

    /// Loads every log in log_dir; returns how many sessions came back.
    std::size_t recover();

private:
    Catalog catalog_;
    ManagerOptions options_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

json verdict_to_json(const BraceletSentence& verdict);
BraceletSentence verdict_from_json(const json& j);
json tally_to_json(const std::vector<TallyEntry>& tally);

/// Reads a JSON-lines event log.
std::vector<Event> read_event_log(const std::filesystem::path& path);

/// Random hex string from the system entropy source.
std::string random_token(std::size_t bytes = 16);

}  // namespace mystery::server
