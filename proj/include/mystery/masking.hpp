#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mystery/corpus.hpp"
#include "mystery/random.hpp"

namespace mystery {

enum class MaskMode { symbols, nonwords };

std::string_view mask_mode_name(MaskMode mode);
MaskMode parse_mask_mode(std::string_view name);

/// Language tag carried by masked corpora.
inline constexpr std::string_view kMysteryLanguage = "x-mystery";

/// One syllable shape: an optional or required onset, a nucleus, and an
/// optional or required coda. Written as e.g. "CV", "CVC" or "(C)V(C)".
struct SyllableTemplate {
    bool onset = true;
    bool onset_optional = false;
    bool coda = false;
    bool coda_optional = false;

    std::string to_string() const;
    static SyllableTemplate parse(std::string_view pattern);

    friend bool operator==(const SyllableTemplate&, const SyllableTemplate&) = default;
};

/// Inventory of onsets, nuclei and codas with syllable shapes. An empty string
/// in onsets or codas stands for an empty slot. The blocklist holds real words
/// that generated non-words must never reproduce.
struct PhonotacticProfile {
    std::vector<std::string> onsets;
    std::vector<std::string> nuclei;
    std::vector<std::string> codas;
    std::vector<SyllableTemplate> templates;
    int min_syllables = 2;
    int max_syllables = 4;
    std::set<std::string> blocklist;

    void validate() const;

    /// True when the word splits into [min, max] syllables of this profile.
    bool admits(std::string_view word) const;
    bool is_blocked(std::string_view word) const { return blocklist.count(std::string(word)) > 0; }

    /// Stable text form of the whole profile, blocklist included (as a hash).
    std::string canonical() const;
    std::string hash() const;
};

/// Italian-like inventory, 2 to 4 syllables, no blocklist attached.
PhonotacticProfile default_profile();

/// Reads the key-value profile format (see docs/masking.md). A "blocklist"
/// entry is resolved relative to base_dir.
PhonotacticProfile parse_profile(std::string_view text, const std::filesystem::path& base_dir = {});
PhonotacticProfile load_profile(const std::filesystem::path& path);
std::set<std::string> load_blocklist(const std::filesystem::path& path);

/// Draws syllable count, then fills templates. Blocklisted draws are redrawn;
/// throws Error(capacity) after 10,000 consecutive blocked draws.
std::string generate_nonword(const PhonotacticProfile& profile, Rng& rng);

/// Geometric and astronomical symbols, one code point each.
std::vector<std::string> default_symbol_alphabet();

struct MaskConfig {
    MaskMode mode = MaskMode::nonwords;
    std::uint64_t seed = 0;
    PhonotacticProfile profile = default_profile();
    std::vector<std::string> alphabet = default_symbol_alphabet();
};

inline constexpr int kMaxRejectionsPerWord = 10000;

/// Word-type level bijection between case-folded source words and masks.
class MaskingTable {
public:
    MaskMode mode = MaskMode::nonwords;
    std::uint64_t seed = 0;
    std::string source_language = "und";
    /// Hash of the profile (nonwords) or of the alphabet (symbols).
    std::string config_hash;

    /// Throws Error(invalid_argument) if either side is already mapped.
    void add(const std::string& source, const std::string& mask);

    const std::string* mask_of(std::string_view source) const;
    const std::string* source_of(std::string_view mask) const;

    const std::map<std::string, std::string, std::less<>>& forward() const { return forward_; }
    std::size_t size() const { return forward_.size(); }

    friend bool operator==(const MaskingTable&, const MaskingTable&) = default;

private:
    std::map<std::string, std::string, std::less<>> forward_;
    std::map<std::string, std::string, std::less<>> reverse_;
};

/// Distinct case-folded surfaces in order of first occurrence.
std::vector<std::string> lexicon_of(const AnnotatedCorpus& corpus);

MaskingTable build_masking_table(const AnnotatedCorpus& corpus, const MaskConfig& config);

AnnotatedCorpus mask_corpus(const AnnotatedCorpus& corpus, const MaskingTable& table);
AnnotatedCorpus unmask(const AnnotatedCorpus& masked, const MaskingTable& table);

std::vector<std::string> mask_tokens(const std::vector<std::string>& tokens, const MaskingTable& table);
std::vector<std::string> unmask(const std::vector<std::string>& tokens, const MaskingTable& table);

/// Header lines plus key-sorted "source<TAB>mask" rows.
std::string serialize_table(const MaskingTable& table);
MaskingTable parse_table(std::string_view text);

}  // namespace mystery
