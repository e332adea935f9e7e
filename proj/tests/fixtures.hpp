#pragma once

#include <filesystem>
#include <string>

#include "mystery/corpus.hpp"

namespace mystery::testing {

inline std::filesystem::path data_path(const std::string& relative) {
    return std::filesystem::path(MYSTERY_DATA_DIR) / relative;
}

inline AnnotatedCorpus load_fixture(const std::string& name) {
    return load_corpus(data_path("corpora/" + name));
}

inline AnnotatedCorpus snow_white() { return load_fixture("snow-white.corpus"); }
inline AnnotatedCorpus f1() { return load_fixture("f1.corpus"); }
inline AnnotatedCorpus mirror() { return load_fixture("mirror.corpus"); }
inline AnnotatedCorpus menu() { return load_fixture("menu.corpus"); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mystery-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace mystery::testing
