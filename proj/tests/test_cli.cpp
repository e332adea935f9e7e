#include "doctest.h"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "mystery/grammar.hpp"
#include "mystery/masking.hpp"
#include "mystery/session.hpp"
#include "mystery/text.hpp"

using namespace mystery;
using namespace mystery::testing;
using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mystery");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string corpus(const std::string& name) { return data_path("corpora/" + name + ".corpus").string(); }

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// The real binary, with stdout on a pipe.
struct Child {
    pid_t pid = -1;
    int out_fd = -1;

    explicit Child(const std::vector<std::string>& args) {
        int fds[2];
        REQUIRE(pipe(fds) == 0);
        pid = fork();
        REQUIRE(pid >= 0);
        if (pid == 0) {
            dup2(fds[1], STDOUT_FILENO);
            const int devnull = open("/dev/null", O_WRONLY);
            dup2(devnull, STDERR_FILENO);
            close(fds[0]);
            close(fds[1]);
            std::vector<char*> argv;
            std::string path = MYSTERY_CLI_PATH;
            argv.push_back(path.data());
            std::vector<std::string> copy = args;
            for (auto& a : copy) argv.push_back(a.data());
            argv.push_back(nullptr);
            execv(path.c_str(), argv.data());
            _exit(127);
        }
        close(fds[1]);
        out_fd = fds[0];
    }

    std::string read_line() {
        std::string line;
        char c;
        while (read(out_fd, &c, 1) == 1 && c != '\n') line += c;
        return line;
    }

    int wait_exit() {
        int status = 0;
        waitpid(pid, &status, 0);
        pid = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    ~Child() {
        if (pid > 0) {
            kill(pid, SIGKILL);
            waitpid(pid, nullptr, 0);
        }
        if (out_fd >= 0) close(out_fd);
    }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
    auto r = run_cli({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("bracelet") != std::string::npos);
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"frobnicate"}).code == 2);
    CHECK(run_cli({"--corpus", corpus("f1"), "bracelet", "validate"}).code == 2);
    CHECK(run_cli({"--corpus", corpus("f1"), "--seed", "abc", "mask"}).code == 2);
}

TEST_CASE("ingest") {
    auto r = run_cli({"ingest", corpus("f1")});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("sentences: 3") != std::string::npos);
    CHECK(r.out.find("tokens: 17") != std::string::npos);
    CHECK(r.out.find("types: 7") != std::string::npos);

    r = run_cli({"--json", "ingest", corpus("f1")});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j.at("sentences") == 3);
    CHECK(j.at("tagset").size() == 8);
    CHECK(j.at("categories").size() == 5);
}

TEST_CASE("ingest reports the error position") {
    const auto dir = scratch_dir("cli-bad");
    {
        std::ofstream f(dir / "bad.corpus");
        f << slurp(corpus("f1")) << "(S (NP (ART il) (N cane)\n";
    }
    const auto r = run_cli({"ingest", (dir / "bad.corpus").string()});
    CHECK(r.code == 1);
    CHECK(std::regex_search(r.err, std::regex(R"(\d+:\d+)")));
    CHECK(run_cli({"ingest", (dir / "missing.corpus").string()}).code == 1);
}

TEST_CASE("mask writes corpus and table") {
    const auto dir = scratch_dir("cli-mask");
    CHECK(run_cli({"--corpus", corpus("f1"), "--out", dir.string(), "mask"}).code == 2);
    const auto r = run_cli({"--corpus", corpus("f1"), "--seed", "7", "--out", dir.string(), "mask"});
    REQUIRE(r.code == 0);
    const auto text = slurp(dir / "masked.corpus");
    CHECK(text.rfind("# masked", 0) == 0);
    CHECK(text.find("seed 7") != std::string::npos);
    const auto masked = parse_corpus(text);
    const auto table = parse_table(slurp(dir / "masking.table"));
    CHECK(table.size() == 7);
    CHECK(serialize_corpus(unmask(masked, table)) == serialize_corpus(f1()));

    // same seed, same bytes
    const auto again = scratch_dir("cli-mask-2");
    REQUIRE(run_cli({"--corpus", corpus("f1"), "--seed", "7", "--out", again.string(), "mask"}).code == 0);
    CHECK(slurp(again / "masked.corpus") == text);
    CHECK(slurp(again / "masking.table") == slurp(dir / "masking.table"));
}

TEST_CASE("mask in symbols mode with a profile file") {
    const auto dir = scratch_dir("cli-mask-symbols");
    auto r = run_cli({"--corpus", corpus("snow-white"), "--seed", "3", "--mode", "symbols", "--out", dir.string(),
                      "mask"});
    REQUIRE(r.code == 0);
    CHECK(parse_table(slurp(dir / "masking.table")).mode == MaskMode::symbols);
    r = run_cli({"--corpus", corpus("snow-white"), "--seed", "3", "--profile",
                 data_path("profiles/italian.profile").string(), "--out", dir.string(), "mask"});
    CHECK(r.code == 0);
    r = run_cli({"--corpus", corpus("f1"), "--seed", "3", "--mode", "glyphs", "--out", dir.string(), "mask"});
    CHECK(r.code == 1);
}

TEST_CASE("config file supplies defaults and flags win") {
    const auto dir = scratch_dir("cli-config");
    {
        std::ofstream f(dir / "mystery.ini");
        f << "corpus = " << corpus("f1") << "\n";
        f << "seed = 7\n";
        f << "out = " << (dir / "a").string() << "\n";
    }
    auto r = run_cli({"--config", (dir / "mystery.ini").string(), "mask"});
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "a" / "masked.corpus"));
    r = run_cli({"--config", (dir / "mystery.ini").string(), "--out", (dir / "b").string(), "mask"});
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "b" / "masked.corpus"));
}

TEST_CASE("bracelet validate") {
    auto r = run_cli({"--corpus", corpus("f1"), "bracelet", "validate", "--tokens", "il mio cane è nel giardino"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("VALID\n", 0) == 0);
    CHECK(r.out.find("<s> -> il  1.000000") != std::string::npos);

    r = run_cli({"--corpus", corpus("f1"), "bracelet", "validate", "--tokens", "il cane mio è nel giardino"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("INVALID\n", 0) == 0);
    CHECK(r.out.find("first failure at step 3") != std::string::npos);

    r = run_cli({"--json", "--corpus", corpus("f1"), "bracelet", "validate", "--tokens", "il cane è mio"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j.at("valid") == true);
    CHECK(j.at("step_probabilities").size() == 5);

    r = run_cli({"--corpus", corpus("f1"), "--policy", "end-optional", "bracelet", "validate", "--tokens", "il cane"});
    CHECK(r.out.rfind("VALID\n", 0) == 0);
}

TEST_CASE("bracelet suggest and enumerate") {
    auto r = run_cli({"--corpus", corpus("f1"), "bracelet", "suggest", "--deck", "il mio cane è nel giardino"});
    REQUIRE(r.code == 0);
    CHECK(r.out == "il\t1.000000\n");
    r = run_cli({"--corpus", corpus("f1"), "bracelet", "suggest", "--deck", "il mio cane è nel giardino", "--prefix",
                 "il"});
    CHECK(r.out == "cane\t0.333333\nmio\t0.333333\n");

    r = run_cli({"--corpus", corpus("f1"), "bracelet", "enumerate", "--deck", "il mio cane è nel giardino"});
    REQUIRE(r.code == 0);
    const auto lines = lines_of(r.out);
    CHECK(std::find(lines.begin(), lines.end(), "il mio cane è nel giardino") != lines.end());
    CHECK(std::find(lines.begin(), lines.end(), "il cane nel giardino è mio") != lines.end());

    r = run_cli({"--corpus", corpus("f1"), "bracelet", "enumerate", "--max-deck", "3", "--deck",
                 "il mio cane è nel giardino"});
    CHECK(r.code == 1);
}

TEST_CASE("bracelet generate and model") {
    CHECK(run_cli({"--corpus", corpus("f1"), "bracelet", "generate"}).code == 2);
    const auto a = run_cli({"--corpus", corpus("f1"), "--seed", "5", "bracelet", "generate", "--count", "20"});
    const auto b = run_cli({"--corpus", corpus("f1"), "--seed", "5", "bracelet", "generate", "--count", "20"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(lines_of(a.out).size() == 20);
    for (const auto& line : lines_of(a.out)) {
        if (line.empty()) continue;
        const auto v = run_cli({"--corpus", corpus("f1"), "bracelet", "validate", "--tokens", line});
        CHECK(v.out.rfind("VALID\n", 0) == 0);
    }
    const auto m = run_cli({"--corpus", corpus("f1"), "bracelet", "model"});
    CHECK(m.code == 0);
    CHECK(m.out.find("giardino") != std::string::npos);
}

TEST_CASE("grammar extract and check") {
    auto r = run_cli({"--corpus", corpus("mirror"), "grammar", "extract"});
    REQUIRE(r.code == 0);
    CHECK(r.out == dump_grammar(extract_grammar(mirror())));

    r = run_cli({"--corpus", corpus("f1"), "grammar", "check", "--tokens", "il gatto è nel giardino"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("REDUCES TO S\n", 0) == 0);

    r = run_cli({"--corpus", corpus("f1"), "grammar", "check", "--tokens", "giardino nel"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("DOES NOT REDUCE TO S\n", 0) == 0);
    CHECK(r.out.find("best partial:") != std::string::npos);

    r = run_cli({"--corpus", corpus("f1"), "grammar", "check", "--tokens", "il topo è nel giardino"});
    CHECK(r.code == 1);
    r = run_cli({"--corpus", corpus("f1"), "grammar", "check", "--tokens", "il topo è nel giardino", "--tags",
                 "ART N V PREP N"});
    CHECK(r.out.rfind("REDUCES TO S\n", 0) == 0);
    r = run_cli({"--corpus", corpus("f1"), "--lexicon", "closed", "grammar", "check", "--tokens",
                 "il topo è nel giardino", "--tags", "ART N V PREP N"});
    CHECK(r.code == 1);

    r = run_cli({"--json", "--corpus", corpus("f1"), "grammar", "check", "--tokens", "il gatto è nel giardino"});
    const auto j = json::parse(r.out);
    CHECK(j.at("reduces") == true);
    CHECK(j.at("trace").size() >= 4);
}

TEST_CASE("grammar generate") {
    CHECK(run_cli({"--corpus", corpus("snow-white"), "grammar", "generate"}).code == 2);
    const auto a = run_cli({"--corpus", corpus("snow-white"), "--seed", "9", "grammar", "generate", "--count", "10",
                            "--sampling", "frequency"});
    const auto b = run_cli({"--corpus", corpus("snow-white"), "--seed", "9", "grammar", "generate", "--count", "10",
                            "--sampling", "frequency"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(lines_of(a.out).size() >= 10);
    CHECK(run_cli({"--corpus", corpus("snow-white"), "--seed", "9", "grammar", "generate", "--sampling", "zipf"})
              .code == 1);
}

TEST_CASE("materials") {
    const auto dir = scratch_dir("cli-materials");
    const auto masked_dir = scratch_dir("cli-materials-mask");
    REQUIRE(run_cli({"--corpus", corpus("f1"), "--seed", "7", "--out", masked_dir.string(), "mask"}).code == 0);
    const auto r = run_cli({"--corpus", (masked_dir / "masked.corpus").string(), "--out", dir.string(), "materials",
                            "--deck", "A=1", "--deck", "B=2:grammar", "--table",
                            (masked_dir / "masking.table").string(), "--page-size", "A4"});
    REQUIRE(r.code == 0);
    std::size_t docs = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir)) docs += e.path().extension() == ".html";
    CHECK(docs == 4);
    CHECK(std::filesystem::exists(dir / "overlay-01.html"));
    CHECK(run_cli({"--corpus", corpus("f1"), "--out", dir.string(), "materials", "--deck", "A=9"}).code == 1);
    CHECK(run_cli({"--corpus", corpus("f1"), "--out", dir.string(), "materials", "--deck", "A"}).code == 2);
    CHECK(run_cli({"--corpus", corpus("f1"), "--out", dir.string(), "materials", "--visibility", "most"}).code == 1);
}

TEST_CASE("serve answers health checks and stops on SIGTERM") {
    Child child({"--bind", "127.0.0.1:0", "serve", "--data", MYSTERY_DATA_DIR});
    const auto line = child.read_line();
    std::smatch m;
    REQUIRE(std::regex_search(line, m, std::regex(R"(listening on http://127\.0\.0\.1:(\d+))")));
    const int port = std::stoi(m[1]);
    httplib::Client c("127.0.0.1", port);
    const auto r = c.Get("/healthz");
    REQUIRE(r);
    CHECK(r->status == 200);

    // a second server on the same port must fail
    Child second({"--bind", "127.0.0.1:" + std::to_string(port), "serve", "--data", MYSTERY_DATA_DIR});
    CHECK(second.wait_exit() == 1);

    kill(child.pid, SIGTERM);
    CHECK(child.wait_exit() == 0);
}

TEST_CASE("fixture reports") {
    auto r = run_cli({"ingest", corpus("snow-white")});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("sentences: 60\n", 0) == 0);
    r = run_cli({"ingest", corpus("legends-only")});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("sentences: 0\n", 0) == 0);
}

TEST_CASE("symbols-masked F1 passes ingest") {
    const auto dir = scratch_dir("cli-symbols-f1");
    REQUIRE(run_cli({"--corpus", corpus("f1"), "--seed", "7", "--mode", "symbols", "--out", dir.string(), "mask"})
                .code == 0);
    const auto r = run_cli({"ingest", (dir / "masked.corpus").string()});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("sentences: 3\n", 0) == 0);
}

TEST_CASE("starved profile is a capacity error") {
    const auto dir = scratch_dir("cli-starved");
    const auto r = run_cli({"--corpus", corpus("snow-white"), "--seed", "7", "--profile",
                            data_path("profiles/starved.profile").string(), "--out", dir.string(), "mask"});
    CHECK(r.code == 1);
    const auto j = run_cli({"--json", "--corpus", corpus("snow-white"), "--seed", "7", "--profile",
                            data_path("profiles/starved.profile").string(), "--out", dir.string(), "mask"});
    CHECK(json::parse(j.out).at("error").at("code") == "capacity");
}

TEST_CASE("unknown bracelet token is named") {
    const auto r = run_cli({"--corpus", corpus("f1"), "bracelet", "validate", "--tokens", "il topo"});
    CHECK(r.code == 1);
    CHECK(r.err.find("topo") != std::string::npos);
}

TEST_CASE("mirror sentence grammar") {
    auto r = run_cli({"--json", "--corpus", corpus("mirror"), "grammar", "extract"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("rules").size() == 4);
    const auto sentence = mirror().sentences.front().surfaces();
    r = run_cli({"--corpus", corpus("mirror"), "grammar", "check", "--tokens", text::join(sentence, " ")});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("REDUCES TO S\n", 0) == 0);
    CHECK(lines_of(r.out).size() == 7);  // header, 5 rule applications, tree

    const auto a = run_cli({"--corpus", corpus("mirror"), "--seed", "1", "grammar", "generate"});
    const auto b = run_cli({"--corpus", corpus("mirror"), "--seed", "1", "grammar", "generate"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
}

TEST_CASE("session masking equals mask output") {
    const auto dir = scratch_dir("cli-session-mask");
    REQUIRE(run_cli({"--corpus", corpus("f1"), "--seed", "7", "--out", dir.string(), "mask"}).code == 0);
    server::SessionManager manager(server::Catalog::scan(MYSTERY_DATA_DIR));
    server::SessionConfig config;
    config.corpus_id = "f1";
    config.mask_seed = 7;
    const auto created = manager.create(config);
    const auto& assets = manager.find(created.session_id)->assets();
    CHECK(assets.masked == parse_corpus(slurp(dir / "masked.corpus")));
    CHECK(serialize_table(assets.table) == slurp(dir / "masking.table"));
}

TEST_CASE("serve needs a data directory") {
    CHECK(run_cli({"--bind", "127.0.0.1:0", "serve"}).code == 2);
    CHECK(run_cli({"--bind", "localhost", "serve", "--data", MYSTERY_DATA_DIR}).code == 2);
}

}  // TEST_SUITE
