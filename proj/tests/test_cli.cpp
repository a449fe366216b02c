#include <gtest/gtest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string command = std::string(FAKESCOPE_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (pipe == nullptr) return r;
  char buffer[4096];
  std::size_t n = 0;
  while ((n = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) r.out.append(buffer, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("fakescope-cli-" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    model_ = dir_ / "sotu.fsm";
    const std::string train = std::string(FAKESCOPE_DATA_DIR) + "/sotu/train";
    trained_ = run("train --corpus " + train + " --order 3 --out " + model_.string()).status == 0;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static inline fs::path dir_;
  static inline fs::path model_;
  static inline bool trained_ = false;
};

}  // namespace

TEST_F(Cli, TrainScoreKde) {
  ASSERT_TRUE(trained_);
  const auto text = dir_ / "in.txt";
  spit(text, "The Congress of the United States met today to consider the budget.");
  const auto r = run("score --model " + model_.string() + " --in " + text.string());
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["tokens"].size(), j["scores"].size());
  EXPECT_EQ(j["model"]["name"], "kn3");

  const auto scored = dir_ / "scored.jsonl";
  spit(scored, r.out + r.out);
  const auto k = run("kde --scored " + scored.string() + " --nx 8 --ny 6");
  ASSERT_EQ(k.status, 0);
  std::size_t lines = 0;
  for (char c : k.out) lines += c == '\n';
  EXPECT_GE(lines, 8u * 6u);
}

TEST_F(Cli, GenerateIsByteIdentical) {
  ASSERT_TRUE(trained_);
  const std::string args = "generate --model " + model_.string() + " --n 3 --len 40 --temperature 0.7 --seed 9";
  const auto a = run(args);
  const auto b = run(args);
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  std::istringstream lines(a.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["label"], "fake");
    ++n;
  }
  EXPECT_EQ(n, 3);
  EXPECT_NE(run("generate --model " + model_.string() + " --n 3 --len 40 --temperature 0.7 --seed 10").out, a.out);
}

TEST_F(Cli, ExperimentIsDeterministic) {
  ASSERT_TRUE(trained_);
  const std::string args = "experiment --corpus " + std::string(FAKESCOPE_DATA_DIR) +
                           "/sotu/heldout --model " + model_.string() +
                           " --chunk-tokens 100 --max-docs 6 --generate 6 --gen-len 100 --seed 3";
  const auto a = run(args);
  const auto b = run(args + " --threads 1");
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  ASSERT_EQ(j["table"].size(), 3u);
  EXPECT_EQ(j["real_sources"].size(), 3u);
  EXPECT_EQ(j["fake_sources"].size(), 2u);
  EXPECT_EQ(j["table"][0]["folds"].size(), 6u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("score --bogus").status, 2);
  EXPECT_EQ(run("generate --model " + model_.string() + " --temperature -1").status, 2);
  EXPECT_EQ(run("train --corpus " + (dir_ / "missing").string() + " --out " + (dir_ / "x.fsm").string()).status, 3);
  const auto bad_corpus = dir_ / "bad.jsonl";
  spit(bad_corpus, "{\"id\": 1}\n");
  EXPECT_EQ(run("experiment --corpus " + bad_corpus.string() + " --model " + model_.string()).status, 3);
  EXPECT_EQ(run("score --model " + (dir_ / "missing.fsm").string() + " --in " + bad_corpus.string()).status, 4);
  const auto corrupt = dir_ / "corrupt.fsm";
  spit(corrupt, "not a model\n");
  EXPECT_EQ(run("score --model " + corrupt.string() + " --in " + bad_corpus.string()).status, 4);
}

TEST_F(Cli, ServeMatchesScore) {
  ASSERT_TRUE(trained_);
  const int port = 20000 + ::getpid() % 20000;
  const std::string addr = "127.0.0.1:" + std::to_string(port);
  const pid_t child = ::fork();
  ASSERT_GE(child, 0);
  if (child == 0) {
    ::setenv("FAKESCOPE_ADDR", addr.c_str(), 1);
    if (std::freopen("/dev/null", "w", stderr) == nullptr) std::_Exit(126);
    ::execl(FAKESCOPE_CLI, FAKESCOPE_CLI, "serve", "--model", model_.c_str(), static_cast<char*>(nullptr));
    std::_Exit(127);
  }
  httplib::Client client("127.0.0.1", port);
  bool up = false;
  for (int i = 0; i < 200 && !up; ++i) {
    if (auto res = client.Get("/api/models"); res && res->status == 200) {
      up = true;
    } else {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
  if (up) {
    const std::string text = "We the people of the United States.";
    spit(dir_ / "serve.txt", text);
    const auto cli = run("score --model " + model_.string() + " --in " + (dir_ / "serve.txt").string());
    const nlohmann::json body = {{"text", text}};
    const auto res = client.Post("/api/analyze", body.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->body + "\n", cli.out);
    const auto models = nlohmann::json::parse(client.Get("/api/models")->body);
    EXPECT_EQ(models["models"][0]["name"], "sotu");
  }
  ::kill(child, SIGTERM);
  int status = 0;
  ::waitpid(child, &status, 0);
  EXPECT_TRUE(up) << "server did not come up on " << addr;
}
