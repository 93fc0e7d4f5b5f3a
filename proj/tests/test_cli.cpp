#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "sabr/checkpoint.hpp"
#include "sabr/io.hpp"
#include "support/tiny.hpp"

using namespace sabr;
using namespace sabr::testing;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("sabr_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string at(const std::string& name) const { return (dir / name).string(); }
};

// One user, ten sessions of five plays each, an hour apart. The first seven
// (train) are all "a b c d e"; the test sessions are "a b c d e", "e d c b a"
// and "a a a a f", where f never occurs in training.
void write_fixture(const Workspace& ws) {
  std::ofstream logs(ws.at("logs.tsv"));
  const std::vector<std::string> sessions{"abcde", "abcde", "abcde", "abcde", "abcde",
                                          "abcde", "abcde", "abcde", "edcba", "aaaaf"};
  for (std::size_t s = 0; s < sessions.size(); ++s)
    for (std::size_t i = 0; i < 5; ++i)
      logs << "listener\t" << 1000000 + 3600 * s + 60 * i << "\tband\t" << sessions[s][i] << '\n';
  std::ofstream(ws.at("tags.tsv")) << "band\ta\tloud\nband\tb\tloud,fast\nband\tc\tslow\nband\td\tslow\n";
}

std::vector<std::string> train_args(const Workspace& ws, const std::string& ckpt, const std::string& model = "stabr") {
  return {"train",        "--data",        ws.at("ds"), "--checkpoint", ws.at(ckpt), "--model",    model,
          "--song-dim",   "6",             "--tag-dim", "3",            "--song-hidden", "6",       "--tag-hidden",
          "3",            "--bottleneck",  "8",         "--epochs",     "60",          "--seed",    "4"};
}

}  // namespace

TEST_CASE("ingest reports statistics and is reproducible") {
  Workspace ws("ingest");
  // Ten lines: u1 plays six songs within half an hour, u2 only four.
  std::ofstream(ws.at("logs.tsv")) << "u1\t100\tA\tone\nu1\t160\tA\ttwo\nu1\t220\tB\tthree\nu1\t280\tA\tone\n"
                                      "u1\t340\tB\tfour\nu1\t400\tC\tfive\n"
                                      "u2\t100\tA\tone\nu2\t200\tA\ttwo\nu2\t300\tA\tthree\nu2\t400\tA\tfour\n";
  std::ofstream(ws.at("tags.tsv")) << "A\tone\trock\nB\tthree\trock,Pop\nZ\tnone\tjazz\n";
  auto r = run_cli({"ingest", "--logs", ws.at("logs.tsv"), "--tags", ws.at("tags.tsv"), "--out", ws.at("ds")});
  REQUIRE(r.code == 0);
  const auto stats = read_file(ws.dir / "ds" / "stats.txt");
  CHECK(stats ==
        "total_logs=10\ntotal_users=2\ntotal_sessions=1\nunique_songs=5\nunique_tags=2\n"
        "avg_songs_per_session=6\navg_logs_per_user=5\n");
  CHECK(r.out.find("Average Songs Per Session") != std::string::npos);

  REQUIRE(run_cli({"ingest", "--logs", ws.at("logs.tsv"), "--tags", ws.at("tags.tsv"), "--out", ws.at("ds2")}).code == 0);
  for (const auto& entry : fs::directory_iterator(ws.dir / "ds"))
    CHECK(read_file(entry.path()) == read_file(ws.dir / "ds2" / entry.path().filename()));

  auto missing = run_cli({"ingest", "--logs", ws.at("logs.tsv"), "--tags", ws.at("nope.tsv"), "--out", ws.at("ds3")});
  CHECK(missing.code == 2);
  CHECK(missing.err.find(ws.at("nope.tsv")) != std::string::npos);
  CHECK_FALSE(fs::exists(ws.dir / "ds3"));

  auto stats_cmd = run_cli({"stats", "--logs", ws.at("logs.tsv"), "--tags", ws.at("tags.tsv")});
  CHECK(stats_cmd.code == 0);
  CHECK(stats_cmd.out.find("Total Sessions") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({"train", "--data"}).code == 1);
  CHECK(run_cli({"train", "--help"}).code == 0);
  Workspace ws("config");
  write_fixture(ws);
  REQUIRE(run_cli({"ingest", "--logs", ws.at("logs.tsv"), "--tags", ws.at("tags.tsv"), "--out", ws.at("ds")}).code == 0);
  std::ofstream(ws.at("bad.conf")) << "epochs=2\nlearning_rat=0.1\n";
  auto bad = run_cli({"train", "--config", ws.at("bad.conf"), "--data", ws.at("ds"), "--checkpoint", ws.at("m.ckpt")});
  CHECK(bad.code == 1);
  CHECK_FALSE(fs::exists(ws.dir / "m.ckpt"));
  std::ofstream(ws.at("good.conf")) << "epochs=2\nlr=0.1\nsong-dim=4\ntag-dim=2\nsong-hidden=4\ntag-hidden=2\nbottleneck=4\n";
  CHECK(run_cli({"train", "--config", ws.at("good.conf"), "--data", ws.at("ds"), "--checkpoint", ws.at("m.ckpt")}).code == 0);
  auto ck = load_checkpoint(ws.at("m.ckpt"));
  CHECK(ck.training.at("epochs") == "2");
  CHECK(std::get<ModelParams>(ck.model).config.song_dim == 4);
  CHECK(run_cli({"train", "--data", ws.at("ds"), "--checkpoint", ws.at("p.ckpt"), "--model", "pop"}).code == 1);
  CHECK(run_cli({"train", "--data", ws.at("missing"), "--checkpoint", ws.at("p.ckpt")}).code == 2);
}

TEST_CASE("train, evaluate and predict") {
  Workspace ws("pipeline");
  write_fixture(ws);
  REQUIRE(run_cli({"ingest", "--logs", ws.at("logs.tsv"), "--tags", ws.at("tags.tsv"), "--out", ws.at("ds")}).code == 0);

  SUBCASE("training is deterministic and lowers the loss") {
    REQUIRE(run_cli(train_args(ws, "a.ckpt")).code == 0);
    REQUIRE(run_cli(train_args(ws, "b.ckpt")).code == 0);
    CHECK(read_file(ws.at("a.ckpt")) == read_file(ws.at("b.ckpt")));
    CHECK(read_file(ws.at("a.ckpt.loss.tsv")) == read_file(ws.at("b.ckpt.loss.tsv")));
    std::istringstream trace(read_file(ws.at("a.ckpt.loss.tsv")));
    std::string header;
    std::getline(trace, header);
    CHECK(header == "epoch\tmean_loss");
    std::vector<double> losses;
    for (std::size_t e; trace >> e;) losses.emplace_back(), trace >> losses.back();
    REQUIRE(losses.size() == 60);
    CHECK(losses.back() < losses.front());
  }

  SUBCASE("zero learning rate keeps the initial parameters") {
    auto zero_lr = train_args(ws, "lr0.ckpt");
    zero_lr.insert(zero_lr.end(), {"--lr", "0", "--epochs", "3"});
    auto no_epochs = train_args(ws, "e0.ckpt");
    no_epochs.insert(no_epochs.end(), {"--epochs", "0"});
    REQUIRE(run_cli(zero_lr).code == 0);
    REQUIRE(run_cli(no_epochs).code == 0);
    auto a = load_checkpoint(ws.at("lr0.ckpt"));
    auto b = load_checkpoint(ws.at("e0.ckpt"));
    auto ta = named_tensors(std::get<ModelParams>(a.model));
    auto tb = named_tensors(std::get<ModelParams>(b.model));
    for (std::size_t t = 0; t < ta.size(); ++t) CHECK(*ta[t].second == *tb[t].second);
  }

  SUBCASE("POP evaluation matches a hand count") {
    // POP order a, b, c, d, e (seven plays each, index tie-break). Twelve
    // events; @1 hits: target a once in "edcba" and three times in "aaaaf";
    // @2 adds b in "abcde" and b in "edcba".
    auto r = run_cli({"evaluate", "--data", ws.at("ds"), "--model", "pop", "--ks", "1,2", "--report", ws.at("pop")});
    REQUIRE(r.code == 0);
    const auto kv = read_file(ws.at("pop.kv"));
    CHECK(kv.find("events=12\n") != std::string::npos);
    CHECK(kv.find("cold_start_targets=1\n") != std::string::npos);
    CHECK(kv.find("hits@1=4\n") != std::string::npos);
    CHECK(kv.find("hits@2=6\n") != std::string::npos);
    CHECK(kv.find("ks=1,2\n") != std::string::npos);
    const auto table = read_file(ws.at("pop.txt"));
    CHECK(table.find("k=1") != std::string::npos);
    CHECK(table.find("k=2") != std::string::npos);
    CHECK(table.find("k=10") == std::string::npos);
  }

  SUBCASE("evaluation of trained models and checkpoint errors") {
    REQUIRE(run_cli(train_args(ws, "m.ckpt")).code == 0);
    auto ok = run_cli({"evaluate", "--data", ws.at("ds"), "--model", "stabr", "--checkpoint", ws.at("m.ckpt"), "--ks", "1,5"});
    CHECK(ok.code == 0);
    CHECK(run_cli({"evaluate", "--data", ws.at("ds"), "--model", "sabr", "--checkpoint", ws.at("m.ckpt")}).code == 3);
    CHECK(run_cli({"evaluate", "--data", ws.at("ds"), "--model", "stabr"}).code == 1);
    auto bytes = read_file(ws.at("m.ckpt"));
    bytes[0] = 'Z';
    write_file_atomic(ws.at("bad.ckpt"), bytes);
    auto bad = run_cli({"evaluate", "--data", ws.at("ds"), "--model", "stabr", "--checkpoint", ws.at("bad.ckpt")});
    CHECK(bad.code == 3);
    CHECK(run_cli({"predict", "--checkpoint", ws.at("bad.ckpt"), "band|a"}).code == 3);
  }

  SUBCASE("predict") {
    auto args = train_args(ws, "m.ckpt", "sabr");
    args.insert(args.end(), {"--epochs", "150"});
    REQUIRE(run_cli(args).code == 0);
    auto top1 = run_cli({"predict", "--checkpoint", ws.at("m.ckpt"), "--k", "1", "band|a"});
    REQUIRE(top1.code == 0);
    std::istringstream lines(top1.out);
    std::string header, rank, prob, artist, track;
    std::getline(lines, header);
    CHECK(header == "rank\tprobability\tartist\ttrack");
    std::getline(lines, rank, '\t');
    std::getline(lines, prob, '\t');
    std::getline(lines, artist, '\t');
    std::getline(lines, track);
    CHECK(track == "b");
    CHECK(std::stod(prob) > 0.9);

    auto all = run_cli({"predict", "--checkpoint", ws.at("m.ckpt"), "--k", "100", "band|c", "band|zzz"});
    REQUIRE(all.code == 0);
    CHECK(all.err.find("band|zzz") != std::string::npos);
    std::istringstream rows(all.out);
    std::getline(rows, header);
    double sum = 0;
    std::size_t count = 0;
    for (std::string line; std::getline(rows, line); ++count) {
      std::istringstream f(line);
      std::getline(f, rank, '\t');
      std::getline(f, prob, '\t');
      sum += std::stod(prob);
    }
    CHECK(count == 5);
    CHECK(std::abs(sum - 1.0) < 1e-6);

    auto unknown = run_cli({"predict", "--checkpoint", ws.at("m.ckpt"), "band|x", "nosuchsong"});
    CHECK(unknown.code == 1);
    CHECK(unknown.err.find("band|x") != std::string::npos);
    CHECK(unknown.err.find("nosuchsong") != std::string::npos);
  }

  SUBCASE("rnn baseline through the command line") {
    REQUIRE(run_cli({"train", "--data", ws.at("ds"), "--checkpoint", ws.at("r.ckpt"), "--model", "rnn", "--epochs", "5",
                     "--rnn-embedding", "4", "--rnn-hidden", "6"}).code == 0);
    CHECK(run_cli({"evaluate", "--data", ws.at("ds"), "--model", "rnn", "--checkpoint", ws.at("r.ckpt")}).code == 0);
    CHECK(run_cli({"evaluate", "--data", ws.at("ds"), "--model", "stabr", "--checkpoint", ws.at("r.ckpt")}).code == 3);
    CHECK(run_cli({"predict", "--checkpoint", ws.at("r.ckpt"), "band|a"}).code == 0);
  }
}
