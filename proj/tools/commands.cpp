#include "commands.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

#include "sabr/baselines.hpp"
#include "sabr/checkpoint.hpp"
#include "sabr/data.hpp"
#include "sabr/eval.hpp"
#include "sabr/io.hpp"
#include "sabr/model.hpp"
#include "sabr/optim.hpp"

namespace sabr::cli {

namespace {

std::string real_text(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct IngestOptions {
  std::string logs;
  std::string tags;
  std::string out;
  DatasetOptions dataset;
};

struct TrainOptions {
  std::string data;
  std::string model = "stabr";
  std::string checkpoint;
  std::string loss_trace;
  std::size_t epochs = 10;
  std::optional<std::size_t> batch_size;  // 32, or 20 for rnn
  std::optional<double> lr;               // 0.05, or 0.1 for rnn
  double epsilon = 1e-8;
  std::optional<double> clip_norm;
  std::uint64_t seed = 1;
  ModelConfig model_config;
  RnnConfig rnn_config;
};

struct EvaluateOptions {
  std::string data;
  std::string model = "stabr";
  std::string checkpoint;
  std::string ks = "10,20,30,40,50";
  std::string report;
  std::size_t neighbors = kSscfNeighbors;
};

struct PredictOptions {
  std::string checkpoint;
  std::size_t k = 10;
  std::string separator = "|";
  std::vector<std::string> songs;
};

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    auto t = trim(tok);
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), k);
    if (ec != std::errc() || ptr != t.data() + t.size() || k == 0) {
      throw ArgumentError("invalid k '" + std::string(t) + "' in --ks");
    }
    ks.push_back(k);
  }
  if (ks.empty()) throw ArgumentError("--ks is empty");
  return ks;
}

void with_config(CLI::App* cmd) {
  static std::string unused;
  cmd->add_option("--config", unused, "Read key=value settings (keys are long flag names without dashes)");
}

// Lines of a --config file become `--key value` pairs placed right after the
// subcommand name, ahead of the command-line flags, which therefore win.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app) {
  if (args.empty()) return args;
  const CLI::App* sub = nullptr;
  for (const auto* candidate : app.get_subcommands({})) {
    if (candidate->get_name() == args[0]) sub = candidate;
  }
  if (sub == nullptr) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  std::vector<std::string> expanded{args[0]};
  std::istringstream in(read_file(path));
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto where = path + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ArgumentError(where + ": expected key=value");
    const auto key = std::string(trim(line.substr(0, eq)));
    const auto value = std::string(trim(line.substr(eq + 1)));
    if (key.empty() || key == "config" || sub->get_option_no_throw("--" + key) == nullptr) {
      throw ArgumentError(where + ": unknown setting '" + key + "' for " + sub->get_name());
    }
    expanded.push_back("--" + key);
    expanded.push_back(value);
  }
  expanded.insert(expanded.end(), args.begin() + 1, args.end());
  return expanded;
}

// --- ingest / stats ----------------------------------------------------------

int cmd_ingest(const IngestOptions& o, std::ostream& out) {
  auto report = ingest(o.logs, o.tags, o.dataset);
  const auto& ds = report.dataset;
  write_dataset(o.out, ds);
  out << "wrote " << o.out << ": " << ds.train.size() << " train sessions, " << ds.test.size()
      << " test sessions, " << ds.vocab.songs.size() << " songs, " << ds.vocab.tags.size()
      << " tags\n";
  if (report.skipped_log_lines || report.skipped_tag_lines) {
    out << "skipped " << report.skipped_log_lines << " malformed log lines, "
        << report.skipped_tag_lines << " malformed tag lines\n";
  }
  out << format_stats_table(ds.stats);
  return kOk;
}

int cmd_stats(const IngestOptions& o, std::ostream& out) {
  auto logs = parse_logs(o.logs);
  auto tags = parse_tag_file(o.tags);
  auto sessions = sessionize(logs.interactions, o.dataset.gap_seconds, o.dataset.min_session_length);
  out << format_stats_table(compute_stats(logs.interactions, sessions, tags));
  return kOk;
}

// --- train -------------------------------------------------------------------

int cmd_train(TrainOptions o, std::ostream& out) {
  if (o.model == "pop" || o.model == "sscf") {
    throw ArgumentError("model '" + o.model + "' has no trainable parameters; run evaluate directly");
  }
  const bool rnn = o.model == "rnn";
  const auto ds = read_dataset(o.data);

  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size.value_or(rnn ? 20 : 32);
  cfg.learning_rate = o.lr.value_or(rnn ? 0.1 : 0.05);
  cfg.epsilon = o.epsilon;
  cfg.seed = o.seed;
  cfg.clip_norm = o.clip_norm;

  Checkpoint ck;
  ck.songs = ds.vocab.songs;
  ck.tags = ds.vocab.tags;
  ck.tag_table = ds.vocab.tag_table;
  ck.training = {{"epochs", std::to_string(cfg.epochs)},
                 {"batch_size", std::to_string(cfg.batch_size)},
                 {"learning_rate", real_text(cfg.learning_rate)},
                 {"epsilon", real_text(cfg.epsilon)},
                 {"seed", std::to_string(cfg.seed)},
                 {"clip_norm", cfg.clip_norm ? real_text(*cfg.clip_norm) : "none"}};

  auto log_epoch = [&](std::size_t epoch, Real mean) {
    out << "epoch " << (epoch + 1) << "/" << cfg.epochs << " loss " << mean << '\n';
  };

  // Parameters are initialized from a stream separate from the training one.
  Rng init_rng(cfg.seed ^ 0x5A5A5A5A5A5A5A5AULL);
  TrainResult result;
  if (rnn) {
    auto rc = o.rnn_config;
    rc.num_songs = ds.vocab.songs.size();
    auto params = RnnParams::init(rc, init_rng);
    const auto examples = make_examples(ds.train, rc.history);
    if (examples.empty()) throw FormatError("dataset has no training examples");
    result = train(params, std::span<const TrainingExample>(examples), cfg, log_epoch);
    ck.model = std::move(params);
  } else {
    auto mc = o.model_config;
    mc.kind = parse_model_kind(o.model);
    mc.num_songs = ds.vocab.songs.size();
    mc.num_tags = ds.vocab.tags.size();
    if (mc.uses_tags() && mc.num_tags == 0) {
      throw FormatError("dataset has no tags; stabr needs at least one tag");
    }
    auto params = ModelParams::init(mc, init_rng);
    const auto examples = make_examples(ds.train, mc.history, mc.uses_tags() ? &ds.vocab.tag_table : nullptr);
    if (examples.empty()) throw FormatError("dataset has no training examples");
    result = train(params, std::span<const TrainingExample>(examples), cfg, log_epoch);
    ck.model = std::move(params);
  }

  save_checkpoint(o.checkpoint, ck);
  std::ostringstream trace;
  trace << "epoch\tmean_loss\n";
  for (std::size_t i = 0; i < result.epoch_losses.size(); ++i) {
    trace << (i + 1) << '\t' << real_text(result.epoch_losses[i]) << '\n';
  }
  const auto trace_path = o.loss_trace.empty() ? o.checkpoint + ".loss.tsv" : o.loss_trace;
  write_file_atomic(trace_path, trace.str());
  out << "wrote " << o.checkpoint << " and " << trace_path << '\n';
  return kOk;
}

// --- evaluate ----------------------------------------------------------------

void check_vocab_matches(const Checkpoint& ck, const Dataset& ds) {
  if (!(ck.songs == ds.vocab.songs)) {
    throw CheckpointError("checkpoint song vocabulary does not match the dataset");
  }
}

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  const auto ks = parse_ks(o.ks);
  const auto ds = read_dataset(o.data);
  const auto num_songs = ds.vocab.songs.size();

  std::optional<Checkpoint> ck;
  std::unique_ptr<Recommender> rec;
  if (o.model == "pop") {
    rec = std::make_unique<PopRecommender>(build_pop(ds.train, num_songs));
  } else if (o.model == "sscf") {
    rec = std::make_unique<SscfRecommender>(build_sscf(ds.train, num_songs),
                                            build_pop(ds.train, num_songs), o.neighbors);
  } else if (o.model == "sabr" || o.model == "stabr" || o.model == "rnn") {
    if (o.checkpoint.empty()) throw ArgumentError("--checkpoint is required for model " + o.model);
    ck = load_checkpoint(o.checkpoint);
    check_vocab_matches(*ck, ds);
    if (o.model == "rnn") {
      const auto* p = std::get_if<RnnParams>(&ck->model);
      if (!p) throw CheckpointError("checkpoint does not hold an rnn model");
      rec = std::make_unique<RnnRecommender>(*p);
    } else {
      const auto* p = std::get_if<ModelParams>(&ck->model);
      if (!p || to_string(p->config.kind) != o.model) {
        throw CheckpointError("checkpoint does not hold a " + o.model + " model");
      }
      rec = std::make_unique<AttentionRecommender>(*p, ck->tag_table);
    }
  } else {
    throw ArgumentError("unknown model '" + o.model + "'");
  }

  const auto report = evaluate(*rec, ds.test, ks);
  const std::vector<EvalReport> rows{report};
  const auto table = format_report_table(rows);
  out << table;
  out << "events " << report.events << ", cold-start targets " << report.cold_start_targets
      << ", empty histories " << report.empty_histories << '\n';
  if (!o.report.empty()) {
    write_file_atomic(o.report + ".txt", table);
    write_file_atomic(o.report + ".kv", format_report_kv(report));
  }
  return kOk;
}

// --- predict -----------------------------------------------------------------

int cmd_predict(const PredictOptions& o, std::ostream& out, std::ostream& err) {
  const auto ck = load_checkpoint(o.checkpoint);
  std::vector<SongId> prefix;
  std::vector<std::string> unknown;
  for (const auto& s : o.songs) {
    const auto sep = s.find(o.separator);
    std::optional<SongId> id;
    if (sep != std::string::npos) {
      SongKey key{std::string(trim(std::string_view(s).substr(0, sep))),
                  std::string(trim(std::string_view(s).substr(sep + o.separator.size())))};
      id = ck.songs.find(key);
    }
    if (id) {
      prefix.push_back(*id);
    } else {
      unknown.push_back(s);
    }
  }
  for (const auto& u : unknown) err << "unknown song: " << u << '\n';
  if (prefix.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw ArgumentError("no known songs in the prefix (unknown: " + list + ")");
  }

  Vec log_probs;
  if (const auto* p = std::get_if<ModelParams>(&ck.model)) {
    const auto window = std::min(prefix.size(), p->config.history);
    std::span<const SongId> recent(prefix.data() + prefix.size() - window, window);
    Rng unused(0);
    const auto tags = p->config.uses_tags() ? tags_for(recent, ck.tag_table)
                                            : std::vector<std::vector<TagId>>{};
    log_probs = forward(*p, recent, tags, Mode::eval, unused).log_probs;
  } else {
    const auto& rnn_params = std::get<RnnParams>(ck.model);
    const auto window = rnn_params.config.history == 0 ? prefix.size() : std::min(prefix.size(), rnn_params.config.history);
    log_probs = rnn_forward(rnn_params, std::span<const SongId>(prefix.data() + prefix.size() - window, window)).log_probs;
  }
  const auto k = std::min(o.k, log_probs.size());
  if (k == 0) throw ArgumentError("k must be at least 1");
  const auto top = top_k_indices(log_probs, k);
  out << "rank\tprobability\tartist\ttrack\n";
  for (std::size_t i = 0; i < top.size(); ++i) {
    const auto& key = ck.songs.key(top[i]);
    out << (i + 1) << '\t' << real_text(std::exp(log_probs[top[i]])) << '\t' << key.artist << '\t'
        << key.track << '\n';
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attentive next-song recommendation: ingest, train, evaluate, predict", "sabr"};
  app.require_subcommand(1);

  IngestOptions ingest_opts;
  auto* ingest_cmd = app.add_subcommand("ingest", "Sessionize logs, split train/test, build vocabularies");
  with_config(ingest_cmd);
  ingest_cmd->add_option("--logs", ingest_opts.logs, "Listening log (user, timestamp, artist, track)")->required();
  ingest_cmd->add_option("--tags", ingest_opts.tags, "Tag file (artist, track, comma-separated tags)")->required();
  ingest_cmd->add_option("--out", ingest_opts.out, "Dataset directory to write")->required();
  ingest_cmd->add_option("--gap", ingest_opts.dataset.gap_seconds, "Idle seconds that end a session")
      ->capture_default_str();
  ingest_cmd->add_option("--min-session", ingest_opts.dataset.min_session_length, "Shortest kept session")
      ->capture_default_str();
  ingest_cmd->add_option("--train-percent", ingest_opts.dataset.train_percent,
                         "Per-user share of sessions (rounded up) used for training")
      ->capture_default_str()
      ->check(CLI::Range(0u, 100u));

  IngestOptions stats_opts;
  auto* stats_cmd = app.add_subcommand("stats", "Print corpus statistics without writing anything");
  with_config(stats_cmd);
  stats_cmd->add_option("--logs", stats_opts.logs, "Listening log")->required();
  stats_cmd->add_option("--tags", stats_opts.tags, "Tag file")->required();
  stats_cmd->add_option("--gap", stats_opts.dataset.gap_seconds, "Idle seconds that end a session")
      ->capture_default_str();
  stats_cmd->add_option("--min-session", stats_opts.dataset.min_session_length, "Shortest kept session")
      ->capture_default_str();

  TrainOptions train_opts;
  auto& mc = train_opts.model_config;
  auto* train_cmd = app.add_subcommand("train", "Train stabr, sabr or rnn and write a checkpoint");
  with_config(train_cmd);
  train_cmd->add_option("--data", train_opts.data, "Dataset directory from ingest")->required();
  train_cmd->add_option("--model", train_opts.model, "stabr | sabr | rnn")
      ->capture_default_str()
      ->check(CLI::IsMember({"stabr", "sabr", "rnn", "pop", "sscf"}));
  train_cmd->add_option("--checkpoint", train_opts.checkpoint, "Checkpoint to write")->required();
  train_cmd->add_option("--loss-trace", train_opts.loss_trace, "Per-epoch loss file (default <checkpoint>.loss.tsv)");
  train_cmd->add_option("--epochs", train_opts.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch-size", train_opts.batch_size, "Minibatch size (default 32; rnn 20)");
  train_cmd->add_option("--lr", train_opts.lr, "Adagrad learning rate (default 0.05; rnn 0.1)");
  train_cmd->add_option("--epsilon", train_opts.epsilon, "Adagrad epsilon")->capture_default_str();
  train_cmd->add_option("--clip-norm", train_opts.clip_norm, "Global gradient-norm clip (off by default)");
  train_cmd->add_option("--seed", train_opts.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--history", mc.history, "Most recent songs fed to the model (m)")->capture_default_str();
  train_cmd->add_option("--song-dim", mc.song_dim, "Song embedding width")->capture_default_str();
  train_cmd->add_option("--tag-dim", mc.tag_dim, "Tag embedding width")->capture_default_str();
  train_cmd->add_option("--song-hidden", mc.song_hidden, "Song GRU hidden size per direction")->capture_default_str();
  train_cmd->add_option("--tag-hidden", mc.tag_hidden, "Tag GRU hidden size per direction")->capture_default_str();
  train_cmd->add_option("--song-att-dim", mc.song_att_dim, "Song attention width (0 = half the state)")
      ->capture_default_str();
  train_cmd->add_option("--tag-att-dim", mc.tag_att_dim, "Tag attention width (0 = half the state)")
      ->capture_default_str();
  train_cmd->add_option("--bottleneck", mc.bottleneck, "Width of the ReLU layer before the output")
      ->capture_default_str();
  train_cmd->add_option("--dropout", mc.dropout, "Discard probability on the bottleneck and output")
      ->capture_default_str();
  train_cmd->add_option("--rnn-embedding", train_opts.rnn_config.embedding_dim, "rnn: song embedding width")
      ->capture_default_str();
  train_cmd->add_option("--rnn-hidden", train_opts.rnn_config.hidden, "rnn: GRU hidden size")->capture_default_str();
  train_cmd->add_option("--rnn-history", train_opts.rnn_config.history, "rnn: history window (0 = whole session)")
      ->capture_default_str();

  EvaluateOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "HitRatio@k over the test sessions");
  with_config(eval_cmd);
  eval_cmd->add_option("--data", eval_opts.data, "Dataset directory from ingest")->required();
  eval_cmd->add_option("--model", eval_opts.model, "stabr | sabr | rnn | pop | sscf")
      ->capture_default_str()
      ->check(CLI::IsMember({"stabr", "sabr", "rnn", "pop", "sscf"}));
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint (stabr, sabr, rnn)");
  eval_cmd->add_option("--ks", eval_opts.ks, "Comma-separated cutoffs")->capture_default_str();
  eval_cmd->add_option("--report", eval_opts.report, "Write <report>.txt and <report>.kv");
  eval_cmd->add_option("--neighbors", eval_opts.neighbors, "sscf: neighbor sessions")->capture_default_str();

  PredictOptions predict_opts;
  auto* predict_cmd = app.add_subcommand("predict", "Rank next songs for a history of 'artist|track' keys");
  with_config(predict_cmd);
  predict_cmd->add_option("--checkpoint", predict_opts.checkpoint, "Checkpoint")->required();
  predict_cmd->add_option("--k", predict_opts.k, "Songs to list")->capture_default_str();
  predict_cmd->add_option("--separator", predict_opts.separator, "Artist/track separator")->capture_default_str();
  predict_cmd->add_option("songs", predict_opts.songs, "History, oldest first")->required();

  for (auto* sub : app.get_subcommands({})) {
    for (auto* opt : sub->get_options({})) {
      if (opt->get_items_expected_max() == 1) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }

  try {
    const auto expanded = expand_config(args, app);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }

    if (*ingest_cmd) return cmd_ingest(ingest_opts, out);
    if (*stats_cmd) return cmd_stats(stats_opts, out);
    if (*train_cmd) return cmd_train(train_opts, out);
    if (*eval_cmd) return cmd_evaluate(eval_opts, out);
    if (*predict_cmd) return cmd_predict(predict_opts, out, err);
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kCheckpoint;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace sabr::cli
