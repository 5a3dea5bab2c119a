#include "ssml/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "ssml/dplm.hpp"
#include "ssml/embedding.hpp"
#include "ssml/error.hpp"
#include "ssml/eval.hpp"
#include "ssml/feature_io.hpp"
#include "ssml/similarity.hpp"
#include "ssml/synthdata.hpp"
#include "ssml/trainer.hpp"

namespace ssml::cli {
namespace {

// Thrown for bad flag values discovered after parsing (exit code 1).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

CLI::Validator open_interval(double lo, double hi, bool closed_hi) {
  std::ostringstream desc;
  desc << "in (" << lo << ", " << hi << (closed_hi ? "]" : ")");
  const std::string range = desc.str();
  return CLI::Validator(
      [lo, hi, closed_hi, range](std::string& input) -> std::string {
        double v = 0.0;
        if (!CLI::detail::lexical_cast(input, v)) return "value " + input + " is not a number";
        const bool ok = v > lo && (closed_hi ? v <= hi : v < hi);
        return ok ? std::string() : "value " + input + " not " + range;
      },
      range, "open_interval");
}

const CLI::Validator kUnit = open_interval(0.0, 1.0, true);
const CLI::Validator kUnitOpen = open_interval(0.0, 1.0, false);

// Reads `key=value` lines ('#' comments, blank lines ignored) into
// `--key=value` arguments.
std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("--config: cannot open " + path);
  std::vector<std::string> args;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("--config: line " + std::to_string(line_no) +
                            " is not key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

// Config entries go right after the subcommand name so any flag given on the
// command line comes later and wins (options take the last value).
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config || args.size() < 2) return args;
  // Keys also given on the command line are dropped here: every occurrence
  // would otherwise be validated, including the overridden one.
  auto key_of = [](const std::string& a) { return a.substr(0, a.find('=')); };
  std::set<std::string> given;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i].rfind("--", 0) == 0) given.insert(key_of(args[i]));
  }
  std::vector<std::string> expanded{args[0], args[1]};
  for (auto& a : config_arguments(*config)) {
    if (!given.contains(key_of(a))) expanded.push_back(std::move(a));
  }
  for (std::size_t i = 2; i < args.size(); ++i) expanded.push_back(args[i]);
  return expanded;
}

struct GenOptions {
  SynthSpec spec;
  std::string output;
};

struct TrainOptions {
  TrainConfig config;
  std::string loss = "dtl";
  std::string mining = "pos";
  std::string features;
  std::string labels;
  std::string checkpoint;
  std::string report;
  bool quiet = false;
};

struct MineOptions {
  std::string checkpoint;
  std::string features;
  std::string output;
  std::string kind = "pos";
  float tau = 0.6f;
  double gamma = 0.01;
  unsigned threads = 0;
};

struct EvalOptions {
  std::string checkpoint;
  std::string features;
  std::string labels;
  std::string output;
  float tau = 0.6f;
  double gamma = 0.01;
  double query_fraction = 0.25;
  int epoch = 0;
  unsigned threads = 0;
};

struct AblateOptions {
  TrainOptions train;
  std::string losses = "dtl,triplet";
  std::string minings = "ps,rank,adj,pos";
  std::string output;
};

void add_train_flags(CLI::App& sub, TrainOptions& o) {
  TrainConfig& c = o.config;
  sub.add_option("--features", o.features, "training inputs (feature file)")->required();
  sub.add_option("--labels", o.labels, "ground-truth label file, used for evaluation only");
  sub.add_option("--epochs", c.epochs, "training epochs")->check(CLI::NonNegativeNumber);
  sub.add_option("--batch", c.batch_size, "batch size")->check(CLI::PositiveNumber);
  sub.add_option("--tau", c.tau, "similarity threshold for positive candidates")->check(kUnit);
  sub.add_option("--gamma", c.gamma, "hard-negative fraction")->check(kUnit);
  sub.add_option("--sigma", c.sigma, "weight of the negative loss term")->check(kUnit);
  sub.add_option("--margin", c.margin, "margin of the triplet loss")->check(CLI::NonNegativeNumber);
  sub.add_option("--warmup", c.warmup_epochs, "epochs using self-positives before mining")
      ->check(CLI::PositiveNumber);
  sub.add_option("--reinit", c.reinit_interval, "dictionary re-initialization interval (epochs)")
      ->check(CLI::PositiveNumber);
  sub.add_option("--lr", c.learning_rate, "initial learning rate")->check(CLI::PositiveNumber);
  sub.add_option("--lr-decay", c.lr_decay, "learning-rate decay factor")->check(kUnit);
  sub.add_option("--lr-step", c.lr_step_epochs, "epochs between learning-rate decays")
      ->check(CLI::PositiveNumber);
  sub.add_option("--momentum", c.momentum, "SGD momentum")->check(CLI::Range(0.0, 0.999999));
  sub.add_option("--dout", c.output_dim, "embedding dimension")->check(CLI::Range(2, 1 << 16));
  sub.add_option("--hidden", c.hidden_dim, "hidden width (0 = affine map)");
  sub.add_option("--seed", c.seed, "random seed");
  sub.add_option("--loss", o.loss, "loss: dtl or triplet")
      ->check(CLI::IsMember({"dtl", "triplet"}));
  sub.add_option("--mining", o.mining, "positive set: ps, rank, adj or pos")
      ->check(CLI::IsMember({"ps", "rank", "adj", "pos"}));
  sub.add_option("--query-fraction", c.query_fraction, "query share of each identity")
      ->check(kUnitOpen);
  sub.add_option("--threads", c.threads, "worker threads (0 = hardware concurrency)");
  sub.add_flag("--quiet", o.quiet, "suppress per-batch log lines");
}

void finish_train_options(TrainOptions& o) {
  o.config.loss_kind = parse_loss_kind(o.loss);
  o.config.mining_kind = parse_mining_kind(o.mining);
  try {
    o.config.validate();
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
}

std::vector<IdentityId> maybe_labels(const std::string& path, std::size_t rows) {
  if (path.empty()) return {};
  auto ids = read_labels(path);
  if (ids.size() != rows) {
    throw Error(ErrorCode::kDimensionMismatch,
                "label file has " + std::to_string(ids.size()) + " entries for " +
                    std::to_string(rows) + " samples");
  }
  return ids;
}

int do_gen(const GenOptions& o, std::ostream& out) {
  const SynthCorpus corpus = generate(o.spec);
  const std::string features = o.output + ".features";
  const std::string labels = o.output + ".labels";
  write_features(features, corpus.features);
  write_labels(labels, corpus.identities);
  out << "wrote " << features << " (" << corpus.features.rows() << "x"
      << corpus.features.dim() << ") and " << labels << "\n";
  return kExitOk;
}

int do_train(TrainOptions& o, std::ostream& out, std::ostream& err) {
  finish_train_options(o);
  const FeatureMatrix inputs = read_features(o.features);
  const auto ids = maybe_labels(o.labels, inputs.rows());

  TrainObserver observer;
  if (!o.quiet) observer.on_log = [&err](const std::string& line) { err << line << "\n"; };
  if (!o.checkpoint.empty()) {
    observer.on_checkpoint = [&](int, const EmbeddingModel& model) {
      save_checkpoint(o.checkpoint, model);
    };
  }
  const TrainResult result = train(o.config, inputs, ids, observer);
  if (!o.checkpoint.empty()) save_checkpoint(o.checkpoint, result.model);

  if (!ids.empty()) {
    if (o.report.empty()) {
      write_report_csv(out, result.reports);
    } else {
      std::ofstream csv(o.report);
      if (!csv) throw Error(ErrorCode::kIo, "cannot open " + o.report);
      write_report_csv(csv, result.reports);
    }
  }
  return kExitOk;
}

FeatureMatrix embed_with_checkpoint(const std::string& checkpoint, const FeatureMatrix& inputs,
                                    unsigned threads) {
  if (checkpoint.empty()) return normalize_rows(inputs);
  const EmbeddingModel model = load_checkpoint(checkpoint);
  return model.embed(inputs, threads);
}

void write_label_list(std::ostream& out, std::span<const Label> labels) {
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (r) out << ',';
    out << labels[r];
  }
}

int do_mine(const MineOptions& o, std::ostream& out) {
  const MiningKind kind = parse_mining_kind(o.kind);
  const FeatureMatrix inputs = read_features(o.features);
  const Dictionary dict(embed_with_checkpoint(o.checkpoint, inputs, o.threads));
  const SimilarityMatrix sim = similarity_matrix(dict, o.tau, o.threads);
  const Miner miner(dict, sim, o.tau);

  std::ofstream file;
  std::ostream* sink = &out;
  if (!o.output.empty()) {
    file.open(o.output);
    if (!file) throw Error(ErrorCode::kIo, "cannot open " + o.output);
    sink = &file;
  }
  for (std::size_t i = 0; i < dict.size(); ++i) {
    const MiningResult r = miner.mine(static_cast<Label>(i), o.gamma, kind);
    *sink << r.probe << "\tP+:";
    write_label_list(*sink, r.p_pos);
    *sink << "\tNhard:";
    write_label_list(*sink, r.n_hard);
    *sink << '\n';
  }
  return kExitOk;
}

int do_eval(const EvalOptions& o, std::ostream& out) {
  const FeatureMatrix inputs = read_features(o.features);
  const auto ids = read_labels(o.labels);
  if (ids.size() != inputs.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "label count differs from feature rows");
  }
  const FeatureMatrix embedded = embed_with_checkpoint(o.checkpoint, inputs, o.threads);

  const EvalSplit split = split_query_gallery(ids, o.query_fraction);
  std::vector<IdentityId> query_ids;
  std::vector<IdentityId> gallery_ids;
  for (const Label i : split.query) query_ids.push_back(ids[i]);
  for (const Label i : split.gallery) gallery_ids.push_back(ids[i]);

  EpochReport row;
  row.epoch = o.epoch;
  row.retrieval = cmc_map(embedded.select_rows(split.query), query_ids,
                          embedded.select_rows(split.gallery), gallery_ids, o.threads);

  const Dictionary dict(embedded);
  const SimilarityMatrix sim = similarity_matrix(dict, o.tau, o.threads);
  const Miner miner(dict, sim, o.tau);
  std::vector<MiningResult> mined(dict.size());
  for (std::size_t i = 0; i < dict.size(); ++i) {
    mined[i] = miner.mine(static_cast<Label>(i), o.gamma);
  }
  row.mining = mining_quality(mined, ids);

  std::ofstream file;
  std::ostream* sink = &out;
  if (!o.output.empty()) {
    file.open(o.output);
    if (!file) throw Error(ErrorCode::kIo, "cannot open " + o.output);
    sink = &file;
  }
  write_report_header(*sink);
  write_report_row(*sink, row);
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

int do_ablate(AblateOptions& o, std::ostream& out) {
  finish_train_options(o.train);
  std::vector<AblationCell> grid;
  try {
    for (const auto& loss : split_list(o.losses)) {
      for (const auto& mining : split_list(o.minings)) {
        grid.push_back({parse_loss_kind(loss), parse_mining_kind(mining)});
      }
    }
  } catch (const Error& e) {
    throw ValidationError(std::string("--losses/--minings: ") + e.what());
  }
  if (grid.empty()) throw ValidationError("--losses/--minings: empty grid");
  if (o.train.labels.empty()) throw ValidationError("--labels is required for ablate");

  const FeatureMatrix inputs = read_features(o.train.features);
  const auto ids = maybe_labels(o.train.labels, inputs.rows());
  const auto rows = ablation_run(o.train.config, grid, inputs, ids);
  if (o.output.empty()) {
    write_ablation_csv(out, rows);
  } else {
    std::ofstream csv(o.output);
    if (!csv) throw Error(ErrorCode::kIo, "cannot open " + o.output);
    write_ablation_csv(csv, rows);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised metric learning with a feature dictionary", "ssml"};
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic identity-clustered corpus");
  gen_cmd->add_option("--identities", gen.spec.num_identities, "number of identities")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--per-id", gen.spec.samples_per_identity, "samples per identity")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--din", gen.spec.input_dim, "input dimension")->check(CLI::Range(2, 1 << 16));
  gen_cmd->add_option("--noise", gen.spec.intra_noise, "per-coordinate jitter std")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seed", gen.spec.seed, "random seed");
  gen_cmd->add_option("-o,--output", gen.output, "output prefix (.features/.labels)")->required();

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train the embedding with mined labels");
  add_train_flags(*train_cmd, train_opts);
  train_cmd->add_option("--checkpoint", train_opts.checkpoint, "model checkpoint output");
  train_cmd->add_option("--report", train_opts.report, "per-epoch CSV report (default stdout)");

  MineOptions mine_opts;
  auto* mine_cmd = app.add_subcommand("mine", "dump mined positive and hard-negative labels");
  mine_cmd->add_option("--checkpoint", mine_opts.checkpoint, "model checkpoint (omit: raw features)");
  mine_cmd->add_option("--features", mine_opts.features, "feature file")->required();
  mine_cmd->add_option("--tau", mine_opts.tau, "similarity threshold")->check(kUnit);
  mine_cmd->add_option("--gamma", mine_opts.gamma, "hard-negative fraction")->check(kUnit);
  mine_cmd->add_option("--kind", mine_opts.kind, "positive set: ps, rank, adj or pos")
      ->check(CLI::IsMember({"ps", "rank", "adj", "pos"}));
  mine_cmd->add_option("-o,--output", mine_opts.output, "output file (default stdout)");
  mine_cmd->add_option("--threads", mine_opts.threads, "worker threads (0 = hardware concurrency)");

  EvalOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "CMC / mAP and mining quality of a model");
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "model checkpoint (omit: raw features)");
  eval_cmd->add_option("--features", eval_opts.features, "feature file")->required();
  eval_cmd->add_option("--labels", eval_opts.labels, "ground-truth label file")->required();
  eval_cmd->add_option("--tau", eval_opts.tau, "similarity threshold for mining")->check(kUnit);
  eval_cmd->add_option("--gamma", eval_opts.gamma, "hard-negative fraction")->check(kUnit);
  eval_cmd->add_option("--query-fraction", eval_opts.query_fraction, "query share of each identity")
      ->check(kUnitOpen);
  eval_cmd->add_option("--epoch", eval_opts.epoch, "value written to the epoch column");
  eval_cmd->add_option("-o,--output", eval_opts.output, "CSV output (default stdout)");
  eval_cmd->add_option("--threads", eval_opts.threads, "worker threads (0 = hardware concurrency)");

  AblateOptions ablate_opts;
  auto* ablate_cmd = app.add_subcommand("ablate", "loss x positive-set ablation grid");
  add_train_flags(*ablate_cmd, ablate_opts.train);
  ablate_cmd->add_option("--losses", ablate_opts.losses, "comma-separated losses");
  ablate_cmd->add_option("--minings", ablate_opts.minings, "comma-separated positive sets");
  ablate_cmd->add_option("-o,--output", ablate_opts.output, "CSV output (default stdout)");

  std::string config_path;
  for (auto* sub : {gen_cmd, train_cmd, mine_cmd, eval_cmd, ablate_cmd}) {
    sub->add_option("--config", config_path,
                    "key=value file; command-line flags take precedence");
  }

  try {
    const std::vector<std::string> args = expand_config(raw_args);
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    if (args.empty()) argv.push_back("ssml");
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (gen_cmd->parsed()) return do_gen(gen, out);
    if (train_cmd->parsed()) return do_train(train_opts, out, err);
    if (mine_cmd->parsed()) return do_mine(mine_opts, out);
    if (eval_cmd->parsed()) return do_eval(eval_opts, out);
    if (ablate_cmd->parsed()) return do_ablate(ablate_opts, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace ssml::cli
