#include "ssml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "ssml/error.hpp"
#include "ssml/loss.hpp"
#include "ssml/parallel.hpp"
#include "ssml/similarity.hpp"
#include "ssml/synthdata.hpp"

namespace ssml {
namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& range) {
  throw Error(ErrorCode::kInvalidArgument, field + " must be " + range);
}

struct SampleStep {
  ForwardCache forward;
  MiningResult mining;
  LossValue loss;
  Gradients grads;
};

EpochReport make_report(int epoch, const EmbeddingModel& model, const FeatureMatrix& inputs,
                        std::span<const IdentityId> identities, double query_fraction,
                        unsigned threads) {
  EpochReport row;
  row.epoch = epoch;
  row.retrieval = evaluate_model(model, inputs, identities, query_fraction, threads);
  return row;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  return kind == LossKind::kDtl ? "dtl" : "triplet";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "dtl") return LossKind::kDtl;
  if (name == "triplet" || name == "general_triplet") return LossKind::kTriplet;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown loss kind '" + std::string(name) + "' (expected dtl or triplet)");
}

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.epochs = 30;
  c.batch_size = 64;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 0) invalid("epochs", "nonnegative");
  if (batch_size == 0) invalid("batch_size", "at least 1");
  if (!(tau > 0.0f && tau <= 1.0f)) invalid("tau", "in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) invalid("gamma", "in (0, 1]");
  if (!(sigma > 0.0 && sigma <= 1.0)) invalid("sigma", "in (0, 1]");
  if (!(margin >= 0.0) || !std::isfinite(margin)) invalid("margin", "finite and >= 0");
  if (warmup_epochs < 1) invalid("warmup_epochs", "at least 1");
  if (reinit_interval < 1) invalid("reinit_interval", "at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) invalid("learning_rate", "positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) invalid("lr_decay", "in (0, 1]");
  if (lr_step_epochs < 1) invalid("lr_step_epochs", "at least 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) invalid("momentum", "in [0, 1)");
  if (output_dim < 2) invalid("output_dim", "at least 2");
  if (!(query_fraction > 0.0 && query_fraction < 1.0)) invalid("query_fraction", "in (0, 1)");
}

RetrievalMetrics evaluate_model(const EmbeddingModel& model, const FeatureMatrix& inputs,
                                std::span<const IdentityId> identities,
                                double query_fraction, unsigned threads) {
  const FeatureMatrix embedded = model.embed(inputs, threads);
  const EvalSplit split = split_query_gallery(identities, query_fraction);
  std::vector<IdentityId> query_ids;
  std::vector<IdentityId> gallery_ids;
  for (const Label i : split.query) query_ids.push_back(identities[i]);
  for (const Label i : split.gallery) gallery_ids.push_back(identities[i]);
  return cmc_map(embedded.select_rows(split.query), query_ids,
                 embedded.select_rows(split.gallery), gallery_ids, threads);
}

TrainResult train(const TrainConfig& config, const FeatureMatrix& inputs,
                  std::span<const IdentityId> identities, const TrainObserver& observer) {
  config.validate();
  if (inputs.empty()) throw Error(ErrorCode::kInvalidArgument, "no training samples");
  if (!identities.empty() && identities.size() != inputs.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "got " + std::to_string(identities.size()) + " identities for " +
                    std::to_string(inputs.rows()) + " samples");
  }
  const unsigned threads = resolve_threads(config.threads);
  const std::size_t n = inputs.rows();
  const bool with_eval = !identities.empty();

  EmbeddingConfig model_config;
  model_config.input_dim = inputs.dim();
  model_config.output_dim = config.output_dim;
  model_config.hidden_dim = config.hidden_dim;
  model_config.learning_rate = config.learning_rate;
  model_config.momentum = config.momentum;
  model_config.seed = config.seed;

  TrainResult result;
  result.model = EmbeddingModel::initialize(model_config);
  EmbeddingModel& model = result.model;
  if (with_eval) {
    result.initial = make_report(-1, model, inputs, identities, config.query_fraction, threads);
  }
  if (config.epochs == 0) return result;

  std::mt19937_64 shuffle_rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  std::vector<Label> order(n);
  std::iota(order.begin(), order.end(), Label{0});

  Dictionary dict(model.embed(inputs, threads), 0);
  std::int64_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    model.set_learning_rate(
        lr_schedule(epoch, config.learning_rate, config.lr_decay, config.lr_step_epochs));
    if (epoch % config.reinit_interval == 0) {
      dict.reinit(model.embed(inputs, threads), epoch);
    }
    SimilarityMatrix sim = similarity_matrix(dict, config.tau, threads);
    const bool warmup = epoch < config.warmup_epochs;

    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<MiningResult> epoch_mining(n);
    double epoch_loss = 0.0;

    const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::span<const Label> batch(order.data() + begin, end - begin);

      const Miner miner(dict, sim, config.tau);
      std::vector<SampleStep> steps(batch.size());
      parallel_for(batch.size(), threads, [&](std::size_t s) {
        const Label i = batch[s];
        SampleStep& st = steps[s];
        st.forward = model.forward(inputs.row(i));
        st.mining = warmup ? miner.self_positive(i, config.gamma)
                           : miner.mine(i, config.gamma, config.mining_kind);
        if (st.mining.p_pos.empty()) st.mining.p_pos = {i};
        st.loss = config.loss_kind == LossKind::kDtl
                      ? dtl(st.forward.output, dict, st.mining.p_pos, st.mining.n_hard,
                            config.sigma)
                      : dictionary_triplet(st.forward.output, dict, st.mining.p_pos,
                                           st.mining.n_hard, config.margin);
        st.grads = model.backward(st.forward, st.loss.grad_wrt_probe);
      });

      // Fixed-order reduction keeps results independent of the thread count.
      Gradients total = model.zero_gradients();
      double loss = 0.0;
      double pos_term = 0.0;
      double neg_term = 0.0;
      for (const SampleStep& st : steps) {
        accumulate(total, st.grads);
        loss += st.loss.total;
        pos_term += st.loss.positive_term;
        neg_term += st.loss.negative_term;
      }
      model.sgd_step(total);

      // Dictionary moves only after the step, using the pre-step features.
      for (std::size_t s = 0; s < batch.size(); ++s) {
        dict.update(batch[s], std::span<const double>(steps[s].forward.output), ++step);
      }
      patch_similarity(sim, dict, batch, threads);

      epoch_loss += loss;
      std::vector<MiningResult> batch_mining;
      batch_mining.reserve(steps.size());
      for (SampleStep& st : steps) {
        epoch_mining[st.mining.probe] = st.mining;
        if (observer.on_mined) batch_mining.push_back(std::move(st.mining));
      }
      if (observer.on_mined) {
        observer.on_mined(epoch, static_cast<int>(b), batch_mining);
      }
      if (observer.on_log) {
        char line[192];
        std::snprintf(line, sizeof line,
                      "epoch=%d batch=%zu loss=%.6f pos_term=%.6f neg_term=%.6f", epoch, b,
                      loss, pos_term, neg_term);
        observer.on_log(line);
      }
    }

    if (with_eval) {
      EpochReport row =
          make_report(epoch, model, inputs, identities, config.query_fraction, threads);
      row.loss = epoch_loss;
      // Warm-up positives are the probe itself, which quality never counts.
      row.mining = mining_quality(epoch_mining, identities);
      for (std::size_t k = 0; k < kAllMiningKinds.size(); ++k) {
        row.by_kind[k] = warmup ? MiningQuality{}
                                : mining_quality(epoch_mining, identities, kAllMiningKinds[k]);
      }
      if (observer.on_epoch) observer.on_epoch(row);
      result.reports.push_back(std::move(row));
    }
    if (observer.on_checkpoint && (epoch + 1) % config.reinit_interval == 0) {
      observer.on_checkpoint(epoch, model);
    }
  }
  return result;
}

std::vector<AblationRow> ablation_run(const TrainConfig& base,
                                      std::span<const AblationCell> grid,
                                      const FeatureMatrix& inputs,
                                      std::span<const IdentityId> identities) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "ablation grid is empty");
  if (identities.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "ablation needs ground-truth identities");
  }
  std::vector<AblationRow> rows;
  for (const AblationCell& cell : grid) {
    TrainConfig config = base;
    config.loss_kind = cell.loss;
    config.mining_kind = cell.mining;
    const TrainResult run = train(config, inputs, identities);
    const RetrievalMetrics& m =
        run.reports.empty() ? run.initial->retrieval : run.reports.back().retrieval;
    rows.push_back({cell, m.rank(1), m.rank(5), m.map});
  }
  return rows;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "loss,mining,rank1,rank5,map\n";
  for (const AblationRow& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%s,%.6f,%.6f,%.6f\n",
                  std::string(to_string(r.cell.loss)).c_str(),
                  std::string(to_string(r.cell.mining)).c_str(), r.rank1, r.rank5, r.map);
    out << line;
  }
}

}  // namespace ssml
