#ifndef SSML_TRAINER_HPP
#define SSML_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssml/dplm.hpp"
#include "ssml/embedding.hpp"
#include "ssml/eval.hpp"
#include "ssml/featurestore.hpp"

namespace ssml {

enum class LossKind { kDtl, kTriplet };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct TrainConfig {
  int epochs = 60;
  std::size_t batch_size = 256;
  float tau = 0.6f;
  double gamma = 0.01;
  double sigma = 0.2;
  double margin = 0.3;  // margin triplet loss only
  int warmup_epochs = 5;
  int reinit_interval = 5;
  double learning_rate = 0.01;
  double lr_decay = 0.1;
  int lr_step_epochs = 10;
  double momentum = 0.9;
  std::size_t output_dim = 16;
  std::size_t hidden_dim = 0;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::kDtl;
  MiningKind mining_kind = MiningKind::kIntersection;
  unsigned threads = 0;
  double query_fraction = 0.25;

  /// Defaults used for the 1000-sample synthetic corpora: 30 epochs, batch 64.
  static TrainConfig desk_scale();

  /// Throws Error(kInvalidArgument) naming the first out-of-range field.
  void validate() const;
};

/// Optional hooks into the training loop. Unset members are skipped.
struct TrainObserver {
  std::function<void(const std::string& line)> on_log;
  std::function<void(int epoch, int batch, std::span<const MiningResult>)> on_mined;
  std::function<void(int epoch, const EmbeddingModel&)> on_checkpoint;
  std::function<void(const EpochReport&)> on_epoch;
};

struct TrainResult {
  EmbeddingModel model;
  EvalReport reports;                   // one row per epoch, when labels exist
  std::optional<EpochReport> initial;   // the untrained model, when labels exist
};

/// Self-supervised training on `inputs` (one row per sample, index labels).
/// `identities` may be empty; when present it is used only for evaluation on
/// a query/gallery split of the same samples, never for mining or loss.
TrainResult train(const TrainConfig& config, const FeatureMatrix& inputs,
                  std::span<const IdentityId> identities,
                  const TrainObserver& observer = {});

/// Retrieval metrics of a model on the stratified query/gallery split.
RetrievalMetrics evaluate_model(const EmbeddingModel& model, const FeatureMatrix& inputs,
                                std::span<const IdentityId> identities,
                                double query_fraction, unsigned threads = 0);

struct AblationCell {
  LossKind loss = LossKind::kDtl;
  MiningKind mining = MiningKind::kIntersection;
};

struct AblationRow {
  AblationCell cell;
  double rank1 = 0.0;
  double rank5 = 0.0;
  double map = 0.0;
};

/// One train() per cell on the same data and seed; metrics of the last epoch.
std::vector<AblationRow> ablation_run(const TrainConfig& base,
                                      std::span<const AblationCell> grid,
                                      const FeatureMatrix& inputs,
                                      std::span<const IdentityId> identities);

/// CSV: loss,mining,rank1,rank5,map
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);

}  // namespace ssml

#endif  // SSML_TRAINER_HPP
