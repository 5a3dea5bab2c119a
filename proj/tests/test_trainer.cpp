#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "ssml/error.hpp"
#include "ssml/synthdata.hpp"
#include "ssml/trainer.hpp"

using namespace ssml;

namespace {

SynthCorpus small_corpus(std::uint64_t seed = 3) {
  SynthSpec spec;
  spec.num_identities = 8;
  spec.samples_per_identity = 6;
  spec.input_dim = 8;
  spec.intra_noise = 0.1;
  spec.seed = seed;
  return generate(spec);
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 4;
  c.batch_size = 10;
  c.warmup_epochs = 2;
  c.reinit_interval = 2;
  c.output_dim = 4;
  c.gamma = 0.1;
  c.threads = 2;
  return c;
}

}  // namespace

TEST_CASE("config defaults and validation") {
  const TrainConfig c;
  CHECK(c.epochs == 60);
  CHECK(c.batch_size == 256);
  CHECK(c.tau == 0.6f);
  CHECK(c.gamma == 0.01);
  CHECK(c.sigma == 0.2);
  CHECK(c.warmup_epochs == 5);
  CHECK(c.reinit_interval == 5);
  CHECK(c.learning_rate == 0.01);
  CHECK(c.momentum == 0.9);
  const TrainConfig desk = TrainConfig::desk_scale();
  CHECK(desk.epochs == 30);
  CHECK(desk.batch_size == 64);
  CHECK_NOTHROW(c.validate());

  auto bad = [](auto mutate) {
    TrainConfig t;
    mutate(t);
    CHECK_THROWS_AS(t.validate(), Error);
  };
  bad([](TrainConfig& t) { t.tau = 1.5f; });
  bad([](TrainConfig& t) { t.tau = 0.0f; });
  bad([](TrainConfig& t) { t.gamma = 0.0; });
  bad([](TrainConfig& t) { t.sigma = 1.2; });
  bad([](TrainConfig& t) { t.batch_size = 0; });
  bad([](TrainConfig& t) { t.warmup_epochs = 0; });
  bad([](TrainConfig& t) { t.reinit_interval = 0; });
  bad([](TrainConfig& t) { t.epochs = -1; });
  bad([](TrainConfig& t) { t.learning_rate = 0.0; });

  CHECK(parse_loss_kind("general_triplet") == LossKind::kTriplet);
  CHECK(to_string(LossKind::kDtl) == "dtl");
  CHECK_THROWS_AS(parse_loss_kind("softmax"), Error);
}

TEST_CASE("zero epochs returns the initialized model and no reports") {
  const SynthCorpus corpus = small_corpus();
  TrainConfig c = small_config();
  c.epochs = 0;
  const TrainResult r = train(c, corpus.features, corpus.identities);
  CHECK(r.reports.empty());
  REQUIRE(r.initial.has_value());
  EmbeddingConfig ec;
  ec.input_dim = 8;
  ec.output_dim = 4;
  ec.seed = c.seed;
  CHECK(r.model == EmbeddingModel::initialize(ec));
}

TEST_CASE("warm-up epochs use only the probe as positive") {
  const SynthCorpus corpus = small_corpus();
  TrainConfig c = small_config();
  c.epochs = 3;
  std::map<int, std::size_t> seen;
  TrainObserver obs;
  obs.on_mined = [&](int epoch, int, std::span<const MiningResult> mined) {
    for (const MiningResult& r : mined) {
      seen[epoch] += 1;
      if (epoch < c.warmup_epochs) {
        CHECK(r.p_pos == std::vector<Label>{r.probe});
        CHECK(r.n_neg.size() == corpus.features.rows() - 1);
      }
      CHECK(std::find(r.n_hard.begin(), r.n_hard.end(), r.probe) == r.n_hard.end());
    }
  };
  train(c, corpus.features, {}, obs);
  // every sample is mined exactly once per epoch
  CHECK(seen[0] == 48);
  CHECK(seen[1] == 48);
  CHECK(seen[2] == 48);
}

TEST_CASE("training is deterministic and independent of the thread count") {
  const SynthCorpus corpus = small_corpus();
  TrainConfig c = small_config();
  std::vector<std::string> logs_a, logs_b;
  TrainObserver a, b;
  a.on_log = [&](const std::string& line) { logs_a.push_back(line); };
  b.on_log = [&](const std::string& line) { logs_b.push_back(line); };
  const TrainResult r1 = train(c, corpus.features, corpus.identities, a);
  c.threads = 1;
  const TrainResult r2 = train(c, corpus.features, corpus.identities, b);
  CHECK(r1.model == r2.model);
  CHECK(logs_a == logs_b);
  std::ostringstream csv1, csv2;
  write_report_csv(csv1, r1.reports);
  write_report_csv(csv2, r2.reports);
  CHECK(csv1.str() == csv2.str());
  CHECK(r1.reports.size() == 4);

  REQUIRE_FALSE(logs_a.empty());
  CHECK(logs_a.front().rfind("epoch=0 batch=0 loss=", 0) == 0);
  CHECK(logs_a.front().find(" pos_term=") != std::string::npos);
  CHECK(logs_a.front().find(" neg_term=") != std::string::npos);
  CHECK(logs_a.size() == 4 * 5);  // 48 samples in batches of 10

  c.seed = 99;
  CHECK_FALSE(train(c, corpus.features, {}).model == r1.model);
}

TEST_CASE("checkpoint hook fires at every reinit boundary") {
  const SynthCorpus corpus = small_corpus();
  TrainConfig c = small_config();
  c.epochs = 5;
  std::vector<int> epochs;
  TrainObserver obs;
  obs.on_checkpoint = [&](int epoch, const EmbeddingModel&) { epochs.push_back(epoch); };
  train(c, corpus.features, {}, obs);
  CHECK(epochs == std::vector<int>{1, 3});
}

TEST_CASE("reports are well formed") {
  const SynthCorpus corpus = small_corpus();
  TrainConfig c = small_config();
  const TrainResult r = train(c, corpus.features, corpus.identities);
  REQUIRE(r.reports.size() == 4);
  for (std::size_t e = 0; e < r.reports.size(); ++e) {
    const EpochReport& row = r.reports[e];
    CHECK(row.epoch == static_cast<int>(e));
    for (std::size_t k = 1; k < row.retrieval.cmc.size(); ++k) {
      CHECK(row.retrieval.cmc[k] >= row.retrieval.cmc[k - 1]);
    }
    CHECK(row.retrieval.map <= row.retrieval.cmc.back() + 1e-12);
    CHECK(row.mining.precision >= 0.0);
    CHECK(row.mining.precision <= 1.0);
    CHECK(row.loss > 0.0);
    if (row.epoch < c.warmup_epochs) CHECK(row.mining.count == 0);
  }
}

TEST_CASE("training never reads identities for learning") {
  const SynthCorpus corpus = small_corpus();
  TrainConfig c = small_config();
  const TrainResult with = train(c, corpus.features, corpus.identities);
  const TrainResult without = train(c, corpus.features, {});
  CHECK(with.model == without.model);
  CHECK(without.reports.empty());
  CHECK_FALSE(without.initial.has_value());
}

TEST_CASE("general triplet training runs") {
  const SynthCorpus corpus = small_corpus();
  TrainConfig c = small_config();
  c.loss_kind = LossKind::kTriplet;
  c.mining_kind = MiningKind::kPairwise;
  const TrainResult r = train(c, corpus.features, corpus.identities);
  CHECK(r.reports.size() == 4);
}

TEST_CASE("ablation with one cell equals plain training") {
  const SynthCorpus corpus = small_corpus();
  TrainConfig c = small_config();
  c.mining_kind = MiningKind::kRank;
  const std::vector<AblationCell> grid{{LossKind::kDtl, MiningKind::kRank}};
  const auto rows = ablation_run(c, grid, corpus.features, corpus.identities);
  const TrainResult r = train(c, corpus.features, corpus.identities);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].rank1 == r.reports.back().retrieval.rank(1));
  CHECK(rows[0].rank5 == r.reports.back().retrieval.rank(5));
  CHECK(rows[0].map == r.reports.back().retrieval.map);

  std::ostringstream csv;
  write_ablation_csv(csv, rows);
  CHECK(csv.str().rfind("loss,mining,rank1,rank5,map\ndtl,rank,", 0) == 0);

  CHECK_THROWS_AS(ablation_run(c, {}, corpus.features, corpus.identities), Error);
  CHECK_THROWS_AS(ablation_run(c, grid, corpus.features, {}), Error);
}

TEST_CASE("evaluate_model matches the initial report") {
  const SynthCorpus corpus = small_corpus();
  TrainConfig c = small_config();
  c.epochs = 0;
  const TrainResult r = train(c, corpus.features, corpus.identities);
  const RetrievalMetrics m =
      evaluate_model(r.model, corpus.features, corpus.identities, c.query_fraction, 1);
  CHECK(m.cmc == r.initial->retrieval.cmc);
  CHECK(m.map == r.initial->retrieval.map);
}
