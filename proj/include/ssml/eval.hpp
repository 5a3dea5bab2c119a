#ifndef SSML_EVAL_HPP
#define SSML_EVAL_HPP

#include <array>
#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "ssml/dplm.hpp"
#include "ssml/featurestore.hpp"

namespace ssml {

/// Gallery indices ordered by ascending cosine distance 1 - q.g, ties by
/// ascending index. Throws kEmptyGallery or kDimensionMismatch.
std::vector<Label> retrieve(std::span<const float> query, const FeatureMatrix& gallery);

struct RetrievalMetrics {
  std::vector<double> cmc;  // cmc[k-1] = rank-k accuracy, k = 1..gallery size
  double map = 0.0;

  /// Rank-k accuracy, saturating at the last rank for k beyond the gallery.
  double rank(std::size_t k) const;
};

/// CMC curve and mAP. Every query identity must occur in the gallery
/// (kQueryIdentityMissing otherwise).
RetrievalMetrics cmc_map(const FeatureMatrix& queries,
                         std::span<const IdentityId> query_ids,
                         const FeatureMatrix& gallery,
                         std::span<const IdentityId> gallery_ids,
                         unsigned threads = 1);

struct MiningQuality {
  double precision = 1.0;
  double recall = 0.0;
  std::size_t count = 0;
};

/// Pooled over all results: precision = |mined & true| / |mined| (1 when
/// nothing is mined), recall = |mined & true| / |true|, count = sum |mined|.
/// True positives of probe i are the other samples sharing its identity; the
/// probe itself is never counted as mined.
MiningQuality mining_quality(std::span<const MiningResult> results,
                             std::span<const IdentityId> identities,
                             MiningKind kind);
MiningQuality mining_quality(std::span<const MiningResult> results,
                             std::span<const IdentityId> identities);

inline constexpr std::array<MiningKind, 4> kAllMiningKinds = {
    MiningKind::kPairwise, MiningKind::kRank, MiningKind::kAdjacent,
    MiningKind::kIntersection};

/// One row of the per-epoch report.
struct EpochReport {
  int epoch = 0;
  RetrievalMetrics retrieval;
  MiningQuality mining;                  // for the strategy used in training
  std::array<MiningQuality, 4> by_kind;  // indexed like kAllMiningKinds
  double loss = 0.0;
};

using EvalReport = std::vector<EpochReport>;

/// CSV: epoch,rank1,rank5,rank10,map,mine_precision,mine_recall,mine_count
void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const EpochReport& row);
void write_report_csv(std::ostream& out, const EvalReport& report);

}  // namespace ssml

#endif  // SSML_EVAL_HPP
