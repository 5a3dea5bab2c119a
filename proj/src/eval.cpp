#include "ssml/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "ssml/error.hpp"
#include "ssml/parallel.hpp"

namespace ssml {

std::vector<Label> retrieve(std::span<const float> query, const FeatureMatrix& gallery) {
  if (gallery.empty()) throw Error(ErrorCode::kEmptyGallery, "gallery has no entries");
  if (query.size() != gallery.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query has dimension " + std::to_string(query.size()) +
                    ", gallery stores " + std::to_string(gallery.dim()));
  }
  std::vector<double> distance(gallery.rows());
  for (std::size_t g = 0; g < gallery.rows(); ++g) {
    distance[g] = 1.0 - dot(query, gallery.row(g));
  }
  std::vector<Label> order(gallery.rows());
  for (std::size_t g = 0; g < order.size(); ++g) order[g] = static_cast<Label>(g);
  std::sort(order.begin(), order.end(), [&](Label a, Label b) {
    if (distance[a] != distance[b]) return distance[a] < distance[b];
    return a < b;
  });
  return order;
}

double RetrievalMetrics::rank(std::size_t k) const {
  if (cmc.empty() || k == 0) return 0.0;
  return cmc[std::min(k, cmc.size()) - 1];
}

RetrievalMetrics cmc_map(const FeatureMatrix& queries,
                         std::span<const IdentityId> query_ids,
                         const FeatureMatrix& gallery,
                         std::span<const IdentityId> gallery_ids,
                         unsigned threads) {
  if (query_ids.size() != queries.rows() || gallery_ids.size() != gallery.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "identity list length differs from features");
  }
  if (gallery.empty()) throw Error(ErrorCode::kEmptyGallery, "gallery has no entries");
  const std::unordered_set<IdentityId> present(gallery_ids.begin(), gallery_ids.end());
  for (std::size_t q = 0; q < query_ids.size(); ++q) {
    if (!present.contains(query_ids[q])) {
      throw Error(ErrorCode::kQueryIdentityMissing,
                  "query " + std::to_string(q) + " has identity " +
                      std::to_string(query_ids[q]) + " absent from the gallery");
    }
  }

  const std::size_t m = gallery.rows();
  std::vector<std::size_t> first_hit(queries.rows());
  std::vector<double> average_precision(queries.rows());
  parallel_for(queries.rows(), threads, [&](std::size_t q) {
    const auto order = retrieve(queries.row(q), gallery);
    std::size_t hits = 0;
    double precision_sum = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      if (gallery_ids[order[r]] != query_ids[q]) continue;
      if (hits == 0) first_hit[q] = r;
      ++hits;
      precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    average_precision[q] = precision_sum / static_cast<double>(hits);
  });

  RetrievalMetrics out;
  out.cmc.assign(m, 0.0);
  if (queries.rows() == 0) return out;
  std::vector<std::size_t> first_counts(m, 0);
  for (const std::size_t r : first_hit) ++first_counts[r];
  std::size_t running = 0;
  const auto nq = static_cast<double>(queries.rows());
  for (std::size_t r = 0; r < m; ++r) {
    running += first_counts[r];
    out.cmc[r] = static_cast<double>(running) / nq;
  }
  double ap_sum = 0.0;
  for (const double ap : average_precision) ap_sum += ap;
  out.map = ap_sum / nq;
  return out;
}

namespace {

template <class PositivesOf>
MiningQuality pooled_quality(std::span<const MiningResult> results,
                             std::span<const IdentityId> identities,
                             PositivesOf positives_of) {
  std::unordered_map<IdentityId, std::size_t> identity_size;
  for (const IdentityId id : identities) ++identity_size[id];

  std::size_t mined = 0;
  std::size_t correct = 0;
  std::size_t relevant = 0;
  for (const MiningResult& r : results) {
    if (r.probe >= identities.size()) {
      throw Error(ErrorCode::kIndexOutOfRange, "probe " + std::to_string(r.probe));
    }
    const IdentityId id = identities[r.probe];
    relevant += identity_size[id] - 1;
    for (const Label j : positives_of(r)) {
      if (j == r.probe) continue;
      if (j >= identities.size()) {
        throw Error(ErrorCode::kIndexOutOfRange, "mined label " + std::to_string(j));
      }
      ++mined;
      if (identities[j] == id) ++correct;
    }
  }
  MiningQuality q;
  q.count = mined;
  q.precision = mined == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(mined);
  q.recall = relevant == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(relevant);
  return q;
}

}  // namespace

MiningQuality mining_quality(std::span<const MiningResult> results,
                             std::span<const IdentityId> identities,
                             MiningKind kind) {
  return pooled_quality(results, identities,
                        [kind](const MiningResult& r) { return r.positives(kind); });
}

MiningQuality mining_quality(std::span<const MiningResult> results,
                             std::span<const IdentityId> identities) {
  return pooled_quality(results, identities,
                        [](const MiningResult& r) -> const std::vector<Label>& {
                          return r.p_pos;
                        });
}

void write_report_header(std::ostream& out) {
  out << "epoch,rank1,rank5,rank10,map,mine_precision,mine_recall,mine_count\n";
}

void write_report_row(std::ostream& out, const EpochReport& row) {
  char line[256];
  std::snprintf(line, sizeof line, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu\n", row.epoch,
                row.retrieval.rank(1), row.retrieval.rank(5), row.retrieval.rank(10),
                row.retrieval.map, row.mining.precision, row.mining.recall,
                row.mining.count);
  out << line;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  write_report_header(out);
  for (const EpochReport& row : report) write_report_row(out, row);
}

}  // namespace ssml
