#ifndef SSML_DPLM_HPP
#define SSML_DPLM_HPP

#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "ssml/featurestore.hpp"
#include "ssml/similarity.hpp"

namespace ssml {

/// Which mined set is treated as the positive set. `intersection` is the full
/// pipeline; the other three exist for ablations.
enum class MiningKind { kPairwise, kRank, kAdjacent, kIntersection };

std::string_view to_string(MiningKind kind);
MiningKind parse_mining_kind(std::string_view name);

/// Every label set mined for one probe. Orderings are canonical so results can
/// be compared for exact equality:
///   p_ps   descending similarity, ties by ascending label
///   p_rank p_ps order
///   p_adj  ascending neighbourhood distance, ties by ascending label
///   p_pos  positives of `kind`, in that set's order
///   n_neg  ascending label
///   n_hard descending raw similarity, ties by ascending label
/// The probe never appears in any set.
struct MiningResult {
  Label probe = 0;
  MiningKind kind = MiningKind::kIntersection;
  std::vector<Label> p_ps;
  std::vector<Label> p_rank;
  std::vector<Label> p_adj;
  std::vector<Label> p_pos;
  std::vector<Label> n_neg;
  std::vector<Label> n_hard;

  /// K, the candidate count that bounds the rank and adjacency truncations.
  std::size_t k() const noexcept { return p_ps.size(); }

  /// The positive set a given strategy would use.
  std::vector<Label> positives(MiningKind which) const;

  /// Rank and adjacency intersected, in p_rank order.
  std::vector<Label> intersection() const;

  friend bool operator==(const MiningResult&, const MiningResult&) = default;
};

/// All j != probe with s[j] >= tau, descending by s[j], ties by ascending j.
std::vector<Label> candidate_set(std::span<const float> s, float tau, Label probe);
std::vector<Label> candidate_set(const SimilarityVector& s, float tau);

/// Members j of p_ps whose own top-|p_ps| candidate list contains the probe.
std::vector<Label> rank_consistent_set(Label probe, std::span<const Label> p_ps,
                                       const SimilarityMatrix& sim, float tau);

/// The k labels whose thresholded similarity rows are nearest (Euclidean) to
/// the probe's row.
std::vector<Label> adjacent_set(Label probe, const SimilarityMatrix& sim,
                                std::size_t k);

/// ceil(gamma * negatives), guarded against representation error in gamma.
std::size_t hard_negative_count(std::size_t negatives, double gamma);

/// Throws kInvalidGamma unless gamma lies in (0, 1].
void check_gamma(double gamma);

/// Mines one probe against a dictionary snapshot. `sim` must be the matrix of
/// `dict` thresholded at `tau`, and tau must be positive so that thresholded
/// zeros can never pass the candidate test.
MiningResult mine(Label probe, const Dictionary& dict, const SimilarityMatrix& sim,
                  float tau, double gamma,
                  MiningKind kind = MiningKind::kIntersection);

/// Sparse mining engine over one immutable snapshot. Construction is O(n^2);
/// each probe then costs O(n * row support) instead of the O(n^2) dense scan.
/// mine() is const and may be called concurrently.
class Miner {
 public:
  Miner(const Dictionary& dict, const SimilarityMatrix& sim, float tau);

  MiningResult mine(Label probe, double gamma,
                    MiningKind kind = MiningKind::kIntersection) const;

  /// Warm-up mining: the probe is its own only positive; hard negatives are
  /// drawn from every other label.
  MiningResult self_positive(Label probe, double gamma) const;

  std::size_t size() const noexcept { return n_; }

 private:
  struct Entry {
    Label col;
    float value;
  };

  std::span<const Entry> support(Label i) const {
    return {entries_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::span<const float> sorted_values(Label i) const;
  std::vector<Label> candidates(Label i) const;
  std::vector<Label> rank_consistent(Label probe, std::span<const Label> p_ps) const;
  std::vector<Label> adjacent(Label probe, std::size_t k) const;
  void fill_negatives(MiningResult& result, std::span<const Label> positives,
                      double gamma) const;

  const Dictionary* dict_;
  const SimilarityMatrix* sim_;
  std::size_t n_;
  float tau_;
  // CSR view of the thresholded matrix: entries >= tau per row, by column.
  std::vector<std::size_t> offsets_;
  std::vector<Entry> entries_;
  // Each row's values again, sorted descending, for rank lookups. Built on
  // first use so warm-up batches never pay for it.
  struct OnceFlag {
    std::once_flag flag;
  };
  mutable std::vector<float> sorted_;
  std::unique_ptr<OnceFlag> sorted_once_ = std::make_unique<OnceFlag>();
};

}  // namespace ssml

#endif  // SSML_DPLM_HPP
