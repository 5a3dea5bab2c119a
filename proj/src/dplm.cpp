#include "ssml/dplm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <mutex>
#include <string>

#include "ssml/error.hpp"

namespace ssml {
namespace {

// Strict total order: larger similarity first, then smaller label.
struct BySimilarityDesc {
  std::span<const float> s;
  bool operator()(Label a, Label b) const {
    if (s[a] != s[b]) return s[a] > s[b];
    return a < b;
  }
};

struct Scored {
  double key;
  Label label;
};

bool ascending(const Scored& a, const Scored& b) {
  if (a.key != b.key) return a.key < b.key;
  return a.label < b.label;
}

std::vector<Label> top_k_ascending(std::vector<Scored>& scored, std::size_t k) {
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), ascending);
  std::vector<Label> out(k);
  for (std::size_t r = 0; r < k; ++r) out[r] = scored[r].label;
  return out;
}

void check_tau_for_mining(float tau) {
  if (!(tau > 0.0f && tau <= 1.0f)) {
    throw Error(ErrorCode::kInvalidArgument,
                "mining threshold tau must lie in (0, 1], got " + std::to_string(tau));
  }
}

}  // namespace

std::string_view to_string(MiningKind kind) {
  switch (kind) {
    case MiningKind::kPairwise: return "ps";
    case MiningKind::kRank: return "rank";
    case MiningKind::kAdjacent: return "adj";
    case MiningKind::kIntersection: return "pos";
  }
  return "?";
}

MiningKind parse_mining_kind(std::string_view name) {
  if (name == "ps") return MiningKind::kPairwise;
  if (name == "rank") return MiningKind::kRank;
  if (name == "adj") return MiningKind::kAdjacent;
  if (name == "pos" || name == "intersection") return MiningKind::kIntersection;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown mining kind '" + std::string(name) +
                  "' (expected ps, rank, adj or pos)");
}

std::vector<Label> MiningResult::positives(MiningKind which) const {
  switch (which) {
    case MiningKind::kPairwise: return p_ps;
    case MiningKind::kRank: return p_rank;
    case MiningKind::kAdjacent: return p_adj;
    case MiningKind::kIntersection: break;
  }
  return intersection();
}

std::vector<Label> MiningResult::intersection() const {
  std::vector<Label> adj(p_adj);
  std::sort(adj.begin(), adj.end());
  std::vector<Label> out;
  for (const Label j : p_rank) {
    if (std::binary_search(adj.begin(), adj.end(), j)) out.push_back(j);
  }
  return out;
}

std::vector<Label> candidate_set(std::span<const float> s, float tau, Label probe) {
  std::vector<Label> out;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (j != probe && s[j] >= tau) out.push_back(static_cast<Label>(j));
  }
  std::sort(out.begin(), out.end(), BySimilarityDesc{s});
  return out;
}

std::vector<Label> candidate_set(const SimilarityVector& s, float tau) {
  return candidate_set(s.values, tau, s.probe);
}

std::vector<Label> rank_consistent_set(Label probe, std::span<const Label> p_ps,
                                       const SimilarityMatrix& sim, float tau) {
  const std::size_t k = p_ps.size();
  std::vector<Label> out;
  for (const Label j : p_ps) {
    const auto neighbours = candidate_set(sim.row(j), tau, j);
    const auto end = neighbours.begin() +
                     static_cast<std::ptrdiff_t>(std::min(k, neighbours.size()));
    if (std::find(neighbours.begin(), end, probe) != end) out.push_back(j);
  }
  return out;
}

std::vector<Label> adjacent_set(Label probe, const SimilarityMatrix& sim,
                                std::size_t k) {
  const std::size_t n = sim.size();
  if (probe >= n) {
    throw Error(ErrorCode::kIndexOutOfRange, "probe " + std::to_string(probe));
  }
  if (k == 0) return {};
  const auto a = sim.row(probe);
  std::vector<Scored> scored;
  scored.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == probe) continue;
    const auto b = sim.row(j);
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double diff = static_cast<double>(a[c]) - static_cast<double>(b[c]);
      acc += diff * diff;
    }
    scored.push_back({std::sqrt(acc), static_cast<Label>(j)});
  }
  return top_k_ascending(scored, k);
}

std::size_t hard_negative_count(std::size_t negatives, double gamma) {
  if (negatives == 0) return 0;
  const double raw = std::ceil(gamma * static_cast<double>(negatives) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(raw), 1, negatives);
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw Error(ErrorCode::kInvalidGamma,
                "gamma must lie in (0, 1], got " + std::to_string(gamma));
  }
}

MiningResult mine(Label probe, const Dictionary& dict, const SimilarityMatrix& sim,
                  float tau, double gamma, MiningKind kind) {
  return Miner(dict, sim, tau).mine(probe, gamma, kind);
}

Miner::Miner(const Dictionary& dict, const SimilarityMatrix& sim, float tau)
    : dict_(&dict), sim_(&sim), n_(dict.size()), tau_(tau) {
  check_tau_for_mining(tau);
  if (sim.size() != n_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "similarity matrix is " + std::to_string(sim.size()) +
                    " wide, dictionary holds " + std::to_string(n_));
  }
  if (!sim.thresholded() || sim.tau() != tau) {
    throw Error(ErrorCode::kInvalidArgument,
                "similarity matrix must be thresholded at the mining tau");
  }
  offsets_.assign(n_ + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto row = sim.row(i);
    for (std::size_t j = 0; j < n_; ++j) {
      if (row[j] >= tau) entries_.push_back({static_cast<Label>(j), row[j]});
    }
    offsets_[i + 1] = entries_.size();
  }
}

std::span<const float> Miner::sorted_values(Label i) const {
  std::call_once(sorted_once_->flag, [this] {
    sorted_.resize(entries_.size());
    for (std::size_t r = 0; r < n_; ++r) {
      const auto begin = sorted_.begin() + static_cast<std::ptrdiff_t>(offsets_[r]);
      const auto end = sorted_.begin() + static_cast<std::ptrdiff_t>(offsets_[r + 1]);
      auto out = begin;
      for (const Entry& e : support(static_cast<Label>(r))) *out++ = e.value;
      std::sort(begin, end, std::greater<float>());
    }
  });
  return {sorted_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

std::vector<Label> Miner::candidates(Label i) const {
  std::vector<Label> out;
  std::vector<float> values;
  for (const Entry& e : support(i)) {
    if (e.col != i) {
      out.push_back(e.col);
      values.push_back(e.value);
    }
  }
  // Sort positions, then map back, so the comparator can read values by slot.
  std::vector<Label> order(out.size());
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = static_cast<Label>(r);
  std::sort(order.begin(), order.end(), [&](Label a, Label b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return out[a] < out[b];
  });
  std::vector<Label> sorted(out.size());
  for (std::size_t r = 0; r < order.size(); ++r) sorted[r] = out[order[r]];
  return sorted;
}

std::vector<Label> Miner::rank_consistent(Label probe,
                                          std::span<const Label> p_ps) const {
  const std::size_t k = p_ps.size();
  std::vector<Label> out;
  for (const Label j : p_ps) {
    const auto row = support(j);
    const auto hit = std::lower_bound(
        row.begin(), row.end(), probe,
        [](const Entry& e, Label col) { return e.col < col; });
    if (hit == row.end() || hit->col != probe) continue;
    const auto self = std::lower_bound(
        row.begin(), row.end(), j, [](const Entry& e, Label col) { return e.col < col; });
    const bool has_self = self != row.end() && self->col == j;
    // With at most k candidates, every candidate of j is within its top k.
    if (row.size() - (has_self ? 1 : 0) <= k) {
      out.push_back(j);
      continue;
    }
    const float s_probe = hit->value;
    // Probe's position in j's candidate order = number of candidates ahead:
    // larger values, plus equal values with a smaller label. j's diagonal is
    // not a candidate and is taken back out.
    const auto desc = sorted_values(j);
    const auto first_equal = std::partition_point(
        desc.begin(), desc.end(), [s_probe](float v) { return v > s_probe; });
    std::size_t ahead = static_cast<std::size_t>(first_equal - desc.begin());
    const auto last_equal = std::partition_point(
        first_equal, desc.end(), [s_probe](float v) { return v == s_probe; });
    if (last_equal - first_equal > 1) {
      for (const Entry& e : row) {
        if (e.value == s_probe && e.col < probe) ++ahead;
      }
    }
    if (has_self && (self->value > s_probe || (self->value == s_probe && j < probe))) {
      --ahead;
    }
    if (ahead < k) out.push_back(j);
  }
  return out;
}

std::vector<Label> Miner::adjacent(Label probe, std::size_t k) const {
  if (k == 0) return {};
  const auto a = support(probe);
  const auto ra = sim_->row(probe);
  std::vector<Scored> scored;
  scored.reserve(n_);
  std::vector<Label> dense;
  for (std::size_t j = 0; j < n_; ++j) {
    if (j == probe) continue;
    const auto b = support(static_cast<Label>(j));
    if (a.size() + b.size() > n_ / 2) {
      dense.push_back(static_cast<Label>(j));
      continue;
    }
    // Merge the two supports in column order. Columns outside both supports
    // contribute exact zeros, so the sum equals the dense ascending-column sum.
    double acc = 0.0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() || ib != b.end()) {
      double diff;
      if (ib == b.end() || (ia != a.end() && ia->col < ib->col)) {
        diff = static_cast<double>(ia->value);
        ++ia;
      } else if (ia == a.end() || ib->col < ia->col) {
        diff = -static_cast<double>(ib->value);
        ++ib;
      } else {
        diff = static_cast<double>(ia->value) - static_cast<double>(ib->value);
        ++ia;
        ++ib;
      }
      acc += diff * diff;
    }
    scored.push_back({std::sqrt(acc), static_cast<Label>(j)});
  }

  // Dense rows go through the plain column loop, four rows at a time. Each
  // accumulator still adds its own row's terms in ascending column order.
  constexpr std::size_t kLanes = 4;
  std::size_t d = 0;
  for (; d + kLanes <= dense.size(); d += kLanes) {
    const float* rb[kLanes];
    for (std::size_t l = 0; l < kLanes; ++l) rb[l] = sim_->row(dense[d + l]).data();
    double acc[kLanes] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < n_; ++c) {
      const double x = static_cast<double>(ra[c]);
      for (std::size_t l = 0; l < kLanes; ++l) {
        const double diff = x - static_cast<double>(rb[l][c]);
        acc[l] += diff * diff;
      }
    }
    for (std::size_t l = 0; l < kLanes; ++l) {
      scored.push_back({std::sqrt(acc[l]), dense[d + l]});
    }
  }
  for (; d < dense.size(); ++d) {
    const auto rb = sim_->row(dense[d]);
    double acc = 0.0;
    for (std::size_t c = 0; c < n_; ++c) {
      const double diff = static_cast<double>(ra[c]) - static_cast<double>(rb[c]);
      acc += diff * diff;
    }
    scored.push_back({std::sqrt(acc), dense[d]});
  }
  return top_k_ascending(scored, k);
}

void Miner::fill_negatives(MiningResult& result, std::span<const Label> positives,
                           double gamma) const {
  std::vector<char> excluded(n_, 0);
  excluded[result.probe] = 1;
  for (const Label j : positives) excluded[j] = 1;
  result.n_neg.clear();
  for (std::size_t j = 0; j < n_; ++j) {
    if (!excluded[j]) result.n_neg.push_back(static_cast<Label>(j));
  }

  const std::size_t count = hard_negative_count(result.n_neg.size(), gamma);
  if (count == 0) {
    result.n_hard.clear();
    return;
  }
  // Hard negatives rank by raw, unthresholded similarity.
  const SimilarityVector raw = ps_vector(dict_->row(result.probe), *dict_, result.probe);
  result.n_hard = result.n_neg;
  std::partial_sort(result.n_hard.begin(),
                    result.n_hard.begin() + static_cast<std::ptrdiff_t>(count),
                    result.n_hard.end(), BySimilarityDesc{raw.values});
  result.n_hard.resize(count);
}

MiningResult Miner::mine(Label probe, double gamma, MiningKind kind) const {
  check_gamma(gamma);
  if (probe >= n_) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "probe " + std::to_string(probe) + " outside dictionary of size " +
                    std::to_string(n_));
  }
  MiningResult result;
  result.probe = probe;
  result.kind = kind;
  result.p_ps = candidates(probe);
  result.p_rank = rank_consistent(probe, result.p_ps);
  result.p_adj = adjacent(probe, result.k());
  switch (kind) {
    case MiningKind::kPairwise: result.p_pos = result.p_ps; break;
    case MiningKind::kRank: result.p_pos = result.p_rank; break;
    case MiningKind::kAdjacent: result.p_pos = result.p_adj; break;
    case MiningKind::kIntersection: result.p_pos = result.intersection(); break;
  }
  fill_negatives(result, result.p_pos, gamma);
  return result;
}

MiningResult Miner::self_positive(Label probe, double gamma) const {
  check_gamma(gamma);
  if (probe >= n_) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "probe " + std::to_string(probe) + " outside dictionary of size " +
                    std::to_string(n_));
  }
  MiningResult result;
  result.probe = probe;
  result.kind = MiningKind::kIntersection;
  result.p_pos = {probe};
  fill_negatives(result, {}, gamma);
  return result;
}

}  // namespace ssml
