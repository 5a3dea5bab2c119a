#include "ssml/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "ssml/error.hpp"

namespace ssml {
namespace {

constexpr int kMaxCentroidAttempts = 10000;
constexpr int kMaxCorpusAttempts = 8;
constexpr double kTargetMargin = 0.3;

std::vector<double> random_direction(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    std::vector<double> v(dim);
    double sq = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      sq += x * x;
    }
    if (sq > 1e-24) {
      const double norm = std::sqrt(sq);
      for (auto& x : v) x /= norm;
      return v;
    }
  }
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

SynthCorpus generate_once(const SynthSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids;
  centroids.reserve(spec.num_identities);
  for (std::size_t id = 0; id < spec.num_identities; ++id) {
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxCentroidAttempts && !accepted; ++attempt) {
      auto c = random_direction(spec.input_dim, rng);
      accepted = true;
      for (const auto& other : centroids) {
        if (cosine(c, other) > kMaxCentroidCosine) {
          accepted = false;
          break;
        }
      }
      if (accepted) centroids.push_back(std::move(c));
    }
    if (!accepted) {
      throw Error(ErrorCode::kCentroidRejectionExhausted,
                  "could not place identity " + std::to_string(id) + " of " +
                      std::to_string(spec.num_identities) + " in " +
                      std::to_string(spec.input_dim) + " dimensions");
    }
  }

  const std::size_t n = spec.num_identities * spec.samples_per_identity;
  SynthCorpus corpus{FeatureMatrix(n, spec.input_dim), std::vector<IdentityId>(n)};
  // Per-identity sub-streams keep each identity's samples independent of how
  // many identities precede it.
  for (std::size_t id = 0; id < spec.num_identities; ++id) {
    std::seed_seq sub_seed{static_cast<std::uint32_t>(seed),
                           static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(id), 0x5eedu};
    std::mt19937_64 local(sub_seed);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (std::size_t s = 0; s < spec.samples_per_identity; ++s) {
      const std::size_t row = id * spec.samples_per_identity + s;
      std::vector<double> v = centroids[id];
      double sq = 0.0;
      for (auto& x : v) {
        if (spec.intra_noise > 0.0) x += spec.intra_noise * jitter(local);
        sq += x * x;
      }
      const double norm = std::sqrt(sq);
      auto dst = corpus.features.row(row);
      for (std::size_t k = 0; k < v.size(); ++k) dst[k] = static_cast<float>(v[k] / norm);
      corpus.identities[row] = static_cast<IdentityId>(id);
    }
  }
  return corpus;
}

}  // namespace

SynthCorpus generate(const SynthSpec& spec) {
  if (spec.num_identities == 0 || spec.samples_per_identity == 0) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one identity and one sample");
  }
  if (spec.num_identities * spec.samples_per_identity < 2) {
    throw Error(ErrorCode::kInvalidArgument, "corpus needs at least two samples");
  }
  if (spec.input_dim < 2) {
    throw Error(ErrorCode::kInvalidArgument, "input dimension must be at least 2");
  }
  if (!(spec.intra_noise >= 0.0) || !std::isfinite(spec.intra_noise)) {
    throw Error(ErrorCode::kInvalidArgument, "noise must be finite and nonnegative");
  }

  // Regenerate (bounded) when the draw is not separated enough; keep the best.
  SynthCorpus best;
  double best_margin = -1e300;
  for (int attempt = 0; attempt < kMaxCorpusAttempts; ++attempt) {
    SynthCorpus corpus =
        generate_once(spec, spec.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt));
    const double margin = separation_margin(corpus);
    if (margin >= kTargetMargin) return corpus;
    if (margin > best_margin) {
      best_margin = margin;
      best = std::move(corpus);
    }
  }
  return best;
}

double separation_margin(const SynthCorpus& corpus) {
  const auto& f = corpus.features;
  double intra = 0.0;
  double inter = 0.0;
  std::size_t intra_count = 0;
  std::size_t inter_count = 0;
  for (std::size_t i = 0; i < f.rows(); ++i) {
    for (std::size_t j = i + 1; j < f.rows(); ++j) {
      const double c = dot(f.row(i), f.row(j));
      if (corpus.identities[i] == corpus.identities[j]) {
        intra += c;
        ++intra_count;
      } else {
        inter += c;
        ++inter_count;
      }
    }
  }
  // With a single identity (or single samples) there is nothing to separate.
  if (intra_count == 0 || inter_count == 0) return 1.0;
  return intra / static_cast<double>(intra_count) - inter / static_cast<double>(inter_count);
}

EvalSplit split_query_gallery(std::span<const IdentityId> identities,
                              double query_fraction) {
  if (!(query_fraction > 0.0 && query_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "query fraction must lie in (0, 1), got " + std::to_string(query_fraction));
  }
  std::map<IdentityId, std::vector<Label>> members;
  for (std::size_t i = 0; i < identities.size(); ++i) {
    members[identities[i]].push_back(static_cast<Label>(i));
  }
  std::vector<char> is_query(identities.size(), 0);
  for (const auto& [id, rows] : members) {
    if (rows.size() < 2) continue;
    auto count = static_cast<std::size_t>(
        std::lround(query_fraction * static_cast<double>(rows.size())));
    count = std::clamp<std::size_t>(count, 1, rows.size() - 1);
    for (std::size_t r = 0; r < count; ++r) is_query[rows[r]] = 1;
  }
  EvalSplit split;
  for (std::size_t i = 0; i < identities.size(); ++i) {
    (is_query[i] ? split.query : split.gallery).push_back(static_cast<Label>(i));
  }
  return split;
}

}  // namespace ssml
