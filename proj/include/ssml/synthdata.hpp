#ifndef SSML_SYNTHDATA_HPP
#define SSML_SYNTHDATA_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ssml/featurestore.hpp"

namespace ssml {

struct SynthSpec {
  std::size_t num_identities = 50;
  std::size_t samples_per_identity = 20;
  std::size_t input_dim = 32;
  double intra_noise = 0.05;  // per-coordinate Gaussian std before renormalizing
  std::uint64_t seed = 7;
  double query_fraction = 0.25;
};

/// Synthetic corpus: unit-norm samples grouped by identity, identity-major
/// (samples of identity 0 first). `identities[i]` is the ground truth of row i.
struct SynthCorpus {
  FeatureMatrix features;
  std::vector<IdentityId> identities;
};

/// Largest pairwise cosine allowed between identity centroids.
inline constexpr double kMaxCentroidCosine = 0.5;

/// Draws centroids uniformly on the unit sphere (re-drawing any centroid whose
/// cosine to an accepted one exceeds 0.5, up to 10^4 attempts each) and emits
/// normalize(centroid + noise) samples. Deterministic in spec.seed.
/// Throws kCentroidRejectionExhausted or kInvalidArgument.
SynthCorpus generate(const SynthSpec& spec);

/// Mean intra-identity cosine minus mean inter-identity cosine.
double separation_margin(const SynthCorpus& corpus);

struct EvalSplit {
  std::vector<Label> query;
  std::vector<Label> gallery;
};

/// Stratified split: within each identity, in sample order, the first
/// round(fraction * count) samples (at least 1, and leaving at least 1 for the
/// gallery when count >= 2) become queries. Singleton identities go to the
/// gallery only.
EvalSplit split_query_gallery(std::span<const IdentityId> identities,
                              double query_fraction);

}  // namespace ssml

#endif  // SSML_SYNTHDATA_HPP
