#ifndef SSML_SIMILARITY_HPP
#define SSML_SIMILARITY_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "ssml/featurestore.hpp"

namespace ssml {

/// Cosine similarities between one probe feature and every dictionary entry.
struct SimilarityVector {
  Label probe = 0;
  std::vector<float> values;
};

/// Dense n x n pairwise-similarity matrix of a dictionary, optionally with
/// every entry below `tau` replaced by 0.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n) : n_(n), values_(n * n, 0.0f) {}

  std::size_t size() const noexcept { return n_; }
  bool thresholded() const noexcept { return thresholded_; }
  float tau() const noexcept { return tau_; }

  float at(std::size_t i, std::size_t j) const noexcept { return values_[i * n_ + j]; }
  std::span<const float> row(std::size_t i) const noexcept {
    return {values_.data() + i * n_, n_};
  }
  std::span<const float> values() const noexcept { return values_; }

  /// Zeroes every entry strictly below tau. Applying the same tau twice is a
  /// no-op.
  void apply_threshold(float tau);

 private:
  friend SimilarityMatrix similarity_matrix(const FeatureMatrix&, float, unsigned);
  friend void patch_similarity(SimilarityMatrix&, const Dictionary&,
                               std::span<const Label>, unsigned);

  float* mutable_row(std::size_t i) noexcept { return values_.data() + i * n_; }

  std::size_t n_ = 0;
  std::vector<float> values_;
  bool thresholded_ = false;
  float tau_ = -1.0f;
};

/// s_j = z . zbar_j for every dictionary row j. Throws kDimensionMismatch.
SimilarityVector ps_vector(std::span<const float> z, const Dictionary& dict,
                           Label probe = 0);
SimilarityVector ps_vector(std::span<const double> z, const Dictionary& dict,
                           Label probe = 0);

/// D * D^T with entries below tau set to 0. tau must lie in [-1, 1]; tau = -1
/// keeps the raw cosine matrix. Each entry is the double-accumulated dot
/// product rounded to float, so entry (i, j) is bitwise equal to
/// ps_vector(row i).values[j] and to entry (j, i).
SimilarityMatrix similarity_matrix(const FeatureMatrix& rows, float tau,
                                   unsigned threads = 0);
SimilarityMatrix similarity_matrix(const Dictionary& dict, float tau,
                                   unsigned threads = 0);

/// Recomputes rows and columns `changed` of a matrix built from an earlier
/// state of `dict`. The result is bitwise equal to a full rebuild.
void patch_similarity(SimilarityMatrix& sim, const Dictionary& dict,
                      std::span<const Label> changed, unsigned threads = 0);

}  // namespace ssml

#endif  // SSML_SIMILARITY_HPP
