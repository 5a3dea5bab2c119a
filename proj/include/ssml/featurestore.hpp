#ifndef SSML_FEATURESTORE_HPP
#define SSML_FEATURESTORE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ssml {

/// Index label of a training sample. Sample i carries label i (0-based).
using Label = std::uint32_t;

/// Ground-truth identity id; only synthdata and eval ever see these.
using IdentityId = std::uint32_t;

/// Dense n x d row-major matrix of 32-bit features. Row i is the feature of
/// the sample whose index label is i.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim);
  FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<float> row(std::size_t i) noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const float> row(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  Label label(std::size_t i) const noexcept { return static_cast<Label>(i); }

  /// Copies the given rows, in order, into a new matrix.
  FeatureMatrix select_rows(std::span<const Label> indices) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

/// Dot product of two float vectors accumulated in double, in index order.
double dot(std::span<const float> a, std::span<const float> b);
double dot(std::span<const double> a, std::span<const float> b);
double squared_norm(std::span<const float> v);

/// Returns a copy with every row scaled to unit L2 norm.
/// Throws Error(kZeroNormRow) naming the first row with norm <= 1e-12.
FeatureMatrix normalize_rows(const FeatureMatrix& m);

/// The feature dictionary: one stored unit-norm feature per training sample,
/// keyed by index label. The row count is fixed at construction.
class Dictionary {
 public:
  /// Initializes every entry from `initial` (entries start as z^0).
  explicit Dictionary(const FeatureMatrix& initial, int epoch = 0);

  std::size_t size() const noexcept { return entries_.rows(); }
  std::size_t dim() const noexcept { return entries_.dim(); }
  int epoch_of_last_reinit() const noexcept { return last_reinit_epoch_; }

  std::span<const float> row(Label i) const;
  const FeatureMatrix& entries() const noexcept { return entries_; }

  /// Moving-average update of one entry: normalize((old + z) / 2).
  /// At step 0 the entry is set to z directly.
  /// Throws kIndexOutOfRange, kDimensionMismatch, or kZeroNormRow when
  /// old == -z so the mean vanishes.
  void update(Label index, std::span<const double> z, std::int64_t step);
  void update(Label index, std::span<const float> z, std::int64_t step);

  /// Replaces every entry with the given features (bitwise copy).
  void reinit(const FeatureMatrix& features, int epoch);

 private:
  FeatureMatrix entries_;
  int last_reinit_epoch_ = 0;
};

}  // namespace ssml

#endif  // SSML_FEATURESTORE_HPP
