#include "ssml/featurestore.hpp"

#include <cmath>
#include <string>

#include "ssml/error.hpp"

namespace ssml {
namespace {

constexpr double kMinNorm = 1e-12;

template <class T>
void store_normalized(std::span<const T> v, std::span<float> out,
                      std::size_t row_index) {
  double sq = 0.0;
  for (const T x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  const double norm = std::sqrt(sq);
  if (!(norm > kMinNorm)) {
    throw Error(ErrorCode::kZeroNormRow,
                "row " + std::to_string(row_index) + " has norm " +
                    std::to_string(norm));
  }
  for (std::size_t k = 0; k < v.size(); ++k) {
    out[k] = static_cast<float>(static_cast<double>(v[k]) / norm);
  }
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), data_(rows * dim, 0.0f) {}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim,
                             std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (data_.size() != rows_ * dim_) {
    throw Error(ErrorCode::kShapeMismatch,
                "feature buffer holds " + std::to_string(data_.size()) +
                    " values, expected " + std::to_string(rows_ * dim_));
  }
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const Label> indices) const {
  FeatureMatrix out(indices.size(), dim_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows_) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "row " + std::to_string(indices[r]) + " of " +
                      std::to_string(rows_));
    }
    const auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  }
  return acc;
}

double dot(std::span<const double> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    acc += a[k] * static_cast<double>(b[k]);
  }
  return acc;
}

double squared_norm(std::span<const float> v) { return dot(v, v); }

FeatureMatrix normalize_rows(const FeatureMatrix& m) {
  FeatureMatrix out(m.rows(), m.dim());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    store_normalized(m.row(i), out.row(i), i);
  }
  return out;
}

Dictionary::Dictionary(const FeatureMatrix& initial, int epoch)
    : entries_(initial), last_reinit_epoch_(epoch) {
  if (initial.rows() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "dictionary needs at least one entry");
  }
}

std::span<const float> Dictionary::row(Label i) const {
  if (i >= entries_.rows()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "label " + std::to_string(i) + " outside dictionary of size " +
                    std::to_string(entries_.rows()));
  }
  return entries_.row(i);
}

namespace {

template <class T>
void update_entry(FeatureMatrix& entries, Label index, std::span<const T> z,
                  std::int64_t step) {
  if (index >= entries.rows()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "label " + std::to_string(index) + " outside dictionary of size " +
                    std::to_string(entries.rows()));
  }
  if (z.size() != entries.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature has dimension " + std::to_string(z.size()) +
                    ", dictionary stores " + std::to_string(entries.dim()));
  }
  auto target = entries.row(index);
  if (step <= 0) {
    store_normalized(z, target, index);
    return;
  }
  std::vector<double> mean(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    mean[k] = (static_cast<double>(target[k]) + static_cast<double>(z[k])) / 2.0;
  }
  store_normalized(std::span<const double>(mean), target, index);
}

}  // namespace

void Dictionary::update(Label index, std::span<const double> z,
                        std::int64_t step) {
  update_entry(entries_, index, z, step);
}

void Dictionary::update(Label index, std::span<const float> z,
                        std::int64_t step) {
  update_entry(entries_, index, z, step);
}

void Dictionary::reinit(const FeatureMatrix& features, int epoch) {
  if (features.rows() != entries_.rows() || features.dim() != entries_.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "reinit with " + std::to_string(features.rows()) + "x" +
                    std::to_string(features.dim()) + " features, dictionary is " +
                    std::to_string(entries_.rows()) + "x" +
                    std::to_string(entries_.dim()));
  }
  entries_ = features;
  last_reinit_epoch_ = epoch;
}

}  // namespace ssml
