#include "ssml/similarity.hpp"

#include <algorithm>
#include <string>

#include "ssml/error.hpp"
#include "ssml/parallel.hpp"

namespace ssml {
namespace {

// Row tile edge for the blocked D * D^T kernel. A pair of 64-row tiles of
// 16..256-dim doubles stays within L2.
constexpr std::size_t kTile = 64;

void check_tau(float tau) {
  if (!(tau >= -1.0f && tau <= 1.0f)) {
    throw Error(ErrorCode::kInvalidArgument,
                "tau must lie in [-1, 1], got " + std::to_string(tau));
  }
}

inline float masked(double s, float tau) {
  const auto v = static_cast<float>(s);
  return v < tau ? 0.0f : v;
}

// Widened copy so the inner loop does not convert on every multiply; the
// products are the same doubles either way.
std::vector<double> widen(const FeatureMatrix& m) {
  std::vector<double> out(m.data().size());
  std::copy(m.data().begin(), m.data().end(), out.begin());
  return out;
}

inline double dot_rows(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t k = 0; k < d; ++k) acc += a[k] * b[k];
  return acc;
}

template <class T>
SimilarityVector ps_vector_impl(std::span<const T> z, const Dictionary& dict,
                                Label probe) {
  if (z.size() != dict.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "probe has dimension " + std::to_string(z.size()) +
                    ", dictionary stores " + std::to_string(dict.dim()));
  }
  SimilarityVector out{probe, std::vector<float>(dict.size())};
  const auto& entries = dict.entries();
  for (std::size_t j = 0; j < dict.size(); ++j) {
    const auto e = entries.row(j);
    double acc = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      acc += static_cast<double>(z[k]) * static_cast<double>(e[k]);
    }
    out.values[j] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace

void SimilarityMatrix::apply_threshold(float tau) {
  check_tau(tau);
  for (auto& v : values_) {
    if (v < tau) v = 0.0f;
  }
  thresholded_ = true;
  tau_ = tau;
}

SimilarityVector ps_vector(std::span<const float> z, const Dictionary& dict,
                           Label probe) {
  return ps_vector_impl(z, dict, probe);
}

SimilarityVector ps_vector(std::span<const double> z, const Dictionary& dict,
                           Label probe) {
  return ps_vector_impl(z, dict, probe);
}

SimilarityMatrix similarity_matrix(const FeatureMatrix& rows, float tau,
                                   unsigned threads) {
  check_tau(tau);
  const std::size_t n = rows.rows();
  const std::size_t d = rows.dim();
  const std::vector<double> wide = widen(rows);
  SimilarityMatrix sim(n);
  sim.thresholded_ = true;
  sim.tau_ = tau;

  // Upper-triangular tiles; the owner of tile row I also writes the mirrored
  // (J, I) tile, so no two tasks touch the same entry.
  const std::size_t tiles = (n + kTile - 1) / kTile;
  parallel_for(tiles, threads, [&](std::size_t ti) {
    const std::size_t i0 = ti * kTile;
    const std::size_t i1 = std::min(n, i0 + kTile);
    for (std::size_t tj = ti; tj < tiles; ++tj) {
      const std::size_t j0 = tj * kTile;
      const std::size_t j1 = std::min(n, j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i) {
        const double* a = wide.data() + i * d;
        float* out_row = sim.mutable_row(i);
        for (std::size_t j = std::max(j0, i); j < j1; ++j) {
          const float v = masked(dot_rows(a, wide.data() + j * d, d), tau);
          out_row[j] = v;
          sim.mutable_row(j)[i] = v;
        }
      }
    }
  });
  return sim;
}

SimilarityMatrix similarity_matrix(const Dictionary& dict, float tau,
                                   unsigned threads) {
  return similarity_matrix(dict.entries(), tau, threads);
}

void patch_similarity(SimilarityMatrix& sim, const Dictionary& dict,
                      std::span<const Label> changed, unsigned threads) {
  const std::size_t n = sim.size();
  if (dict.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "similarity matrix is " + std::to_string(n) +
                    " wide, dictionary holds " + std::to_string(dict.size()));
  }
  const float tau = sim.thresholded() ? sim.tau() : -1.0f;
  std::vector<Label> rows(changed.begin(), changed.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  for (const Label r : rows) {
    if (r >= n) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "label " + std::to_string(r) + " outside matrix of size " +
                      std::to_string(n));
    }
  }

  const auto& entries = dict.entries();
  // Rows first (each task owns its row), then mirror into columns serially.
  parallel_for(rows.size(), threads, [&](std::size_t t) {
    const Label i = rows[t];
    const auto a = entries.row(i);
    float* out_row = sim.mutable_row(i);
    for (std::size_t j = 0; j < n; ++j) out_row[j] = masked(dot(a, entries.row(j)), tau);
  });
  for (const Label i : rows) {
    const float* src = sim.mutable_row(i);
    for (std::size_t j = 0; j < n; ++j) sim.mutable_row(j)[i] = src[j];
  }
}

}  // namespace ssml
