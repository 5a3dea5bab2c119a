#ifndef SSML_TESTS_SUPPORT_HPP
#define SSML_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ssml/featurestore.hpp"

namespace ssml::testing {

inline std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (auto& x : v) {
      x = normal(rng);
      sq += x * x;
    }
  } while (sq < 1e-12);
  for (auto& x : v) x /= std::sqrt(sq);
  return v;
}

/// n unit rows around `clusters` random centres with Gaussian jitter, so
/// similarity structure is neither empty nor complete.
inline FeatureMatrix clustered_rows(std::size_t n, std::size_t dim, std::size_t clusters,
                                    double jitter, std::mt19937_64& rng) {
  std::vector<std::vector<double>> centres;
  for (std::size_t c = 0; c < clusters; ++c) centres.push_back(random_unit(dim, rng));
  std::uniform_int_distribution<std::size_t> pick(0, clusters - 1);
  std::normal_distribution<double> normal(0.0, jitter);
  FeatureMatrix m(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto v = centres[pick(rng)];
    double sq = 0.0;
    for (auto& x : v) {
      x += normal(rng);
      sq += x * x;
    }
    for (std::size_t k = 0; k < dim; ++k) m.row(i)[k] = static_cast<float>(v[k] / std::sqrt(sq));
  }
  return m;
}

inline FeatureMatrix matrix_from(const std::vector<std::vector<float>>& rows) {
  FeatureMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) m.row(i)[k] = rows[i][k];
  }
  return m;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ssml_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace ssml::testing

#endif  // SSML_TESTS_SUPPORT_HPP
