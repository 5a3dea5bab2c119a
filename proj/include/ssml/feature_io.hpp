#ifndef SSML_FEATURE_IO_HPP
#define SSML_FEATURE_IO_HPP

#include <filesystem>
#include <span>
#include <vector>

#include "ssml/featurestore.hpp"

namespace ssml {

// Feature file: "SSMLFT01", u64 n, u64 d, n*d f32, all little-endian.
// Label file:   "SSMLLB01", u64 n, n u32 identity ids, little-endian.

void write_features(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_features(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path,
                  std::span<const IdentityId> ids);
std::vector<IdentityId> read_labels(const std::filesystem::path& path);

}  // namespace ssml

#endif  // SSML_FEATURE_IO_HPP
