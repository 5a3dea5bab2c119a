#include "ssml/feature_io.hpp"

#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "ssml/error.hpp"

namespace ssml {

namespace {
constexpr std::string_view kFeatureMagic = "SSMLFT01";
constexpr std::string_view kLabelMagic = "SSMLLB01";
}  // namespace

void write_features(const std::filesystem::path& path, const FeatureMatrix& m) {
  detail::BinaryWriter out(path);
  out.magic(kFeatureMagic);
  out.u64(m.rows());
  out.u64(m.dim());
  for (const float v : m.data()) out.f32(v);
  out.finish();
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kFeatureMagic);
  const std::uint64_t n = in.u64();
  const std::uint64_t d = in.u64();
  if (n == 0 || d == 0) {
    throw Error(ErrorCode::kFormat, path.string() + ": empty feature matrix");
  }
  if (in.remaining() / 4 / d < n) {
    throw Error(ErrorCode::kFormat, path.string() + ": truncated file");
  }
  std::vector<float> data(n * d);
  for (auto& v : data) {
    v = in.f32();
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kFormat, path.string() + ": non-finite feature value");
    }
  }
  in.expect_end();
  return FeatureMatrix(n, d, std::move(data));
}

void write_labels(const std::filesystem::path& path,
                  std::span<const IdentityId> ids) {
  detail::BinaryWriter out(path);
  out.magic(kLabelMagic);
  out.u64(ids.size());
  for (const IdentityId id : ids) out.u32(id);
  out.finish();
}

std::vector<IdentityId> read_labels(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kLabelMagic);
  const std::uint64_t n = in.u64();
  if (in.remaining() / 4 < n) {
    throw Error(ErrorCode::kFormat, path.string() + ": truncated file");
  }
  std::vector<IdentityId> ids(n);
  for (auto& id : ids) id = in.u32();
  in.expect_end();
  return ids;
}

}  // namespace ssml
