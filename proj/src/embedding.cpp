#include "ssml/embedding.hpp"

#include <cmath>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "ssml/error.hpp"
#include "ssml/parallel.hpp"

namespace ssml {
namespace {

constexpr std::string_view kCheckpointMagic = "SSMLMD01";
constexpr double kMinNorm = 1e-12;

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound,
                      std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (auto& v : m.values) v = dist(rng);
  return m;
}

// out = W x + b
void affine(const Matrix& w, const Matrix& b, std::span<const double> x,
            std::vector<double>& out) {
  out.assign(w.rows, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    double acc = b.values[r];
    const double* row = w.values.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

// dW += g x^T, db += g
void outer_into(Matrix& dw, Matrix& db, std::span<const double> g,
                std::span<const double> x) {
  for (std::size_t r = 0; r < dw.rows; ++r) {
    double* row = dw.values.data() + r * dw.cols;
    for (std::size_t c = 0; c < dw.cols; ++c) row[c] += g[r] * x[c];
    db.values[r] += g[r];
  }
}

void check_shapes(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShapeMismatch, "parameter count differs");
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows != b[i].rows || a[i].cols != b[i].cols) {
      throw Error(ErrorCode::kShapeMismatch,
                  "parameter " + std::to_string(i) + " is " +
                      std::to_string(a[i].rows) + "x" + std::to_string(a[i].cols) +
                      ", got " + std::to_string(b[i].rows) + "x" +
                      std::to_string(b[i].cols));
    }
  }
}

void check_optimizer(double lr, double momentum) {
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    throw Error(ErrorCode::kInvalidArgument,
                "learning rate must be positive, got " + std::to_string(lr));
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "momentum must lie in [0, 1), got " + std::to_string(momentum));
  }
}

void validate_layout(const std::vector<Matrix>& params) {
  auto bad = [](const std::string& why) { throw Error(ErrorCode::kShapeMismatch, why); };
  if (params.size() != 2 && params.size() != 4) {
    bad("expected 2 or 4 parameter tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t l = 0; l < params.size(); l += 2) {
    const Matrix& w = params[l];
    const Matrix& b = params[l + 1];
    if (w.rows == 0 || w.cols == 0 || b.rows != w.rows || b.cols != 1) {
      bad("layer " + std::to_string(l / 2) + " has inconsistent weight/bias shapes");
    }
    if (w.values.size() != w.rows * w.cols || b.values.size() != b.rows) {
      bad("layer " + std::to_string(l / 2) + " buffer size mismatch");
    }
  }
  if (params.size() == 4 && params[2].cols != params[0].rows) {
    bad("hidden layer width disagrees between the two layers");
  }
}

}  // namespace

EmbeddingModel EmbeddingModel::initialize(const EmbeddingConfig& config) {
  if (config.input_dim == 0 || config.output_dim < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "need input_dim >= 1 and output_dim >= 2");
  }
  std::mt19937_64 rng(config.seed);
  std::vector<Matrix> params;
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(config.input_dim));
  if (config.hidden_dim == 0) {
    params.push_back(uniform_matrix(config.output_dim, config.input_dim, in_bound, rng));
    params.push_back(uniform_matrix(config.output_dim, 1, in_bound, rng));
  } else {
    const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
    params.push_back(uniform_matrix(config.hidden_dim, config.input_dim, in_bound, rng));
    params.push_back(uniform_matrix(config.hidden_dim, 1, in_bound, rng));
    params.push_back(uniform_matrix(config.output_dim, config.hidden_dim, hidden_bound, rng));
    params.push_back(uniform_matrix(config.output_dim, 1, hidden_bound, rng));
  }
  return from_parameters(std::move(params), config.learning_rate, config.momentum);
}

EmbeddingModel EmbeddingModel::from_parameters(std::vector<Matrix> params,
                                               double learning_rate,
                                               double momentum) {
  validate_layout(params);
  check_optimizer(learning_rate, momentum);
  EmbeddingModel model;
  model.buffers_.reserve(params.size());
  for (const Matrix& p : params) model.buffers_.emplace_back(p.rows, p.cols);
  model.params_ = std::move(params);
  model.learning_rate_ = learning_rate;
  model.momentum_ = momentum;
  return model;
}

std::size_t EmbeddingModel::input_dim() const noexcept {
  return params_.empty() ? 0 : params_.front().cols;
}

std::size_t EmbeddingModel::output_dim() const noexcept {
  return params_.empty() ? 0 : params_[params_.size() - 2].rows;
}

ForwardCache EmbeddingModel::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "input has dimension " + std::to_string(x.size()) +
                    ", model expects " + std::to_string(input_dim()));
  }
  ForwardCache cache;
  cache.input.assign(x.begin(), x.end());
  std::vector<double> y;
  if (has_hidden_layer()) {
    affine(params_[0], params_[1], x, cache.hidden);
    for (auto& h : cache.hidden) h = std::tanh(h);
    affine(params_[2], params_[3], cache.hidden, y);
  } else {
    affine(params_[0], params_[1], x, y);
  }
  double sq = 0.0;
  for (const double v : y) sq += v * v;
  cache.pre_norm = std::sqrt(sq);
  if (!(cache.pre_norm > kMinNorm)) {
    throw Error(ErrorCode::kZeroNormOutput,
                "embedding output norm " + std::to_string(cache.pre_norm));
  }
  cache.output.resize(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) cache.output[k] = y[k] / cache.pre_norm;
  return cache;
}

ForwardCache EmbeddingModel::forward(std::span<const float> x) const {
  const std::vector<double> wide(x.begin(), x.end());
  return forward(std::span<const double>(wide));
}

FeatureMatrix EmbeddingModel::embed(const FeatureMatrix& inputs,
                                    unsigned threads) const {
  FeatureMatrix out(inputs.rows(), output_dim());
  parallel_for(inputs.rows(), threads, [&](std::size_t i) {
    const ForwardCache cache = forward(inputs.row(i));
    auto dst = out.row(i);
    for (std::size_t k = 0; k < cache.output.size(); ++k) {
      dst[k] = static_cast<float>(cache.output[k]);
    }
  });
  return out;
}

Gradients EmbeddingModel::zero_gradients() const {
  Gradients grads;
  grads.reserve(params_.size());
  for (const Matrix& p : params_) grads.emplace_back(p.rows, p.cols);
  return grads;
}

Gradients EmbeddingModel::backward(const ForwardCache& cache,
                                   std::span<const double> grad_z) const {
  const std::size_t d = output_dim();
  if (grad_z.size() != d || cache.output.size() != d ||
      cache.input.size() != input_dim() ||
      (has_hidden_layer() && cache.hidden.size() != params_[0].rows)) {
    throw Error(ErrorCode::kShapeMismatch, "cache or gradient does not match model");
  }
  // dL/dy = (I - z z^T) dL/dz / |y|
  double along = 0.0;
  for (std::size_t k = 0; k < d; ++k) along += cache.output[k] * grad_z[k];
  std::vector<double> grad_y(d);
  for (std::size_t k = 0; k < d; ++k) {
    grad_y[k] = (grad_z[k] - along * cache.output[k]) / cache.pre_norm;
  }

  Gradients grads = zero_gradients();
  if (!has_hidden_layer()) {
    outer_into(grads[0], grads[1], grad_y, cache.input);
    return grads;
  }
  outer_into(grads[2], grads[3], grad_y, cache.hidden);
  const Matrix& w2 = params_[2];
  std::vector<double> grad_u(w2.cols, 0.0);
  for (std::size_t r = 0; r < w2.rows; ++r) {
    for (std::size_t c = 0; c < w2.cols; ++c) grad_u[c] += w2(r, c) * grad_y[r];
  }
  for (std::size_t c = 0; c < grad_u.size(); ++c) {
    grad_u[c] *= 1.0 - cache.hidden[c] * cache.hidden[c];
  }
  outer_into(grads[0], grads[1], grad_u, cache.input);
  return grads;
}

void scale(Gradients& grads, double factor) {
  for (Matrix& m : grads) {
    for (double& v : m.values) v *= factor;
  }
}

void accumulate(Gradients& into, const Gradients& other) {
  check_shapes(into, other);
  for (std::size_t p = 0; p < into.size(); ++p) {
    for (std::size_t k = 0; k < into[p].values.size(); ++k) {
      into[p].values[k] += other[p].values[k];
    }
  }
}

void EmbeddingModel::sgd_step(const Gradients& grads) {
  check_shapes(params_, grads);
  for (const Matrix& g : grads) {
    for (const double v : g.values) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNonFiniteGradient, "gradient contains a non-finite value");
      }
    }
  }
  for (std::size_t p = 0; p < params_.size(); ++p) {
    auto& param = params_[p].values;
    auto& buffer = buffers_[p].values;
    const auto& grad = grads[p].values;
    for (std::size_t k = 0; k < param.size(); ++k) {
      buffer[k] = momentum_ * buffer[k] + grad[k];
      param[k] -= learning_rate_ * buffer[k];
    }
  }
}

void EmbeddingModel::set_learning_rate(double lr) {
  check_optimizer(lr, momentum_);
  learning_rate_ = lr;
}

double lr_schedule(int epoch, double base_lr, double factor, int step_epochs) {
  if (epoch < 0 || step_epochs <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "epoch and decay interval must be nonnegative");
  }
  return base_lr * std::pow(factor, epoch / step_epochs);
}

void save_checkpoint(const std::filesystem::path& path, const EmbeddingModel& model) {
  detail::BinaryWriter out(path);
  out.magic(kCheckpointMagic);
  auto write_block = [&](std::span<const Matrix> block) {
    out.u32(static_cast<std::uint32_t>(block.size()));
    for (const Matrix& m : block) {
      out.u64(m.rows);
      out.u64(m.cols);
      for (const double v : m.values) out.f32(static_cast<float>(v));
    }
  };
  write_block(model.parameters());
  write_block(model.momentum_buffers());
  out.finish();
}

EmbeddingModel load_checkpoint(const std::filesystem::path& path,
                               double learning_rate, double momentum) {
  detail::BinaryReader in(path);
  in.expect_magic(kCheckpointMagic);
  auto read_block = [&] {
    const std::uint32_t count = in.u32();
    if (count > 16) throw Error(ErrorCode::kFormat, path.string() + ": implausible layer count");
    std::vector<Matrix> block;
    for (std::uint32_t l = 0; l < count; ++l) {
      const std::uint64_t rows = in.u64();
      const std::uint64_t cols = in.u64();
      if (rows == 0 || cols == 0 || in.remaining() / 4 / cols < rows) {
        throw Error(ErrorCode::kFormat, path.string() + ": bad tensor shape");
      }
      Matrix m(rows, cols);
      for (auto& v : m.values) v = in.f32();
      block.push_back(std::move(m));
    }
    return block;
  };
  std::vector<Matrix> params = read_block();
  std::vector<Matrix> buffers = read_block();
  in.expect_end();
  EmbeddingModel model =
      EmbeddingModel::from_parameters(std::move(params), learning_rate, momentum);
  check_shapes(std::vector<Matrix>(model.parameters().begin(), model.parameters().end()),
               buffers);
  for (std::size_t p = 0; p < buffers.size(); ++p) {
    model.momentum_buffers()[p] = std::move(buffers[p]);
  }
  return model;
}

}  // namespace ssml
