#ifndef SSML_EMBEDDING_HPP
#define SSML_EMBEDDING_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ssml/featurestore.hpp"

namespace ssml {

/// Row-major matrix of doubles; biases are stored as rows x 1.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct EmbeddingConfig {
  std::size_t input_dim = 32;
  std::size_t output_dim = 16;
  std::size_t hidden_dim = 0;  // 0: single affine layer
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

/// Activations kept from forward for the matching backward.
struct ForwardCache {
  std::vector<double> input;
  std::vector<double> hidden;  // tanh outputs; empty without a hidden layer
  std::vector<double> output;  // normalized embedding z
  double pre_norm = 0.0;       // |y| before normalization
};

/// Parameter gradients, one Matrix per parameter in parameters() order.
using Gradients = std::vector<Matrix>;

/// x -> normalize(W x + b), or with a hidden layer
/// x -> normalize(W2 tanh(W1 x + b1) + b2). Trained by SGD with momentum.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;

  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], seeded.
  static EmbeddingModel initialize(const EmbeddingConfig& config);

  /// Builds a model from explicit parameters ({W, b} or {W1, b1, W2, b2}).
  static EmbeddingModel from_parameters(std::vector<Matrix> params,
                                        double learning_rate, double momentum);

  std::size_t input_dim() const noexcept;
  std::size_t output_dim() const noexcept;
  bool has_hidden_layer() const noexcept { return params_.size() == 4; }

  /// Throws kDimensionMismatch on a wrong input size and kZeroNormOutput when
  /// the pre-normalization output vanishes.
  ForwardCache forward(std::span<const double> x) const;
  ForwardCache forward(std::span<const float> x) const;

  /// Embeds every row of `inputs` into a unit-norm feature matrix.
  FeatureMatrix embed(const FeatureMatrix& inputs, unsigned threads = 1) const;

  /// Exact parameter gradients given dL/dz. The normalization Jacobian
  /// (I - z z^T) / |y| is applied first.
  Gradients backward(const ForwardCache& cache, std::span<const double> grad_z) const;

  /// Zero-valued gradients shaped like the parameters.
  Gradients zero_gradients() const;

  /// buffer <- momentum * buffer + grad; param <- param - lr * buffer.
  /// Throws kNonFiniteGradient before touching any state.
  void sgd_step(const Gradients& grads);

  double learning_rate() const noexcept { return learning_rate_; }
  void set_learning_rate(double lr);
  double momentum() const noexcept { return momentum_; }

  std::span<const Matrix> parameters() const noexcept { return params_; }
  std::span<Matrix> parameters() noexcept { return params_; }
  std::span<const Matrix> momentum_buffers() const noexcept { return buffers_; }
  std::span<Matrix> momentum_buffers() noexcept { return buffers_; }

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;

 private:
  std::vector<Matrix> params_;
  std::vector<Matrix> buffers_;
  double learning_rate_ = 0.01;
  double momentum_ = 0.9;
};

/// Element-wise sum: into += other. Shapes must match.
void accumulate(Gradients& into, const Gradients& other);

/// grads *= factor
void scale(Gradients& grads, double factor);

/// Step decay: base_lr * factor^floor(epoch / step_epochs).
double lr_schedule(int epoch, double base_lr = 0.01, double factor = 0.1,
                   int step_epochs = 10);

/// Checkpoint: "SSMLMD01", u32 count, per parameter u64 rows, u64 cols and
/// f32 values; then u32 count and the momentum buffers in the same layout.
void save_checkpoint(const std::filesystem::path& path, const EmbeddingModel& model);
EmbeddingModel load_checkpoint(const std::filesystem::path& path,
                               double learning_rate = 0.01, double momentum = 0.9);

}  // namespace ssml

#endif  // SSML_EMBEDDING_HPP
