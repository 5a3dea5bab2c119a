#include "ssml/loss.hpp"

#include <cmath>
#include <string>

#include "ssml/error.hpp"
#include "ssml/parallel.hpp"

namespace ssml {
namespace {

void check_sigma(double sigma) {
  if (!(sigma > 0.0 && sigma <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "sigma must lie in (0, 1], got " + std::to_string(sigma));
  }
}

void check_probe(std::span<const double> probe, const Dictionary& dict) {
  if (probe.size() != dict.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "probe has dimension " + std::to_string(probe.size()) +
                    ", dictionary stores " + std::to_string(dict.dim()));
  }
}

// Adds weight * zbar_j to grad.
void axpy(std::vector<double>& grad, double weight, std::span<const float> entry) {
  for (std::size_t k = 0; k < grad.size(); ++k) {
    grad[k] += weight * static_cast<double>(entry[k]);
  }
}

double distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

}  // namespace

LossValue dtl(std::span<const double> probe, const Dictionary& dict,
              std::span<const Label> p_pos, std::span<const Label> n_hard,
              double sigma) {
  check_sigma(sigma);
  check_probe(probe, dict);
  LossValue out;
  out.grad_wrt_probe.assign(probe.size(), 0.0);
  for (const Label j : p_pos) {
    const auto entry = dict.row(j);
    const double residual = dot(probe, entry) - 1.0;
    out.positive_term += residual * residual;
    axpy(out.grad_wrt_probe, 2.0 * residual, entry);
  }
  for (const Label j : n_hard) {
    const auto entry = dict.row(j);
    const double residual = dot(probe, entry) + 1.0;
    out.negative_term += residual * residual;
    axpy(out.grad_wrt_probe, 2.0 * sigma * residual, entry);
  }
  out.total = out.positive_term + sigma * out.negative_term;
  return out;
}

LossValue general_triplet(std::span<const double> anchor,
                          std::span<const double> positive,
                          std::span<const double> negative, double margin) {
  if (positive.size() != anchor.size() || negative.size() != anchor.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "triplet members differ in dimension");
  }
  if (!(margin >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "margin must be nonnegative, got " + std::to_string(margin));
  }
  LossValue out;
  out.grad_wrt_probe.assign(anchor.size(), 0.0);
  const double d_ap = distance(anchor, positive);
  const double d_an = distance(anchor, negative);
  out.positive_term = d_ap;
  out.negative_term = d_an;
  const double hinge = d_ap - d_an + margin;
  if (hinge <= 0.0) return out;
  out.total = hinge;
  // d|a - x|/da = (a - x) / |a - x|; zero is taken at the kink a == x.
  for (std::size_t k = 0; k < anchor.size(); ++k) {
    double g = 0.0;
    if (d_ap > 0.0) g += (anchor[k] - positive[k]) / d_ap;
    if (d_an > 0.0) g -= (anchor[k] - negative[k]) / d_an;
    out.grad_wrt_probe[k] = g;
  }
  return out;
}

LossValue dictionary_triplet(std::span<const double> probe, const Dictionary& dict,
                             std::span<const Label> p_pos,
                             std::span<const Label> n_hard, double margin) {
  check_probe(probe, dict);
  LossValue out;
  out.grad_wrt_probe.assign(probe.size(), 0.0);
  auto widen = [&](Label j) {
    const auto e = dict.row(j);
    return std::vector<double>(e.begin(), e.end());
  };
  std::vector<std::vector<double>> negatives;
  negatives.reserve(n_hard.size());
  for (const Label j : n_hard) negatives.push_back(widen(j));
  for (const Label p : p_pos) {
    const auto positive = widen(p);
    for (const auto& negative : negatives) {
      const LossValue one = general_triplet(probe, positive, negative, margin);
      if (one.total <= 0.0) continue;
      out.total += one.total;
      out.positive_term += one.positive_term;
      out.negative_term += one.negative_term;
      for (std::size_t k = 0; k < probe.size(); ++k) {
        out.grad_wrt_probe[k] += one.grad_wrt_probe[k];
      }
    }
  }
  return out;
}

BatchLoss batch_dtl(std::span<const BatchItem> batch, const Dictionary& dict,
                    double sigma, unsigned threads) {
  if (batch.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "batch must not be empty");
  }
  BatchLoss out;
  out.per_probe.resize(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t b) {
    const BatchItem& item = batch[b];
    if (item.mining == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "batch item without mining result");
    }
    out.per_probe[b] = dtl(item.probe, dict, item.mining->p_pos,
                           item.mining->n_hard, sigma);
  });
  for (const LossValue& v : out.per_probe) {
    out.total += v.total;
    out.positive_term += v.positive_term;
    out.negative_term += v.negative_term;
  }
  return out;
}

}  // namespace ssml
