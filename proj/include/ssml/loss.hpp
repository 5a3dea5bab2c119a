#ifndef SSML_LOSS_HPP
#define SSML_LOSS_HPP

#include <span>
#include <vector>

#include "ssml/dplm.hpp"
#include "ssml/featurestore.hpp"

namespace ssml {

/// Scalar loss for one probe plus its gradient with respect to the probe
/// feature (before normalization backprop).
///
/// For the dictionary triplet loss, total = positive_term + sigma * negative_term.
/// For the margin triplet loss, positive_term and negative_term hold the summed
/// anchor-positive and anchor-negative distances of the active triplets.
struct LossValue {
  double total = 0.0;
  double positive_term = 0.0;
  double negative_term = 0.0;
  std::vector<double> grad_wrt_probe;
};

struct TripletConfig {
  double margin = 0.3;
  double sigma = 0.2;
};

/// Dictionary triplet loss:
///   sum_{j in p_pos} (z . zbar_j - 1)^2 + sigma * sum_{j in n_hard} (z . zbar_j + 1)^2
/// Gradients flow only into z; dictionary entries are constants.
LossValue dtl(std::span<const double> probe, const Dictionary& dict,
              std::span<const Label> p_pos, std::span<const Label> n_hard,
              double sigma);

/// max(0, |a - p| - |a - n| + margin), gradient with respect to the anchor.
LossValue general_triplet(std::span<const double> anchor,
                          std::span<const double> positive,
                          std::span<const double> negative, double margin);

/// Margin triplet loss summed over every (p, n) in p_pos x n_hard, with the
/// positive and negative taken from the dictionary.
LossValue dictionary_triplet(std::span<const double> probe, const Dictionary& dict,
                             std::span<const Label> p_pos,
                             std::span<const Label> n_hard, double margin);

struct BatchItem {
  std::span<const double> probe;
  const MiningResult* mining = nullptr;
};

struct BatchLoss {
  double total = 0.0;
  double positive_term = 0.0;
  double negative_term = 0.0;
  std::vector<LossValue> per_probe;
};

/// Sum of dtl over a nonempty batch. Elements may be evaluated in parallel;
/// the totals are reduced in batch order.
BatchLoss batch_dtl(std::span<const BatchItem> batch, const Dictionary& dict,
                    double sigma, unsigned threads = 1);

}  // namespace ssml

#endif  // SSML_LOSS_HPP
