// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "locun/data/dataset.hpp"
#include "locun/nn/model.hpp"

namespace locun::eval {

/// Fraction of argmax-correct predictions (ties to the lowest class index).
double accuracy(const nn::Model& model, const data::DataView& view);

enum class MiaFeature { correctness, confidence };

const char* to_string(MiaFeature f) noexcept;

/// Row-major feature matrix.
struct FeatureMatrix {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  const double* row(std::size_t i) const { return values.data() + i * cols; }
};

/// correctness: predicted class one-hot (C columns); confidence: softmax
/// probability of the predicted class (1 column).
FeatureMatrix mia_features(const nn::Model& model, const data::DataView& view, MiaFeature kind);

/// Binary seen/unseen classifier.
class Attacker {
 public:
  virtual ~Attacker() = default;
  /// seen[i] is true for rows drawn from training data.
  virtual void fit(const FeatureMatrix& x, const std::vector<bool>& seen) = 0;
  virtual bool predicts_seen(const double* row) const = 0;
};

/// Soft-margin linear SVM (hinge loss, penalty C) on standardized features,
/// solved in the dual by SMO with maximal-violating-pair selection.
class LinearSvm : public Attacker {
 public:
  explicit LinearSvm(double c = 10.0, double tolerance = 1e-3, std::size_t max_iterations = 100000)
      : c_(c), tol_(tolerance), max_iter_(max_iterations) {}

  void fit(const FeatureMatrix& x, const std::vector<bool>& seen) override;
  bool predicts_seen(const double* row) const override { return decision(row) > 0.0; }

  /// w . standardize(x) + b; positive means seen.
  double decision(const double* row) const;
  std::size_t iterations() const noexcept { return iterations_; }
  bool converged() const noexcept { return converged_; }

 private:
  double c_;
  double tol_;
  std::size_t max_iter_;
  std::vector<double> mean_, scale_, w_;
  double b_ = 0.0;
  std::size_t iterations_ = 0;
  bool converged_ = false;
};

struct MIAResult {
  MiaFeature feature_kind = MiaFeature::correctness;
  std::size_t tn = 0;
  std::size_t forget_size = 0;
  double score = 0.0;
  double attacker_train_acc = 0.0;
  std::vector<std::string> warnings;
};

/// Trains `attacker` on seen (label seen) against unseen features, then
/// counts forget rows it calls unseen. score = tn / |forget|.
MIAResult mia_from_features(const FeatureMatrix& seen, const FeatureMatrix& unseen, const FeatureMatrix& forget,
                            MiaFeature kind, Attacker& attacker);

/// Feature extraction plus a LinearSvm attacker with C = 1.
MIAResult mia_score(const nn::Model& model, const data::DataView& calib_seen, const data::DataView& calib_unseen,
                    const data::DataView& forget, MiaFeature kind);

}  // namespace locun::eval
