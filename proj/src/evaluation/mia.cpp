// SPDX-License-Identifier: Apache-2.0
#include "locun/evaluation/mia.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "locun/error.hpp"
#include "locun/nn/engine.hpp"

namespace locun::eval {

namespace {

constexpr std::size_t kEvalChunk = 256;

double dot(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

const char* to_string(MiaFeature f) noexcept { return f == MiaFeature::correctness ? "correctness" : "confidence"; }

double accuracy(const nn::Model& model, const data::DataView& view) {
  if (view.empty()) throw ValidationError("accuracy of an empty set is undefined");
  std::size_t correct = 0;
  for (std::size_t b = 0; b < view.size(); b += kEvalChunk) {
    const nn::LabeledBatch batch = view.slice(b, std::min(view.size(), b + kEvalChunk));
    const std::vector<int> pred = nn::argmax(nn::forward(model, batch.features, batch.size));
    for (std::size_t i = 0; i < batch.size; ++i) correct += pred[i] == batch.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(view.size());
}

FeatureMatrix mia_features(const nn::Model& model, const data::DataView& view, MiaFeature kind) {
  FeatureMatrix f;
  f.rows = view.size();
  f.cols = kind == MiaFeature::correctness ? model.num_classes() : 1;
  f.values.assign(f.rows * f.cols, 0.0);
  for (std::size_t b = 0; b < view.size(); b += kEvalChunk) {
    const nn::LabeledBatch batch = view.slice(b, std::min(view.size(), b + kEvalChunk));
    const nn::Logits z = nn::forward(model, batch.features, batch.size);
    const std::vector<int> pred = nn::argmax(z);
    const std::vector<double> prob = kind == MiaFeature::confidence ? nn::softmax(z) : std::vector<double>{};
    for (std::size_t i = 0; i < batch.size; ++i) {
      const std::size_t r = b + i;
      const auto c = static_cast<std::size_t>(pred[i]);
      if (kind == MiaFeature::correctness) {
        f.values[r * f.cols + c] = 1.0;
      } else {
        f.values[r] = prob[i * z.classes + c];
      }
    }
  }
  return f;
}

void LinearSvm::fit(const FeatureMatrix& x, const std::vector<bool>& seen) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  if (seen.size() != n) throw DimensionError("svm: label count does not match rows");
  if (n == 0) throw ValidationError("svm: no training rows");

  mean_.assign(d, 0.0);
  scale_.assign(d, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) mean_[k] += x.row(i)[k];
  for (double& m : mean_) m /= static_cast<double>(n);
  for (std::size_t k = 0; k < d; ++k) {
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x.row(i)[k] - mean_[k]) * (x.row(i)[k] - mean_[k]);
    var /= static_cast<double>(n);
    if (var > 0.0) scale_[k] = 1.0 / std::sqrt(var);
  }
  std::vector<double> z(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) z[i * d + k] = (x.row(i)[k] - mean_[k]) * scale_[k];

  std::vector<double> y(n);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = seen[i] ? 1.0 : -1.0;
    positives += seen[i];
  }
  w_.assign(d, 0.0);
  iterations_ = 0;
  converged_ = true;
  if (positives == 0 || positives == n) {
    b_ = positives == n ? 1.0 : -1.0;
    return;
  }

  std::vector<double> alpha(n, 0.0), grad(n, -1.0), kdiag(n);
  for (std::size_t i = 0; i < n; ++i) kdiag[i] = dot(&z[i * d], &z[i * d], d);
  auto in_up = [&](std::size_t t) { return y[t] > 0 ? alpha[t] < c_ : alpha[t] > 0.0; };
  auto in_low = [&](std::size_t t) { return y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < c_; };

  converged_ = false;
  std::vector<double> ki(n), kj(n);
  while (iterations_ < max_iter_) {
    std::size_t i = n, j = n;
    double big = -std::numeric_limits<double>::infinity();
    double small = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > big) {
        big = v;
        i = t;
      }
      if (in_low(t) && v < small) {
        small = v;
        j = t;
      }
    }
    if (i == n || j == n || big - small < tol_) {
      converged_ = true;
      break;
    }
    const double* zi = &z[i * d];
    const double* zj = &z[j * d];
    const double eta = std::max(kdiag[i] + kdiag[j] - 2.0 * dot(zi, zj, d), 1e-12);
    double step = (big - small) / eta;
    const double room_i = y[i] > 0 ? c_ - alpha[i] : alpha[i];
    const double room_j = y[j] > 0 ? alpha[j] : c_ - alpha[j];
    step = std::min({step, room_i, room_j});
    alpha[i] += y[i] * step;
    alpha[j] -= y[j] * step;
    if (step == room_i) alpha[i] = y[i] > 0 ? c_ : 0.0;
    if (step == room_j) alpha[j] = y[j] > 0 ? 0.0 : c_;
    for (std::size_t k = 0; k < d; ++k) w_[k] += step * (zi[k] - zj[k]);
    for (std::size_t t = 0; t < n; ++t) {
      const double* zt = &z[t * d];
      grad[t] += y[t] * step * (dot(zt, zi, d) - dot(zt, zj, d));
    }
    ++iterations_;
  }

  // Bias from free support vectors, or the midpoint of the feasible range.
  double sum = 0.0;
  std::size_t free = 0;
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    const bool at_upper = alpha[t] >= c_;
    const bool at_lower = alpha[t] <= 0.0;
    if (!at_upper && !at_lower) {
      sum += yg;
      ++free;
    } else if ((y[t] > 0) == at_upper) {
      lb = std::max(lb, yg);
    } else {
      ub = std::min(ub, yg);
    }
  }
  b_ = free > 0 ? -sum / static_cast<double>(free) : -(ub + lb) / 2.0;
}

double LinearSvm::decision(const double* row) const {
  double s = b_;
  for (std::size_t k = 0; k < w_.size(); ++k) s += w_[k] * (row[k] - mean_[k]) * scale_[k];
  return s;
}

MIAResult mia_from_features(const FeatureMatrix& seen, const FeatureMatrix& unseen, const FeatureMatrix& forget,
                            MiaFeature kind, Attacker& attacker) {
  if (forget.rows == 0) throw ValidationError("mia: forget set is empty");
  if (seen.rows == 0 || unseen.rows == 0) throw ValidationError("mia: calibration sets must be non-empty");
  if (seen.cols != unseen.cols || seen.cols != forget.cols) throw DimensionError("mia: feature widths differ");

  FeatureMatrix calib;
  calib.cols = seen.cols;
  calib.rows = seen.rows + unseen.rows;
  calib.values = seen.values;
  calib.values.insert(calib.values.end(), unseen.values.begin(), unseen.values.end());
  std::vector<bool> labels(calib.rows, false);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(seen.rows), true);
  attacker.fit(calib, labels);

  MIAResult r;
  r.feature_kind = kind;
  std::size_t right = 0;
  for (std::size_t i = 0; i < calib.rows; ++i) right += attacker.predicts_seen(calib.row(i)) == labels[i];
  r.attacker_train_acc = static_cast<double>(right) / static_cast<double>(calib.rows);
  if (r.attacker_train_acc <= 0.55) {
    r.warnings.push_back(std::string("mia/") + to_string(kind) + ": attacker is near chance on calibration data (" +
                         std::to_string(r.attacker_train_acc) + ")");
  }
  r.forget_size = forget.rows;
  for (std::size_t i = 0; i < forget.rows; ++i) r.tn += !attacker.predicts_seen(forget.row(i));
  r.score = static_cast<double>(r.tn) / static_cast<double>(r.forget_size);
  return r;
}

MIAResult mia_score(const nn::Model& model, const data::DataView& calib_seen, const data::DataView& calib_unseen,
                    const data::DataView& forget, MiaFeature kind) {
  LinearSvm svm;
  return mia_from_features(mia_features(model, calib_seen, kind), mia_features(model, calib_unseen, kind),
                           mia_features(model, forget, kind), kind, svm);
}

}  // namespace locun::eval
