// SPDX-License-Identifier: Apache-2.0
#include "locun/nn/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "locun/error.hpp"

namespace locun::nn {
namespace {

// acts[0] is the input, acts[i + 1] the output of layer i.
struct Trace {
  std::vector<std::vector<double>> acts;
};

void check_input(const Model& model, std::size_t feature_count, std::size_t count) {
  if (count == 0) throw DimensionError("empty batch");
  if (feature_count != count * model.input_numel()) {
    throw DimensionError("batch has " + std::to_string(feature_count) + " feature values, expected " +
                         std::to_string(count) + " x " + model.input_shape().str());
  }
}

void dense_forward(const LayerSpec& l, const double* w, const double* x, double* y, std::size_t n) {
  const std::size_t in = l.in_shape.numel();
  const std::size_t out = l.out_features;
  const std::size_t g = l.group_size();
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x + s * in;
    double* ys = y + s * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wo = w + o * g;
      double acc = l.has_bias ? wo[in] : 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += wo[i] * xs[i];
      ys[o] = acc;
    }
  }
}

void dense_backward(const LayerSpec& l, const double* w, const double* x, const double* dy, double* dw,
                    double* dx, std::size_t n) {
  const std::size_t in = l.in_shape.numel();
  const std::size_t out = l.out_features;
  const std::size_t g = l.group_size();
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x + s * in;
    const double* dys = dy + s * out;
    double* dxs = dx ? dx + s * in : nullptr;
    for (std::size_t o = 0; o < out; ++o) {
      const double d = dys[o];
      if (d == 0.0) continue;
      double* dwo = dw + o * g;
      const double* wo = w + o * g;
      for (std::size_t i = 0; i < in; ++i) dwo[i] += d * xs[i];
      if (l.has_bias) dwo[in] += d;
      if (dxs)
        for (std::size_t i = 0; i < in; ++i) dxs[i] += wo[i] * d;
    }
  }
}

struct ConvDims {
  std::size_t c, h, w, k, oh, ow, kernel, pad, g;
};

ConvDims conv_dims(const LayerSpec& l) {
  return {l.in_shape.dims[0], l.in_shape.dims[1], l.in_shape.dims[2], l.out_channels, l.out_shape.dims[1],
          l.out_shape.dims[2], l.kernel,          l.padding,          l.group_size()};
}

void conv_forward(const LayerSpec& l, const double* w, const double* x, double* y, std::size_t n) {
  const ConvDims d = conv_dims(l);
  const std::size_t in_sz = d.c * d.h * d.w;
  const std::size_t out_sz = d.k * d.oh * d.ow;
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x + s * in_sz;
    double* ys = y + s * out_sz;
    for (std::size_t k = 0; k < d.k; ++k) {
      const double* wk = w + k * d.g;
      const double bias = l.has_bias ? wk[d.c * d.kernel * d.kernel] : 0.0;
      for (std::size_t oy = 0; oy < d.oh; ++oy) {
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
          double acc = bias;
          for (std::size_t c = 0; c < d.c; ++c) {
            for (std::size_t ky = 0; ky < d.kernel; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(d.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
              const double* xrow = xs + (c * d.h + static_cast<std::size_t>(iy)) * d.w;
              const double* wrow = wk + (c * d.kernel + ky) * d.kernel;
              for (std::size_t kx = 0; kx < d.kernel; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(d.pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                acc += wrow[kx] * xrow[ix];
              }
            }
          }
          ys[(k * d.oh + oy) * d.ow + ox] = acc;
        }
      }
    }
  }
}

void conv_backward(const LayerSpec& l, const double* w, const double* x, const double* dy, double* dw, double* dx,
                   std::size_t n) {
  const ConvDims d = conv_dims(l);
  const std::size_t in_sz = d.c * d.h * d.w;
  const std::size_t out_sz = d.k * d.oh * d.ow;
  for (std::size_t s = 0; s < n; ++s) {
    const double* xs = x + s * in_sz;
    const double* dys = dy + s * out_sz;
    double* dxs = dx ? dx + s * in_sz : nullptr;
    for (std::size_t k = 0; k < d.k; ++k) {
      const double* wk = w + k * d.g;
      double* dwk = dw + k * d.g;
      for (std::size_t oy = 0; oy < d.oh; ++oy) {
        for (std::size_t ox = 0; ox < d.ow; ++ox) {
          const double g = dys[(k * d.oh + oy) * d.ow + ox];
          if (g == 0.0) continue;
          if (l.has_bias) dwk[d.c * d.kernel * d.kernel] += g;
          for (std::size_t c = 0; c < d.c; ++c) {
            for (std::size_t ky = 0; ky < d.kernel; ++ky) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(d.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
              const std::size_t row = (c * d.h + static_cast<std::size_t>(iy)) * d.w;
              const std::size_t wrow = (c * d.kernel + ky) * d.kernel;
              for (std::size_t kx = 0; kx < d.kernel; ++kx) {
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(d.pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                dwk[wrow + kx] += g * xs[row + static_cast<std::size_t>(ix)];
                if (dxs) dxs[row + static_cast<std::size_t>(ix)] += g * wk[wrow + kx];
              }
            }
          }
        }
      }
    }
  }
}

Trace run_forward(const Model& model, std::span<const double> params, std::span<const float> features,
                  std::size_t n) {
  check_input(model, features.size(), n);
  Trace t;
  t.acts.reserve(model.num_layers() + 1);
  t.acts.emplace_back(features.begin(), features.end());
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    const LayerSpec& l = model.layer(i);
    const std::vector<double>& x = t.acts.back();
    std::vector<double> y(n * l.out_shape.numel());
    const double* w = params.data() + model.layer_range(i).begin;
    switch (l.kind) {
      case LayerKind::dense:
        dense_forward(l, w, x.data(), y.data(), n);
        break;
      case LayerKind::conv2d:
        conv_forward(l, w, x.data(), y.data(), n);
        break;
      case LayerKind::relu:
        for (std::size_t e = 0; e < y.size(); ++e) y[e] = x[e] > 0.0 ? x[e] : 0.0;
        break;
      case LayerKind::flatten:
        y = x;
        break;
    }
    t.acts.push_back(std::move(y));
  }
  for (double v : t.acts.back()) {
    if (!std::isfinite(v)) throw NumericError("non-finite logit in forward pass");
  }
  return t;
}

std::vector<double> widen(std::span<const float> p) { return {p.begin(), p.end()}; }

void check_labels(const Model& model, const LabeledBatch& batch) {
  if (batch.size == 0) throw DimensionError("empty batch");
  if (batch.labels.size() != batch.size) throw DimensionError("label count does not match batch size");
  const auto classes = static_cast<int>(model.num_classes());
  for (int y : batch.labels) {
    // A single-output model is a scalar regressor under squared loss; any label is a target.
    if (classes > 1 && (y < 0 || y >= classes)) {
      throw DimensionError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

// Loss of the logits (mean over batch) and, if requested, dL/dlogits.
double head_loss(const Logits& z, std::span<const int> labels, LossKind kind, std::vector<double>* dz) {
  const std::size_t n = z.size;
  const std::size_t c = z.classes;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  if (dz) dz->assign(n * c, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    auto row = z.row(s);
    const int y = labels[s];
    if (kind == LossKind::cross_entropy) {
      const double mx = *std::max_element(row.begin(), row.end());
      double sum = 0.0;
      for (double v : row) sum += std::exp(v - mx);
      const double lse = mx + std::log(sum);
      total += lse - row[static_cast<std::size_t>(y)];
      if (dz) {
        for (std::size_t k = 0; k < c; ++k) {
          const double p = std::exp(row[k] - lse);
          (*dz)[s * c + k] = (p - (static_cast<int>(k) == y ? 1.0 : 0.0)) * inv_n;
        }
      }
    } else {
      for (std::size_t k = 0; k < c; ++k) {
        const double target = c == 1 ? static_cast<double>(y) : (static_cast<int>(k) == y ? 1.0 : 0.0);
        const double r = row[k] - target;
        total += r * r;
        if (dz) (*dz)[s * c + k] = 2.0 * r * inv_n;
      }
    }
  }
  const double loss = total * inv_n;
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return loss;
}

double l1_norm(std::span<const double> p) {
  double s = 0.0;
  for (double v : p) s += std::abs(v);
  return s;
}

}  // namespace

Logits forward(const Model& model, std::span<const float> features, std::size_t count) {
  const std::vector<double> p = widen(model.params());
  Trace t = run_forward(model, p, features, count);
  return Logits{std::move(t.acts.back()), count, model.num_classes()};
}

double loss_at(const Model& model, std::span<const double> params, const LabeledBatch& batch,
               const LossOptions& opts) {
  check_labels(model, batch);
  if (params.size() != model.num_params()) throw DimensionError("parameter vector length mismatch");
  Trace t = run_forward(model, params, batch.features, batch.size);
  const Logits z{std::move(t.acts.back()), batch.size, model.num_classes()};
  double loss = head_loss(z, batch.labels, opts.kind, nullptr);
  if (opts.l1_lambda > 0.0) loss += opts.l1_lambda * l1_norm(params);
  return opts.negate ? -loss : loss;
}

LossAndGrads loss_and_grads(const Model& model, const LabeledBatch& batch, const LossOptions& opts) {
  check_labels(model, batch);
  const std::vector<double> p = widen(model.params());
  Trace t = run_forward(model, p, batch.features, batch.size);
  const std::size_t n = batch.size;

  std::vector<double> dy;
  const Logits z{t.acts.back(), n, model.num_classes()};
  LossAndGrads out;
  out.loss = head_loss(z, batch.labels, opts.kind, &dy);
  out.grads.assign(p.size(), 0.0);

  for (std::size_t i = model.num_layers(); i-- > 0;) {
    const LayerSpec& l = model.layer(i);
    const std::vector<double>& x = t.acts[i];
    // The input gradient of the first layer is never needed.
    const bool need_dx = i > 0;
    std::vector<double> dx(need_dx ? x.size() : 0, 0.0);
    const std::size_t off = model.layer_range(i).begin;
    switch (l.kind) {
      case LayerKind::dense:
        dense_backward(l, p.data() + off, x.data(), dy.data(), out.grads.data() + off, need_dx ? dx.data() : nullptr,
                       n);
        break;
      case LayerKind::conv2d:
        conv_backward(l, p.data() + off, x.data(), dy.data(), out.grads.data() + off, need_dx ? dx.data() : nullptr,
                      n);
        break;
      case LayerKind::relu:
        if (need_dx)
          for (std::size_t e = 0; e < x.size(); ++e) dx[e] = x[e] > 0.0 ? dy[e] : 0.0;
        break;
      case LayerKind::flatten:
        if (need_dx) dx = dy;
        break;
    }
    dy = std::move(dx);
  }

  if (opts.l1_lambda > 0.0) {
    out.loss += opts.l1_lambda * l1_norm(p);
    for (std::size_t j = 0; j < p.size(); ++j) {
      // Subgradient of |x| at 0 is taken as 0.
      const double sgn = p[j] > 0.0 ? 1.0 : (p[j] < 0.0 ? -1.0 : 0.0);
      out.grads[j] += opts.l1_lambda * sgn;
    }
  }
  if (opts.negate)
    for (double& g : out.grads) g = -g;
  return out;
}

double finite_diff_grad(const Model& model, const LabeledBatch& batch, std::size_t j, double eps,
                        const LossOptions& opts) {
  if (!(eps > 0.0)) throw ConfigError("finite difference step must be positive");
  if (j >= model.num_params()) throw DimensionError("parameter index out of range");
  std::vector<double> p = widen(model.params());
  LossOptions o = opts;
  o.negate = false;
  const double base = p[j];
  p[j] = base + eps;
  const double up = loss_at(model, p, batch, o);
  p[j] = base - eps;
  const double down = loss_at(model, p, batch, o);
  const double g = (up - down) / (2.0 * eps);
  return opts.negate ? -g : g;
}

std::vector<int> argmax(const Logits& logits) {
  std::vector<int> out(logits.size);
  for (std::size_t s = 0; s < logits.size; ++s) {
    auto row = logits.row(s);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k] > row[best]) best = k;
    out[s] = static_cast<int>(best);
  }
  return out;
}

std::vector<double> softmax(const Logits& logits) {
  std::vector<double> out(logits.values.size());
  for (std::size_t s = 0; s < logits.size; ++s) {
    auto row = logits.row(s);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      out[s * logits.classes + k] = std::exp(row[k] - mx);
      sum += out[s * logits.classes + k];
    }
    for (std::size_t k = 0; k < row.size(); ++k) out[s * logits.classes + k] /= sum;
  }
  return out;
}

double min_relu_margin(const Model& model, std::span<const float> features, std::size_t count) {
  const std::vector<double> p = widen(model.params());
  const Trace t = run_forward(model, p, features, count);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    if (model.layer(i).kind != LayerKind::relu) continue;
    for (double v : t.acts[i]) m = std::min(m, std::abs(v));
  }
  return m;
}

}  // namespace locun::nn
