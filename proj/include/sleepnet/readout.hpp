#pragma once

// Readout for the unsupervised network: spike-rate features are standardized,
// reduced by PCA to the smallest basis keeping a target share of variance,
// and classified by multinomial logistic regression.
//
// Only FittedReadout can transform unseen features, and it carries nothing but
// state fitted on the training matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "sleepnet/encoding.hpp"
#include "sleepnet/error.hpp"

namespace sleepnet {

using FeatureMatrix = Eigen::MatrixXd;  // rows are samples
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

inline void require_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + ": non-finite input");
}

// Spike counts over a presentation of t_image_ms, converted to Hz.
inline RowVectorXd aggregate_rates(std::span<const std::uint32_t> counts, double t_image_ms) {
  RowVectorXd row(static_cast<Eigen::Index>(counts.size()));
  const double scale = 1000.0 / t_image_ms;
  for (std::size_t i = 0; i < counts.size(); ++i) row[static_cast<Eigen::Index>(i)] = counts[i] * scale;
  return row;
}

inline RowVectorXd aggregate_rates(const SpikeRaster& raster, double dt_ms) {
  std::vector<std::uint32_t> counts(raster.neurons());
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = static_cast<std::uint32_t>(raster.count(i));
  return aggregate_rates(counts, static_cast<double>(raster.steps()) * dt_ms);
}

// ---------------------------------------------------------------------------

struct Standardizer {
  RowVectorXd mean;
  RowVectorXd scale;  // population std; 1 for zero-variance columns

  static Standardizer fit(const MatrixXd& x) {
    if (x.rows() < 2) throw InputValidationError("standardize: need at least two samples");
    require_finite(x, "standardize");
    Standardizer s;
    s.mean = x.colwise().mean();
    const MatrixXd centered = x.rowwise() - s.mean;
    s.scale = (centered.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt().matrix();
    for (Eigen::Index j = 0; j < s.scale.size(); ++j)
      if (!(s.scale[j] > 0.0)) s.scale[j] = 1.0;
    return s;
  }

  MatrixXd apply(const MatrixXd& x) const {
    require_shape(x.cols() == mean.size(), "standardize: column count differs from fitted state");
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
};

// ---------------------------------------------------------------------------

struct PCAState {
  RowVectorXd mean;
  MatrixXd basis;                // d x k, orthonormal columns
  VectorXd eigenvalues;          // all d, descending
  VectorXd explained_ratio;      // all d, descending
  Eigen::Index retained = 0;     // k

  static PCAState fit(const MatrixXd& x, double variance_retained = 0.95) {
    if (x.rows() < 2) throw InputValidationError("pca: need at least two samples");
    require_finite(x, "pca");
    PCAState p;
    p.mean = x.colwise().mean();
    const MatrixXd centered = x.rowwise() - p.mean;
    const MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("pca: eigendecomposition failed");

    const Eigen::Index d = cov.rows();
    p.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
    const MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double total = p.eigenvalues.sum();
    p.explained_ratio = total > 0.0 ? VectorXd(p.eigenvalues / total) : VectorXd::Zero(d);

    p.retained = d > 0 ? 1 : 0;
    if (total > 0.0) {
      double cum = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) {
        cum += p.explained_ratio[i];
        p.retained = i + 1;
        if (cum >= variance_retained - 1e-12) break;
      }
    }
    p.basis = vectors.leftCols(p.retained);
    return p;
  }

  MatrixXd apply(const MatrixXd& x) const {
    require_shape(x.cols() == mean.size(), "pca: column count differs from fitted state");
    return (x.rowwise() - mean) * basis;
  }

  MatrixXd reconstruct(const MatrixXd& reduced) const {
    return (reduced * basis.transpose()).rowwise() + mean;
  }
};

// ---------------------------------------------------------------------------
// Multinomial logistic regression, L2 on weights (not biases).

struct MLRModel {
  MatrixXd weights;  // features x classes
  RowVectorXd bias;  // classes
  bool converged = false;
  int iterations = 0;
  double loss = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> loss_history;

  int classes() const { return static_cast<int>(bias.size()); }

  MatrixXd scores(const MatrixXd& x) const { return (x * weights).rowwise() + bias; }

  // argmax of class scores, lowest index on ties.
  std::vector<int> predict(const MatrixXd& x) const {
    const MatrixXd s = scores(x);
    std::vector<int> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < s.cols(); ++c)
        if (s(i, c) > s(i, best)) best = c;
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }
};

struct MLRConfig {
  double l2 = 1e-4;
  int max_iters = 2000;
  double grad_tol = 1e-5;
  bool record_history = false;
};

struct MLRGradient {
  double loss = 0.0;
  MatrixXd d_weights;
  RowVectorXd d_bias;
};

// Mean softmax cross-entropy plus (l2/2)|W|^2, with its gradient.
inline MLRGradient mlr_loss_and_gradient(const MatrixXd& w, const RowVectorXd& b, const MatrixXd& x,
                                         std::span<const int> labels, double l2) {
  const auto n = static_cast<double>(x.rows());
  MatrixXd p = (x * w).rowwise() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    const double z = p.row(i).sum();
    p.row(i) /= z;
    const auto y = labels[static_cast<std::size_t>(i)];
    loss -= std::log(std::max(p(i, y), std::numeric_limits<double>::min()));
    p(i, y) -= 1.0;
  }
  MLRGradient g;
  g.loss = loss / n + 0.5 * l2 * w.squaredNorm();
  g.d_weights = x.transpose() * p / n + l2 * w;
  g.d_bias = p.colwise().sum() / n;
  return g;
}

inline double mlr_loss(const MatrixXd& w, const RowVectorXd& b, const MatrixXd& x, std::span<const int> labels,
                       double l2) {
  const MatrixXd s = (x * w).rowwise() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    const double lse = m + std::log((s.row(i).array() - m).exp().sum());
    loss += lse - s(i, labels[static_cast<std::size_t>(i)]);
  }
  return loss / static_cast<double>(x.rows()) + 0.5 * l2 * w.squaredNorm();
}

// Full-batch gradient descent. Each step starts from a Barzilai-Borwein
// length and backtracks until the Armijo condition holds, so the loss never
// increases. Stops once |grad| <= grad_tol (1 + |W|).
inline MLRModel mlr_train(const MatrixXd& x, std::span<const int> labels, int class_count, const MLRConfig& cfg,
                          const MLRModel* warm_start = nullptr) {
  require_shape(static_cast<std::size_t>(x.rows()) == labels.size(), "mlr_train: feature rows != label count");
  if (x.rows() == 0) throw InputValidationError("mlr_train: no samples");
  require_finite(x, "mlr_train");
  for (int l : labels)
    if (l < 0 || l >= class_count) throw InputValidationError("mlr_train: label outside class range");

  MLRModel m;
  if (warm_start && warm_start->weights.rows() == x.cols() && warm_start->classes() == class_count) {
    m.weights = warm_start->weights;
    m.bias = warm_start->bias;
  } else {
    m.weights = MatrixXd::Zero(x.cols(), class_count);
    m.bias = RowVectorXd::Zero(class_count);
  }

  auto g = mlr_loss_and_gradient(m.weights, m.bias, x, labels, cfg.l2);
  auto grad_norm = [](const MLRGradient& gr) { return std::sqrt(gr.d_weights.squaredNorm() + gr.d_bias.squaredNorm()); };
  double step = 1.0;
  MatrixXd prev_w;
  RowVectorXd prev_b;
  MLRGradient prev_g;
  if (cfg.record_history) m.loss_history.push_back(g.loss);

  for (m.iterations = 0; m.iterations < cfg.max_iters; ++m.iterations) {
    const double gn = grad_norm(g);
    if (gn <= cfg.grad_tol * (1.0 + m.weights.norm())) {
      m.converged = true;
      break;
    }
    if (m.iterations > 0) {
      const double sy = (m.weights - prev_w).cwiseProduct(g.d_weights - prev_g.d_weights).sum() +
                        (m.bias - prev_b).cwiseProduct(g.d_bias - prev_g.d_bias).sum();
      const double ss = (m.weights - prev_w).squaredNorm() + (m.bias - prev_b).squaredNorm();
      if (sy > 0.0 && ss > 0.0) step = ss / sy;
    }
    const double g2 = gn * gn;
    double trial = step;
    MatrixXd w_new;
    RowVectorXd b_new;
    double loss_new = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      w_new = m.weights - trial * g.d_weights;
      b_new = m.bias - trial * g.d_bias;
      loss_new = mlr_loss(w_new, b_new, x, labels, cfg.l2);
      if (loss_new <= g.loss - 1e-4 * trial * g2) break;
      trial *= 0.5;
    }
    if (!(loss_new <= g.loss)) break;  // no descent possible at machine precision
    prev_w = std::move(m.weights);
    prev_b = std::move(m.bias);
    prev_g = std::move(g);
    m.weights = std::move(w_new);
    m.bias = std::move(b_new);
    g = mlr_loss_and_gradient(m.weights, m.bias, x, labels, cfg.l2);
    if (cfg.record_history) m.loss_history.push_back(g.loss);
  }
  m.loss = g.loss;
  m.grad_norm = grad_norm(g);
  if (!m.converged) m.converged = m.grad_norm <= cfg.grad_tol * (1.0 + m.weights.norm());
  return m;
}

inline std::vector<int> mlr_predict(const MLRModel& m, const MatrixXd& x) { return m.predict(x); }

inline double accuracy(std::span<const int> predicted, std::span<const int> actual) {
  require_shape(predicted.size() == actual.size(), "accuracy: length mismatch");
  if (actual.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) hits += predicted[i] == actual[i];
  return static_cast<double>(hits) / static_cast<double>(actual.size());
}

// ---------------------------------------------------------------------------

struct ReadoutConfig {
  double variance_retained = 0.95;
  MLRConfig mlr;
};

struct FittedReadout {
  Standardizer standardizer;
  PCAState pca;
  MLRModel mlr;

  MatrixXd transform(const MatrixXd& features) const { return pca.apply(standardizer.apply(features)); }
  std::vector<int> predict(const MatrixXd& features) const { return mlr.predict(transform(features)); }
};

inline FittedReadout fit_readout(const MatrixXd& train_features, std::span<const int> labels, int class_count,
                                 const ReadoutConfig& cfg, const FittedReadout* warm_start = nullptr) {
  FittedReadout r;
  r.standardizer = Standardizer::fit(train_features);
  const MatrixXd z = r.standardizer.apply(train_features);
  r.pca = PCAState::fit(z, cfg.variance_retained);
  r.mlr = mlr_train(r.pca.apply(z), labels, class_count, cfg.mlr, warm_start ? &warm_start->mlr : nullptr);
  return r;
}

// "sample_id,label,rate_1,...,rate_N"
inline void write_features_csv(std::ostream& os, const MatrixXd& features, std::span<const int> labels) {
  os << "sample_id,label";
  for (Eigen::Index j = 0; j < features.cols(); ++j) os << ",rate_" << (j + 1);
  os << '\n';
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    os << i << ',' << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < features.cols(); ++j) os << ',' << features(i, j);
    os << '\n';
  }
}

}  // namespace sleepnet
