#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace edgetimer::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A batch of equal-length sequences. inputs[t] is (input_size x batch);
/// h0 is (hidden x batch).
struct SequenceBatch {
  std::vector<Matrix> inputs;
  Matrix h0;

  int steps() const { return static_cast<int>(inputs.size()); }
  int batch() const { return static_cast<int>(h0.cols()); }
};

/// One GRU layer (reset/update/new gate order, new gate applies the reset to
/// the hidden projection including its bias) followed by a linear head.
/// All parameters live in one flat vector.
class RecurrentNet {
 public:
  RecurrentNet() = default;
  RecurrentNet(int input_size, int hidden_size, int output_size);

  int input_size() const { return in_; }
  int hidden_size() const { return hid_; }
  int output_size() const { return out_; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Uniform(-1/sqrt(H), 1/sqrt(H)) for the cell, the same bound scaled by
  /// `head_scale` for the head.
  void init(std::mt19937_64& rng, double head_scale = 1.0);

  /// Single step for one sample.
  Vector step(const Vector& x, Vector& h) const;

  struct Cache {
    std::vector<Matrix> h_prev, r, z, n, hn, h;
  };
  /// Returns outputs[t] (output_size x batch).
  std::vector<Matrix> forward(const SequenceBatch& batch, Cache* cache = nullptr) const;

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(outputs[t]).
  void backward(const SequenceBatch& batch, const Cache& cache, const std::vector<Matrix>& d_outputs,
                std::span<double> grad) const;

 private:
  struct Views;
  Views views() const;

  int in_ = 0, hid_ = 0, out_ = 0;
  std::vector<double> params_;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5);

  void step(std::span<double> params, std::span<const double> grad);
  double learning_rate() const { return lr_; }
  std::int64_t steps() const { return t_; }

  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  std::int64_t& step_count() { return t_; }

 private:
  double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-5;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Rescales `grad` so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_grad_norm(std::span<double> grad, double max_norm);

/// Running mean/variance of value targets with bias-corrected exponential
/// averaging.
class ValueNorm {
 public:
  explicit ValueNorm(double beta = 0.99, double min_var = 1e-2) : beta_(beta), min_var_(min_var) {}

  void update(std::span<const double> values);
  double normalize(double v) const;
  double denormalize(double v) const;
  double mean() const;
  double variance() const;

  // Raw state, saved in checkpoints.
  double running_mean = 0.0;
  double running_sq = 0.0;
  double debias = 0.0;

 private:
  double beta_, min_var_;
};

}  // namespace edgetimer::nn
