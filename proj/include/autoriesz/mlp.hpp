#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "autoriesz/rng.hpp"

namespace autoriesz {

/// Fully connected ReLU network with a scalar linear output.
template <typename Scalar = double>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  Mlp() = default;

  /// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(int inputs, const std::vector<int>& hidden, Rng& rng) {
    int fan_in = inputs;
    std::vector<int> widths = hidden;
    widths.push_back(1);
    for (const int width : widths) {
      const Scalar bound = fan_in > 0 ? Scalar(1) / std::sqrt(Scalar(fan_in)) : Scalar(1);
      Matrix w(width, fan_in);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = bound * Scalar(2 * rng.uniform() - 1);
      Vector b(width);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = bound * Scalar(2 * rng.uniform() - 1);
      weights.push_back(std::move(w));
      biases.push_back(std::move(b));
      fan_in = width;
    }
  }

  int inputs() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  std::size_t layers() const { return weights.size(); }

  Vector forward(const Matrix& x) const {
    Matrix a = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Matrix z = (a * weights[l].transpose()).rowwise() + biases[l].transpose();
      a = l + 1 < weights.size() ? Matrix(z.cwiseMax(Scalar(0))) : z;
    }
    return a.col(0);
  }

  /// Gradient of sum_i upstream_i * f(x_i), accumulated into `grad_w` / `grad_b`.
  void backward(const Matrix& x, const Vector& upstream, std::vector<Matrix>& grad_w, std::vector<Vector>& grad_b) const {
    std::vector<Matrix> activations{x};
    std::vector<Matrix> pre;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Matrix z = (activations.back() * weights[l].transpose()).rowwise() + biases[l].transpose();
      pre.push_back(z);
      activations.push_back(l + 1 < weights.size() ? Matrix(z.cwiseMax(Scalar(0))) : z);
    }
    Matrix delta = upstream;
    for (std::size_t l = weights.size(); l-- > 0;) {
      grad_w[l].noalias() += delta.transpose() * activations[l];
      grad_b[l].noalias() += delta.colwise().sum().transpose();
      if (l == 0) break;
      Matrix back = delta * weights[l];
      delta = back.cwiseProduct((pre[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
    }
  }

  std::vector<Matrix> zero_weight_like() const {
    std::vector<Matrix> out;
    for (const auto& w : weights) out.push_back(Matrix::Zero(w.rows(), w.cols()));
    return out;
  }
  std::vector<Vector> zero_bias_like() const {
    std::vector<Vector> out;
    for (const auto& b : biases) out.push_back(Vector::Zero(b.size()));
    return out;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index count = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) count += weights[l].size() + biases[l].size();
    return count;
  }

  /// Layer by layer: weights (column-major) then biases.
  Vector flatten() const {
    Vector out(parameter_count());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.segment(at, weights[l].size()) = Eigen::Map<const Vector>(weights[l].data(), weights[l].size());
      at += weights[l].size();
      out.segment(at, biases[l].size()) = biases[l];
      at += biases[l].size();
    }
    return out;
  }

  static Vector flatten(const std::vector<Matrix>& w, const std::vector<Vector>& b) {
    Mlp tmp;
    tmp.weights = w;
    tmp.biases = b;
    return tmp.flatten();
  }

  void unflatten(const Vector& params) {
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      Eigen::Map<Vector>(weights[l].data(), weights[l].size()) = params.segment(at, weights[l].size());
      at += weights[l].size();
      biases[l] = params.segment(at, biases[l].size());
      at += biases[l].size();
    }
  }

  std::vector<Matrix> weights;  // layer l: out x in
  std::vector<Vector> biases;
};

/// Adam state over a flat parameter vector.
template <typename Scalar = double>
class Adam {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Adam(Eigen::Index size, Scalar learning_rate, Scalar beta1, Scalar beta2, Scalar epsilon)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon),
        m_(Vector::Zero(size)), v_(Vector::Zero(size)) {}

  void step(Vector& params, const Vector& grad) {
    ++t_;
    m_ = beta1_ * m_ + (Scalar(1) - beta1_) * grad;
    v_ = beta2_ * v_ + (Scalar(1) - beta2_) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(beta1_, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(beta2_, Scalar(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

 private:
  Scalar lr_, beta1_, beta2_, eps_;
  Vector m_, v_;
  long t_ = 0;
};

}  // namespace autoriesz
