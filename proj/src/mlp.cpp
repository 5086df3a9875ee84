#include "visex/mlp.hpp"

#include <cmath>

#include "visex/error.hpp"

namespace visex {

Mlp::Mlp(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.empty()) throw ValidationError("MLP needs at least one width");
  for (auto w : widths_) {
    if (w == 0) throw ValidationError("MLP widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    weights_.push_back(Matrix::Zero(widths_[l + 1], widths_[l]));
    biases_.push_back(Vector::Zero(widths_[l + 1]));
  }
}

void Mlp::init_random(Rng& rng, double scale) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double sd = scale / std::sqrt(static_cast<double>(weights_[l].cols()));
    for (Eigen::Index i = 0; i < weights_[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) weights_[l](i, j) = sd * rng.normal();
    }
    biases_[l].setZero();
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

Vector Mlp::parameters() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto& w = weights_[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) flat[off++] = w(i, j);
    }
    flat.segment(off, biases_[l].size()) = biases_[l];
    off += biases_[l].size();
  }
  return flat;
}

void Mlp::set_parameters(const Eigen::Ref<const Vector>& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw ValidationError("parameter vector has " + std::to_string(flat.size()) +
                          " entries, expected " + std::to_string(parameter_count()));
  }
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    auto& w = weights_[l];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat[off++];
    }
    biases_[l] = flat.segment(off, biases_[l].size());
    off += biases_[l].size();
  }
}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
  if (static_cast<std::size_t>(x.cols()) != input_width()) {
    throw ValidationError("MLP input width " + std::to_string(x.cols()) + ", expected " +
                          std::to_string(input_width()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = a * weights_[l].transpose();
    z.rowwise() += biases_[l].transpose();
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    a = (l + 1 < weights_.size()) ? Matrix(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& d_out, Eigen::Ref<Vector> grad) const {
  if (static_cast<std::size_t>(grad.size()) != parameter_count()) {
    throw ValidationError("gradient buffer has wrong length");
  }
  if (weights_.empty()) return d_out;

  // Offsets of each layer's block in the flat layout.
  std::vector<Eigen::Index> offsets(weights_.size());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    offsets[l] = off;
    off += weights_[l].size() + biases_[l].size();
  }

  Matrix dz = d_out;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const Matrix dw = dz.transpose() * cache.inputs[l];
    Eigen::Index o = offsets[l];
    for (Eigen::Index i = 0; i < dw.rows(); ++i) {
      for (Eigen::Index j = 0; j < dw.cols(); ++j) grad[o++] += dw(i, j);
    }
    grad.segment(o, biases_[l].size()) += dz.colwise().sum().transpose();
    Matrix da = dz * weights_[l];
    if (l > 0) {
      dz = da.cwiseProduct((cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
    } else {
      return da;
    }
  }
  return dz;
}

// ---------------------------------------------------------------- Optimizer

Optimizer::Optimizer(Kind kind, double step_size, std::size_t parameter_count)
    : kind_(kind),
      step_size_(step_size),
      m_(Vector::Zero(static_cast<Eigen::Index>(parameter_count))),
      v_(Vector::Zero(static_cast<Eigen::Index>(parameter_count))) {
  if (!(step_size > 0.0)) throw ValidationError("step size must be positive");
}

void Optimizer::step(Vector& params, const Vector& grad) {
  if (kind_ == Kind::sgd) {
    params -= step_size_ * grad;
    return;
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= step_size_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

Optimizer::Kind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::Kind::adam;
  if (s == "sgd") return Optimizer::Kind::sgd;
  throw ValidationError("unknown optimizer '" + s + "'");
}

std::string to_string(Optimizer::Kind kind) {
  return kind == Optimizer::Kind::adam ? "adam" : "sgd";
}

}  // namespace visex
