#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mocap/error.hpp"

namespace mocap::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Named parameter arrays in insertion order. Layers refer to entries by index.
template <class S>
class ParamSet {
 public:
  int add(const std::string& name, int rows, int cols) {
    for (const auto& n : names_)
      require(n != name, ErrorKind::InvalidArgument, "duplicate parameter " + name);
    names_.push_back(name);
    values_.push_back(Mat<S>::Zero(rows, cols));
    return static_cast<int>(values_.size()) - 1;
  }

  int find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    return -1;
  }

  Mat<S>& operator[](int id) { return values_[id]; }
  const Mat<S>& operator[](int id) const { return values_[id]; }

  int size() const { return static_cast<int>(values_.size()); }
  const std::string& name(int id) const { return names_[id]; }

  long scalar_count() const {
    long n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet out = *this;
    for (auto& v : out.values_) v.setZero();
    return out;
  }

  void set_zero() {
    for (auto& v : values_) v.setZero();
  }

  S squared_norm() const {
    S s = 0;
    for (const auto& v : values_) s += v.squaredNorm();
    return s;
  }

  bool all_finite() const {
    for (const auto& v : values_)
      if (!v.allFinite()) return false;
    return true;
  }

  template <class T>
  ParamSet<T> cast() const {
    ParamSet<T> out;
    for (int i = 0; i < size(); ++i) {
      const int id = out.add(names_[i], values_[i].rows(), values_[i].cols());
      out[id] = values_[i].template cast<T>();
    }
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Mat<S>> values_;
};

// Fills a parameter with N(0, stddev^2) draws in row-major order.
template <class S>
void init_normal(Mat<S>& m, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> n(0.0, stddev);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(n(rng));
}

// SGD with heavy-ball momentum and global gradient-norm clipping.
template <class S>
class SgdMomentum {
 public:
  SgdMomentum(const ParamSet<S>& params, double lr, double momentum, double clip_norm)
      : velocity_(params.zeros_like()), lr_(lr), momentum_(momentum), clip_(clip_norm) {}

  // Returns the gradient norm before clipping.
  double step(ParamSet<S>& params, const ParamSet<S>& grads) {
    const double norm = std::sqrt(static_cast<double>(grads.squared_norm()));
    const double scale = (clip_ > 0 && norm > clip_) ? clip_ / norm : 1.0;
    for (int i = 0; i < params.size(); ++i) {
      velocity_[i] = static_cast<S>(momentum_) * velocity_[i] + static_cast<S>(scale) * grads[i];
      params[i] -= static_cast<S>(lr_) * velocity_[i];
    }
    return norm;
  }

  void set_lr(double lr) { lr_ = lr; }

 private:
  ParamSet<S> velocity_;
  double lr_, momentum_, clip_;
};

}  // namespace mocap::nn
