#pragma once

// Layers with explicit forward/backward passes. Parameters live in a
// ParamSet; forward() is const and writes activations into a caller-owned
// cache, so one parameter set can serve concurrent inference calls.
// Token matrices are row-major, one token per row.

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mocap/nn/params.hpp"

namespace mocap::nn {

template <class S>
struct Linear {
  int in = 0, out = 0;
  int w = -1, b = -1;

  static Linear create(ParamSet<S>& p, const std::string& name, int in, int out) {
    Linear l;
    l.in = in;
    l.out = out;
    l.w = p.add(name + ".w", in, out);
    l.b = p.add(name + ".b", 1, out);
    return l;
  }

  void init(ParamSet<S>& p, std::mt19937_64& rng, double gain = 1.0) const {
    init_normal(p[w], rng, gain / std::sqrt(static_cast<double>(in)));
    p[b].setZero();
  }

  Mat<S> forward(const ParamSet<S>& p, const Mat<S>& x) const {
    Mat<S> y(x.rows(), out);
    y.noalias() = x * p[w];
    y.rowwise() += p[b].row(0);
    return y;
  }

  Mat<S> backward(const ParamSet<S>& p, const Mat<S>& x, const Mat<S>& dy, ParamSet<S>& g) const {
    g[w].noalias() += x.transpose() * dy;
    g[b] += dy.colwise().sum();
    Mat<S> dx(dy.rows(), in);
    dx.noalias() = dy * p[w].transpose();
    return dx;
  }
};

template <class S>
struct LayerNorm {
  int dim = 0;
  int gamma = -1, beta = -1;
  static constexpr double kEps = 1e-5;

  struct Cache {
    Mat<S> xhat;
    Eigen::Matrix<S, Eigen::Dynamic, 1> rstd;
  };

  static LayerNorm create(ParamSet<S>& p, const std::string& name, int dim) {
    LayerNorm l;
    l.dim = dim;
    l.gamma = p.add(name + ".gamma", 1, dim);
    l.beta = p.add(name + ".beta", 1, dim);
    return l;
  }

  void init(ParamSet<S>& p) const {
    p[gamma].setOnes();
    p[beta].setZero();
  }

  Mat<S> forward(const ParamSet<S>& p, const Mat<S>& x, Cache& c) const {
    const auto n = x.rows();
    c.xhat.resize(n, dim);
    c.rstd.resize(n);
    Mat<S> y(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const S mean = x.row(i).mean();
      const S var = (x.row(i).array() - mean).square().mean();
      const S r = S(1) / std::sqrt(var + static_cast<S>(kEps));
      c.rstd[i] = r;
      c.xhat.row(i) = (x.row(i).array() - mean) * r;
      y.row(i) = c.xhat.row(i).cwiseProduct(p[gamma].row(0)) + p[beta].row(0);
    }
    return y;
  }

  Mat<S> backward(const ParamSet<S>& p, const Cache& c, const Mat<S>& dy, ParamSet<S>& g) const {
    g[gamma] += (dy.cwiseProduct(c.xhat)).colwise().sum();
    g[beta] += dy.colwise().sum();
    Mat<S> dx(dy.rows(), dim);
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      const auto dxhat = dy.row(i).cwiseProduct(p[gamma].row(0));
      const S m1 = dxhat.mean();
      const S m2 = dxhat.cwiseProduct(c.xhat.row(i)).mean();
      dx.row(i) = (dxhat.array() - m1 - c.xhat.row(i).array() * m2) * c.rstd[i];
    }
    return dx;
  }
};

// tanh approximation of GELU.
template <class S>
struct Gelu {
  static Mat<S> forward(const Mat<S>& x) {
    const S k = static_cast<S>(0.7978845608028654), a = static_cast<S>(0.044715);
    return x.unaryExpr([=](S v) { return S(0.5) * v * (S(1) + std::tanh(k * (v + a * v * v * v))); });
  }

  static Mat<S> backward(const Mat<S>& x, const Mat<S>& dy) {
    const S k = static_cast<S>(0.7978845608028654), a = static_cast<S>(0.044715);
    return x.binaryExpr(dy, [=](S v, S d) {
      const S u = k * (v + a * v * v * v);
      const S th = std::tanh(u);
      const S du = k * (S(1) + S(3) * a * v * v);
      return d * (S(0.5) * (S(1) + th) + S(0.5) * v * (S(1) - th * th) * du);
    });
  }
};

template <class S>
struct FeedForward {
  Linear<S> up, down;

  struct Cache {
    Mat<S> x, hidden, act;
  };

  static FeedForward create(ParamSet<S>& p, const std::string& name, int dim, int hidden) {
    return {Linear<S>::create(p, name + ".up", dim, hidden),
            Linear<S>::create(p, name + ".down", hidden, dim)};
  }

  void init(ParamSet<S>& p, std::mt19937_64& rng, double out_gain) const {
    up.init(p, rng);
    down.init(p, rng, out_gain);
  }

  Mat<S> forward(const ParamSet<S>& p, const Mat<S>& x, Cache& c) const {
    c.x = x;
    c.hidden = up.forward(p, x);
    c.act = Gelu<S>::forward(c.hidden);
    return down.forward(p, c.act);
  }

  Mat<S> backward(const ParamSet<S>& p, const Cache& c, const Mat<S>& dy, ParamSet<S>& g) const {
    const Mat<S> dact = down.backward(p, c.act, dy, g);
    return up.backward(p, c.x, Gelu<S>::backward(c.hidden, dact), g);
  }
};

// Row permutation between token orders. perm[i] is the source row of row i.
template <class S>
Mat<S> gather_rows(const Mat<S>& x, const std::vector<int>& perm) {
  Mat<S> out(x.rows(), x.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(i) = x.row(perm[i]);
  return out;
}

template <class S>
Mat<S> scatter_rows(const Mat<S>& x, const std::vector<int>& perm) {
  Mat<S> out(x.rows(), x.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) out.row(perm[i]) = x.row(i);
  return out;
}

template <class S>
void softmax_rows_inplace(Mat<S>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const S hi = m.row(i).maxCoeff();
    if (!std::isfinite(static_cast<double>(hi))) {
      m.row(i).setZero();
      continue;
    }
    m.row(i) = (m.row(i).array() - hi).exp();
    m.row(i) /= m.row(i).sum();
  }
}

// Multi-head self-attention among contiguous groups of `group` rows. An
// optional permutation reorders tokens into that grouping first.
template <class S>
struct GroupedSelfAttention {
  int dim = 0, heads = 1;
  Linear<S> qkv, proj;

  struct Cache {
    Mat<S> x;      // permuted input
    Mat<S> qkv;    // permuted q|k|v
    Mat<S> probs;  // per row: heads x group
    Mat<S> o;      // permuted attention output before projection
  };

  static GroupedSelfAttention create(ParamSet<S>& p, const std::string& name, int dim, int heads) {
    require(dim % heads == 0, ErrorKind::InvalidArgument, "width must be divisible by heads");
    GroupedSelfAttention a;
    a.dim = dim;
    a.heads = heads;
    a.qkv = Linear<S>::create(p, name + ".qkv", dim, 3 * dim);
    a.proj = Linear<S>::create(p, name + ".proj", dim, dim);
    return a;
  }

  void init(ParamSet<S>& p, std::mt19937_64& rng, double out_gain) const {
    qkv.init(p, rng);
    proj.init(p, rng, out_gain);
  }

  Mat<S> forward(const ParamSet<S>& p, const Mat<S>& x_in, int group,
                 const std::vector<int>* perm, Cache& c) const {
    c.x = perm ? gather_rows(x_in, *perm) : x_in;
    c.qkv = qkv.forward(p, c.x);
    const Eigen::Index n = c.x.rows();
    const int dh = dim / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    c.probs.resize(n, heads * group);
    c.o.resize(n, dim);
    Mat<S> scores(group, group);
    for (Eigen::Index g0 = 0; g0 < n; g0 += group) {
      for (int h = 0; h < heads; ++h) {
        const auto q = c.qkv.block(g0, h * dh, group, dh);
        const auto k = c.qkv.block(g0, dim + h * dh, group, dh);
        const auto v = c.qkv.block(g0, 2 * dim + h * dh, group, dh);
        scores.noalias() = (q * k.transpose()) * scale;
        softmax_rows_inplace(scores);
        c.probs.block(g0, h * group, group, group) = scores;
        c.o.block(g0, h * dh, group, dh).noalias() = scores * v;
      }
    }
    Mat<S> y = proj.forward(p, c.o);
    return perm ? scatter_rows(y, *perm) : y;
  }

  Mat<S> backward(const ParamSet<S>& p, const Cache& c, const Mat<S>& dy_in, int group,
                  const std::vector<int>* perm, ParamSet<S>& g) const {
    const Mat<S> dy = perm ? gather_rows(dy_in, *perm) : dy_in;
    const Mat<S> dout = proj.backward(p, c.o, dy, g);
    const Eigen::Index n = c.x.rows();
    const int dh = dim / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    Mat<S> dqkv(n, 3 * dim);
    Mat<S> dp(group, group), ds(group, group);
    for (Eigen::Index g0 = 0; g0 < n; g0 += group) {
      for (int h = 0; h < heads; ++h) {
        const auto q = c.qkv.block(g0, h * dh, group, dh);
        const auto k = c.qkv.block(g0, dim + h * dh, group, dh);
        const auto v = c.qkv.block(g0, 2 * dim + h * dh, group, dh);
        const auto pr = c.probs.block(g0, h * group, group, group);
        const auto d_o = dout.block(g0, h * dh, group, dh);
        dp.noalias() = d_o * v.transpose();
        dqkv.block(g0, 2 * dim + h * dh, group, dh).noalias() = pr.transpose() * d_o;
        for (int i = 0; i < group; ++i) {
          const S dot = pr.row(i).dot(dp.row(i));
          ds.row(i) = pr.row(i).cwiseProduct((dp.row(i).array() - dot).matrix());
        }
        dqkv.block(g0, h * dh, group, dh).noalias() = (ds * k) * scale;
        dqkv.block(g0, dim + h * dh, group, dh).noalias() = (ds.transpose() * q) * scale;
      }
    }
    const Mat<S> dx = qkv.backward(p, c.x, dqkv, g);
    return perm ? scatter_rows(dx, *perm) : dx;
  }
};

// Cross-attention from query tokens to a small set of per-group key/value
// feature rows (e.g. pointmap cells). Keys and values are linear in the
// features, K = F Mk and V = F Mv + bv, so attention is computed in feature
// space: scores = (Q Mk^T) F^T and output = (P F) Mv + bv. A key bias would
// cancel in the softmax and is omitted. Column `valid_col` of the features
// masks cells out of the softmax when zero.
template <class S>
struct FeatureCrossAttention {
  int dim = 0, heads = 1, features = 0, valid_col = -1;
  Linear<S> query, proj;
  int mk = -1, mv = -1, bv = -1;

  struct Cache {
    Mat<S> x, q;
    Mat<S> probs;  // per row: heads x cells
    Mat<S> fbar;   // per row: heads x features
    Mat<S> o;
  };

  static FeatureCrossAttention create(ParamSet<S>& p, const std::string& name, int dim, int heads,
                                      int features, int valid_col) {
    require(dim % heads == 0, ErrorKind::InvalidArgument, "width must be divisible by heads");
    FeatureCrossAttention a;
    a.dim = dim;
    a.heads = heads;
    a.features = features;
    a.valid_col = valid_col;
    a.query = Linear<S>::create(p, name + ".q", dim, dim);
    a.mk = p.add(name + ".mk", features, dim);
    a.mv = p.add(name + ".mv", features, dim);
    a.bv = p.add(name + ".bv", 1, dim);
    a.proj = Linear<S>::create(p, name + ".proj", dim, dim);
    return a;
  }

  void init(ParamSet<S>& p, std::mt19937_64& rng, double out_gain) const {
    query.init(p, rng);
    init_normal(p[mk], rng, 1.0 / std::sqrt(static_cast<double>(features)));
    init_normal(p[mv], rng, 1.0 / std::sqrt(static_cast<double>(features)));
    p[bv].setZero();
    proj.init(p, rng, out_gain);
  }

  // x: groups*per_group rows; feats: groups*cells rows.
  Mat<S> forward(const ParamSet<S>& p, const Mat<S>& x, const Mat<S>& feats, int per_group,
                 int cells, Cache& c) const {
    c.x = x;
    c.q = query.forward(p, x);
    const Eigen::Index n = x.rows();
    const int dh = dim / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    c.probs.resize(n, heads * cells);
    c.fbar.resize(n, heads * features);
    c.o.resize(n, dim);
    Mat<S> r(per_group, features), scores(per_group, cells);
    for (Eigen::Index g = 0; g * per_group < n; ++g) {
      const auto f = feats.block(g * cells, 0, cells, features);
      const Eigen::Index r0 = g * per_group;
      for (int h = 0; h < heads; ++h) {
        const auto qh = c.q.block(r0, h * dh, per_group, dh);
        const auto mkh = p[mk].block(0, h * dh, features, dh);
        const auto mvh = p[mv].block(0, h * dh, features, dh);
        r.noalias() = qh * mkh.transpose();
        scores.noalias() = (r * f.transpose()) * scale;
        if (valid_col >= 0)
          for (int cell = 0; cell < cells; ++cell)
            if (f(cell, valid_col) == S(0))
              scores.col(cell).setConstant(-std::numeric_limits<S>::infinity());
        softmax_rows_inplace(scores);
        c.probs.block(r0, h * cells, per_group, cells) = scores;
        auto fb = c.fbar.block(r0, h * features, per_group, features);
        fb.noalias() = scores * f;
        c.o.block(r0, h * dh, per_group, dh).noalias() = fb * mvh;
        c.o.block(r0, h * dh, per_group, dh).rowwise() += p[bv].row(0).segment(h * dh, dh);
      }
    }
    return proj.forward(p, c.o);
  }

  Mat<S> backward(const ParamSet<S>& p, const Cache& c, const Mat<S>& feats, const Mat<S>& dy,
                  int per_group, int cells, ParamSet<S>& g) const {
    const Mat<S> dout = proj.backward(p, c.o, dy, g);
    const Eigen::Index n = c.x.rows();
    const int dh = dim / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    Mat<S> dq(n, dim);
    Mat<S> dfbar(per_group, features), dp(per_group, cells), ds(per_group, cells),
        dr(per_group, features);
    g[bv] += dout.colwise().sum();
    for (Eigen::Index grp = 0; grp * per_group < n; ++grp) {
      const auto f = feats.block(grp * cells, 0, cells, features);
      const Eigen::Index r0 = grp * per_group;
      for (int h = 0; h < heads; ++h) {
        const auto qh = c.q.block(r0, h * dh, per_group, dh);
        const auto mkh = p[mk].block(0, h * dh, features, dh);
        const auto mvh = p[mv].block(0, h * dh, features, dh);
        const auto pr = c.probs.block(r0, h * cells, per_group, cells);
        const auto fb = c.fbar.block(r0, h * features, per_group, features);
        const auto d_o = dout.block(r0, h * dh, per_group, dh);
        g[mv].block(0, h * dh, features, dh).noalias() += fb.transpose() * d_o;
        dfbar.noalias() = d_o * mvh.transpose();
        dp.noalias() = dfbar * f.transpose();
        for (int i = 0; i < per_group; ++i) {
          const S dot = pr.row(i).dot(dp.row(i));
          ds.row(i) = pr.row(i).cwiseProduct((dp.row(i).array() - dot).matrix());
        }
        dr.noalias() = (ds * f) * scale;
        dq.block(r0, h * dh, per_group, dh).noalias() = dr * mkh;
        g[mk].block(0, h * dh, features, dh).noalias() += dr.transpose() * qh;
      }
    }
    return query.backward(p, c.x, dq, g);
  }
};

// Sinusoidal embedding of a scalar position, width `dim` (even).
template <class S>
void sinusoid(double pos, int dim, S* out) {
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    out[k] = static_cast<S>(std::sin(pos * freq));
    out[half + k] = static_cast<S>(std::cos(pos * freq));
  }
}

}  // namespace mocap::nn
