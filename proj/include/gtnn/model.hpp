#pragma once

// GTNN link predictor: a mean-aggregation sigmoid encoder over the graph, a
// ReLU hidden layer over the pair feature vector a_uv, flattened outer-product
// fusion of that hidden vector with [z_u; z_v], and a two-layer decoder.
//
// Everything is templated on the scalar type; training uses double.

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "gtnn/graphstore.hpp"
#include "gtnn/random.hpp"

namespace gtnn {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training hyperparameters. Adam defaults are the usual ones.
struct HyperParams {
  int d = 8;           // node embedding dim
  int d_e = 8;         // pair-feature hidden dim
  int d_h = 16;        // decoder hidden dim
  int t_layers = 1;    // encoder depth
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 128;
  int max_epochs = 100;
  int patience = 10;

  void validate() const {
    if (t_layers < 1) throw ModelError("t_layers must be >= 1");
    if (d < 1 || d_e < 1 || d_h < 1) throw ModelError("model dimensions must be >= 1");
    if (!(lr > 0)) throw ModelError("lr must be > 0");
    if (batch_size < 1) throw ModelError("batch_size must be >= 1");
    if (max_epochs < 0) throw ModelError("max_epochs must be >= 0");
    if (patience < 1) throw ModelError("patience must be >= 1");
  }
};

struct ModelDims {
  int d_in = 0;
  int feat_dim = 0;  // |a_uv|
  int d = 8;
  int d_e = 8;
  int d_h = 16;
  int t_layers = 1;

  static ModelDims from(const HyperParams& h, int d_in, int feat_dim) {
    return {d_in, feat_dim, h.d, h.d_e, h.d_h, h.t_layers};
  }
  int fused_dim() const { return d_e * 2 * d; }
};

/// All trainable tensors. Encoder layer 0 maps d_in -> d, later layers d -> d.
template <typename Scalar>
struct GtnnParams {
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  std::vector<Matrix> w_self;   // W1 per layer
  std::vector<Matrix> w_neigh;  // W2 per layer
  Matrix w_feat;                // W^e
  Vector b_feat;                // b^e
  Matrix w_last;                // W^last, d_h x (d_e * 2d)
  Vector b_last;
  Matrix w_out;                 // 1 x d_h
  Vector b_out;                 // size 1

  static GtnnParams zeros(const ModelDims& dims) {
    GtnnParams p;
    for (int l = 0; l < dims.t_layers; ++l) {
      const int in = l == 0 ? dims.d_in : dims.d;
      p.w_self.push_back(Matrix::Zero(dims.d, in));
      p.w_neigh.push_back(Matrix::Zero(dims.d, in));
    }
    p.w_feat = Matrix::Zero(dims.d_e, dims.feat_dim);
    p.b_feat = Vector::Zero(dims.d_e);
    p.w_last = Matrix::Zero(dims.d_h, dims.fused_dim());
    p.b_last = Vector::Zero(dims.d_h);
    p.w_out = Matrix::Zero(1, dims.d_h);
    p.b_out = Vector::Zero(1);
    return p;
  }

  /// Glorot-uniform weights, zero biases.
  static GtnnParams glorot(const ModelDims& dims, Rng& rng) {
    GtnnParams p = zeros(dims);
    const auto fill = [&rng](Matrix& m) {
      const double s = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = Scalar(rng.uniform(-s, s));
      }
    };
    for (auto& w : p.w_self) fill(w);
    for (auto& w : p.w_neigh) fill(w);
    fill(p.w_feat);
    fill(p.w_last);
    fill(p.w_out);
    return p;
  }

  ModelDims dims() const {
    ModelDims d;
    d.t_layers = static_cast<int>(w_self.size());
    d.d = static_cast<int>(w_self.front().rows());
    d.d_in = static_cast<int>(w_self.front().cols());
    d.d_e = static_cast<int>(w_feat.rows());
    d.feat_dim = static_cast<int>(w_feat.cols());
    d.d_h = static_cast<int>(w_last.rows());
    return d;
  }

  Eigen::Index size() const {
    Eigen::Index n = 0;
    for_each_block([&n](const std::string&, const auto& b) { n += b.size(); }, *this);
    return n;
  }
};

/// Calls f(name, a.block, b.block, ...) for every parameter block, in a fixed
/// order. All arguments must share the same shapes.
template <typename F, typename First, typename... Rest>
void for_each_block(F&& f, First& first, Rest&... rest) {
  for (std::size_t l = 0; l < first.w_self.size(); ++l) {
    const std::string prefix = "encoder." + std::to_string(l);
    f(prefix + ".w_self", first.w_self[l], rest.w_self[l]...);
    f(prefix + ".w_neigh", first.w_neigh[l], rest.w_neigh[l]...);
  }
  f(std::string("decoder.w_feat"), first.w_feat, rest.w_feat...);
  f(std::string("decoder.b_feat"), first.b_feat, rest.b_feat...);
  f(std::string("decoder.w_last"), first.w_last, rest.w_last...);
  f(std::string("decoder.b_last"), first.b_last, rest.b_last...);
  f(std::string("decoder.w_out"), first.w_out, rest.w_out...);
  f(std::string("decoder.b_out"), first.b_out, rest.b_out...);
}

/// Row-normalized adjacency: row i holds 1/|N(i)| at each neighbor, so
/// H * A^T yields per-node neighbor means. Isolated rows are empty, giving a
/// zero neighbor mean.
template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor> mean_aggregator(const Graph& g) {
  std::vector<Eigen::Triplet<Scalar>> triplets;
  for (int i = 0; i < g.num_nodes(); ++i) {
    const auto& nbrs = g.neighbors(i);
    if (nbrs.empty()) continue;
    const Scalar w = Scalar(1) / Scalar(nbrs.size());
    for (int j : nbrs) triplets.emplace_back(i, j, w);
  }
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> a(g.num_nodes(), g.num_nodes());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar s) { return Scalar(1) / (Scalar(1) + std::exp(-s)); });
}

template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

/// Per-layer activations kept for backprop; h.front() is the input
/// embedding matrix, h.back() the node embeddings z (d x n).
template <typename Scalar>
struct EncoderTrace {
  std::vector<MatrixX<Scalar>> h;
  std::vector<MatrixX<Scalar>> neigh;  // neighbor means of h[l]

  const MatrixX<Scalar>& z() const { return h.back(); }
};

template <typename Scalar>
EncoderTrace<Scalar> encode_traced(const Eigen::SparseMatrix<Scalar, Eigen::RowMajor>& agg,
                                   const MatrixX<Scalar>& x, const GtnnParams<Scalar>& params) {
  if (x.cols() != agg.rows()) throw ModelError("encode: embedding count != node count");
  if (x.rows() != params.w_self.front().cols()) {
    throw ModelError("encode: embedding dim " + std::to_string(x.rows()) + " != d_in " +
                     std::to_string(params.w_self.front().cols()));
  }
  EncoderTrace<Scalar> t;
  t.h.push_back(x);
  for (std::size_t l = 0; l < params.w_self.size(); ++l) {
    const auto& h = t.h.back();
    MatrixX<Scalar> neigh = h * agg.transpose();
    MatrixX<Scalar> next = sigmoid(params.w_self[l] * h + params.w_neigh[l] * neigh);
    t.neigh.push_back(std::move(neigh));
    t.h.push_back(std::move(next));
  }
  return t;
}

/// h_i <- sigmoid(W1 h_i + W2 mean_{j in N(i)} h_j), applied once per layer.
template <typename Scalar>
MatrixX<Scalar> encode(const Graph& g, const MatrixX<Scalar>& x, const GtnnParams<Scalar>& params) {
  return encode_traced(mean_aggregator<Scalar>(g), x, params).z();
}

/// Batched decoder activations; column b belongs to pair (u[b], v[b]).
template <typename Scalar>
struct BatchTrace {
  std::vector<int> u, v;
  MatrixX<Scalar> a;       // |a| x B
  MatrixX<Scalar> h_uv;    // d_e x B
  MatrixX<Scalar> zc;      // 2d x B, [z_u; z_v]
  MatrixX<Scalar> fused;   // (d_e * 2d) x B
  MatrixX<Scalar> hidden;  // d_h x B
  RowVectorX<Scalar> logit;
  RowVectorX<Scalar> p;

  Eigen::Index size() const { return logit.size(); }
};

/// Single-pair view of a forward pass.
template <typename Scalar>
struct ForwardTrace {
  VectorX<Scalar> z_u, z_v, h_uv, fused, hidden;
  Scalar logit{};
  Scalar p{};
};

/// fused[i * 2d + j] = h_uv[i] * [z_u; z_v][j]. This is the column-major
/// storage of the (2d x d_e) matrix zc * h_uv^T.
template <typename Scalar>
VectorX<Scalar> fuse(const VectorX<Scalar>& h_uv, const VectorX<Scalar>& zc) {
  MatrixX<Scalar> outer = zc * h_uv.transpose();
  return Eigen::Map<const VectorX<Scalar>>(outer.data(), outer.size());
}

template <typename Scalar>
BatchTrace<Scalar> forward_batch(const MatrixX<Scalar>& z, const std::vector<int>& u,
                                 const std::vector<int>& v, const MatrixX<Scalar>& a,
                                 const GtnnParams<Scalar>& params) {
  const auto batch = static_cast<Eigen::Index>(u.size());
  if (v.size() != u.size() || a.cols() != batch) throw ModelError("forward: batch size mismatch");
  if (a.rows() != params.w_feat.cols()) {
    throw ModelError("forward: feature dim " + std::to_string(a.rows()) + " != " +
                     std::to_string(params.w_feat.cols()));
  }
  const Eigen::Index d = z.rows();
  BatchTrace<Scalar> t;
  t.u = u;
  t.v = v;
  t.a = a;
  t.h_uv = relu((params.w_feat * a).colwise() + params.b_feat);
  t.zc.resize(2 * d, batch);
  t.fused.resize(params.w_feat.rows() * 2 * d, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    t.zc.col(b) << z.col(u[b]), z.col(v[b]);
    t.fused.col(b) = fuse<Scalar>(t.h_uv.col(b), t.zc.col(b));
  }
  t.hidden = relu((params.w_last * t.fused).colwise() + params.b_last);
  t.logit = (params.w_out * t.hidden).array() + params.b_out[0];
  t.p = t.logit.unaryExpr([](Scalar s) { return sigmoid(s); });
  return t;
}

template <typename Scalar>
ForwardTrace<Scalar> forward_pair(int u, int v, const MatrixX<Scalar>& z,
                                  const VectorX<Scalar>& a_uv, const GtnnParams<Scalar>& params) {
  const auto t = forward_batch<Scalar>(z, {u}, {v}, a_uv, params);
  const Eigen::Index d = z.rows();
  ForwardTrace<Scalar> f;
  f.z_u = t.zc.col(0).head(d);
  f.z_v = t.zc.col(0).tail(d);
  f.h_uv = t.h_uv.col(0);
  f.fused = t.fused.col(0);
  f.hidden = t.hidden.col(0);
  f.logit = t.logit[0];
  f.p = t.p[0];
  return f;
}

inline constexpr double kProbClamp = 1e-7;

/// Binary cross-entropy on p clamped to [1e-7, 1 - 1e-7].
template <typename Scalar>
Scalar bce_loss(Scalar p, int label) {
  const Scalar lo = Scalar(kProbClamp);
  const Scalar q = std::clamp(p, lo, Scalar(1) - lo);
  return label == 1 ? -std::log(q) : -std::log(Scalar(1) - q);
}

/// dl/dlogit for the clamped BCE: p - y inside the clamp range, 0 outside.
template <typename Scalar>
Scalar bce_grad_logit(Scalar p, int label) {
  const Scalar lo = Scalar(kProbClamp);
  if (p < lo || p > Scalar(1) - lo) return Scalar(0);
  return p - Scalar(label);
}

/// Gradient of (1/B) sum_b weight[b] * bce(p_b, label[b]) with respect to every
/// parameter. Weights are constants. ReLU'(0) = 0.
template <typename Scalar>
GtnnParams<Scalar> backward_batch(const BatchTrace<Scalar>& t, const std::vector<int>& labels,
                                  const std::vector<Scalar>& weights,
                                  const EncoderTrace<Scalar>& enc,
                                  const Eigen::SparseMatrix<Scalar, Eigen::RowMajor>& agg,
                                  const GtnnParams<Scalar>& params) {
  const Eigen::Index batch = t.size();
  if (static_cast<Eigen::Index>(labels.size()) != batch ||
      static_cast<Eigen::Index>(weights.size()) != batch) {
    throw ModelError("backward: labels/weights size mismatch");
  }
  GtnnParams<Scalar> g = GtnnParams<Scalar>::zeros(params.dims());
  if (batch == 0) return g;

  RowVectorX<Scalar> d_logit(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    if (weights[b] < Scalar(0)) throw ModelError("backward: negative sample weight");
    d_logit[b] = weights[b] * bce_grad_logit(t.p[b], labels[b]) / Scalar(batch);
  }

  g.w_out = d_logit * t.hidden.transpose();
  g.b_out[0] = d_logit.sum();
  const MatrixX<Scalar> d_hidden =
      ((params.w_out.transpose() * d_logit).array() * (t.hidden.array() > Scalar(0)).template cast<Scalar>())
          .matrix();
  g.w_last = d_hidden * t.fused.transpose();
  g.b_last = d_hidden.rowwise().sum();
  const MatrixX<Scalar> d_fused = params.w_last.transpose() * d_hidden;

  const Eigen::Index d = t.zc.rows() / 2;
  const Eigen::Index d_e = t.h_uv.rows();
  MatrixX<Scalar> d_huv(d_e, batch);
  MatrixX<Scalar> d_z = MatrixX<Scalar>::Zero(d, enc.z().cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    Eigen::Map<const MatrixX<Scalar>> d_outer(d_fused.col(b).data(), 2 * d, d_e);
    d_huv.col(b) = d_outer.transpose() * t.zc.col(b);
    const VectorX<Scalar> d_zc = d_outer * t.h_uv.col(b);
    d_z.col(t.u[b]) += d_zc.head(d);
    d_z.col(t.v[b]) += d_zc.tail(d);
  }
  const MatrixX<Scalar> d_huv_pre =
      (d_huv.array() * (t.h_uv.array() > Scalar(0)).template cast<Scalar>()).matrix();
  g.w_feat = d_huv_pre * t.a.transpose();
  g.b_feat = d_huv_pre.rowwise().sum();

  MatrixX<Scalar> d_h = std::move(d_z);
  for (std::size_t l = params.w_self.size(); l-- > 0;) {
    const auto& out = enc.h[l + 1];
    const MatrixX<Scalar> d_pre =
        (d_h.array() * out.array() * (Scalar(1) - out.array())).matrix();
    g.w_self[l] = d_pre * enc.h[l].transpose();
    g.w_neigh[l] = d_pre * enc.neigh[l].transpose();
    if (l > 0) {
      d_h = params.w_self[l].transpose() * d_pre +
            (params.w_neigh[l].transpose() * d_pre) * agg;
    }
  }

  for_each_block(
      [](const std::string& name, const auto& block) {
        if (!block.allFinite()) throw ModelError("non-finite gradient in " + name);
      },
      g);
  return g;
}

/// Adam moments and step counter.
template <typename Scalar>
struct AdamState {
  GtnnParams<Scalar> m;
  GtnnParams<Scalar> v;
  long step = 0;

  static AdamState for_params(const GtnnParams<Scalar>& p) {
    return {GtnnParams<Scalar>::zeros(p.dims()), GtnnParams<Scalar>::zeros(p.dims()), 0};
  }
};

/// One bias-corrected Adam update.
template <typename Scalar>
void adam_step(GtnnParams<Scalar>& params, const GtnnParams<Scalar>& grads,
               AdamState<Scalar>& state, const HyperParams& hyper) {
  ++state.step;
  const Scalar b1 = Scalar(hyper.beta1);
  const Scalar b2 = Scalar(hyper.beta2);
  const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(state.step));
  const Scalar lr = Scalar(hyper.lr);
  const Scalar eps = Scalar(hyper.eps);
  for_each_block(
      [&](const std::string&, auto& p, const auto& g, auto& m, auto& v) {
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      },
      params, grads, state.m, state.v);
}

}  // namespace gtnn
