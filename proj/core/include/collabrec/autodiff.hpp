#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records one forward computation (typically one sample) as a DAG of
// matrix nodes and replays it backwards. Parameters are persistent Param
// objects; backward() accumulates into Param::grad for trainable leaves and
// prunes gradient work along paths that reach no trainable leaf.

#include "collabrec/types.hpp"

#include <cassert>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace collabrec::ad {

template <class T>
struct Param {
  std::string name;
  MatT<T> value;
  MatT<T> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, MatT<T> v) : name(std::move(n)), value(std::move(v)) {}

  void zero_grad() { grad = MatT<T>::Zero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <class T>
class Tape {
 public:
  using Mat = MatT<T>;

  Var leaf(Mat v) {
    return push(std::move(v), /*needs=*/false, nullptr, {});
  }

  Var param(Param<T>& p) {
    return push(p.value, p.trainable, &p, {});
  }

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs; }

  // ---- ops ----

  Var matmul(Var a, Var b) {
    Var out = push(value(a) * value(b), needs(a) || needs(b), nullptr,
                   [this, a, b](const Mat& g, int) {
                     if (needs(a)) acc(a, g * value(b).transpose());
                     if (needs(b)) acc(b, value(a).transpose() * g);
                   });
    return out;
  }

  Var add(Var a, Var b) {
    return push(value(a) + value(b), needs(a) || needs(b), nullptr,
                [this, a, b](const Mat& g, int) {
                  if (needs(a)) acc(a, g);
                  if (needs(b)) acc(b, g);
                });
  }

  // Broadcast-add a 1 x n bias row to every row of a.
  Var add_rowvec(Var a, Var bias) {
    Mat v = value(a);
    v.rowwise() += value(bias).row(0);
    return push(std::move(v), needs(a) || needs(bias), nullptr,
                [this, a, bias](const Mat& g, int) {
                  if (needs(a)) acc(a, g);
                  if (needs(bias)) acc(bias, g.colwise().sum());
                });
  }

  Var scale(Var a, T c) {
    return push(value(a) * c, needs(a), nullptr,
                [this, a, c](const Mat& g, int) {
                  if (needs(a)) acc(a, g * c);
                });
  }

  Var relu(Var a) {
    Mat v = value(a).cwiseMax(T(0));
    return push(std::move(v), needs(a), nullptr,
                [this, a](const Mat& g, int self) {
                  if (!needs(a)) return;
                  Mat m = (nodes_[self].value.array() > T(0))
                              .template cast<T>()
                              .matrix();
                  acc(a, g.cwiseProduct(m));
                });
  }

  // GELU, tanh approximation.
  Var gelu(Var a) {
    const T k = T(0.7978845608028654);  // sqrt(2/pi)
    const T c = T(0.044715);
    const Mat& x = value(a);
    Mat inner = (k * (x.array() + c * x.array().cube())).matrix();
    Mat th = inner.array().tanh().matrix();
    Mat v = (T(0.5) * x.array() * (T(1) + th.array())).matrix();
    return push(std::move(v), needs(a), nullptr,
                [this, a, th, k, c](const Mat& g, int) {
                  if (!needs(a)) return;
                  const Mat& x = value(a);
                  auto sech2 = (T(1) - th.array().square());
                  auto dinner = k * (T(1) + T(3) * c * x.array().square());
                  Mat d = (T(0.5) * (T(1) + th.array()) +
                           T(0.5) * x.array() * sech2 * dinner)
                              .matrix();
                  acc(a, g.cwiseProduct(d));
                });
  }

  // Row-wise layer normalization with learned gain/bias (1 x n each).
  Var layernorm(Var a, Var gain, Var bias, T eps = T(1e-5)) {
    const Mat& x = value(a);
    const Eigen::Index n = x.cols();
    Mat xhat(x.rows(), n);
    VecT<T> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      T mu = x.row(r).mean();
      T var = (x.row(r).array() - mu).square().mean();
      T is = T(1) / std::sqrt(var + eps);
      inv_std(r) = is;
      xhat.row(r) = (x.row(r).array() - mu) * is;
    }
    Mat v = xhat;
    v.array().rowwise() *= value(gain).row(0).array();
    v.rowwise() += value(bias).row(0);
    bool ng = needs(a) || needs(gain) || needs(bias);
    return push(std::move(v), ng, nullptr,
                [this, a, gain, bias, xhat, inv_std](const Mat& g, int) {
                  if (needs(bias)) acc(bias, g.colwise().sum());
                  if (needs(gain)) acc(gain, g.cwiseProduct(xhat).colwise().sum());
                  if (!needs(a)) return;
                  const Eigen::Index n = xhat.cols();
                  Mat gy = g;
                  gy.array().rowwise() *= value(gain).row(0).array();
                  Mat gx(gy.rows(), n);
                  for (Eigen::Index r = 0; r < gy.rows(); ++r) {
                    T m1 = gy.row(r).mean();
                    T m2 = gy.row(r).cwiseProduct(xhat.row(r)).mean();
                    gx.row(r) = ((gy.row(r).array() - m1 -
                                  xhat.row(r).array() * m2) *
                                 inv_std(r))
                                    .matrix();
                  }
                  acc(a, gx);
                });
  }

  // Multi-head causal self-attention. q, k, v are K x d; d % n_heads == 0.
  Var causal_mha(Var q, Var k, Var v, int n_heads) {
    const Mat& Q = value(q);
    const Mat& K = value(k);
    const Mat& V = value(v);
    const Eigen::Index len = Q.rows(), d = Q.cols();
    if (d % n_heads != 0) throw std::invalid_argument("mha: d % heads != 0");
    const Eigen::Index dh = d / n_heads;
    const T inv_sqrt = T(1) / std::sqrt(T(dh));

    auto probs = std::make_shared<std::vector<Mat>>();
    probs->reserve(n_heads);
    Mat out(len, d);
    for (int h = 0; h < n_heads; ++h) {
      auto Qh = Q.middleCols(h * dh, dh);
      auto Kh = K.middleCols(h * dh, dh);
      auto Vh = V.middleCols(h * dh, dh);
      Mat S = Qh * Kh.transpose() * inv_sqrt;
      Mat P(len, len);
      P.setZero();
      for (Eigen::Index i = 0; i < len; ++i) {
        // causal: attend to positions <= i
        T mx = S.row(i).head(i + 1).maxCoeff();
        T denom = T(0);
        for (Eigen::Index j = 0; j <= i; ++j) {
          T e = std::exp(S(i, j) - mx);
          P(i, j) = e;
          denom += e;
        }
        P.row(i).head(i + 1) /= denom;
      }
      out.middleCols(h * dh, dh) = P * Vh;
      probs->push_back(std::move(P));
    }
    bool ng = needs(q) || needs(k) || needs(v);
    return push(std::move(out), ng, nullptr,
                [this, q, k, v, n_heads, dh, inv_sqrt, probs](const Mat& g, int) {
                  const Mat& Q = value(q);
                  const Mat& K = value(k);
                  const Mat& V = value(v);
                  const Eigen::Index len = Q.rows();
                  Mat gQ, gK, gV;
                  if (needs(q)) gQ = Mat::Zero(len, Q.cols());
                  if (needs(k)) gK = Mat::Zero(len, K.cols());
                  if (needs(v)) gV = Mat::Zero(len, V.cols());
                  for (int h = 0; h < n_heads; ++h) {
                    const Mat& P = (*probs)[h];
                    auto Gh = g.middleCols(h * dh, dh);
                    auto Vh = V.middleCols(h * dh, dh);
                    if (needs(v)) gV.middleCols(h * dh, dh) = P.transpose() * Gh;
                    if (!needs(q) && !needs(k)) continue;
                    Mat dP = Gh * Vh.transpose();
                    // softmax backward per row; masked entries have P == 0.
                    Mat dS(len, len);
                    for (Eigen::Index i = 0; i < len; ++i) {
                      T dot = (dP.row(i).array() * P.row(i).array()).sum();
                      dS.row(i) =
                          P.row(i).array() * (dP.row(i).array() - dot);
                    }
                    auto Qh = Q.middleCols(h * dh, dh);
                    auto Kh = K.middleCols(h * dh, dh);
                    if (needs(q))
                      gQ.middleCols(h * dh, dh) = dS * Kh * inv_sqrt;
                    if (needs(k))
                      gK.middleCols(h * dh, dh) = dS.transpose() * Qh * inv_sqrt;
                  }
                  if (needs(q)) acc(q, gQ);
                  if (needs(k)) acc(k, gK);
                  if (needs(v)) acc(v, gV);
                });
  }

  // Gather rows by index (embedding lookup).
  Var gather_rows(Var table, std::vector<int> ids) {
    const Mat& t = value(table);
    Mat v(static_cast<Eigen::Index>(ids.size()), t.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= t.rows())
        throw std::out_of_range("gather_rows: id out of range");
      v.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
    }
    return push(std::move(v), needs(table), nullptr,
                [this, table, ids = std::move(ids)](const Mat& g, int) {
                  if (!needs(table)) return;
                  Mat gt = Mat::Zero(value(table).rows(), value(table).cols());
                  for (size_t i = 0; i < ids.size(); ++i)
                    gt.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
                  acc(table, gt);
                });
  }

  // Replace row `pos` of a with the 1 x n row vector r.
  Var overwrite_row(Var a, Var r, Eigen::Index pos) {
    Mat v = value(a);
    if (pos < 0 || pos >= v.rows())
      throw std::out_of_range("overwrite_row: bad position");
    v.row(pos) = value(r).row(0);
    return push(std::move(v), needs(a) || needs(r), nullptr,
                [this, a, r, pos](const Mat& g, int) {
                  if (needs(r)) acc(r, g.row(pos));
                  if (needs(a)) {
                    Mat ga = g;
                    ga.row(pos).setZero();
                    acc(a, ga);
                  }
                });
  }

  Var row(Var a, Eigen::Index i) {
    return push(value(a).row(i), needs(a), nullptr,
                [this, a, i](const Mat& g, int) {
                  if (!needs(a)) return;
                  Mat ga = Mat::Zero(value(a).rows(), value(a).cols());
                  ga.row(i) = g.row(0);
                  acc(a, ga);
                });
  }

  // P(yes) from a 1 x |V| logits row via a stable two-way softmax over
  // {yes, no}. Output is 1 x 1.
  Var yes_prob(Var logits, int yes_id, int no_id) {
    const Mat& z = value(logits);
    T zy = z(0, yes_id), zn = z(0, no_id);
    T mx = std::max(zy, zn);
    T ey = std::exp(zy - mx), en = std::exp(zn - mx);
    T p = ey / (ey + en);
    Mat v(1, 1);
    v(0, 0) = p;
    return push(std::move(v), needs(logits), nullptr,
                [this, logits, yes_id, no_id, p](const Mat& g, int) {
                  if (!needs(logits)) return;
                  Mat gz = Mat::Zero(1, value(logits).cols());
                  T d = g(0, 0) * p * (T(1) - p);
                  gz(0, yes_id) = d;
                  gz(0, no_id) = -d;
                  acc(logits, gz);
                });
  }

  // Binary cross-entropy on a 1 x 1 probability, clamped 1e-12 from the
  // boundary. Clamped region contributes zero gradient.
  Var bce(Var prob, int label) {
    const T lo = T(1e-12), hi = T(1) - T(1e-12);
    T p = value(prob)(0, 0);
    T pc = std::min(std::max(p, lo), hi);
    Mat v(1, 1);
    v(0, 0) = label ? -std::log(pc) : -std::log(T(1) - pc);
    return push(std::move(v), needs(prob), nullptr,
                [this, prob, label, p, pc, lo, hi](const Mat& g, int) {
                  if (!needs(prob)) return;
                  Mat gp = Mat::Zero(1, 1);
                  if (p >= lo && p <= hi)
                    gp(0, 0) = g(0, 0) * (label ? -T(1) / pc : T(1) / (T(1) - pc));
                  acc(prob, gp);
                });
  }

  // Mean next-token cross entropy. logits is K x |V|; targets[i] is the
  // target id for row i, or -1 to skip the row.
  Var cross_entropy_rows(Var logits, std::vector<int> targets) {
    const Mat& z = value(logits);
    int counted = 0;
    double total = 0;
    Mat probs(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      T mx = z.row(r).maxCoeff();
      Mat e = (z.row(r).array() - mx).exp().matrix();
      T denom = e.sum();
      probs.row(r) = e / denom;
      int t = targets[static_cast<size_t>(r)];
      if (t >= 0) {
        total += -std::log(std::max(probs(r, t), T(1e-30)));
        ++counted;
      }
    }
    if (counted == 0) throw std::invalid_argument("cross_entropy_rows: no targets");
    Mat v(1, 1);
    v(0, 0) = static_cast<T>(total / counted);
    return push(std::move(v), needs(logits), nullptr,
                [this, logits, targets = std::move(targets), probs,
                 counted](const Mat& g, int) {
                  if (!needs(logits)) return;
                  Mat gz = Mat::Zero(probs.rows(), probs.cols());
                  T s = g(0, 0) / T(counted);
                  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                    int t = targets[static_cast<size_t>(r)];
                    if (t < 0) continue;
                    gz.row(r) = probs.row(r) * s;
                    gz(r, t) -= s;
                  }
                  acc(logits, gz);
                });
  }

  Var concat_rows(Var a, Var b) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    if (va.cols() != vb.cols())
      throw std::invalid_argument("concat_rows: column mismatch");
    Mat v(va.rows() + vb.rows(), va.cols());
    v.topRows(va.rows()) = va;
    v.bottomRows(vb.rows()) = vb;
    return push(std::move(v), needs(a) || needs(b), nullptr,
                [this, a, b](const Mat& g, int) {
                  Eigen::Index ra = value(a).rows();
                  if (needs(a)) acc(a, g.topRows(ra));
                  if (needs(b)) acc(b, g.bottomRows(g.rows() - ra));
                });
  }

  // Apply a fixed linear operator; `adj` must be its adjoint (pass the same
  // callable for self-adjoint operators such as symmetric graph propagation).
  Var apply_linear(Var a, std::function<Mat(const Mat&)> fwd,
                   std::function<Mat(const Mat&)> adj) {
    return push(fwd(value(a)), needs(a), nullptr,
                [this, a, adj = std::move(adj)](const Mat& g, int) {
                  if (needs(a)) acc(a, adj(g));
                });
  }

  // Backward from a 1 x 1 loss node. Accumulates into Param::grad of every
  // trainable parameter leaf (Param::grad must be pre-sized via zero_grad).
  void backward(Var loss) {
    if (value(loss).size() != 1)
      throw std::invalid_argument("backward: loss must be scalar");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[loss.id].grad = Mat::Ones(1, 1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.needs || n.grad.size() == 0) continue;
      if (n.back) n.back(n.grad, i);
      if (n.param && n.param->trainable) {
        if (n.param->grad.size() == 0) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  using BackFn = std::function<void(const Mat&, int)>;

  struct Node {
    Mat value;
    Mat grad;
    bool needs = false;
    Param<T>* param = nullptr;
    BackFn back;
  };

  bool needs(Var v) const { return nodes_[v.id].needs; }

  void acc(Var v, const Mat& g) {
    Node& n = nodes_[v.id];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
  }

  Var push(Mat v, bool needs_grad, Param<T>* p, BackFn back) {
    nodes_.push_back(Node{std::move(v), {}, needs_grad, p, std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace collabrec::ad
