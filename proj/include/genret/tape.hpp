#pragma once

// Minimal reverse-mode autodiff over the handful of operators an
// encoder-decoder transformer needs. Values are row-major matrices, one row
// per token; a batch is packed row-wise and attention runs per segment.

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace genret {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Rows [offset, offset + length) of a packed matrix belong to one sequence.
struct Segment {
  int offset = 0;
  int length = 0;
};

template <class T>
class Tape {
 public:
  using Mat = Matrix<T>;

  struct Var {
    int id = -1;
  };

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value) {
    Node& n = nodes_.emplace_back();
    n.owned = std::move(value);
    return {static_cast<int>(nodes_.size()) - 1};
  }

  /// Leaf that references `value` without copying; it must outlive the tape.
  Var parameter(const Mat& value) {
    Node& n = nodes_.emplace_back();
    n.ref = &value;
    n.needs_grad = record_;
    return {static_cast<int>(nodes_.size()) - 1};
  }

  const Mat& value(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    return n.ref ? *n.ref : n.owned;
  }

  /// Empty when nothing flowed into `v`.
  const Mat& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  Var embed(Var table, std::span<const int> ids, Var pos_table, std::span<const int> positions) {
    const Mat& e = value(table);
    const Mat& p = value(pos_table);
    Mat out(static_cast<Eigen::Index>(ids.size()), e.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = e.row(ids[i]) + p.row(positions[i]);
    }
    Var y = result(std::move(out), {table, pos_table});
    if (tracks(y)) {
      std::vector<int> id_copy(ids.begin(), ids.end());
      std::vector<int> pos_copy(positions.begin(), positions.end());
      push(y, [this, y, table, pos_table, id_copy = std::move(id_copy), pos_copy = std::move(pos_copy)] {
        const Mat& dy = grad(y);
        if (needs(table)) {
          Mat& de = grad_ref(table);
          for (std::size_t i = 0; i < id_copy.size(); ++i) de.row(id_copy[i]) += dy.row(static_cast<Eigen::Index>(i));
        }
        if (needs(pos_table)) {
          Mat& dp = grad_ref(pos_table);
          for (std::size_t i = 0; i < pos_copy.size(); ++i) dp.row(pos_copy[i]) += dy.row(static_cast<Eigen::Index>(i));
        }
      });
    }
    return y;
  }

  Var add(Var a, Var b) {
    Var y = result(value(a) + value(b), {a, b});
    if (tracks(y)) {
      push(y, [this, y, a, b] {
        if (needs(a)) grad_ref(a) += grad(y);
        if (needs(b)) grad_ref(b) += grad(y);
      });
    }
    return y;
  }

  /// x * w + b, with w of shape [in, out] and b of shape [1, out].
  Var linear(Var x, Var w, Var b) {
    Mat out = value(x) * value(w);
    out.rowwise() += value(b).row(0);
    Var y = result(std::move(out), {x, w, b});
    if (tracks(y)) {
      push(y, [this, y, x, w, b] {
        const Mat& dy = grad(y);
        if (needs(x)) grad_ref(x).noalias() += dy * value(w).transpose();
        if (needs(w)) grad_ref(w).noalias() += value(x).transpose() * dy;
        if (needs(b)) grad_ref(b) += dy.colwise().sum();
      });
    }
    return y;
  }

  /// Appends the sign of every later ReLU input to `out` (kink detection).
  void record_relu_signs(std::vector<bool>* out) { relu_signs_ = out; }

  Var relu(Var x) {
    if (relu_signs_) {
      const Mat& xv = value(x);
      for (Eigen::Index i = 0; i < xv.size(); ++i) relu_signs_->push_back(xv.data()[i] > T(0));
    }
    Var y = result(value(x).cwiseMax(T(0)), {x});
    if (tracks(y)) {
      push(y, [this, y, x] {
        if (needs(x)) grad_ref(x) += (value(x).array() > T(0)).select(grad(y), T(0));
      });
    }
    return y;
  }

  Var layer_norm(Var x, Var gain, Var bias, T eps = T(1e-5)) {
    const Mat& xv = value(x);
    const Eigen::Index n = xv.rows(), d = xv.cols();
    Mat xhat(n, d);
    std::vector<T> inv_std(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) {
      const T mean = xv.row(r).mean();
      const T var = (xv.row(r).array() - mean).square().mean();
      const T is = T(1) / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(r)] = is;
      xhat.row(r) = (xv.row(r).array() - mean) * is;
    }
    Mat out = xhat.array().rowwise() * value(gain).row(0).array();
    out.rowwise() += value(bias).row(0);
    Var y = result(std::move(out), {x, gain, bias});
    if (tracks(y)) {
      push(y, [this, y, x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
        const Mat& dy = grad(y);
        if (needs(gain)) grad_ref(gain) += (dy.array() * xhat.array()).colwise().sum().matrix();
        if (needs(bias)) grad_ref(bias) += dy.colwise().sum();
        if (needs(x)) {
          Mat& dx = grad_ref(x);
          const auto g = value(gain).row(0).array();
          for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            Eigen::Array<T, 1, Eigen::Dynamic> dxhat = dy.row(r).array() * g;
            const T m1 = dxhat.mean();
            const T m2 = (dxhat * xhat.row(r).array()).mean();
            dx.row(r).array() += inv_std[static_cast<std::size_t>(r)] * (dxhat - m1 - xhat.row(r).array() * m2);
          }
        }
      });
    }
    return y;
  }

  /// Scaled dot-product attention over `heads` column groups. Query segment i
  /// attends to key segment i only; with `causal`, row t sees keys <= t.
  Var attention(Var q, Var k, Var v, std::span<const Segment> q_segs, std::span<const Segment> k_segs, int heads,
                bool causal) {
    const Mat& qv = value(q);
    const Mat& kv = value(k);
    const Mat& vv = value(v);
    const Eigen::Index d = qv.cols();
    const Eigen::Index dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    Mat out = Mat::Zero(qv.rows(), d);
    std::vector<Mat> probs;
    probs.reserve(q_segs.size() * static_cast<std::size_t>(heads));
    for (std::size_t s = 0; s < q_segs.size(); ++s) {
      const Segment qs = q_segs[s];
      const Segment ks = k_segs[s];
      for (int h = 0; h < heads; ++h) {
        const Eigen::Index c = h * dh;
        Mat p = (qv.block(qs.offset, c, qs.length, dh) * kv.block(ks.offset, c, ks.length, dh).transpose()) * scale;
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
          const Eigen::Index visible = causal ? std::min<Eigen::Index>(r + 1, p.cols()) : p.cols();
          const T mx = p.row(r).head(visible).maxCoeff();
          T sum = 0;
          for (Eigen::Index j = 0; j < visible; ++j) {
            p(r, j) = std::exp(p(r, j) - mx);
            sum += p(r, j);
          }
          p.row(r).head(visible) /= sum;
          for (Eigen::Index j = visible; j < p.cols(); ++j) p(r, j) = T(0);
        }
        out.block(qs.offset, c, qs.length, dh).noalias() = p * vv.block(ks.offset, c, ks.length, dh);
        probs.push_back(std::move(p));
      }
    }
    Var y = result(std::move(out), {q, k, v});
    if (tracks(y)) {
      std::vector<Segment> qcopy(q_segs.begin(), q_segs.end());
      std::vector<Segment> kcopy(k_segs.begin(), k_segs.end());
      push(y, [this, y, q, k, v, heads, dh, scale, probs = std::move(probs), qcopy = std::move(qcopy),
            kcopy = std::move(kcopy)] {
        const Mat& dy = grad(y);
        const Mat& qv = value(q);
        const Mat& kv = value(k);
        const Mat& vv = value(v);
        Mat* dq = needs(q) ? &grad_ref(q) : nullptr;
        Mat* dk = needs(k) ? &grad_ref(k) : nullptr;
        Mat* dv = needs(v) ? &grad_ref(v) : nullptr;
        std::size_t idx = 0;
        for (std::size_t s = 0; s < qcopy.size(); ++s) {
          const Segment qs = qcopy[s];
          const Segment ks = kcopy[s];
          for (int h = 0; h < heads; ++h, ++idx) {
            const Eigen::Index c = h * dh;
            const Mat& p = probs[idx];
            const auto dout = dy.block(qs.offset, c, qs.length, dh);
            if (dv) dv->block(ks.offset, c, ks.length, dh).noalias() += p.transpose() * dout;
            Mat dp = dout * vv.block(ks.offset, c, ks.length, dh).transpose();
            Eigen::Matrix<T, Eigen::Dynamic, 1> rowdot = (dp.array() * p.array()).rowwise().sum();
            Mat ds = (p.array() * (dp.array().colwise() - rowdot.array())).matrix() * scale;
            if (dq) dq->block(qs.offset, c, qs.length, dh).noalias() += ds * kv.block(ks.offset, c, ks.length, dh);
            if (dk) dk->block(ks.offset, c, ks.length, dh).noalias() += ds.transpose() * qv.block(qs.offset, c, qs.length, dh);
          }
        }
      });
    }
    return y;
  }

  /// x * table^T: hidden states to vocabulary logits.
  Var project_out(Var x, Var table) {
    Mat out = value(x) * value(table).transpose();
    Var y = result(std::move(out), {x, table});
    if (tracks(y)) {
      push(y, [this, y, x, table] {
        const Mat& dy = grad(y);
        if (needs(x)) grad_ref(x).noalias() += dy * value(table);
        if (needs(table)) grad_ref(table).noalias() += dy.transpose() * value(x);
      });
    }
    return y;
  }

  /// Inverted dropout; identity when p == 0.
  Var dropout(Var x, T p, std::mt19937_64& rng) {
    if (p <= T(0)) return x;
    std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
    Mat mask(value(x).rows(), value(x).cols());
    const T s = T(1) / (T(1) - p);
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : T(0);
    Var y = result(value(x).cwiseProduct(mask), {x});
    if (tracks(y)) {
      push(y, [this, y, x, mask = std::move(mask)] {
        if (needs(x)) grad_ref(x) += grad(y).cwiseProduct(mask);
      });
    }
    return y;
  }

  /// Sum over rows of -log softmax(logits)[target]; rows whose target is
  /// `ignore_id` are skipped. Returns a 1x1 node.
  Var cross_entropy_sum(Var logits, std::span<const int> targets, int ignore_id) {
    const Mat& z = value(logits);
    Mat total = Mat::Zero(1, 1);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      const int t = targets[static_cast<std::size_t>(r)];
      if (t == ignore_id) continue;
      const T mx = z.row(r).maxCoeff();
      const T lse = mx + std::log((z.row(r).array() - mx).exp().sum());
      total(0, 0) += lse - z(r, t);
    }
    Var y = result(std::move(total), {logits});
    if (tracks(y)) {
      std::vector<int> tcopy(targets.begin(), targets.end());
      push(y, [this, y, logits, ignore_id, tcopy = std::move(tcopy)] {
        if (!needs(logits)) return;
        const T upstream = grad(y)(0, 0);
        const Mat& zz = value(logits);
        Mat& dz = grad_ref(logits);
        for (Eigen::Index r = 0; r < zz.rows(); ++r) {
          const int t = tcopy[static_cast<std::size_t>(r)];
          if (t == ignore_id) continue;
          const T mx = zz.row(r).maxCoeff();
          auto e = (zz.row(r).array() - mx).exp();
          const T sum = e.sum();
          dz.row(r).array() += upstream * e / sum;
          dz(r, t) -= upstream;
        }
      });
    }
    return y;
  }

  /// Runs the recorded ops in reverse, seeding d(loss) = seed.
  void backward(Var loss, T seed = T(1)) {
    if (!record_) return;
    grad_ref(loss).setConstant(seed);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      if (grad(it->first).size() != 0) it->second();  // skip ops off the loss path
    }
  }

 private:
  struct Node {
    Mat owned;
    const Mat* ref = nullptr;
    Mat grad;
    bool needs_grad = false;
  };

  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].needs_grad; }
  bool tracks(Var v) const { return record_ && needs(v); }

  Var result(Mat value, std::initializer_list<Var> inputs) {
    Node& n = nodes_.emplace_back();
    n.owned = std::move(value);
    if (record_) {
      for (Var in : inputs) n.needs_grad = n.needs_grad || needs(in);
    }
    return {static_cast<int>(nodes_.size()) - 1};
  }

  Mat& grad_ref(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.grad.size() == 0) {
      const Mat& val = n.ref ? *n.ref : n.owned;
      n.grad = Mat::Zero(val.rows(), val.cols());
    }
    return n.grad;
  }

  void push(Var out, std::function<void()> op) { ops_.emplace_back(out, std::move(op)); }

  bool record_;
  std::vector<bool>* relu_signs_ = nullptr;
  std::deque<Node> nodes_;
  std::vector<std::pair<Var, std::function<void()>>> ops_;
};

}  // namespace genret
