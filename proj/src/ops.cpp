#include "radar/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace radar {

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

std::vector<double>& grad_buf(const NodePtr& n) {
  if (n->grad.empty()) n->grad.assign(n->values.size(), 0.0);
  return n->grad;
}

// Builds the op output, enforcing the no-silent-NaN invariant, and marks it
// grad-requiring when any input is.
Tensor make_output(const char* op, Shape shape, std::vector<double> values, bool requires_grad) {
  check_finite(op, values);
  Tensor out(std::move(shape), std::move(values));
  out.set_requires_grad(requires_grad);
  return out;
}

void require_rank(const char* op, const Tensor& t, int rank) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                ", got " + shape_str(t.shape()));
  }
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      const double ail = av[static_cast<size_t>(i) * k + l];
      const double* brow = &bv[static_cast<size_t>(l) * n];
      double* orow = &out[static_cast<size_t>(i) * n];
      for (int j = 0; j < n; ++j) orow[j] += ail * brow[j];
    }
  }
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor result = make_output("matmul", {m, n}, std::move(out), rg);
  if (rg) {
    NodePtr an = a.shared_node(), bn = b.shared_node(), on = result.shared_node();
    tape.record("matmul", on, {an, bn}, [an, bn, on, m, k, n] {
      const auto& go = on->grad;
      if (an->requires_grad) {
        auto& ga = grad_buf(an);
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            double acc = 0.0;
            const double* grow = &go[static_cast<size_t>(i) * n];
            const double* brow = &bn->values[static_cast<size_t>(l) * n];
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[static_cast<size_t>(i) * k + l] += acc;
          }
      }
      if (bn->requires_grad) {
        auto& gb = grad_buf(bn);
        for (int i = 0; i < m; ++i) {
          const double* arow = &an->values[static_cast<size_t>(i) * k];
          const double* grow = &go[static_cast<size_t>(i) * n];
          for (int l = 0; l < k; ++l) {
            double ail = arow[l];
            double* gbrow = &gb[static_cast<size_t>(l) * n];
            for (int j = 0; j < n; ++j) gbrow[j] += ail * grow[j];
          }
        }
      }
    });
  }
  return result;
}

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, int stride, int pad) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", w, 4);
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), k = w.dim(2);
  if (w.dim(1) != C) {
    throw std::invalid_argument("conv2d: kernel channels " + std::to_string(w.dim(1)) +
                                " do not match input channels " + std::to_string(C));
  }
  if (w.dim(3) != k) throw std::invalid_argument("conv2d: kernel must be square");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
  if (k > H + 2 * pad || k > W + 2 * pad) {
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  }
  if ((H + 2 * pad - k) % stride != 0 || (W + 2 * pad - k) % stride != 0) {
    throw std::invalid_argument("conv2d: non-integral output size for input " +
                                shape_str(x.shape()) + ", kernel " + std::to_string(k) +
                                ", stride " + std::to_string(stride) + ", pad " +
                                std::to_string(pad));
  }
  const int OH = (H + 2 * pad - k) / stride + 1;
  const int OW = (W + 2 * pad - k) / stride + 1;

  const auto& xv = x.values();
  const auto& wv = w.values();
  std::vector<double> out(static_cast<size_t>(B) * F * OH * OW, 0.0);

  auto x_at = [C, H, W](int b, int c, int h, int ww) -> size_t {
    return ((static_cast<size_t>(b) * C + c) * H + h) * W + ww;
  };
  auto w_at = [C, k](int f, int c, int kh, int kw) -> size_t {
    return ((static_cast<size_t>(f) * C + c) * k + kh) * k + kw;
  };
  auto o_at = [F, OH, OW](int b, int f, int oh, int ow) -> size_t {
    return ((static_cast<size_t>(b) * F + f) * OH + oh) * OW + ow;
  };

  for (int b = 0; b < B; ++b) {
    for (int f = 0; f < F; ++f) {
      for (int oh = 0; oh < OH; ++oh) {
        const int ih0 = oh * stride - pad;
        const int kh_lo = std::max(0, -ih0);
        const int kh_hi = std::min(k, H - ih0);
        for (int ow = 0; ow < OW; ++ow) {
          const int iw0 = ow * stride - pad;
          const int kw_lo = std::max(0, -iw0);
          const int kw_hi = std::min(k, W - iw0);
          double acc = 0.0;
          for (int c = 0; c < C; ++c) {
            for (int kh = kh_lo; kh < kh_hi; ++kh) {
              const double* xrow = &xv[x_at(b, c, ih0 + kh, iw0 + kw_lo)];
              const double* wrow = &wv[w_at(f, c, kh, kw_lo)];
              for (int kw = 0; kw < kw_hi - kw_lo; ++kw) acc += xrow[kw] * wrow[kw];
            }
          }
          out[o_at(b, f, oh, ow)] = acc;
        }
      }
    }
  }

  bool rg = x.requires_grad() || w.requires_grad();
  Tensor result = make_output("conv2d", {B, F, OH, OW}, std::move(out), rg);
  if (rg) {
    NodePtr xn = x.shared_node(), wn = w.shared_node(), on = result.shared_node();
    tape.record("conv2d", on, {xn, wn},
                [xn, wn, on, B, C, H, W, F, k, OH, OW, stride, pad, x_at, w_at, o_at] {
      const auto& go = on->grad;
      const bool gx_on = xn->requires_grad;
      const bool gw_on = wn->requires_grad;
      std::vector<double>* gx = gx_on ? &grad_buf(xn) : nullptr;
      std::vector<double>* gw = gw_on ? &grad_buf(wn) : nullptr;
      for (int b = 0; b < B; ++b) {
        for (int f = 0; f < F; ++f) {
          for (int oh = 0; oh < OH; ++oh) {
            const int ih0 = oh * stride - pad;
            const int kh_lo = std::max(0, -ih0);
            const int kh_hi = std::min(k, H - ih0);
            for (int ow = 0; ow < OW; ++ow) {
              const int iw0 = ow * stride - pad;
              const int kw_lo = std::max(0, -iw0);
              const int kw_hi = std::min(k, W - iw0);
              const double g = go[o_at(b, f, oh, ow)];
              if (g == 0.0) continue;
              for (int c = 0; c < C; ++c) {
                for (int kh = kh_lo; kh < kh_hi; ++kh) {
                  const size_t xbase = x_at(b, c, ih0 + kh, iw0 + kw_lo);
                  const size_t wbase = w_at(f, c, kh, kw_lo);
                  const int span = kw_hi - kw_lo;
                  if (gx_on) {
                    const double* wrow = &wn->values[wbase];
                    double* gxrow = &(*gx)[xbase];
                    for (int kw = 0; kw < span; ++kw) gxrow[kw] += g * wrow[kw];
                  }
                  if (gw_on) {
                    const double* xrow = &xn->values[xbase];
                    double* gwrow = &(*gw)[wbase];
                    for (int kw = 0; kw < span; ++kw) gwrow[kw] += g * xrow[kw];
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return result;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  bool rg = a.requires_grad() || b.requires_grad();
  Tensor result = make_output("add", a.shape(), std::move(out), rg);
  if (rg) {
    NodePtr an = a.shared_node(), bn = b.shared_node(), on = result.shared_node();
    tape.record("add", on, {an, bn}, [an, bn, on] {
      const auto& go = on->grad;
      if (an->requires_grad) {
        auto& ga = grad_buf(an);
        for (size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (bn->requires_grad) {
        auto& gb = grad_buf(bn);
        for (size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
  }
  return result;
}

Tensor add_bias_rows(Tape& tape, const Tensor& x, const Tensor& b) {
  require_rank("add_bias_rows", x, 2);
  require_rank("add_bias_rows", b, 1);
  const int B = x.dim(0), n = x.dim(1);
  if (b.dim(0) != n) {
    throw std::invalid_argument("add_bias_rows: bias length " + std::to_string(b.dim(0)) +
                                " does not match row width " + std::to_string(n));
  }
  const auto& xv = x.values();
  const auto& bv = b.values();
  std::vector<double> out(xv.size());
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(i) * n + j] = xv[static_cast<size_t>(i) * n + j] + bv[j];
  bool rg = x.requires_grad() || b.requires_grad();
  Tensor result = make_output("add_bias_rows", x.shape(), std::move(out), rg);
  if (rg) {
    NodePtr xn = x.shared_node(), bn = b.shared_node(), on = result.shared_node();
    tape.record("add_bias_rows", on, {xn, bn}, [xn, bn, on, B, n] {
      const auto& go = on->grad;
      if (xn->requires_grad) {
        auto& gx = grad_buf(xn);
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      }
      if (bn->requires_grad) {
        auto& gb = grad_buf(bn);
        for (int i = 0; i < B; ++i)
          for (int j = 0; j < n; ++j) gb[j] += go[static_cast<size_t>(i) * n + j];
      }
    });
  }
  return result;
}

Tensor add_bias_channels(Tape& tape, const Tensor& x, const Tensor& b) {
  require_rank("add_bias_channels", x, 4);
  require_rank("add_bias_channels", b, 1);
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (b.dim(0) != C) {
    throw std::invalid_argument("add_bias_channels: bias length " + std::to_string(b.dim(0)) +
                                " does not match channels " + std::to_string(C));
  }
  const auto& xv = x.values();
  const auto& bv = b.values();
  std::vector<double> out(xv.size());
  const size_t plane = static_cast<size_t>(H) * W;
  for (int i = 0; i < B; ++i)
    for (int c = 0; c < C; ++c) {
      const size_t base = (static_cast<size_t>(i) * C + c) * plane;
      for (size_t p = 0; p < plane; ++p) out[base + p] = xv[base + p] + bv[c];
    }
  bool rg = x.requires_grad() || b.requires_grad();
  Tensor result = make_output("add_bias_channels", x.shape(), std::move(out), rg);
  if (rg) {
    NodePtr xn = x.shared_node(), bn = b.shared_node(), on = result.shared_node();
    tape.record("add_bias_channels", on, {xn, bn}, [xn, bn, on, B, C, plane] {
      const auto& go = on->grad;
      if (xn->requires_grad) {
        auto& gx = grad_buf(xn);
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
      }
      if (bn->requires_grad) {
        auto& gb = grad_buf(bn);
        for (int i = 0; i < B; ++i)
          for (int c = 0; c < C; ++c) {
            const size_t base = (static_cast<size_t>(i) * C + c) * plane;
            double acc = 0.0;
            for (size_t p = 0; p < plane; ++p) acc += go[base + p];
            gb[c] += acc;
          }
      }
    });
  }
  return result;
}

Tensor relu(Tape& tape, const Tensor& x) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  bool rg = x.requires_grad();
  Tensor result = make_output("relu", x.shape(), std::move(out), rg);
  if (rg) {
    NodePtr xn = x.shared_node(), on = result.shared_node();
    tape.record("relu", on, {xn}, [xn, on] {
      const auto& go = on->grad;
      auto& gx = grad_buf(xn);
      for (size_t i = 0; i < go.size(); ++i)
        if (xn->values[i] > 0.0) gx[i] += go[i];
    });
  }
  return result;
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    const double z = xv[i];
    if (z >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-z));
    } else {
      const double e = std::exp(z);  // stable branch, no overflow for z << 0
      out[i] = e / (1.0 + e);
    }
  }
  bool rg = x.requires_grad();
  Tensor result = make_output("sigmoid", x.shape(), std::move(out), rg);
  if (rg) {
    NodePtr xn = x.shared_node(), on = result.shared_node();
    tape.record("sigmoid", on, {xn}, [xn, on] {
      const auto& go = on->grad;
      auto& gx = grad_buf(xn);
      for (size_t i = 0; i < go.size(); ++i) {
        const double y = on->values[i];
        gx[i] += go[i] * y * (1.0 - y);
      }
    });
  }
  return result;
}

Tensor scale(Tape& tape, const Tensor& x, double c) {
  if (!std::isfinite(c)) throw std::invalid_argument("scale: factor must be finite");
  const auto& xv = x.values();
  std::vector<double> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = c * xv[i];
  bool rg = x.requires_grad();
  Tensor result = make_output("scale", x.shape(), std::move(out), rg);
  if (rg) {
    NodePtr xn = x.shared_node(), on = result.shared_node();
    tape.record("scale", on, {xn}, [xn, on, c] {
      const auto& go = on->grad;
      auto& gx = grad_buf(xn);
      for (size_t i = 0; i < go.size(); ++i) gx[i] += c * go[i];
    });
  }
  return result;
}

Tensor flatten(Tape& tape, const Tensor& x) {
  if (x.rank() < 2) throw std::invalid_argument("flatten: rank must be >= 2");
  const int B = x.dim(0);
  const int rest = static_cast<int>(x.size() / B);
  bool rg = x.requires_grad();
  Tensor result = make_output("flatten", {B, rest}, x.values(), rg);
  if (rg) {
    NodePtr xn = x.shared_node(), on = result.shared_node();
    tape.record("flatten", on, {xn}, [xn, on] {
      const auto& go = on->grad;
      auto& gx = grad_buf(xn);
      for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
  }
  return result;
}

Tensor mean_pool2(Tape& tape, const Tensor& x) {
  require_rank("mean_pool2", x, 4);
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw std::invalid_argument("mean_pool2: H and W must be even, got " + shape_str(x.shape()));
  }
  const int OH = H / 2, OW = W / 2;
  const auto& xv = x.values();
  std::vector<double> out(static_cast<size_t>(B) * C * OH * OW);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const size_t ibase = (static_cast<size_t>(b) * C + c) * H * W;
      const size_t obase = (static_cast<size_t>(b) * C + c) * OH * OW;
      for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j) {
          const size_t p = ibase + static_cast<size_t>(2 * i) * W + 2 * j;
          out[obase + static_cast<size_t>(i) * OW + j] =
              0.25 * (xv[p] + xv[p + 1] + xv[p + W] + xv[p + W + 1]);
        }
    }
  bool rg = x.requires_grad();
  Tensor result = make_output("mean_pool2", {B, C, OH, OW}, std::move(out), rg);
  if (rg) {
    NodePtr xn = x.shared_node(), on = result.shared_node();
    tape.record("mean_pool2", on, {xn}, [xn, on, B, C, H, W, OH, OW] {
      const auto& go = on->grad;
      auto& gx = grad_buf(xn);
      for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
          const size_t ibase = (static_cast<size_t>(b) * C + c) * H * W;
          const size_t obase = (static_cast<size_t>(b) * C + c) * OH * OW;
          for (int i = 0; i < OH; ++i)
            for (int j = 0; j < OW; ++j) {
              const double g = 0.25 * go[obase + static_cast<size_t>(i) * OW + j];
              const size_t p = ibase + static_cast<size_t>(2 * i) * W + 2 * j;
              gx[p] += g;
              gx[p + 1] += g;
              gx[p + W] += g;
              gx[p + W + 1] += g;
            }
        }
    });
  }
  return result;
}

Tensor sum(Tape& tape, const Tensor& x) {
  const auto& xv = x.values();
  double acc = 0.0;
  for (double v : xv) acc += v;
  bool rg = x.requires_grad();
  Tensor result = make_output("sum", {1}, {acc}, rg);
  if (rg) {
    NodePtr xn = x.shared_node(), on = result.shared_node();
    tape.record("sum", on, {xn}, [xn, on] {
      const double g = on->grad[0];
      auto& gx = grad_buf(xn);
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return result;
}

Tensor mean(Tape& tape, const Tensor& x) {
  const auto& xv = x.values();
  double acc = 0.0;
  for (double v : xv) acc += v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  bool rg = x.requires_grad();
  Tensor result = make_output("mean", {1}, {acc * inv}, rg);
  if (rg) {
    NodePtr xn = x.shared_node(), on = result.shared_node();
    tape.record("mean", on, {xn}, [xn, on, inv] {
      const double g = on->grad[0] * inv;
      auto& gx = grad_buf(xn);
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }
  return result;
}

Tensor weighted_sum(Tape& tape, const Tensor& v, const std::vector<double>& weights) {
  const auto& xv = v.values();
  if (xv.size() != weights.size()) {
    throw std::invalid_argument("weighted_sum: weights length " + std::to_string(weights.size()) +
                                " does not match tensor size " + std::to_string(xv.size()));
  }
  check_finite("weighted_sum", weights);
  double acc = 0.0;
  for (size_t i = 0; i < xv.size(); ++i) acc += weights[i] * xv[i];
  bool rg = v.requires_grad();
  Tensor result = make_output("weighted_sum", {1}, {acc}, rg);
  if (rg) {
    NodePtr xn = v.shared_node(), on = result.shared_node();
    tape.record("weighted_sum", on, {xn}, [xn, on, weights] {
      const double g = on->grad[0];
      auto& gx = grad_buf(xn);
      for (size_t i = 0; i < gx.size(); ++i) gx[i] += g * weights[i];
    });
  }
  return result;
}

Tensor cross_entropy_per_item(Tape& tape, const Tensor& logits, const std::vector<int>& labels) {
  require_rank("cross_entropy", logits, 2);
  const int B = logits.dim(0), K = logits.dim(1);
  if (K < 2) throw std::invalid_argument("cross_entropy: need at least 2 classes");
  if (static_cast<int>(labels.size()) != B) {
    throw std::invalid_argument("cross_entropy: labels length " + std::to_string(labels.size()) +
                                " does not match batch " + std::to_string(B));
  }
  for (int y : labels) {
    if (y < 0 || y >= K) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                  " out of range [0," + std::to_string(K) + ")");
    }
  }
  const auto& lv = logits.values();
  std::vector<double> out(static_cast<size_t>(B));
  std::vector<double> softmax(static_cast<size_t>(B) * K);
  for (int b = 0; b < B; ++b) {
    const double* row = &lv[static_cast<size_t>(b) * K];
    double m = row[0];
    for (int j = 1; j < K; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < K; ++j) z += std::exp(row[j] - m);
    const double lse = m + std::log(z);
    out[static_cast<size_t>(b)] = lse - row[labels[static_cast<size_t>(b)]];
    for (int j = 0; j < K; ++j)
      softmax[static_cast<size_t>(b) * K + j] = std::exp(row[j] - m) / z;
  }
  bool rg = logits.requires_grad();
  Tensor result = make_output("cross_entropy", {B}, std::move(out), rg);
  if (rg) {
    NodePtr ln = logits.shared_node(), on = result.shared_node();
    tape.record("cross_entropy", on, {ln},
                [ln, on, labels, softmax = std::move(softmax), B, K] {
      const auto& go = on->grad;
      auto& gl = grad_buf(ln);
      for (int b = 0; b < B; ++b) {
        const double g = go[static_cast<size_t>(b)];
        for (int j = 0; j < K; ++j) {
          double d = softmax[static_cast<size_t>(b) * K + j];
          if (j == labels[static_cast<size_t>(b)]) d -= 1.0;
          gl[static_cast<size_t>(b) * K + j] += g * d;
        }
      }
    });
  }
  return result;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels) {
  return mean(tape, cross_entropy_per_item(tape, logits, labels));
}

Tensor binary_cross_entropy_per_item(Tape& tape, const Tensor& prob,
                                     const std::vector<double>& targets) {
  const int64_t B = prob.size();
  if (prob.rank() > 2 || (prob.rank() == 2 && prob.dim(1) != 1)) {
    throw std::invalid_argument("binary_cross_entropy: prob must be [B] or [B,1], got " +
                                shape_str(prob.shape()));
  }
  if (static_cast<int64_t>(targets.size()) != B) {
    throw std::invalid_argument("binary_cross_entropy: targets length " +
                                std::to_string(targets.size()) + " does not match batch " +
                                std::to_string(B));
  }
  for (double t : targets) {
    if (t != 0.0 && t != 1.0) {
      throw std::invalid_argument("binary_cross_entropy: targets must be exactly 0 or 1");
    }
  }
  const double lo = kBceProbClamp, hi = 1.0 - kBceProbClamp;
  const auto& pv = prob.values();
  std::vector<double> out(static_cast<size_t>(B));
  for (int64_t i = 0; i < B; ++i) {
    const double p = std::min(hi, std::max(lo, pv[static_cast<size_t>(i)]));
    const double t = targets[static_cast<size_t>(i)];
    out[static_cast<size_t>(i)] = -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
  }
  bool rg = prob.requires_grad();
  Tensor result = make_output("binary_cross_entropy", {static_cast<int>(B)}, std::move(out), rg);
  if (rg) {
    NodePtr pn = prob.shared_node(), on = result.shared_node();
    tape.record("binary_cross_entropy", on, {pn}, [pn, on, targets, lo, hi] {
      const auto& go = on->grad;
      auto& gp = grad_buf(pn);
      for (size_t i = 0; i < go.size(); ++i) {
        const double p = pn->values[i];
        if (p < lo || p > hi) continue;  // clamp active: zero slope
        gp[i] += go[i] * (p - targets[i]) / (p * (1.0 - p));
      }
    });
  }
  return result;
}

Tensor binary_cross_entropy(Tape& tape, const Tensor& prob, const std::vector<double>& targets) {
  return mean(tape, binary_cross_entropy_per_item(tape, prob, targets));
}

std::vector<int> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw std::invalid_argument("argmax_rows: expected rank 2, got " + shape_str(logits.shape()));
  }
  const int B = logits.dim(0), K = logits.dim(1);
  const auto& lv = logits.values();
  std::vector<int> out(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    const double* row = &lv[static_cast<size_t>(b) * K];
    int best = 0;
    for (int j = 1; j < K; ++j)
      if (row[j] > row[best]) best = j;
    out[static_cast<size_t>(b)] = best;
  }
  return out;
}

}  // namespace radar
