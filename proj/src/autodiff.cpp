#include "eags/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "eags/error.hpp"

namespace eags::nn {

namespace {

[[noreturn]] void shape_fail(const char* op, std::initializer_list<const Tensor*> ts,
                             const std::string& detail = {}) {
  std::ostringstream os;
  os << op << ": incompatible shapes";
  for (const Tensor* t : ts) os << ' ' << t->shape_string();
  if (!detail.empty()) os << " (" << detail << ')';
  throw ShapeError(os.str());
}

void accumulate(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x k] += A[m x n] * B[k x n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += arow[j] * brow[j];
      c[i * k + p] += s;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

// ---- Var / Graph -----------------------------------------------------------

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(const Tensor& p) {
  Node n;
  n.ref = &p;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::parameter(Tensor& p) {
  Node n;
  n.ref = &p;
  if (record_grad_) n.param = &p;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

std::vector<double>& Graph::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

Var Graph::push(Tensor value, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (record_grad_) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var loss) {
  if (!record_grad_) throw InvariantError("backward: graph was built without gradient recording");
  if (&loss.graph() != this) throw InvariantError("backward: loss belongs to another graph");
  if (value(loss.id()).size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + value(loss.id()).shape_string());
  for (Node& n : nodes_) n.grad.clear();
  grad(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.param) continue;
    if (n.param->grad.size() != n.param->data.size()) n.param->zero_grad();
    if (!n.grad.empty()) accumulate(n.param->grad, n.grad);
  }
}

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Graph& g = a.graph();
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k) shape_fail("matmul", {&A, &B});
  Tensor C = Tensor::matrix(m, n);
  gemm_nn(A.data.data(), B.data.data(), C.data.data(), m, k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return g.push(std::move(C), [ia, ib, m, k, n](Graph& g, std::size_t self) {
    const std::vector<double> dc = g.grad(self);
    const Tensor& A = g.value(ia);
    const Tensor& B = g.value(ib);
    gemm_nt(dc.data(), B.data.data(), g.grad(ia).data(), m, n, k);
    gemm_tn(A.data.data(), dc.data(), g.grad(ib).data(), m, k, n);
  });
}

Var add(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape != B.shape) shape_fail("add", {&A, &B});
  Tensor C = A;
  C.grad.clear();
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().push(std::move(C), [ia, ib](Graph& g, std::size_t self) {
    const std::vector<double> d = g.grad(self);
    accumulate(g.grad(ia), d);
    accumulate(g.grad(ib), d);
  });
}

Var add_bias(Var a, Var bias) {
  const Tensor& A = a.value();
  const Tensor& B = bias.value();
  const std::size_t m = A.rows(), n = A.cols();
  if (B.size() != n) shape_fail("add_bias", {&A, &B});
  Tensor C = A;
  C.grad.clear();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) C.data[i * n + j] += B.data[j];
  const std::size_t ia = a.id(), ib = bias.id();
  return a.graph().push(std::move(C), [ia, ib, m, n](Graph& g, std::size_t self) {
    const std::vector<double> d = g.grad(self);
    accumulate(g.grad(ia), d);
    std::vector<double>& gb = g.grad(ib);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gb[j] += d[i * n + j];
  });
}

Var mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape != B.shape) shape_fail("mul", {&A, &B});
  Tensor C = A;
  C.grad.clear();
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] *= B.data[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().push(std::move(C), [ia, ib](Graph& g, std::size_t self) {
    const std::vector<double> d = g.grad(self);
    const std::vector<double> av = g.value(ia).data;
    const std::vector<double> bv = g.value(ib).data;
    {
      std::vector<double>& ga = g.grad(ia);
      for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * bv[i];
    }
    std::vector<double>& gb = g.grad(ib);
    for (std::size_t i = 0; i < d.size(); ++i) gb[i] += d[i] * av[i];
  });
}

Var scale(Var a, double s) {
  Tensor C = a.value();
  C.grad.clear();
  for (double& v : C.data) v *= s;
  const std::size_t ia = a.id();
  return a.graph().push(std::move(C), [ia, s](Graph& g, std::size_t self) {
    const std::vector<double>& d = g.grad(self);
    std::vector<double>& ga = g.grad(ia);
    for (std::size_t i = 0; i < d.size(); ++i) ga[i] += s * d[i];
  });
}

Var sum(Var a) {
  const Tensor& A = a.value();
  double s = 0.0;
  for (double v : A.data) s += v;
  const std::size_t ia = a.id();
  return a.graph().push(Tensor::scalar(s), [ia](Graph& g, std::size_t self) {
    const double d = g.grad(self)[0];
    for (double& v : g.grad(ia)) v += d;
  });
}

Var softmax(Var a, int axis, std::span<const std::uint8_t> allowed) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  if (axis != -1 && axis != 0 && axis != 1) shape_fail("softmax", {&A}, "axis must be 0, 1 or -1");
  const bool along_rows = axis != 0;
  // Each "line" is one softmax group: a row (along_rows) or a column.
  const std::size_t lines = along_rows ? m : n;
  const std::size_t len = along_rows ? n : m;
  const std::size_t stride = along_rows ? 1 : n;
  if (!allowed.empty() && allowed.size() != len)
    shape_fail("softmax", {&A}, "mask length " + std::to_string(allowed.size()));
  auto index = [&](std::size_t line, std::size_t j) {
    return along_rows ? line * n + j : j * n + line;
  };
  Tensor P = Tensor(A.shape);
  for (std::size_t l = 0; l < lines; ++l) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < len; ++j)
      if (allowed.empty() || allowed[j]) mx = std::max(mx, A.data[index(l, j)]);
    if (mx == -INFINITY) shape_fail("softmax", {&A}, "mask excludes every entry");
    double z = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      const double e = (allowed.empty() || allowed[j]) ? std::exp(A.data[index(l, j)] - mx) : 0.0;
      P.data[index(l, j)] = e;
      z += e;
    }
    for (std::size_t j = 0; j < len; ++j) P.data[index(l, j)] /= z;
  }
  const std::size_t ia = a.id();
  return a.graph().push(std::move(P), [ia, lines, len, stride, along_rows, n](Graph& g,
                                                                               std::size_t self) {
    const std::vector<double>& d = g.grad(self);
    const std::vector<double>& p = g.value(self).data;
    std::vector<double>& ga = g.grad(ia);
    for (std::size_t l = 0; l < lines; ++l) {
      const std::size_t base = along_rows ? l * n : l;
      double dot = 0.0;
      for (std::size_t j = 0; j < len; ++j) dot += d[base + j * stride] * p[base + j * stride];
      for (std::size_t j = 0; j < len; ++j) {
        const std::size_t k = base + j * stride;
        ga[k] += p[k] * (d[k] - dot);
      }
    }
  });
}

Var layernorm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& X = x.value();
  const Tensor& G = gamma.value();
  const Tensor& B = beta.value();
  const std::size_t m = X.rows(), n = X.cols();
  if (G.size() != n || B.size() != n) shape_fail("layernorm", {&X, &G, &B});
  Tensor Y = Tensor(X.shape);
  // Normalized activations and inverse std are needed by the backward pass.
  std::vector<double> xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = X.data.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mean) * inv_std[i];
      Y.data[i * n + j] = xhat[i * n + j] * G.data[j] + B.data[j];
    }
  }
  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.graph().push(
      std::move(Y), [ix, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                        Graph& g, std::size_t self) {
        const std::vector<double> d = g.grad(self);
        const std::vector<double> gv = g.value(ig).data;
        {
          std::vector<double>& gg = g.grad(ig);
          std::vector<double>& gb = g.grad(ib);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              gg[j] += d[i * n + j] * xhat[i * n + j];
              gb[j] += d[i * n + j];
            }
        }
        std::vector<double>& gx = g.grad(ix);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < m; ++i) {
          double s1 = 0.0, s2 = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double dxh = d[i * n + j] * gv[j];
            s1 += dxh;
            s2 += dxh * xhat[i * n + j];
          }
          for (std::size_t j = 0; j < n; ++j) {
            const double dxh = d[i * n + j] * gv[j];
            gx[i * n + j] += inv_std[i] * (dxh - inv_n * s1 - xhat[i * n + j] * inv_n * s2);
          }
        }
      });
}

Var gelu(Var x) {
  const Tensor& X = x.value();
  Tensor Y(X.shape);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double v = X.data[i];
    Y.data[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + 0.044715 * v * v * v)));
  }
  const std::size_t ix = x.id();
  return x.graph().push(std::move(Y), [ix](Graph& g, std::size_t self) {
    const std::vector<double>& d = g.grad(self);
    const std::vector<double> xv = g.value(ix).data;
    std::vector<double>& gx = g.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double v = xv[i];
      const double u = kGeluC * (v + 0.044715 * v * v * v);
      const double th = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
      gx[i] += d[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
    }
  });
}

Var embedding(Var table, std::span<const int> ids) {
  const Tensor& E = table.value();
  const std::size_t vocab = E.rows(), d = E.cols();
  Tensor Y = Tensor::matrix(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab)
      shape_fail("embedding", {&E}, "id " + std::to_string(ids[i]) + " out of range");
    std::copy_n(E.data.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                Y.data.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  const std::size_t it = table.id();
  return table.graph().push(std::move(Y), [it, d, idv = std::vector<int>(ids.begin(), ids.end())](
                                              Graph& g, std::size_t self) {
    const std::vector<double>& dy = g.grad(self);
    std::vector<double>& ge = g.grad(it);
    for (std::size_t i = 0; i < idv.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) ge[static_cast<std::size_t>(idv[i]) * d + j] += dy[i * d + j];
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor T = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) T.data[j * m + i] = A.data[i * n + j];
  const std::size_t ia = a.id();
  return a.graph().push(std::move(T), [ia, m, n](Graph& g, std::size_t self) {
    const std::vector<double>& d = g.grad(self);
    std::vector<double>& ga = g.grad(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += d[j * m + i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t width) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  if (begin + width > n || width == 0)
    shape_fail("slice_cols", {&A}, "begin " + std::to_string(begin) + " width " + std::to_string(width));
  Tensor S = Tensor::matrix(m, width);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < width; ++j) S.data[i * width + j] = A.data[i * n + begin + j];
  const std::size_t ia = a.id();
  return a.graph().push(std::move(S), [ia, m, n, begin, width](Graph& g, std::size_t self) {
    const std::vector<double>& d = g.grad(self);
    std::vector<double>& ga = g.grad(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < width; ++j) ga[i * n + begin + j] += d[i * width + j];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Graph& g = parts.front().graph();
  const std::size_t m = parts.front().value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var& v : parts) {
    if (v.value().rows() != m) shape_fail("concat_cols", {&parts.front().value(), &v.value()});
    ids.push_back(v.id());
    widths.push_back(v.value().cols());
    total += v.value().cols();
  }
  Tensor C = Tensor::matrix(m, total);
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& P = parts[p].value();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[p]; ++j) C.data[i * total + off + j] = P.data[i * widths[p] + j];
    off += widths[p];
  }
  return g.push(std::move(C), [ids, widths, m, total](Graph& g, std::size_t self) {
    const std::vector<double> d = g.grad(self);
    std::size_t off = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      std::vector<double>& gp = g.grad(ids[p]);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < widths[p]; ++j) gp[i * widths[p] + j] += d[i * total + off + j];
      off += widths[p];
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor G = Tensor::matrix(rows.size(), n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= m) shape_fail("gather_rows", {&A}, "row " + std::to_string(rows[r]));
    std::copy_n(A.data.begin() + static_cast<std::ptrdiff_t>(rows[r] * n), n,
                G.data.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  const std::size_t ia = a.id();
  return a.graph().push(std::move(G), [ia, n, rv = std::vector<std::size_t>(rows.begin(), rows.end())](
                                          Graph& g, std::size_t self) {
    const std::vector<double>& d = g.grad(self);
    std::vector<double>& ga = g.grad(ia);
    for (std::size_t r = 0; r < rv.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) ga[rv[r] * n + j] += d[r * n + j];
  });
}

Var dropout(Var x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ShapeError("dropout: p must be in [0,1), got " + std::to_string(p));
  const Tensor& X = x.value();
  std::vector<double> keep(X.size());
  const double s = 1.0 / (1.0 - p);
  for (double& k : keep) k = rng.uniform() >= p ? s : 0.0;
  Tensor Y = X;
  Y.grad.clear();
  for (std::size_t i = 0; i < Y.size(); ++i) Y.data[i] *= keep[i];
  const std::size_t ix = x.id();
  return x.graph().push(std::move(Y), [ix, keep = std::move(keep)](Graph& g, std::size_t self) {
    const std::vector<double>& d = g.grad(self);
    std::vector<double>& gx = g.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) gx[i] += d[i] * keep[i];
  });
}

Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights,
                  std::span<const std::uint8_t> allowed) {
  const Tensor& Z = logits.value();
  const std::size_t m = Z.rows(), n = Z.cols();
  if (targets.size() != m || weights.size() != m)
    shape_fail("cross_entropy", {&Z},
               "targets " + std::to_string(targets.size()) + ", weights " + std::to_string(weights.size()));
  if (!allowed.empty() && allowed.size() != n)
    shape_fail("cross_entropy", {&Z}, "mask length " + std::to_string(allowed.size()));
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (!(wsum > 0.0)) throw ShapeError("cross_entropy: position weights sum to zero");

  std::vector<double> probs(m * n, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const int t = targets[i];
    if (weights[i] == 0.0) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= n || (!allowed.empty() && !allowed[static_cast<std::size_t>(t)]))
      shape_fail("cross_entropy", {&Z}, "target " + std::to_string(t) + " not a valid class");
    const double* z = Z.data.data() + i * n;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j)
      if (allowed.empty() || allowed[j]) mx = std::max(mx, z[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (allowed.empty() || allowed[j]) s += std::exp(z[j] - mx);
    const double logz = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j)
      if (allowed.empty() || allowed[j]) probs[i * n + j] = std::exp(z[j] - logz);
    loss += weights[i] * (logz - z[t]);
  }
  loss /= wsum;
  const std::size_t iz = logits.id();
  return logits.graph().push(
      Tensor::scalar(loss),
      [iz, m, n, wsum, probs = std::move(probs), tv = std::vector<int>(targets.begin(), targets.end()),
       wv = std::vector<double>(weights.begin(), weights.end())](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0];
        std::vector<double>& gz = g.grad(iz);
        for (std::size_t i = 0; i < m; ++i) {
          if (wv[i] == 0.0) continue;
          const double c = d * wv[i] / wsum;
          for (std::size_t j = 0; j < n; ++j) gz[i * n + j] += c * probs[i * n + j];
          gz[i * n + static_cast<std::size_t>(tv[i])] -= c;
        }
      });
}

// ---- optimisation ----------------------------------------------------------

void sgd_step(std::span<Tensor> params, double lr) {
  for (const Tensor& p : params)
    if (p.grad.size() != p.data.size()) throw InputError("sgd_step: parameter without gradient");
  for (Tensor& p : params) {
    for (std::size_t i = 0; i < p.size(); ++i) p.data[i] -= lr * p.grad[i];
    p.zero_grad();
  }
}

void Adam::step(std::span<Tensor> params) {
  for (const Tensor& p : params)
    if (p.grad.size() != p.data.size()) throw InputError("Adam::step: parameter without gradient");
  if (m_.empty()) {
    for (const Tensor& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw InvariantError("Adam::step: parameter list changed");
  ++step_count_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    std::vector<double>& m = m_[k];
    std::vector<double>& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      p.data[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
    p.zero_grad();
  }
}

}  // namespace eags::nn
