// Copyright 2026 The irweak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "irweak/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Core>

namespace irweak::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

/// Gradient buffer of parent i, or nullptr when it does not need one.
Tensor* grad_of(Node& self, std::size_t i) {
  Node& p = self.parent(i);
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

int normalize_axis(int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw std::out_of_range("axis out of range");
  return axis;
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (int d = static_cast<int>(s.size()) - 2; d >= 0; --d) st[d] = st[d + 1] * s[d + 1];
  return st;
}

struct Broadcast {
  Shape out;
  std::vector<std::size_t> sa, sb;
};

Broadcast broadcast(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("broadcast rank mismatch " + shape_string(a) + " vs " +
                                shape_string(b));
  }
  Broadcast bc;
  const auto ta = strides_of(a), tb = strides_of(b);
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d] != b[d] && a[d] != 1 && b[d] != 1) {
      throw std::invalid_argument("cannot broadcast " + shape_string(a) + " with " +
                                  shape_string(b));
    }
    const int o = std::max(a[d], b[d]);
    bc.out.push_back(o);
    bc.sa.push_back(a[d] == o ? ta[d] : 0);
    bc.sb.push_back(b[d] == o ? tb[d] : 0);
  }
  return bc;
}

template <typename F>
void broadcast_loop(const Broadcast& bc, F&& f) {
  const Shape& out = bc.out;
  const int r = static_cast<int>(out.size());
  if (numel(out) == 0) return;
  std::vector<int> idx(r, 0);
  std::size_t ia = 0, ib = 0, io = 0;
  const int inner = out[r - 1];
  const std::size_t sai = bc.sa[r - 1], sbi = bc.sb[r - 1];
  while (true) {
    for (int i = 0; i < inner; ++i) f(io++, ia + i * sai, ib + i * sbi);
    int d = r - 2;
    for (; d >= 0; --d) {
      ++idx[d];
      ia += bc.sa[d];
      ib += bc.sb[d];
      if (idx[d] < out[d]) break;
      ia -= bc.sa[d] * out[d];
      ib -= bc.sb[d] * out[d];
      idx[d] = 0;
    }
    if (d < 0) break;
  }
}

template <typename Fwd, typename Bwd>
Var binary(const Var& a, const Var& b, Fwd fwd, Bwd bwd) {
  const Broadcast bc = broadcast(a.shape(), b.shape());
  Tensor out(bc.out);
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  broadcast_loop(bc, [&](std::size_t io, std::size_t ia, std::size_t ib) {
    out.data[io] = fwd(av[ia], bv[ib]);
  });
  return Var::make(std::move(out), {a, b}, [bc, bwd](Node& self) {
    Tensor* ga = grad_of(self, 0);
    Tensor* gb = grad_of(self, 1);
    const auto& av = self.parent(0).value.data;
    const auto& bv = self.parent(1).value.data;
    const auto& g = self.grad.data;
    broadcast_loop(bc, [&](std::size_t io, std::size_t ia, std::size_t ib) {
      double da, db;
      bwd(av[ia], bv[ib], da, db);
      if (ga) ga->data[ia] += g[io] * da;
      if (gb) gb->data[ib] += g[io] * db;
    });
  });
}

/// f maps x -> y; df maps (x, y) -> dy/dx.
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Tensor out(a.shape());
  const auto& av = a.value().data;
  for (std::size_t i = 0; i < av.size(); ++i) out.data[i] = f(av[i]);
  return Var::make(std::move(out), {a}, [df](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    const auto& x = self.parent(0).value.data;
    const auto& y = self.value.data;
    for (std::size_t i = 0; i < x.size(); ++i) ga->data[i] += self.grad.data[i] * df(x[i], y[i]);
  });
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct AxisSplit {
  std::size_t outer, n, inner;
};

AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit sp{1, static_cast<std::size_t>(s[axis]), 1};
  for (int d = 0; d < axis; ++d) sp.outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) sp.inner *= s[d];
  return sp;
}

Tensor permute_tensor(const Tensor& t, const std::vector<int>& order) {
  const int r = t.rank();
  Shape out_shape(r);
  const auto src_strides = strides_of(t.shape);
  std::vector<std::size_t> st(r);
  for (int d = 0; d < r; ++d) {
    out_shape[d] = t.shape[order[d]];
    st[d] = src_strides[order[d]];
  }
  Tensor out(out_shape);
  if (out.size() == 0) return out;
  std::vector<int> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t io = 0; io < out.size(); ++io) {
    out.data[io] = t.data[src];
    for (int d = r - 1; d >= 0; --d) {
      ++idx[d];
      src += st[d];
      if (idx[d] < out_shape[d]) break;
      src -= st[d] * out_shape[d];
      idx[d] = 0;
    }
  }
  return out;
}

void im2col(const double* x, int cin, int h, int w, int k, int stride, int pad,
            int ho, int wo, double* cols) {
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(c * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[oy * wo + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                    ? x[(static_cast<std::size_t>(c) * h + iy) * w + ix]
                                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, int cin, int h, int w, int k, int stride, int pad,
            int ho, int wo, double* x) {
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(c * k + ky) * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) x[(static_cast<std::size_t>(c) * h + iy) * w + ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x + y; },
                [](double, double, double& da, double& db) { da = 1.0; db = 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x - y; },
                [](double, double, double& da, double& db) { da = 1.0; db = -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x * y; },
                [](double x, double y, double& da, double& db) { da = y; db = x; });
}

Var div(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x / y; },
                [](double x, double y, double& da, double& db) {
                  da = 1.0 / y;
                  db = -x / (y * y);
                });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Var sigmoid(const Var& a) {
  return unary(a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var silu(const Var& a) {
  return unary(a, [](double x) { return x * sigmoid_scalar(x); },
               [](double x, double) {
                 const double s = sigmoid_scalar(x);
                 return s * (1.0 + x * (1.0 - s));
               });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum(const Var& a) {
  const auto& v = a.value().data;
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  return Var::make(Tensor::scalar(s), {a}, [](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    for (double& g : ga->data) g += self.grad.data[0];
  });
}

Var mean(const Var& a) {
  if (a.size() == 0) throw std::invalid_argument("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var sum_axis(const Var& a, int axis) {
  axis = normalize_axis(axis, a.value().rank());
  const AxisSplit sp = split_at(a.shape(), axis);
  Shape shape = a.shape();
  shape[axis] = 1;
  Tensor out(shape);
  const auto& v = a.value().data;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t j = 0; j < sp.n; ++j) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        out.data[o * sp.inner + i] += v[(o * sp.n + j) * sp.inner + i];
      }
    }
  }
  return Var::make(std::move(out), {a}, [sp](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t j = 0; j < sp.n; ++j) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
          ga->data[(o * sp.n + j) * sp.inner + i] += self.grad.data[o * sp.inner + i];
        }
      }
    }
  });
}

Var mean_axis(const Var& a, int axis) {
  const int n = a.dim(axis);
  return scale(sum_axis(a, axis), 1.0 / n);
}

Var max_axis(const Var& a, int axis) {
  axis = normalize_axis(axis, a.value().rank());
  const AxisSplit sp = split_at(a.shape(), axis);
  if (sp.n == 0) throw std::invalid_argument("max over empty axis");
  Shape shape = a.shape();
  shape[axis] = 1;
  Tensor out(shape);
  std::vector<std::size_t> arg(out.size());
  const auto& v = a.value().data;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      std::size_t best = o * sp.n * sp.inner + i;
      for (std::size_t j = 1; j < sp.n; ++j) {
        const std::size_t k = (o * sp.n + j) * sp.inner + i;
        if (v[k] > v[best]) best = k;
      }
      out.data[o * sp.inner + i] = v[best];
      arg[o * sp.inner + i] = best;
    }
  }
  return Var::make(std::move(out), {a}, [arg = std::move(arg)](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < arg.size(); ++i) ga->data[arg[i]] += self.grad.data[i];
  });
}

Var reshape(const Var& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw std::invalid_argument("reshape " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  Tensor out(std::move(shape), a.value().data);
  return Var::make(std::move(out), {a}, [](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < ga->size(); ++i) ga->data[i] += self.grad.data[i];
  });
}

Var permute(const Var& a, const std::vector<int>& order) {
  const int r = a.value().rank();
  std::vector<int> check(order);
  std::sort(check.begin(), check.end());
  for (int d = 0; d < r; ++d) {
    if (static_cast<int>(check.size()) != r || check[d] != d) {
      throw std::invalid_argument("permute: order is not a permutation");
    }
  }
  std::vector<int> inverse(r);
  for (int d = 0; d < r; ++d) inverse[order[d]] = d;
  return Var::make(permute_tensor(a.value(), order), {a}, [inverse](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    const Tensor back = permute_tensor(self.grad, inverse);
    for (std::size_t i = 0; i < ga->size(); ++i) ga->data[i] += back.data[i];
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of nothing");
  const int r = parts.front().value().rank();
  axis = normalize_axis(axis, r);
  Shape shape = parts.front().shape();
  shape[axis] = 0;
  for (const Var& p : parts) {
    for (int d = 0; d < r; ++d) {
      if (d != axis && p.dim(d) != parts.front().dim(d)) {
        throw std::invalid_argument("concat shape mismatch");
      }
    }
    shape[axis] += p.dim(axis);
  }
  const AxisSplit sp = split_at(shape, axis);
  Tensor out(shape);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const std::size_t chunk = static_cast<std::size_t>(p.dim(axis)) * sp.inner;
    offsets.push_back(offset);
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(p.value().data.begin() + o * chunk, chunk,
                  out.data.begin() + o * sp.n * sp.inner + offset);
    }
    offset += chunk;
  }
  return Var::make(std::move(out), parts, [sp, offsets](Node& self) {
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      Tensor* g = grad_of(self, k);
      if (!g) continue;
      const std::size_t chunk = g->size() / sp.outer;
      for (std::size_t o = 0; o < sp.outer; ++o) {
        const double* src = self.grad.data.data() + o * sp.n * sp.inner + offsets[k];
        double* dst = g->data.data() + o * chunk;
        for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    }
  });
}

Var slice(const Var& a, int axis, int start, int length) {
  axis = normalize_axis(axis, a.value().rank());
  if (start < 0 || length < 0 || start + length > a.dim(axis)) {
    throw std::out_of_range("slice out of range");
  }
  const AxisSplit sp = split_at(a.shape(), axis);
  Shape shape = a.shape();
  shape[axis] = length;
  Tensor out(shape);
  const std::size_t chunk = static_cast<std::size_t>(length) * sp.inner;
  const std::size_t skip = static_cast<std::size_t>(start) * sp.inner;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(a.value().data.begin() + o * sp.n * sp.inner + skip, chunk,
                out.data.begin() + o * chunk);
  }
  return Var::make(std::move(out), {a}, [sp, chunk, skip](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      double* dst = ga->data.data() + o * sp.n * sp.inner + skip;
      const double* src = self.grad.data.data() + o * chunk;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
    }
  });
}

Var index_select(const Var& a, const std::vector<int>& rows) {
  const int n = a.dim(0);
  const std::size_t row = n ? a.size() / n : 0;
  Shape shape = a.shape();
  shape[0] = static_cast<int>(rows.size());
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= n) throw std::out_of_range("index_select row");
    std::copy_n(a.value().data.begin() + rows[r] * row, row, out.data.begin() + r * row);
  }
  return Var::make(std::move(out), {a}, [rows, row](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t i = 0; i < row; ++i) ga->data[rows[r] * row + i] += self.grad.data[r * row + i];
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() == 2) {
    const int k = bv.shape[0], n = bv.shape[1];
    if (av.dim(-1) != k) throw std::invalid_argument("matmul inner dimension mismatch");
    const int p = static_cast<int>(av.size() / k);
    Shape shape = av.shape;
    shape.back() = n;
    Tensor out(shape);
    MapMat(out.data.data(), p, n).noalias() =
        ConstMapMat(av.data.data(), p, k) * ConstMapMat(bv.data.data(), k, n);
    return Var::make(std::move(out), {a, b}, [p, k, n](Node& self) {
      ConstMapMat g(self.grad.data.data(), p, n);
      if (Tensor* ga = grad_of(self, 0)) {
        MapMat(ga->data.data(), p, k).noalias() +=
            g * ConstMapMat(self.parent(1).value.data.data(), k, n).transpose();
      }
      if (Tensor* gb = grad_of(self, 1)) {
        MapMat(gb->data.data(), k, n).noalias() +=
            ConstMapMat(self.parent(0).value.data.data(), p, k).transpose() * g;
      }
    });
  }
  if (av.rank() != 3 || bv.rank() != 3 || av.shape[0] != bv.shape[0] ||
      av.shape[2] != bv.shape[1]) {
    throw std::invalid_argument("batched matmul shape mismatch " + shape_string(av.shape) +
                                " x " + shape_string(bv.shape));
  }
  const int batch = av.shape[0], m = av.shape[1], k = av.shape[2], n = bv.shape[2];
  Tensor out({batch, m, n});
  for (int i = 0; i < batch; ++i) {
    MapMat(out.data.data() + i * m * n, m, n).noalias() =
        ConstMapMat(av.data.data() + i * m * k, m, k) *
        ConstMapMat(bv.data.data() + i * k * n, k, n);
  }
  return Var::make(std::move(out), {a, b}, [batch, m, k, n](Node& self) {
    Tensor* ga = grad_of(self, 0);
    Tensor* gb = grad_of(self, 1);
    for (int i = 0; i < batch; ++i) {
      ConstMapMat g(self.grad.data.data() + i * m * n, m, n);
      if (ga) {
        MapMat(ga->data.data() + i * m * k, m, k).noalias() +=
            g * ConstMapMat(self.parent(1).value.data.data() + i * k * n, k, n).transpose();
      }
      if (gb) {
        MapMat(gb->data.data() + i * k * n, k, n).noalias() +=
            ConstMapMat(self.parent(0).value.data.data() + i * m * k, m, k).transpose() * g;
      }
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.shape[0] != bv.shape[0] ||
      av.shape[2] != bv.shape[2]) {
    throw std::invalid_argument("matmul_nt shape mismatch " + shape_string(av.shape) + " x " +
                                shape_string(bv.shape));
  }
  const int batch = av.shape[0], m = av.shape[1], k = av.shape[2], n = bv.shape[1];
  Tensor out({batch, m, n});
  for (int i = 0; i < batch; ++i) {
    MapMat(out.data.data() + i * m * n, m, n).noalias() =
        ConstMapMat(av.data.data() + i * m * k, m, k) *
        ConstMapMat(bv.data.data() + i * n * k, n, k).transpose();
  }
  return Var::make(std::move(out), {a, b}, [batch, m, k, n](Node& self) {
    Tensor* ga = grad_of(self, 0);
    Tensor* gb = grad_of(self, 1);
    for (int i = 0; i < batch; ++i) {
      ConstMapMat g(self.grad.data.data() + i * m * n, m, n);
      if (ga) {
        MapMat(ga->data.data() + i * m * k, m, k).noalias() +=
            g * ConstMapMat(self.parent(1).value.data.data() + i * n * k, n, k);
      }
      if (gb) {
        MapMat(gb->data.data() + i * n * k, n, k).noalias() +=
            g.transpose() * ConstMapMat(self.parent(0).value.data.data() + i * m * k, m, k);
      }
    }
  });
}

Var softmax(const Var& a) {
  const int n = a.dim(-1);
  const std::size_t rows = n ? a.size() / n : 0;
  Tensor out(a.shape());
  const auto& v = a.value().data;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = v.data() + r * n;
    double* y = out.data.data() + r * n;
    const double top = *std::max_element(x, x + n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += (y[i] = std::exp(x[i] - top));
    for (int i = 0; i < n; ++i) y[i] /= total;
  }
  return Var::make(std::move(out), {a}, [rows, n](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data.data() + r * n;
      const double* g = self.grad.data.data() + r * n;
      double dot = 0.0;
      for (int i = 0; i < n; ++i) dot += g[i] * y[i];
      for (int i = 0; i < n; ++i) ga->data[r * n + i] += y[i] * (g[i] - dot);
    }
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (xv.rank() != 4 || wv.rank() != 4 || wv.shape[1] != xv.shape[1] || wv.shape[2] != wv.shape[3]) {
    throw std::invalid_argument("conv2d shape mismatch " + shape_string(xv.shape) + " * " +
                                shape_string(wv.shape));
  }
  if (bias && (bias.value().rank() != 1 || bias.dim(0) != wv.shape[0])) {
    throw std::invalid_argument("conv2d bias shape");
  }
  const int n = xv.shape[0], cin = xv.shape[1], h = xv.shape[2], w = xv.shape[3];
  const int cout = wv.shape[0], k = wv.shape[2];
  const int ho = (h + 2 * padding - k) / stride + 1;
  const int wo = (w + 2 * padding - k) / stride + 1;
  if (ho < 1 || wo < 1) throw std::invalid_argument("conv2d output would be empty");
  const int kk = cin * k * k, hw = ho * wo;
  Tensor out({n, cout, ho, wo});
  std::vector<double> cols(static_cast<std::size_t>(kk) * hw);
  ConstMapMat wm(wv.data.data(), cout, kk);
  for (int i = 0; i < n; ++i) {
    im2col(xv.data.data() + static_cast<std::size_t>(i) * cin * h * w, cin, h, w, k, stride,
           padding, ho, wo, cols.data());
    MapMat om(out.data.data() + static_cast<std::size_t>(i) * cout * hw, cout, hw);
    om.noalias() = wm * ConstMapMat(cols.data(), kk, hw);
    if (bias) {
      for (int c = 0; c < cout; ++c) om.row(c).array() += bias.value().data[c];
    }
  }
  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(bias);
  return Var::make(std::move(out), parents,
                   [=](Node& self) {
                     Tensor* gx = grad_of(self, 0);
                     Tensor* gw = grad_of(self, 1);
                     Tensor* gb = self.parents.size() > 2 ? grad_of(self, 2) : nullptr;
                     const Tensor& xin = self.parent(0).value;
                     ConstMapMat wmat(self.parent(1).value.data.data(), cout, kk);
                     std::vector<double> buf(static_cast<std::size_t>(kk) * hw);
                     for (int i = 0; i < n; ++i) {
                       ConstMapMat g(self.grad.data.data() + static_cast<std::size_t>(i) * cout * hw,
                                     cout, hw);
                       if (gb) {
                         for (int c = 0; c < cout; ++c) gb->data[c] += g.row(c).sum();
                       }
                       if (gw) {
                         im2col(xin.data.data() + static_cast<std::size_t>(i) * cin * h * w, cin, h,
                                w, k, stride, padding, ho, wo, buf.data());
                         MapMat(gw->data.data(), cout, kk).noalias() +=
                             g * ConstMapMat(buf.data(), kk, hw).transpose();
                       }
                       if (gx) {
                         MapMat(buf.data(), kk, hw).noalias() = wmat.transpose() * g;
                         col2im(buf.data(), cin, h, w, k, stride, padding, ho, wo,
                                gx->data.data() + static_cast<std::size_t>(i) * cin * h * w);
                       }
                     }
                   });
}

Var layer_norm_channels(const Var& x, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) throw std::invalid_argument("layer_norm_channels expects [N,C,H,W]");
  const int n = xv.shape[0], c = xv.shape[1];
  const std::size_t hw = static_cast<std::size_t>(xv.shape[2]) * xv.shape[3];
  Tensor out(xv.shape);
  std::vector<double> inv_std(n * hw);
  for (int i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < hw; ++p) {
      const std::size_t base = static_cast<std::size_t>(i) * c * hw + p;
      double mu = 0.0;
      for (int ch = 0; ch < c; ++ch) mu += xv.data[base + ch * hw];
      mu /= c;
      double var = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double d = xv.data[base + ch * hw] - mu;
        var += d * d;
      }
      var /= c;
      const double s = 1.0 / std::sqrt(var + eps);
      inv_std[i * hw + p] = s;
      for (int ch = 0; ch < c; ++ch) out.data[base + ch * hw] = (xv.data[base + ch * hw] - mu) * s;
    }
  }
  return Var::make(std::move(out), {x}, [n, c, hw, inv_std = std::move(inv_std)](Node& self) {
    Tensor* gx = grad_of(self, 0);
    if (!gx) return;
    for (int i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t base = static_cast<std::size_t>(i) * c * hw + p;
        double mg = 0.0, mgy = 0.0;
        for (int ch = 0; ch < c; ++ch) {
          const double g = self.grad.data[base + ch * hw];
          mg += g;
          mgy += g * self.value.data[base + ch * hw];
        }
        mg /= c;
        mgy /= c;
        const double s = inv_std[i * hw + p];
        for (int ch = 0; ch < c; ++ch) {
          const std::size_t k = base + ch * hw;
          gx->data[k] += s * (self.grad.data[k] - mg - self.value.data[k] * mgy);
        }
      }
    }
  });
}

Var normalize_rows(const Var& a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw std::invalid_argument("normalize_rows expects a matrix");
  const int m = av.shape[0], d = av.shape[1];
  Tensor out(av.shape);
  std::vector<double> norms(m);
  for (int r = 0; r < m; ++r) {
    double ss = 0.0;
    for (int j = 0; j < d; ++j) ss += av.data[r * d + j] * av.data[r * d + j];
    norms[r] = std::sqrt(ss);
    if (norms[r] > 0.0) {
      for (int j = 0; j < d; ++j) out.data[r * d + j] = av.data[r * d + j] / norms[r];
    }
  }
  return Var::make(std::move(out), {a}, [m, d, norms = std::move(norms)](Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    for (int r = 0; r < m; ++r) {
      if (!(norms[r] > 0.0)) continue;
      double dot = 0.0;
      for (int j = 0; j < d; ++j) dot += self.grad.data[r * d + j] * self.value.data[r * d + j];
      for (int j = 0; j < d; ++j) {
        ga->data[r * d + j] +=
            (self.grad.data[r * d + j] - self.value.data[r * d + j] * dot) / norms[r];
      }
    }
  });
}

}  // namespace irweak::nn
