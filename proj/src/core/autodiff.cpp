#include "mlg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mlg/error.hpp"
#include "mlg/kernels/kernels.hpp"

namespace mlg::ad {

namespace k = mlg::kernels;

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(std::string("tape: ") + what);
}

}  // namespace

template <typename T>
Var Tape<T>::push(std::vector<T> values, int r, int c, bool needs_grad) {
  Node n;
  n.rows = r;
  n.cols = c;
  n.own = std::move(values);
  n.needs_grad = needs_grad && record_;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
T* Tape<T>::grad_of(int id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.size(), T(0));
  return n.grad.data();
}

template <typename T>
std::span<const T> Tape<T>::value(Var v) const {
  const auto& n = nodes_[v.id];
  return {n.data(), n.size()};
}

template <typename T>
std::span<const T> Tape<T>::grad(Var v) const {
  return nodes_[v.id].grad;
}

template <typename T>
Var Tape<T>::constant(std::vector<T> values, int rows, int cols) {
  require(values.size() == std::size_t(rows) * cols, "constant size mismatch");
  return push(std::move(values), rows, cols, false);
}

template <typename T>
Var Tape<T>::input(std::vector<T> values, int rows, int cols) {
  require(values.size() == std::size_t(rows) * cols, "input size mismatch");
  return push(std::move(values), rows, cols, true);
}

template <typename T>
Var Tape<T>::param(const Parameter<T>& p, int slot) {
  Var v = push({}, p.rows, p.cols, true);
  nodes_[v.id].ext = p.value.data();
  nodes_[v.id].param_slot = slot;
  return v;
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b) {
  const int m = rows(a), kk = cols(a), n = cols(b);
  require(rows(b) == kk, "matmul inner dimension");
  std::vector<T> out(std::size_t(m) * n, T(0));
  k::gemm_nn<T>(m, n, kk, val(a.id), val(b.id), out.data());
  Var o = push(std::move(out), m, n, needs(a.id) || needs(b.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, b, o, m, n, kk] {
      const T* g = nodes_[o.id].grad.data();
      if (needs(a.id)) k::gemm_nt<T>(m, kk, n, g, val(b.id), grad_of(a.id));
      if (needs(b.id)) k::gemm_tn<T>(kk, n, m, val(a.id), g, grad_of(b.id));
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b) {
  const int m = rows(a), kk = cols(a), n = rows(b);
  require(cols(b) == kk, "matmul_nt inner dimension");
  std::vector<T> out(std::size_t(m) * n, T(0));
  k::gemm_nt<T>(m, n, kk, val(a.id), val(b.id), out.data());
  Var o = push(std::move(out), m, n, needs(a.id) || needs(b.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, b, o, m, n, kk] {
      const T* g = nodes_[o.id].grad.data();
      if (needs(a.id)) k::gemm_nn<T>(m, kk, n, g, val(b.id), grad_of(a.id));
      if (needs(b.id)) k::gemm_tn<T>(n, kk, m, g, val(a.id), grad_of(b.id));
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::matmul_tn(Var a, Var b) {
  const int kk = rows(a), m = cols(a), n = cols(b);
  require(rows(b) == kk, "matmul_tn inner dimension");
  std::vector<T> out(std::size_t(m) * n, T(0));
  k::gemm_tn<T>(m, n, kk, val(a.id), val(b.id), out.data());
  Var o = push(std::move(out), m, n, needs(a.id) || needs(b.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, b, o, m, n, kk] {
      const T* g = nodes_[o.id].grad.data();
      if (needs(a.id)) k::gemm_nt<T>(kk, m, n, val(b.id), g, grad_of(a.id));
      if (needs(b.id)) k::gemm_nn<T>(kk, n, m, val(a.id), g, grad_of(b.id));
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::transpose(Var a) {
  const int r = rows(a), c = cols(a);
  std::vector<T> out(std::size_t(r) * c);
  const T* x = val(a.id);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[std::size_t(j) * r + i] = x[std::size_t(i) * c + j];
  Var o = push(std::move(out), c, r, needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, r, c] {
      const T* g = nodes_[o.id].grad.data();
      T* ga = grad_of(a.id);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) ga[std::size_t(i) * c + j] += g[std::size_t(j) * r + i];
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  require(rows(a) == rows(b) && cols(a) == cols(b), "add shape");
  const std::size_t n = nodes_[a.id].size();
  std::vector<T> out(val(a.id), val(a.id) + n);
  const T* y = val(b.id);
  for (std::size_t i = 0; i < n; ++i) out[i] += y[i];
  Var o = push(std::move(out), rows(a), cols(a), needs(a.id) || needs(b.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, b, o, n] {
      const T* g = nodes_[o.id].grad.data();
      if (needs(a.id)) k::axpy<T>(n, T(1), g, grad_of(a.id));
      if (needs(b.id)) k::axpy<T>(n, T(1), g, grad_of(b.id));
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::sub(Var a, Var b) {
  require(rows(a) == rows(b) && cols(a) == cols(b), "sub shape");
  const std::size_t n = nodes_[a.id].size();
  std::vector<T> out(val(a.id), val(a.id) + n);
  const T* y = val(b.id);
  for (std::size_t i = 0; i < n; ++i) out[i] -= y[i];
  Var o = push(std::move(out), rows(a), cols(a), needs(a.id) || needs(b.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, b, o, n] {
      const T* g = nodes_[o.id].grad.data();
      if (needs(a.id)) k::axpy<T>(n, T(1), g, grad_of(a.id));
      if (needs(b.id)) k::axpy<T>(n, T(-1), g, grad_of(b.id));
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::mul(Var a, Var b) {
  require(rows(a) == rows(b) && cols(a) == cols(b), "mul shape");
  const std::size_t n = nodes_[a.id].size();
  std::vector<T> out(n);
  const T* x = val(a.id);
  const T* y = val(b.id);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
  Var o = push(std::move(out), rows(a), cols(a), needs(a.id) || needs(b.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, b, o, n] {
      const T* g = nodes_[o.id].grad.data();
      if (needs(a.id)) {
        T* ga = grad_of(a.id);
        const T* y = val(b.id);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i];
      }
      if (needs(b.id)) {
        T* gb = grad_of(b.id);
        const T* x = val(a.id);
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * x[i];
      }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::scale(Var a, T s) {
  const std::size_t n = nodes_[a.id].size();
  std::vector<T> out(val(a.id), val(a.id) + n);
  for (auto& v : out) v *= s;
  Var o = push(std::move(out), rows(a), cols(a), needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, n, s] { k::axpy<T>(n, s, nodes_[o.id].grad.data(), grad_of(a.id)); };
  }
  return o;
}

template <typename T>
Var Tape<T>::add_row_bias(Var a, Var bias) {
  const int r = rows(a), c = cols(a);
  require(rows(bias) == 1 && cols(bias) == c, "row bias shape");
  std::vector<T> out(val(a.id), val(a.id) + std::size_t(r) * c);
  const T* b = val(bias.id);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[std::size_t(i) * c + j] += b[j];
  Var o = push(std::move(out), r, c, needs(a.id) || needs(bias.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, bias, o, r, c] {
      const T* g = nodes_[o.id].grad.data();
      if (needs(a.id)) k::axpy<T>(std::size_t(r) * c, T(1), g, grad_of(a.id));
      if (needs(bias.id)) {
        T* gb = grad_of(bias.id);
        for (int i = 0; i < r; ++i) k::axpy<T>(c, T(1), g + std::size_t(i) * c, gb);
      }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::add_col_bias(Var a, Var bias) {
  const int r = rows(a), c = cols(a);
  require(rows(bias) == r && cols(bias) == 1, "column bias shape");
  std::vector<T> out(val(a.id), val(a.id) + std::size_t(r) * c);
  const T* b = val(bias.id);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[std::size_t(i) * c + j] += b[i];
  Var o = push(std::move(out), r, c, needs(a.id) || needs(bias.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, bias, o, r, c] {
      const T* g = nodes_[o.id].grad.data();
      if (needs(a.id)) k::axpy<T>(std::size_t(r) * c, T(1), g, grad_of(a.id));
      if (needs(bias.id)) {
        T* gb = grad_of(bias.id);
        for (int i = 0; i < r; ++i) {
          T s = 0;
          for (int j = 0; j < c; ++j) s += g[std::size_t(i) * c + j];
          gb[i] += s;
        }
      }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::relu(Var a) {
  const std::size_t n = nodes_[a.id].size();
  std::vector<T> out(val(a.id), val(a.id) + n);
  for (auto& v : out) v = v > T(0) ? v : T(0);
  Var o = push(std::move(out), rows(a), cols(a), needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, n] {
      const T* g = nodes_[o.id].grad.data();
      const T* x = val(a.id);
      T* ga = grad_of(a.id);
      for (std::size_t i = 0; i < n; ++i)
        if (x[i] > T(0)) ga[i] += g[i];
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::tanh(Var a) {
  const std::size_t n = nodes_[a.id].size();
  std::vector<T> out(val(a.id), val(a.id) + n);
  for (auto& v : out) v = std::tanh(v);
  Var o = push(std::move(out), rows(a), cols(a), needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, n] {
      const T* g = nodes_[o.id].grad.data();
      const T* y = val(o.id);
      T* ga = grad_of(a.id);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::im2col(Var x, const ConvGeometry& geo) {
  require(rows(x) == geo.channels && cols(x) == geo.height * geo.width, "im2col input shape");
  const int oh = geo.out_height(), ow = geo.out_width(), kk = geo.kernel;
  const int out_rows = geo.channels * kk * kk, out_cols = oh * ow;
  std::vector<T> out(std::size_t(out_rows) * out_cols, T(0));
  const T* src = val(x.id);
  for (int c = 0; c < geo.channels; ++c)
    for (int ky = 0; ky < kk; ++ky)
      for (int kx = 0; kx < kk; ++kx) {
        T* dst = out.data() + std::size_t((c * kk + ky) * kk + kx) * out_cols;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * geo.stride - geo.pad + ky;
          if (iy < 0 || iy >= geo.height) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * geo.stride - geo.pad + kx;
            if (ix < 0 || ix >= geo.width) continue;
            dst[oy * ow + ox] = src[std::size_t(c) * geo.height * geo.width + iy * geo.width + ix];
          }
        }
      }
  Var o = push(std::move(out), out_rows, out_cols, needs(x.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, x, o, geo, oh, ow, kk, out_cols] {
      const T* g = nodes_[o.id].grad.data();
      T* gx = grad_of(x.id);
      for (int c = 0; c < geo.channels; ++c)
        for (int ky = 0; ky < kk; ++ky)
          for (int kx = 0; kx < kk; ++kx) {
            const T* src = g + std::size_t((c * kk + ky) * kk + kx) * out_cols;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * geo.stride - geo.pad + ky;
              if (iy < 0 || iy >= geo.height) continue;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * geo.stride - geo.pad + kx;
                if (ix < 0 || ix >= geo.width) continue;
                gx[std::size_t(c) * geo.height * geo.width + iy * geo.width + ix] += src[oy * ow + ox];
              }
            }
          }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::im2col_1d(Var x, int width, int valid_len) {
  const int n = rows(x), d = cols(x);
  require(width >= 1 && width % 2 == 1, "im2col_1d width must be odd");
  const int half = width / 2;
  std::vector<T> out(std::size_t(n) * width * d, T(0));
  const T* src = val(x.id);
  for (int i = 0; i < n; ++i)
    for (int w = 0; w < width; ++w) {
      const int s = i + w - half;
      if (s < 0 || s >= valid_len || s >= n) continue;
      std::copy_n(src + std::size_t(s) * d, d, out.data() + (std::size_t(i) * width + w) * d);
    }
  Var o = push(std::move(out), n, width * d, needs(x.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, x, o, n, d, width, half, valid_len] {
      const T* g = nodes_[o.id].grad.data();
      T* gx = grad_of(x.id);
      for (int i = 0; i < n; ++i)
        for (int w = 0; w < width; ++w) {
          const int s = i + w - half;
          if (s < 0 || s >= valid_len || s >= n) continue;
          k::axpy<T>(d, T(1), g + (std::size_t(i) * width + w) * d, gx + std::size_t(s) * d);
        }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::gather_rows(Var table, std::span<const int> ids) {
  const int v = rows(table), d = cols(table);
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<T> out(idx.size() * d);
  const T* src = val(table.id);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= v) throw ValidationError("gather_rows: index " + std::to_string(idx[i]) + " out of range");
    std::copy_n(src + std::size_t(idx[i]) * d, d, out.data() + i * d);
  }
  Var o = push(std::move(out), static_cast<int>(idx.size()), d, needs(table.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, table, o, idx = std::move(idx), d] {
      const T* g = nodes_[o.id].grad.data();
      T* gt = grad_of(table.id);
      for (std::size_t i = 0; i < idx.size(); ++i) k::axpy<T>(d, T(1), g + i * d, gt + std::size_t(idx[i]) * d);
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::slice_rows(Var a, int begin, int count) {
  const int c = cols(a);
  require(begin >= 0 && count >= 0 && begin + count <= rows(a), "slice_rows range");
  const T* src = val(a.id) + std::size_t(begin) * c;
  std::vector<T> out(src, src + std::size_t(count) * c);
  Var o = push(std::move(out), count, c, needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, begin, count, c] {
      k::axpy<T>(std::size_t(count) * c, T(1), nodes_[o.id].grad.data(), grad_of(a.id) + std::size_t(begin) * c);
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const int c = cols(parts[0]);
  int total = 0;
  bool any = false;
  for (Var p : parts) {
    require(cols(p) == c, "concat_rows column mismatch");
    total += rows(p);
    any = any || needs(p.id);
  }
  std::vector<T> out;
  out.reserve(std::size_t(total) * c);
  for (Var p : parts) {
    const T* s = val(p.id);
    out.insert(out.end(), s, s + nodes_[p.id].size());
  }
  Var o = push(std::move(out), total, c, any);
  if (nodes_[o.id].needs_grad) {
    std::vector<Var> ps(parts.begin(), parts.end());
    nodes_[o.id].back = [this, ps = std::move(ps), o] {
      const T* g = nodes_[o.id].grad.data();
      for (Var p : ps) {
        const std::size_t n = nodes_[p.id].size();
        if (needs(p.id)) k::axpy<T>(n, T(1), g, grad_of(p.id));
        g += n;
      }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::diag(Var a) {
  const int n = rows(a);
  require(cols(a) == n, "diag of non-square matrix");
  std::vector<T> out(n);
  const T* x = val(a.id);
  for (int i = 0; i < n; ++i) out[i] = x[std::size_t(i) * n + i];
  Var o = push(std::move(out), n, 1, needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, n] {
      const T* g = nodes_[o.id].grad.data();
      T* ga = grad_of(a.id);
      for (int i = 0; i < n; ++i) ga[std::size_t(i) * n + i] += g[i];
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::sum(Var a) {
  const std::size_t n = nodes_[a.id].size();
  T s = 0;
  const T* x = val(a.id);
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  Var o = push({s}, 1, 1, needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, n] {
      const T g = nodes_[o.id].grad[0];
      T* ga = grad_of(a.id);
      for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::mean_cols(Var a) {
  const int r = rows(a), c = cols(a);
  require(c > 0, "mean_cols of empty matrix");
  std::vector<T> out(r);
  const T* x = val(a.id);
  for (int i = 0; i < r; ++i) {
    T s = 0;
    for (int j = 0; j < c; ++j) s += x[std::size_t(i) * c + j];
    out[i] = s / T(c);
  }
  Var o = push(std::move(out), r, 1, needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, r, c] {
      const T* g = nodes_[o.id].grad.data();
      T* ga = grad_of(a.id);
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) ga[std::size_t(i) * c + j] += g[i] / T(c);
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::l2_normalize_rows(Var a, T eps) {
  const int r = rows(a), c = cols(a);
  std::vector<T> out(val(a.id), val(a.id) + std::size_t(r) * c);
  std::vector<T> norms(r);
  std::vector<char> floored(r, 0);
  for (int i = 0; i < r; ++i) {
    T* row = out.data() + std::size_t(i) * c;
    T nrm = std::sqrt(k::dot<T>(c, row, row));
    if (!(nrm > eps)) {
      if (!(eps > T(0))) throw ValidationError("cannot normalize a zero-norm feature vector");
      nrm = eps;
      floored[i] = 1;
    }
    norms[i] = nrm;
    for (int j = 0; j < c; ++j) row[j] /= nrm;
  }
  Var o = push(std::move(out), r, c, needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, r, c, norms = std::move(norms), floored = std::move(floored)] {
      const T* g = nodes_[o.id].grad.data();
      const T* y = val(o.id);
      T* ga = grad_of(a.id);
      for (int i = 0; i < r; ++i) {
        const T* gi = g + std::size_t(i) * c;
        const T* yi = y + std::size_t(i) * c;
        const T proj = floored[i] ? T(0) : k::dot<T>(c, gi, yi);
        T* gai = ga + std::size_t(i) * c;
        for (int j = 0; j < c; ++j) gai[j] += (gi[j] - yi[j] * proj) / norms[i];
      }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::softmax_rows(Var a) {
  const int r = rows(a), c = cols(a);
  std::vector<T> out(val(a.id), val(a.id) + std::size_t(r) * c);
  for (int i = 0; i < r; ++i) {
    T* row = out.data() + std::size_t(i) * c;
    const T mx = *std::max_element(row, row + c);
    T s = 0;
    for (int j = 0; j < c; ++j) s += (row[j] = std::exp(row[j] - mx));
    for (int j = 0; j < c; ++j) row[j] /= s;
  }
  Var o = push(std::move(out), r, c, needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, r, c] {
      const T* g = nodes_[o.id].grad.data();
      const T* y = val(o.id);
      T* ga = grad_of(a.id);
      for (int i = 0; i < r; ++i) {
        const std::size_t off = std::size_t(i) * c;
        const T s = k::dot<T>(c, g + off, y + off);
        for (int j = 0; j < c; ++j) ga[off + j] += y[off + j] * (g[off + j] - s);
      }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::log_softmax_rows(Var a) {
  const int r = rows(a), c = cols(a);
  std::vector<T> out(val(a.id), val(a.id) + std::size_t(r) * c);
  for (int i = 0; i < r; ++i) {
    T* row = out.data() + std::size_t(i) * c;
    const T mx = *std::max_element(row, row + c);
    T s = 0;
    for (int j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    const T lse = mx + std::log(s);
    for (int j = 0; j < c; ++j) row[j] -= lse;
  }
  Var o = push(std::move(out), r, c, needs(a.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, o, r, c] {
      const T* g = nodes_[o.id].grad.data();
      const T* y = val(o.id);
      T* ga = grad_of(a.id);
      for (int i = 0; i < r; ++i) {
        const std::size_t off = std::size_t(i) * c;
        T gs = 0;
        for (int j = 0; j < c; ++j) gs += g[off + j];
        for (int j = 0; j < c; ++j) ga[off + j] += g[off + j] - std::exp(y[off + j]) * gs;
      }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::row_dot(Var a, Var b) {
  const int r = rows(a), c = cols(a);
  require(rows(b) == r && cols(b) == c, "row_dot shape");
  std::vector<T> out(r);
  for (int i = 0; i < r; ++i) out[i] = k::dot<T>(c, val(a.id) + std::size_t(i) * c, val(b.id) + std::size_t(i) * c);
  Var o = push(std::move(out), r, 1, needs(a.id) || needs(b.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, a, b, o, r, c] {
      const T* g = nodes_[o.id].grad.data();
      for (int i = 0; i < r; ++i) {
        const std::size_t off = std::size_t(i) * c;
        if (needs(a.id)) k::axpy<T>(c, g[i], val(b.id) + off, grad_of(a.id) + off);
        if (needs(b.id)) k::axpy<T>(c, g[i], val(a.id) + off, grad_of(b.id) + off);
      }
    };
  }
  return o;
}

template <typename T>
Var Tape<T>::segment_logsumexp(Var x, std::span<const int> offsets) {
  require(cols(x) == 1, "segment_logsumexp expects a column");
  require(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == rows(x), "segment offsets");
  const int segs = static_cast<int>(offsets.size()) - 1;
  std::vector<int> off(offsets.begin(), offsets.end());
  std::vector<T> out(segs);
  const T* v = val(x.id);
  for (int s = 0; s < segs; ++s) {
    require(off[s + 1] > off[s], "empty segment");
    const T mx = *std::max_element(v + off[s], v + off[s + 1]);
    T acc = 0;
    for (int i = off[s]; i < off[s + 1]; ++i) acc += std::exp(v[i] - mx);
    out[s] = mx + std::log(acc);
  }
  Var o = push(std::move(out), segs, 1, needs(x.id));
  if (nodes_[o.id].needs_grad) {
    nodes_[o.id].back = [this, x, o, segs, off = std::move(off)] {
      const T* g = nodes_[o.id].grad.data();
      const T* z = val(o.id);
      const T* v = val(x.id);
      T* gx = grad_of(x.id);
      for (int s = 0; s < segs; ++s)
        for (int i = off[s]; i < off[s + 1]; ++i) gx[i] += g[s] * std::exp(v[i] - z[s]);
    };
  }
  return o;
}

template <typename T>
void Tape<T>::run_backward() {
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    auto& n = nodes_[id];
    if (n.back && !n.grad.empty()) n.back();
  }
}

template <typename T>
void Tape<T>::backward(Var root) {
  require(rows(root) == 1 && cols(root) == 1, "backward root must be scalar");
  if (!needs(root.id)) return;
  grad_of(root.id)[0] += T(1);
  run_backward();
}

template <typename T>
void Tape<T>::backward(std::span<const std::pair<Var, std::vector<T>>> seeds) {
  for (const auto& [v, g] : seeds) {
    require(g.size() == nodes_[v.id].size(), "seed size mismatch");
    if (!needs(v.id)) continue;
    k::axpy<T>(g.size(), T(1), g.data(), grad_of(v.id));
  }
  run_backward();
}

template class Tape<float>;
template class Tape<double>;

}  // namespace mlg::ad
