#include "hiret/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "hiret/errors.hpp"

namespace hiret {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using RowVecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstRowVecMap = Eigen::Map<const Eigen::RowVectorXd>;

constexpr std::int64_t kNone = -1;

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " differ");
  }
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Var linear(Var x, Var weight, std::optional<Var> bias) {
  Graph& g = x.graph();
  const Shape& ws = weight.shape();
  const Shape& xs = x.shape();
  if (ws.size() != 2 || xs.empty() || xs.back() != ws[1]) {
    throw DimensionError("linear: input " + shape_str(xs) + " does not match weight " + shape_str(ws));
  }
  const std::size_t out = ws[0];
  const std::size_t in = ws[1];
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != out)) {
    throw DimensionError("linear: bias " + shape_str(bias->shape()) + " does not match weight " + shape_str(ws));
  }
  const std::size_t rows = x.numel() / in;

  std::vector<double> y(rows * out);
  MatMap Y(y.data(), rows, out);
  Y.noalias() = ConstMatMap(g.value(x.id()), rows, in) * ConstMatMap(g.value(weight.id()), out, in).transpose();
  if (bias) Y.rowwise() += ConstRowVecMap(g.value(bias->id()), out);

  Shape ys = xs;
  ys.back() = out;
  const auto xi = x.id();
  const auto wi = weight.id();
  const std::int64_t bi = bias ? static_cast<std::int64_t>(bias->id()) : kNone;
  std::vector<Var> parents{x, weight};
  if (bias) parents.push_back(*bias);
  return g.emit(
      std::move(ys), std::move(y), std::span<const Var>(parents),
      [xi, wi, bi, rows, in, out](Graph& g, std::uint32_t self) {
        ConstMatMap gy(g.grad(self), rows, out);
        if (double* gx = g.grad(xi)) {
          MatMap(gx, rows, in).noalias() += gy * ConstMatMap(g.value(wi), out, in);
        }
        if (double* gw = g.grad(wi)) {
          MatMap(gw, out, in).noalias() += gy.transpose() * ConstMatMap(g.value(xi), rows, in);
        }
        if (bi != kNone) {
          if (double* gb = g.grad(static_cast<std::uint32_t>(bi))) RowVecMap(gb, out) += gy.colwise().sum();
        }
      },
      "linear");
}

Var activation(Var x, Activation kind) {
  Graph& g = x.graph();
  const double* xv = g.value(x.id());
  const std::size_t n = x.numel();
  std::vector<double> y(n);
  if (kind == Activation::kSigmoid) {
    for (std::size_t i = 0; i < n; ++i) y[i] = stable_sigmoid(xv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(xv[i]);
  }
  const auto xi = x.id();
  return g.emit(
      x.shape(), std::move(y), {x},
      [xi, n, kind](Graph& g, std::uint32_t self) {
        double* gx = g.grad(xi);
        if (!gx) return;
        const double* gy = g.grad(self);
        const double* y = g.value(self);
        if (kind == Activation::kSigmoid) {
          for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * y[i] * (1.0 - y[i]);
        } else {
          for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * (1.0 - y[i] * y[i]);
        }
      },
      kind == Activation::kSigmoid ? "sigmoid" : "tanh");
}

Var sigmoid(Var x) { return activation(x, Activation::kSigmoid); }
Var tanh(Var x) { return activation(x, Activation::kTanh); }

Var softmax(Var x, std::size_t axis) {
  Graph& g = x.graph();
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  const double* xv = g.value(x.id());
  std::vector<double> y(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double mx = xv[base];
      for (std::size_t k = 1; k < s.extent; ++k) mx = std::max(mx, xv[base + k * s.inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const double e = std::exp(xv[base + k * s.inner] - mx);
        y[base + k * s.inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) y[base + k * s.inner] /= total;
    }
  }
  const auto xi = x.id();
  return g.emit(
      x.shape(), std::move(y), {x},
      [xi, s](Graph& g, std::uint32_t self) {
        double* gx = g.grad(xi);
        if (!gx) return;
        const double* gy = g.grad(self);
        const double* y = g.value(self);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.extent * s.inner + i;
            double inner = 0.0;
            for (std::size_t k = 0; k < s.extent; ++k) inner += gy[base + k * s.inner] * y[base + k * s.inner];
            for (std::size_t k = 0; k < s.extent; ++k) {
              const std::size_t at = base + k * s.inner;
              gx[at] += y[at] * (gy[at] - inner);
            }
          }
        }
      },
      "softmax");
}

Var concat(std::span<const Var> xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("concat: no inputs");
  Graph& g = xs.front().graph();
  const Shape& first = xs.front().shape();
  const AxisSplit base = split_axis(first, axis, "concat");
  std::vector<std::size_t> extents;
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var& v : xs) {
    const Shape& s = v.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) throw DimensionError("concat: shape " + shape_str(s) + " incompatible with " + shape_str(first));
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const std::size_t out_chunk = out_shape[axis] * base.inner;
  std::vector<double> y(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double* xv = g.value(xs[k].id());
    const std::size_t chunk = extents[k] * base.inner;
    for (std::size_t o = 0; o < base.outer; ++o) {
      std::copy_n(xv + o * chunk, chunk, y.begin() + static_cast<std::ptrdiff_t>(o * out_chunk + offset));
    }
    offset += chunk;
  }
  std::vector<std::uint32_t> ids;
  for (const Var& v : xs) ids.push_back(v.id());
  return g.emit(
      std::move(out_shape), std::move(y), xs,
      [ids, extents, base, out_chunk](Graph& g, std::uint32_t self) {
        const double* gy = g.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const std::size_t chunk = extents[k] * base.inner;
          if (double* gx = g.grad(ids[k])) {
            for (std::size_t o = 0; o < base.outer; ++o) {
              const double* src = gy + o * out_chunk + offset;
              double* dst = gx + o * chunk;
              for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
            }
          }
          offset += chunk;
        }
      },
      "concat");
}

Var concat(std::initializer_list<Var> xs, std::size_t axis) {
  return concat(std::span<const Var>(xs.begin(), xs.size()), axis);
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
  Graph& g = x.graph();
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (length == 0 || start + length > s.extent) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") outside axis of extent " + std::to_string(s.extent));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const double* xv = g.value(x.id());
  const std::size_t in_chunk = s.extent * s.inner;
  const std::size_t out_chunk = length * s.inner;
  const std::size_t skip = start * s.inner;
  std::vector<double> y(shape_numel(out_shape));
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv + o * in_chunk + skip, out_chunk, y.begin() + static_cast<std::ptrdiff_t>(o * out_chunk));
  }
  const auto xi = x.id();
  return g.emit(
      std::move(out_shape), std::move(y), {x},
      [xi, s, in_chunk, out_chunk, skip](Graph& g, std::uint32_t self) {
        double* gx = g.grad(xi);
        if (!gx) return;
        const double* gy = g.grad(self);
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < out_chunk; ++i) gx[o * in_chunk + skip + i] += gy[o * out_chunk + i];
        }
      },
      "slice");
}

Var reshape(Var x, Shape shape) {
  Graph& g = x.graph();
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto v = x.value();
  const auto xi = x.id();
  const std::size_t n = x.numel();
  return g.emit(
      std::move(shape), std::vector<double>(v.begin(), v.end()), {x},
      [xi, n](Graph& g, std::uint32_t self) {
        double* gx = g.grad(xi);
        if (!gx) return;
        const double* gy = g.grad(self);
        for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i];
      },
      "reshape");
}

namespace {

// Elementwise binary op with per-operand local derivatives.
template <typename Forward, typename DA, typename DB>
Var binary(Var a, Var b, const char* op, Forward f, DA da, DB db) {
  require_same_shape(a, b, op);
  Graph& g = a.graph();
  const std::size_t n = a.numel();
  const double* av = g.value(a.id());
  const double* bv = g.value(b.id());
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = f(av[i], bv[i]);
  const auto ai = a.id();
  const auto bi = b.id();
  return g.emit(
      a.shape(), std::move(y), {a, b},
      [ai, bi, n, da, db](Graph& g, std::uint32_t self) {
        const double* gy = g.grad(self);
        const double* av = g.value(ai);
        const double* bv = g.value(bi);
        if (double* ga = g.grad(ai)) {
          for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * da(av[i], bv[i]);
        }
        if (double* gb = g.grad(bi)) {
          for (std::size_t i = 0; i < n; ++i) gb[i] += gy[i] * db(av[i], bv[i]);
        }
      },
      op);
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var x, double factor) {
  Graph& g = x.graph();
  auto v = x.value();
  std::vector<double> y(v.begin(), v.end());
  for (double& e : y) e *= factor;
  const auto xi = x.id();
  const std::size_t n = x.numel();
  return g.emit(
      x.shape(), std::move(y), {x},
      [xi, n, factor](Graph& g, std::uint32_t self) {
        double* gx = g.grad(xi);
        if (!gx) return;
        const double* gy = g.grad(self);
        for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * factor;
      },
      "scale");
}

Var add_rows(Var matrix, Var row) {
  Graph& g = matrix.graph();
  const Shape& ms = matrix.shape();
  if (ms.size() != 2 || row.shape().size() != 1 || row.shape()[0] != ms[1]) {
    throw DimensionError("add_rows: cannot broadcast " + shape_str(row.shape()) + " over " + shape_str(ms));
  }
  const std::size_t rows = ms[0];
  const std::size_t cols = ms[1];
  std::vector<double> y(rows * cols);
  MatMap(y.data(), rows, cols) = ConstMatMap(g.value(matrix.id()), rows, cols).rowwise() +
                                 ConstRowVecMap(g.value(row.id()), cols);
  const auto mi = matrix.id();
  const auto ri = row.id();
  return g.emit(
      ms, std::move(y), {matrix, row},
      [mi, ri, rows, cols](Graph& g, std::uint32_t self) {
        ConstMatMap gy(g.grad(self), rows, cols);
        if (double* gm = g.grad(mi)) MatMap(gm, rows, cols) += gy;
        if (double* gr = g.grad(ri)) RowVecMap(gr, cols) += gy.colwise().sum();
      },
      "add_rows");
}

Var sum(Var x) {
  Graph& g = x.graph();
  auto v = x.value();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  const auto xi = x.id();
  const std::size_t n = x.numel();
  return g.emit(
      {1}, {total}, {x},
      [xi, n](Graph& g, std::uint32_t self) {
        double* gx = g.grad(xi);
        if (!gx) return;
        const double gy = g.grad(self)[0];
        for (std::size_t i = 0; i < n; ++i) gx[i] += gy;
      },
      "sum");
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Var dot(Var a, Var b) {
  if (a.shape().size() != 1) throw DimensionError("dot: expects vectors, got " + shape_str(a.shape()));
  require_same_shape(a, b, "dot");
  Graph& g = a.graph();
  const std::size_t n = a.numel();
  const double* av = g.value(a.id());
  const double* bv = g.value(b.id());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += av[i] * bv[i];
  const auto ai = a.id();
  const auto bi = b.id();
  return g.emit(
      {1}, {total}, {a, b},
      [ai, bi, n](Graph& g, std::uint32_t self) {
        const double gy = g.grad(self)[0];
        const double* av = g.value(ai);
        const double* bv = g.value(bi);
        if (double* ga = g.grad(ai)) {
          for (std::size_t i = 0; i < n; ++i) ga[i] += gy * bv[i];
        }
        if (double* gb = g.grad(bi)) {
          for (std::size_t i = 0; i < n; ++i) gb[i] += gy * av[i];
        }
      },
      "dot");
}

Var matmul(Var a, Var b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) {
    throw DimensionError("matmul: cannot multiply " + shape_str(as) + " by " + shape_str(bs));
  }
  Graph& g = a.graph();
  const std::size_t n = as[0];
  const std::size_t k = as[1];
  const std::size_t m = bs[1];
  std::vector<double> y(n * m);
  MatMap(y.data(), n, m).noalias() = ConstMatMap(g.value(a.id()), n, k) * ConstMatMap(g.value(b.id()), k, m);
  const auto ai = a.id();
  const auto bi = b.id();
  return g.emit(
      {n, m}, std::move(y), {a, b},
      [ai, bi, n, k, m](Graph& g, std::uint32_t self) {
        ConstMatMap gy(g.grad(self), n, m);
        if (double* ga = g.grad(ai)) MatMap(ga, n, k).noalias() += gy * ConstMatMap(g.value(bi), k, m).transpose();
        if (double* gb = g.grad(bi)) MatMap(gb, k, m).noalias() += ConstMatMap(g.value(ai), n, k).transpose() * gy;
      },
      "matmul");
}

Var transpose(Var a) {
  const Shape& as = a.shape();
  if (as.size() != 2) throw DimensionError("transpose: expects a matrix, got " + shape_str(as));
  Graph& g = a.graph();
  const std::size_t n = as[0];
  const std::size_t m = as[1];
  std::vector<double> y(n * m);
  MatMap(y.data(), m, n) = ConstMatMap(g.value(a.id()), n, m).transpose();
  const auto ai = a.id();
  return g.emit(
      {m, n}, std::move(y), {a},
      [ai, n, m](Graph& g, std::uint32_t self) {
        if (double* ga = g.grad(ai)) MatMap(ga, n, m) += ConstMatMap(g.grad(self), m, n).transpose();
      },
      "transpose");
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Shape& ts = table.shape();
  if (ts.size() != 2) throw DimensionError("gather_rows: table must be a matrix, got " + shape_str(ts));
  if (ids.empty()) throw ValidationError("gather_rows: empty id list");
  const std::size_t rows = ts[0];
  const std::size_t cols = ts[1];
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= rows) {
      throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(rows));
    }
  }
  Graph& g = table.graph();
  const double* tv = g.value(table.id());
  std::vector<double> y(ids.size() * cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(tv + static_cast<std::size_t>(ids[r]) * cols, cols, y.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  const auto ti = table.id();
  std::vector<int> idx(ids.begin(), ids.end());
  return g.emit(
      {ids.size(), cols}, std::move(y), {table},
      [ti, idx, cols](Graph& g, std::uint32_t self) {
        double* gt = g.grad(ti);
        if (!gt) return;
        const double* gy = g.grad(self);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          double* dst = gt + static_cast<std::size_t>(idx[r]) * cols;
          for (std::size_t c = 0; c < cols; ++c) dst[c] += gy[r * cols + c];
        }
      },
      "gather_rows");
}

Var embedding(Var table, int id) {
  const int ids[1] = {id};
  return reshape(gather_rows(table, ids), {table.shape().at(1)});
}

Var avg_pool_spatial(Var map) {
  const Shape& ms = map.shape();
  if (ms.size() != 3) throw DimensionError("avg_pool_spatial: expects [k, k, d], got " + shape_str(ms));
  Graph& g = map.graph();
  const std::size_t cells = ms[0] * ms[1];
  const std::size_t d = ms[2];
  const double* mv = g.value(map.id());
  std::vector<double> y(d, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t j = 0; j < d; ++j) y[j] += mv[c * d + j];
  }
  const double inv = 1.0 / static_cast<double>(cells);
  for (double& e : y) e *= inv;
  const auto mi = map.id();
  return g.emit(
      {d}, std::move(y), {map},
      [mi, cells, d, inv](Graph& g, std::uint32_t self) {
        double* gm = g.grad(mi);
        if (!gm) return;
        const double* gy = g.grad(self);
        for (std::size_t c = 0; c < cells; ++c) {
          for (std::size_t j = 0; j < d; ++j) gm[c * d + j] += gy[j] * inv;
        }
      },
      "avg_pool_spatial");
}

namespace {

// Gate nonlinearities and the cell update fused into one node: pre[4H] and
// c[H] -> concat(h', c') of length 2H.
Var lstm_pointwise(Var pre, Var cell) {
  const std::size_t hidden = cell.numel();
  if (pre.numel() != 4 * hidden) {
    throw DimensionError("lstm_cell: gate pre-activations " + shape_str(pre.shape()) + " do not match state " +
                         shape_str(cell.shape()));
  }
  Graph& g = pre.graph();
  const double* p = g.value(pre.id());
  const double* c = g.value(cell.id());
  std::vector<double> y(2 * hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    const double i = stable_sigmoid(p[j]);
    const double f = stable_sigmoid(p[hidden + j]);
    const double cand = std::tanh(p[2 * hidden + j]);
    const double o = stable_sigmoid(p[3 * hidden + j]);
    const double c_next = f * c[j] + i * cand;
    y[hidden + j] = c_next;
    y[j] = o * std::tanh(c_next);
  }
  const auto pi = pre.id();
  const auto ci = cell.id();
  return g.emit(
      {2 * hidden}, std::move(y), {pre, cell},
      [pi, ci, hidden](Graph& g, std::uint32_t self) {
        const double* gy = g.grad(self);
        const double* y = g.value(self);
        const double* p = g.value(pi);
        const double* c = g.value(ci);
        double* gp = g.grad(pi);
        double* gc = g.grad(ci);
        for (std::size_t j = 0; j < hidden; ++j) {
          const double i = stable_sigmoid(p[j]);
          const double f = stable_sigmoid(p[hidden + j]);
          const double cand = std::tanh(p[2 * hidden + j]);
          const double o = stable_sigmoid(p[3 * hidden + j]);
          const double tc = std::tanh(y[hidden + j]);
          const double dh = gy[j];
          const double dc = gy[hidden + j] + dh * o * (1.0 - tc * tc);
          if (gp) {
            gp[j] += dc * cand * i * (1.0 - i);
            gp[hidden + j] += dc * c[j] * f * (1.0 - f);
            gp[2 * hidden + j] += dc * i * (1.0 - cand * cand);
            gp[3 * hidden + j] += dh * tc * o * (1.0 - o);
          }
          if (gc) gc[j] += dc * f;
        }
      },
      "lstm_cell");
}

}  // namespace

LstmState lstm_cell(Var x, LstmState state, Var weight, Var bias) {
  const std::size_t hidden = state.h.numel();
  if (state.c.numel() != hidden || weight.shape().size() != 2 || weight.shape()[0] != 4 * hidden ||
      weight.shape()[1] != x.numel() + hidden) {
    throw DimensionError("lstm_cell: input " + shape_str(x.shape()) + " and state " + shape_str(state.h.shape()) +
                         " do not match weight " + shape_str(weight.shape()));
  }
  Var pre = linear(concat({x, state.h}, 0), weight, bias);
  Var hc = lstm_pointwise(pre, state.c);
  return {slice(hc, 0, 0, hidden), slice(hc, 0, hidden, hidden)};
}

Var bce_with_logits(Var logits, const Tensor& targets) {
  const std::size_t n = logits.numel();
  if (targets.numel() != n) {
    throw DimensionError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs targets " +
                         shape_str(targets.shape()));
  }
  for (double t : targets.values()) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("bce_with_logits: target " + std::to_string(t) + " outside [0, 1]");
  }
  Graph& g = logits.graph();
  const double* z = g.value(logits.id());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  const auto zi = logits.id();
  std::vector<double> t(targets.values().begin(), targets.values().end());
  return g.emit(
      {1}, {total / static_cast<double>(n)}, {logits},
      [zi, t, n](Graph& g, std::uint32_t self) {
        double* gz = g.grad(zi);
        if (!gz) return;
        const double gy = g.grad(self)[0] / static_cast<double>(n);
        const double* z = g.value(zi);
        for (std::size_t i = 0; i < n; ++i) gz[i] += gy * (stable_sigmoid(z[i]) - t[i]);
      },
      "bce_with_logits");
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  const Shape& ls = logits.shape();
  if (ls.empty() || ls.size() > 2) throw DimensionError("cross_entropy: logits must be [V] or [T, V]");
  const std::size_t classes = ls.back();
  const std::size_t rows = ls.size() == 1 ? 1 : ls[0];
  if (targets.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(rows) + " logit rows but " +
                         std::to_string(targets.size()) + " targets");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw ValidationError("cross_entropy: class index " + std::to_string(t) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
  }
  Graph& g = logits.graph();
  const double* z = g.value(logits.id());
  std::vector<double> probs(rows * classes);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = z + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      probs[r * classes + c] = std::exp(row[c] - mx);
      s += probs[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] /= s;
    total += mx + std::log(s) - row[targets[r]];
  }
  const auto zi = logits.id();
  std::vector<int> t(targets.begin(), targets.end());
  return g.emit(
      {1}, {total / static_cast<double>(rows)}, {logits},
      [zi, t, probs = std::move(probs), rows, classes](Graph& g, std::uint32_t self) {
        double* gz = g.grad(zi);
        if (!gz) return;
        const double gy = g.grad(self)[0] / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = static_cast<int>(c) == t[r] ? 1.0 : 0.0;
            gz[r * classes + c] += gy * (probs[r * classes + c] - onehot);
          }
        }
      },
      "cross_entropy");
}

Var cross_entropy(Var logits, int target) {
  const int targets[1] = {target};
  return cross_entropy(logits, std::span<const int>(targets));
}

}  // namespace hiret
