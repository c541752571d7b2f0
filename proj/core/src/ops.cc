#include "vlqa/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "vlqa/errors.h"

namespace vlqa {
namespace {

Tensor Checked(Tensor t, const char* op) {
  if (!AllFinite(t)) throw Error(ErrorKind::kNumeric, std::string("non-finite output from ") + op);
  return t;
}

void RequireSameShape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::kDimension, std::string(op) + " of " + ShapeString(a.shape()) + " and " +
                                           ShapeString(b.shape()));
  }
}

void RequireSameTape(Var a, Var b) {
  if (a.tape() != b.tape()) throw Error(ErrorKind::kConfiguration, "operands live on different tapes");
}

template <typename F>
Tensor Map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

Var MatMul(Var a, Var b) {
  RequireSameTape(a, b);
  Tensor out = Checked(vlqa::MatMul(a.value(), b.value()), "matmul");
  Tape* tape = a.tape();
  return tape->Record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.NeedsGrad(a)) t.AccumulateGrad(a, vlqa::MatMul(g, vlqa::Transpose(b.value())));
    if (t.NeedsGrad(b)) t.AccumulateGrad(b, vlqa::MatMul(vlqa::Transpose(a.value()), g));
  });
}

Var Transpose(Var a) {
  Tensor out = vlqa::Transpose(a.value());
  return a.tape()->Record(std::move(out), {a},
                          [a](Tape& t, const Tensor& g) { t.AccumulateGrad(a, vlqa::Transpose(g)); });
}

Var Add(Var a, Var b) {
  RequireSameTape(a, b);
  RequireSameShape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.tape()->Record(Checked(std::move(out), "add"), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.AccumulateGrad(a, g);
    t.AccumulateGrad(b, g);
  });
}

Var Sub(Var a, Var b) {
  RequireSameTape(a, b);
  RequireSameShape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return a.tape()->Record(Checked(std::move(out), "sub"), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.AccumulateGrad(a, g);
    if (t.NeedsGrad(b)) t.AccumulateGrad(b, Map(g, [](double x) { return -x; }));
  });
}

Var Mul(Var a, Var b) {
  RequireSameTape(a, b);
  RequireSameShape(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.tape()->Record(Checked(std::move(out), "mul"), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.NeedsGrad(a)) {
      Tensor& ga = t.GradBuffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (t.NeedsGrad(b)) {
      Tensor& gb = t.GradBuffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

Var Div(Var a, Var b) {
  RequireSameTape(a, b);
  RequireSameShape(a, b, "div");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  return a.tape()->Record(Checked(std::move(out), "div"), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (t.NeedsGrad(a)) {
      Tensor& ga = t.GradBuffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
    }
    if (t.NeedsGrad(b)) {
      Tensor& gb = t.GradBuffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
    }
  });
}

Var AddRowVector(Var a, Var row) {
  RequireSameTape(a, row);
  if (a.value().rank() != 2 || row.value().rank() != 1 || row.shape()[0] != a.shape()[1]) {
    throw Error(ErrorKind::kDimension,
                "row broadcast of " + ShapeString(row.shape()) + " onto " + ShapeString(a.shape()));
  }
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) += row.value()[j];
  return a.tape()->Record(Checked(std::move(out), "add_row"), {a, row},
                          [a, row, m, n](Tape& t, const Tensor& g) {
                            t.AccumulateGrad(a, g);
                            if (t.NeedsGrad(row)) {
                              Tensor& gr = t.GradBuffer(row);
                              for (std::size_t i = 0; i < m; ++i)
                                for (std::size_t j = 0; j < n; ++j) gr[j] += g.at(i, j);
                            }
                          });
}

Var Scale(Var a, double factor) {
  Tensor out = Map(a.value(), [factor](double x) { return x * factor; });
  return a.tape()->Record(Checked(std::move(out), "scale"), {a}, [a, factor](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradBuffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var AddScalar(Var a, double offset) {
  Tensor out = Map(a.value(), [offset](double x) { return x + offset; });
  return a.tape()->Record(Checked(std::move(out), "add_scalar"), {a},
                          [a](Tape& t, const Tensor& g) { t.AccumulateGrad(a, g); });
}

Var ScaleBy(Var scalar, Var a) {
  RequireSameTape(scalar, a);
  if (scalar.value().size() != 1) {
    throw Error(ErrorKind::kDimension, "ScaleBy needs a scalar, got " + ShapeString(scalar.shape()));
  }
  const double s = scalar.value()[0];
  Tensor out = Map(a.value(), [s](double x) { return x * s; });
  return a.tape()->Record(Checked(std::move(out), "scale_by"), {scalar, a},
                          [scalar, a](Tape& t, const Tensor& g) {
                            const double sv = scalar.value()[0];
                            if (t.NeedsGrad(a)) {
                              Tensor& ga = t.GradBuffer(a);
                              for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
                            }
                            if (t.NeedsGrad(scalar)) {
                              double acc = 0.0;
                              for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * a.value()[i];
                              t.GradBuffer(scalar)[0] += acc;
                            }
                          });
}

Var Tanh(Var a) {
  Tape* tape = a.tape();
  const std::size_t self = tape->size();
  Tensor out = Map(a.value(), [](double x) { return std::tanh(x); });
  return tape->Record(Checked(std::move(out), "tanh"), {a}, [a, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.Value(self);
    Tensor& ga = t.GradBuffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Sigmoid(Var a) {
  Tape* tape = a.tape();
  const std::size_t self = tape->size();
  Tensor out = Map(a.value(), [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return tape->Record(Checked(std::move(out), "sigmoid"), {a}, [a, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.Value(self);
    Tensor& ga = t.GradBuffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Relu(Var a) {
  Tensor out = Map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  return a.tape()->Record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradBuffer(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (a.value()[i] > 0.0) ga[i] += g[i];
  });
}

Var Sqrt(Var a) {
  Tape* tape = a.tape();
  const std::size_t self = tape->size();
  for (double x : a.value().data()) {
    if (x < 0.0) throw Error(ErrorKind::kNumeric, "sqrt of negative value");
  }
  Tensor out = Map(a.value(), [](double x) { return std::sqrt(x); });
  return tape->Record(Checked(std::move(out), "sqrt"), {a}, [a, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.Value(self);
    Tensor& ga = t.GradBuffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / y[i];
  });
}

Var Softmax(Var x, std::size_t axis) {
  Tape* tape = x.tape();
  const std::size_t self = tape->size();
  Tensor out = Checked(vlqa::Softmax(x.value(), axis), "softmax");
  const Shape& shape = x.shape();
  const std::size_t n = shape[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  return tape->Record(std::move(out), {x}, [x, self, n, outer, inner](Tape& t, const Tensor& g) {
    const Tensor& y = t.Value(self);
    Tensor& gx = t.GradBuffer(x);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) dot += g[base + k * inner] * y[base + k * inner];
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t idx = base + k * inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Var SoftmaxAll(Var x) {
  const Shape shape = x.shape();
  Var flat = Reshape(x, {x.value().size()});
  return Reshape(Softmax(flat, 0), shape);
}

Var LogSoftmax(Var x) {
  if (x.value().rank() != 1 || x.value().size() == 0) {
    throw Error(ErrorKind::kDimension, "log-softmax needs a non-empty vector, got " + ShapeString(x.shape()));
  }
  const Tensor& v = x.value();
  double mx = v[0];
  for (double e : v.data()) mx = std::max(mx, e);
  double total = 0.0;
  for (double e : v.data()) total += std::exp(e - mx);
  const double log_z = mx + std::log(total);
  Tensor out = Map(v, [log_z](double e) { return e - log_z; });
  Tape* tape = x.tape();
  const std::size_t self = tape->size();
  return tape->Record(Checked(std::move(out), "log_softmax"), {x}, [x, self](Tape& t, const Tensor& g) {
    const Tensor& y = t.Value(self);
    double gsum = 0.0;
    for (double e : g.data()) gsum += e;
    Tensor& gx = t.GradBuffer(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] - std::exp(y[i]) * gsum;
  });
}

Var Concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw Error(ErrorKind::kDimension, "concat of no tensors");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw Error(ErrorKind::kDimension, "concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    RequireSameTape(parts[0], p);
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) {
      throw Error(ErrorKind::kDimension,
                  "concat of " + ShapeString(first) + " and " + ShapeString(s) + " on axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_width = out_shape[axis] * inner;

  Tensor out(out_shape);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    offsets.push_back(offset);
    const std::size_t w = p.shape()[axis] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p.value().data().begin() + o * w, w, out.mutable_data().begin() + o * out_width + offset);
    offset += w;
  }
  return parts[0].tape()->Record(
      std::move(out), parts, [parts, offsets, outer, inner, axis, out_width](Tape& t, const Tensor& g) {
        for (std::size_t k = 0; k < parts.size(); ++k) {
          if (!t.NeedsGrad(parts[k])) continue;
          const std::size_t w = parts[k].shape()[axis] * inner;
          Tensor& gp = t.GradBuffer(parts[k]);
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < w; ++i) gp[o * w + i] += g[o * out_width + offsets[k] + i];
        }
      });
}

Var Slice(Var a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = a.shape();
  if (axis >= s.size() || start + length > s[axis]) {
    throw Error(ErrorKind::kDimension, "slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                           ") on axis " + std::to_string(axis) + " of " + ShapeString(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  Shape out_shape = s;
  out_shape[axis] = length;
  const std::size_t in_width = s[axis] * inner, w = length * inner, off = start * inner;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(a.value().data().begin() + o * in_width + off, w, out.mutable_data().begin() + o * w);
  return a.tape()->Record(std::move(out), {a}, [a, outer, in_width, w, off](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradBuffer(a);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < w; ++i) ga[o * in_width + off + i] += g[o * w + i];
  });
}

Var Reshape(Var a, Shape shape) {
  Tensor out = a.value().Reshaped(std::move(shape));
  return a.tape()->Record(std::move(out), {a},
                          [a](Tape& t, const Tensor& g) { t.AccumulateGrad(a, g.Reshaped(a.shape())); });
}

Var GatherRows(Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw Error(ErrorKind::kDimension, "gather rows from " + ShapeString(tv.shape()));
  const std::size_t rows = tv.dim(0), d = tv.dim(1);
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  Tensor out({idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows) {
      throw Error(ErrorKind::kVocabulary,
                  "row id " + std::to_string(idx[r]) + " outside table of " + std::to_string(rows) + " rows");
    }
    std::copy_n(tv.data().begin() + idx[r] * d, d, out.mutable_data().begin() + r * d);
  }
  return table.tape()->Record(std::move(out), {table}, [table, idx, d](Tape& t, const Tensor& g) {
    Tensor& gt = t.GradBuffer(table);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) gt[idx[r] * d + c] += g[r * d + c];
  });
}

Var GatherFlat(Var x, std::span<const std::size_t> indices) {
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor out({idx.size()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.value().size()) {
      throw Error(ErrorKind::kDimension,
                  "flat index " + std::to_string(idx[i]) + " outside " + ShapeString(x.shape()));
    }
    out[i] = x.value()[idx[i]];
  }
  return x.tape()->Record(std::move(out), {x}, [x, idx](Tape& t, const Tensor& g) {
    Tensor& gx = t.GradBuffer(x);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
  });
}

Var SumAll(Var a) {
  Tensor out = Tensor::Scalar(Sum(a.value()));
  return a.tape()->Record(Checked(std::move(out), "sum"), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradBuffer(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var MeanRows(Var a) {
  const Tensor& v = a.value();
  if (v.rank() != 2 || v.dim(0) == 0) {
    throw Error(ErrorKind::kDimension, "row mean of " + ShapeString(v.shape()));
  }
  const std::size_t m = v.dim(0), n = v.dim(1);
  Tensor out({n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += v.at(i, j);
  for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
  return a.tape()->Record(Checked(std::move(out), "mean_rows"), {a}, [a, m, n](Tape& t, const Tensor& g) {
    Tensor& ga = t.GradBuffer(a);
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j] * inv;
  });
}

Var Dot(Var a, Var b) { return SumAll(Mul(a, b)); }

Var PairConcat(Var v, Var l) {
  RequireSameTape(v, l);
  const Tensor& vv = v.value();
  const Tensor& lv = l.value();
  if (vv.rank() != 2 || lv.rank() != 2) {
    throw Error(ErrorKind::kDimension, "pair concat of " + ShapeString(vv.shape()) + " and " + ShapeString(lv.shape()));
  }
  const std::size_t m = vv.dim(0), dv = vv.dim(1), n = lv.dim(0), dl = lv.dim(1), w = dv + dl;
  Tensor out({m * n, w});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double* row = out.mutable_data().data() + (i * n + j) * w;
      std::copy_n(vv.data().begin() + i * dv, dv, row);
      std::copy_n(lv.data().begin() + j * dl, dl, row + dv);
    }
  }
  return v.tape()->Record(std::move(out), {v, l}, [v, l, m, n, dv, dl, w](Tape& t, const Tensor& g) {
    if (t.NeedsGrad(v)) {
      Tensor& gv = t.GradBuffer(v);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t c = 0; c < dv; ++c) gv[i * dv + c] += g[(i * n + j) * w + c];
    }
    if (t.NeedsGrad(l)) {
      Tensor& gl = t.GradBuffer(l);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t c = 0; c < dl; ++c) gl[j * dl + c] += g[(i * n + j) * w + dv + c];
    }
  });
}

Var Standardize(Var x, double eps) {
  const Tensor& v = x.value();
  const std::size_t n = v.size();
  if (n == 0) throw Error(ErrorKind::kDimension, "standardize of empty tensor");
  double mean = Sum(v) / static_cast<double>(n);
  double var = 0.0;
  for (double e : v.data()) var += (e - mean) * (e - mean);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + eps);
  Tensor out = Map(v, [mean, inv_std](double e) { return (e - mean) * inv_std; });
  Tape* tape = x.tape();
  const std::size_t self = tape->size();
  return tape->Record(Checked(std::move(out), "standardize"), {x}, [x, self, inv_std, n](Tape& t, const Tensor& g) {
    // dx = inv_std * (g - mean(g) - y * mean(g*y))
    const Tensor& y = t.Value(self);
    double g_mean = 0.0, gy_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      g_mean += g[i];
      gy_mean += g[i] * y[i];
    }
    g_mean /= static_cast<double>(n);
    gy_mean /= static_cast<double>(n);
    Tensor& gx = t.GradBuffer(x);
    for (std::size_t i = 0; i < n; ++i) gx[i] += inv_std * (g[i] - g_mean - y[i] * gy_mean);
  });
}

}  // namespace vlqa
