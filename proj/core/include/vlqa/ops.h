#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vlqa/autodiff.h"

// Differentiable primitives. Every op checks that its output is finite and
// raises a numeric error otherwise, so no NaN/Inf leaves an op boundary.
namespace vlqa {

Var MatMul(Var a, Var b);
Var Transpose(Var a);

Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Div(Var a, Var b);
// [m x n] + [n], bias broadcast over rows.
Var AddRowVector(Var a, Var row);
Var Scale(Var a, double factor);
Var AddScalar(Var a, double offset);
// scalar[1] * a
Var ScaleBy(Var scalar, Var a);

Var Tanh(Var a);
Var Sigmoid(Var a);
Var Relu(Var a);
Var Sqrt(Var a);

Var Softmax(Var x, std::size_t axis);
// Softmax over every element jointly, shape preserved.
Var SoftmaxAll(Var x);
// Rank-1 log-softmax.
Var LogSoftmax(Var x);

Var Concat(const std::vector<Var>& parts, std::size_t axis);
Var Slice(Var a, std::size_t axis, std::size_t start, std::size_t length);
Var Reshape(Var a, Shape shape);

// Rows of `table` [V x D] selected by `ids` -> [ids.size() x D].
Var GatherRows(Var table, std::span<const std::size_t> ids);
// Flat elements of `x` selected by `indices` -> [indices.size()].
Var GatherFlat(Var x, std::span<const std::size_t> indices);

Var SumAll(Var a);
// Mean over axis 0 of a rank-2 tensor -> [n].
Var MeanRows(Var a);
Var Dot(Var a, Var b);

// Row i*N+j of the result is concat(v[i], l[j]) -> [(M*N) x (dv+D)].
Var PairConcat(Var v, Var l);

// (x - mean) / sqrt(var + eps) over all elements (population variance).
Var Standardize(Var x, double eps);

}  // namespace vlqa
