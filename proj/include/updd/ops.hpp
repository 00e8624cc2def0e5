#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "updd/tensor.hpp"

namespace updd {

// Differentiable primitives. Every result is checked for finiteness and is
// recorded on the active tape when any input requires gradients.
//
// Binary element-wise ops accept equal shapes or a right/left operand whose
// shape is a trailing suffix of the other (leading-dimension batch broadcast,
// which includes rank-0 scalars). Nothing else broadcasts.

enum class Primitive {
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    Conv1d,
    Transpose,
    Reshape,
    Concat,
    Slice,
    Mean,
    Sum,
    Exp,
    Log,
    Tanh,
    Softplus,
    Sqrt,
    Softmax,
    ScaledDotAttention,
};

std::string_view primitive_name(Primitive kind);

enum class Padding {
    Causal,  // kernel - 1 zeros on the left; output t sees inputs <= t
    Same,    // (kernel - 1) / 2 on the left, the rest on the right
};

struct PrimitiveAttrs {
    int axis = -1;
    int axis2 = -2;
    bool reduce_all = true;
    int64_t start = 0;
    int64_t end = 0;
    Shape shape;
    Padding padding = Padding::Same;
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);
Tensor square(const Tensor& a);

// a: [..., M, K]; b: [K, N] (shared across the leading dims) or [..., K, N]
// with the same leading dims as a.
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [B, L, C_in], weight: [kernel, C_in, C_out] -> [B, L, C_out]. Stride 1.
Tensor conv1d(const Tensor& x, const Tensor& weight, Padding padding);

Tensor transpose(const Tensor& a, int axis0, int axis1);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(std::span<const Tensor> parts, int axis);
Tensor concat(std::initializer_list<Tensor> parts, int axis);
Tensor slice(const Tensor& a, int axis, int64_t start, int64_t end);

Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int axis);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sqrt(const Tensor& a);
// Along the last axis.
Tensor softmax(const Tensor& a);

// q: [B, Lq, d], k: [B, Lk, d], v: [B, Lk, dv] -> softmax(q kᵀ / √d) v.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Uniform entry point over the primitive set.
Tensor apply_primitive(Primitive kind, std::span<const Tensor> inputs, const PrimitiveAttrs& attrs = {});

}  // namespace updd
