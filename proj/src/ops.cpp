#include "updd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace updd {

namespace {

using Grads = std::span<std::vector<Scalar>* const>;

int normalize_axis(int axis, int rank) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) throw ShapeError("axis out of range");
    return axis;
}

Tensor finish(std::string_view kind, std::vector<Tensor> inputs, Shape shape, std::vector<Scalar> data,
              BackwardFn backward) {
    const bool tracked = needs_record(std::span<const Tensor>(inputs));
    Tensor out = make_result(std::move(shape), std::move(data), tracked);
    if (tracked) active_tape()->record(Record{std::string(kind), std::move(inputs), out, std::move(backward)});
    return out;
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// C[M,N] += A[M,K] B[K,N]
void gemm_nn(const Scalar* __restrict A, const Scalar* __restrict B, Scalar* __restrict C, int64_t M, int64_t K, int64_t N) {
    for (int64_t i = 0; i < M; ++i) {
        Scalar* c = C + i * N;
        const Scalar* a = A + i * K;
        for (int64_t k = 0; k < K; ++k) {
            const Scalar av = a[k];
            const Scalar* b = B + k * N;
            for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// C[M,N] += A[M,K] B[N,K]ᵀ
void gemm_nt(const Scalar* __restrict A, const Scalar* __restrict B, Scalar* __restrict C, int64_t M, int64_t K, int64_t N) {
    for (int64_t i = 0; i < M; ++i) {
        const Scalar* a = A + i * K;
        for (int64_t j = 0; j < N; ++j) {
            const Scalar* b = B + j * K;
            Scalar acc = 0;
            for (int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
            C[i * N + j] += acc;
        }
    }
}

// C[K,N] += A[M,K]ᵀ B[M,N]
void gemm_tn(const Scalar* __restrict A, const Scalar* __restrict B, Scalar* __restrict C, int64_t M, int64_t K, int64_t N) {
    for (int64_t i = 0; i < M; ++i) {
        const Scalar* a = A + i * K;
        const Scalar* b = B + i * N;
        for (int64_t k = 0; k < K; ++k) {
            const Scalar av = a[k];
            Scalar* c = C + k * N;
            for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

enum class BinaryOp { Add, Sub, Mul, Div };

Tensor binary(BinaryOp op, const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    // `big` carries the output shape; the other operand repeats over it.
    bool b_small;
    if (sa == sb || is_suffix(sb, sa)) {
        b_small = true;
    } else if (is_suffix(sa, sb)) {
        b_small = false;
    } else {
        throw ShapeError("element-wise shape mismatch " + shape_str(sa) + " vs " + shape_str(sb));
    }
    const Shape out_shape = b_small ? sa : sb;
    const int64_t n = shape_numel(out_shape);
    const int64_t na = a.numel();
    const int64_t nb = b.numel();
    auto da = a.data();
    auto db = b.data();
    std::vector<Scalar> out(static_cast<size_t>(n));
    // The smaller operand repeats every `period` elements.
    const int64_t period = std::min(na, nb);
    for (int64_t base = 0; base < n; base += period) {
        const Scalar* x = da.data() + (na == n ? base : 0);
        const Scalar* y = db.data() + (nb == n ? base : 0);
        Scalar* o = out.data() + base;
        switch (op) {
            case BinaryOp::Add: for (int64_t j = 0; j < period; ++j) o[j] = x[j] + y[j]; break;
            case BinaryOp::Sub: for (int64_t j = 0; j < period; ++j) o[j] = x[j] - y[j]; break;
            case BinaryOp::Mul: for (int64_t j = 0; j < period; ++j) o[j] = x[j] * y[j]; break;
            case BinaryOp::Div: for (int64_t j = 0; j < period; ++j) o[j] = x[j] / y[j]; break;
        }
    }
    static constexpr std::string_view names[] = {"add", "sub", "mul", "div"};
    auto backward = [op, a, b, n, na, nb](std::span<const Scalar> g, Grads grads) {
        auto da = a.data();
        auto db = b.data();
        if (auto* ga = grads[0]) {
            for (int64_t i = 0; i < n; ++i) {
                Scalar d = g[i];
                if (op == BinaryOp::Mul) d *= db[i % nb];
                if (op == BinaryOp::Div) d /= db[i % nb];
                (*ga)[i % na] += d;
            }
        }
        if (auto* gb = grads[1]) {
            for (int64_t i = 0; i < n; ++i) {
                Scalar d = g[i];
                switch (op) {
                    case BinaryOp::Add: break;
                    case BinaryOp::Sub: d = -d; break;
                    case BinaryOp::Mul: d *= da[i % na]; break;
                    case BinaryOp::Div: {
                        const Scalar y = db[i % nb];
                        d = -d * da[i % na] / (y * y);
                        break;
                    }
                }
                (*gb)[i % nb] += d;
            }
        }
    };
    return finish(names[static_cast<int>(op)], {a, b}, out_shape, std::move(out), backward);
}

// f maps x -> y; df maps (x, y) -> dy/dx.
template <typename F, typename DF>
Tensor unary(std::string_view kind, const Tensor& a, F f, DF df) {
    auto x = a.data();
    std::vector<Scalar> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    auto holder = std::make_shared<std::vector<Scalar>>(out);
    auto backward = [a, holder, df](std::span<const Scalar> g, Grads grads) {
        auto x = a.data();
        const auto& y = *holder;
        auto* ga = grads[0];
        for (size_t i = 0; i < x.size(); ++i) (*ga)[i] += g[i] * df(x[i], y[i]);
    };
    return finish(kind, {a}, a.shape(), std::move(out), backward);
}

// Splits a shape around `axis` into (outer, length, inner) extents.
struct AxisSplit {
    int64_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, int axis) {
    AxisSplit s;
    for (int i = 0; i < axis; ++i) s.outer *= shape[i];
    s.length = shape[axis];
    for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

}  // namespace

std::string_view primitive_name(Primitive kind) {
    static constexpr std::string_view names[] = {
        "add",  "sub", "mul",  "div",  "matmul",   "conv1d", "transpose", "reshape", "concat",  "slice",
        "mean", "sum", "exp",  "log",  "tanh",     "softplus", "sqrt",    "softmax", "scaled_dot_attention"};
    return names[static_cast<int>(kind)];
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinaryOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinaryOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinaryOp::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(BinaryOp::Div, a, b); }
Tensor scale(const Tensor& a, Scalar s) { return binary(BinaryOp::Mul, a, Tensor::scalar(s)); }
Tensor square(const Tensor& a) {
    return unary("square", a, [](Scalar x) { return x * x; }, [](Scalar x, Scalar) { return 2 * x; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul needs rank >= 2 operands");
    const int64_t M = a.dim(-2), K = a.dim(-1);
    const int64_t Kb = b.dim(-2), N = b.dim(-1);
    if (K != Kb) throw ShapeError("matmul inner mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const int64_t batch = a.numel() / (M * K);
    const bool shared_b = b.rank() == 2;
    if (!shared_b) {
        if (b.rank() != a.rank() || !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()))
            throw ShapeError("matmul batch mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    Shape out_shape = a.shape();
    out_shape.back() = N;
    std::vector<Scalar> out(static_cast<size_t>(batch * M * N), Scalar(0));
    if (shared_b) {
        gemm_nn(a.data().data(), b.data().data(), out.data(), batch * M, K, N);
    } else {
        for (int64_t i = 0; i < batch; ++i)
            gemm_nn(a.data().data() + i * M * K, b.data().data() + i * K * N, out.data() + i * M * N, M, K, N);
    }
    auto backward = [a, b, batch, M, K, N, shared_b](std::span<const Scalar> g, Grads grads) {
        const Scalar* A = a.data().data();
        const Scalar* B = b.data().data();
        if (shared_b) {
            if (grads[0]) gemm_nt(g.data(), B, grads[0]->data(), batch * M, N, K);
            if (grads[1]) gemm_tn(A, g.data(), grads[1]->data(), batch * M, K, N);
            return;
        }
        for (int64_t i = 0; i < batch; ++i) {
            const Scalar* gi = g.data() + i * M * N;
            if (grads[0]) gemm_nt(gi, B + i * K * N, grads[0]->data() + i * M * K, M, N, K);
            if (grads[1]) gemm_tn(A + i * M * K, gi, grads[1]->data() + i * K * N, M, K, N);
        }
    };
    return finish("matmul", {a, b}, std::move(out_shape), std::move(out), backward);
}

Tensor conv1d(const Tensor& x, const Tensor& weight, Padding padding) {
    if (x.rank() != 3 || weight.rank() != 3) throw ShapeError("conv1d expects x [B,L,C] and weight [K,Cin,Cout]");
    const int64_t B = x.dim(0), L = x.dim(1), Cin = x.dim(2);
    const int64_t Kk = weight.dim(0), Cout = weight.dim(2);
    if (weight.dim(1) != Cin)
        throw ShapeError("conv1d channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(weight.shape()));
    const int64_t pad_left = padding == Padding::Causal ? Kk - 1 : (Kk - 1) / 2;
    std::vector<Scalar> out(static_cast<size_t>(B * L * Cout), Scalar(0));
    const Scalar* X = x.data().data();
    const Scalar* W = weight.data().data();
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < L; ++t)
            for (int64_t k = 0; k < Kk; ++k) {
                const int64_t s = t + k - pad_left;
                if (s < 0 || s >= L) continue;
                gemm_nn(X + (b * L + s) * Cin, W + k * Cin * Cout, out.data() + (b * L + t) * Cout, 1, Cin, Cout);
            }
    auto backward = [x, weight, B, L, Cin, Kk, Cout, pad_left](std::span<const Scalar> g, Grads grads) {
        const Scalar* X = x.data().data();
        const Scalar* W = weight.data().data();
        for (int64_t b = 0; b < B; ++b)
            for (int64_t t = 0; t < L; ++t)
                for (int64_t k = 0; k < Kk; ++k) {
                    const int64_t s = t + k - pad_left;
                    if (s < 0 || s >= L) continue;
                    const Scalar* gr = g.data() + (b * L + t) * Cout;
                    if (grads[0]) gemm_nt(gr, W + k * Cin * Cout, grads[0]->data() + (b * L + s) * Cin, 1, Cout, Cin);
                    if (grads[1]) gemm_tn(X + (b * L + s) * Cin, gr, grads[1]->data() + k * Cin * Cout, 1, Cin, Cout);
                }
    };
    return finish("conv1d", {x, weight}, {B, L, Cout}, std::move(out), backward);
}

Tensor transpose(const Tensor& a, int axis0, int axis1) {
    const int r = a.rank();
    axis0 = normalize_axis(axis0, r);
    axis1 = normalize_axis(axis1, r);
    const Shape& in_shape = a.shape();
    Shape out_shape = in_shape;
    std::swap(out_shape[axis0], out_shape[axis1]);
    std::vector<int64_t> in_strides(r, 1);
    for (int i = r - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
    // out index -> in offset: walk out indices in row-major order.
    std::vector<int64_t> perm_strides = in_strides;
    std::swap(perm_strides[axis0], perm_strides[axis1]);
    const int64_t n = a.numel();
    std::vector<int64_t> source(static_cast<size_t>(n));
    std::vector<int64_t> idx(r, 0);
    for (int64_t o = 0; o < n; ++o) {
        int64_t off = 0;
        for (int i = 0; i < r; ++i) off += idx[i] * perm_strides[i];
        source[o] = off;
        for (int i = r - 1; i >= 0; --i) {
            if (++idx[i] < out_shape[i]) break;
            idx[i] = 0;
        }
    }
    auto in = a.data();
    std::vector<Scalar> out(static_cast<size_t>(n));
    for (int64_t o = 0; o < n; ++o) out[o] = in[source[o]];
    auto holder = std::make_shared<std::vector<int64_t>>(std::move(source));
    auto backward = [holder](std::span<const Scalar> g, Grads grads) {
        const auto& src = *holder;
        for (size_t o = 0; o < src.size(); ++o) (*grads[0])[src[o]] += g[o];
    };
    return finish("transpose", {a}, std::move(out_shape), std::move(out), backward);
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeError("cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
    auto backward = [](std::span<const Scalar> g, Grads grads) {
        auto& ga = *grads[0];
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
    return finish("reshape", {a}, std::move(shape), a.to_vector(), backward);
}

Tensor concat(std::span<const Tensor> parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of nothing");
    const int r = parts[0].rank();
    axis = normalize_axis(axis, r);
    Shape out_shape = parts[0].shape();
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        if (p.rank() != r) throw ShapeError("concat rank mismatch");
        for (int i = 0; i < r; ++i)
            if (i != axis && p.shape()[i] != parts[0].shape()[i])
                throw ShapeError("concat shape mismatch " + shape_str(p.shape()) + " vs " +
                                 shape_str(parts[0].shape()));
        out_shape[axis] += p.shape()[axis];
    }
    const AxisSplit whole = split_at(out_shape, axis);
    const int64_t out_row = whole.length * whole.inner;
    std::vector<Scalar> out(static_cast<size_t>(shape_numel(out_shape)));
    std::vector<int64_t> widths;
    int64_t offset = 0;
    for (const auto& p : parts) {
        const int64_t w = p.shape()[axis] * whole.inner;
        auto d = p.data();
        for (int64_t o = 0; o < whole.outer; ++o)
            std::copy_n(d.begin() + o * w, w, out.begin() + o * out_row + offset);
        widths.push_back(w);
        offset += w;
    }
    auto backward = [widths, outer = whole.outer, out_row](std::span<const Scalar> g, Grads grads) {
        int64_t offset = 0;
        for (size_t i = 0; i < widths.size(); ++i) {
            const int64_t w = widths[i];
            if (auto* gi = grads[i])
                for (int64_t o = 0; o < outer; ++o)
                    for (int64_t j = 0; j < w; ++j) (*gi)[o * w + j] += g[o * out_row + offset + j];
            offset += w;
        }
    };
    return finish("concat", std::vector<Tensor>(parts.begin(), parts.end()), std::move(out_shape), std::move(out),
                  backward);
}

Tensor concat(std::initializer_list<Tensor> parts, int axis) {
    return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& a, int axis, int64_t start, int64_t end) {
    axis = normalize_axis(axis, a.rank());
    const AxisSplit s = split_at(a.shape(), axis);
    if (start < 0 || end > s.length || start >= end)
        throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(end) + ") out of range for " +
                         shape_str(a.shape()));
    Shape out_shape = a.shape();
    out_shape[axis] = end - start;
    const int64_t in_row = s.length * s.inner;
    const int64_t w = (end - start) * s.inner;
    const int64_t offset = start * s.inner;
    auto d = a.data();
    std::vector<Scalar> out(static_cast<size_t>(s.outer * w));
    for (int64_t o = 0; o < s.outer; ++o) std::copy_n(d.begin() + o * in_row + offset, w, out.begin() + o * w);
    auto backward = [outer = s.outer, in_row, w, offset](std::span<const Scalar> g, Grads grads) {
        auto& ga = *grads[0];
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t j = 0; j < w; ++j) ga[o * in_row + offset + j] += g[o * w + j];
    };
    return finish("slice", {a}, std::move(out_shape), std::move(out), backward);
}

namespace {

Tensor reduce_all(const Tensor& a, bool average) {
    double acc = 0;
    for (Scalar v : a.data()) acc += v;
    const double factor = average ? 1.0 / static_cast<double>(a.numel()) : 1.0;
    const auto value = static_cast<Scalar>(acc * factor);
    auto backward = [factor](std::span<const Scalar> g, Grads grads) {
        const auto d = static_cast<Scalar>(g[0] * factor);
        for (auto& v : *grads[0]) v += d;
    };
    return finish(average ? "mean" : "sum", {a}, {}, {value}, backward);
}

Tensor reduce_axis(const Tensor& a, int axis, bool average) {
    axis = normalize_axis(axis, a.rank());
    const AxisSplit s = split_at(a.shape(), axis);
    Shape out_shape = a.shape();
    out_shape.erase(out_shape.begin() + axis);
    const Scalar factor = average ? Scalar(1) / static_cast<Scalar>(s.length) : Scalar(1);
    auto d = a.data();
    std::vector<Scalar> out(static_cast<size_t>(s.outer * s.inner));
    for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t i = 0; i < s.inner; ++i) {
            double acc = 0;
            for (int64_t l = 0; l < s.length; ++l) acc += d[(o * s.length + l) * s.inner + i];
            out[o * s.inner + i] = static_cast<Scalar>(acc) * factor;
        }
    auto backward = [s, factor](std::span<const Scalar> g, Grads grads) {
        auto& ga = *grads[0];
        for (int64_t o = 0; o < s.outer; ++o)
            for (int64_t l = 0; l < s.length; ++l)
                for (int64_t i = 0; i < s.inner; ++i) ga[(o * s.length + l) * s.inner + i] += g[o * s.inner + i] * factor;
    };
    return finish(average ? "mean" : "sum", {a}, std::move(out_shape), std::move(out), backward);
}

}  // namespace

Tensor sum(const Tensor& a) { return reduce_all(a, false); }
Tensor sum(const Tensor& a, int axis) { return reduce_axis(a, axis, false); }
Tensor mean(const Tensor& a) { return reduce_all(a, true); }
Tensor mean(const Tensor& a, int axis) { return reduce_axis(a, axis, true); }

Tensor exp(const Tensor& a) {
    return unary("exp", a, [](Scalar x) { return std::exp(x); }, [](Scalar, Scalar y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary("log", a, [](Scalar x) { return std::log(x); }, [](Scalar x, Scalar) { return Scalar(1) / x; });
}

Tensor tanh(const Tensor& a) {
    return unary("tanh", a, [](Scalar x) { return std::tanh(x); }, [](Scalar, Scalar y) { return 1 - y * y; });
}

Tensor softplus(const Tensor& a) {
    return unary(
        "softplus", a, [](Scalar x) { return x > 20 ? x : std::log1p(std::exp(x)); },
        [](Scalar x, Scalar) { return Scalar(1) / (1 + std::exp(-x)); });
}

Tensor sqrt(const Tensor& a) {
    return unary("sqrt", a, [](Scalar x) { return std::sqrt(x); }, [](Scalar, Scalar y) { return Scalar(0.5) / y; });
}

Tensor softmax(const Tensor& a) {
    if (a.rank() < 1) throw ShapeError("softmax of a scalar");
    const int64_t n = a.dim(-1);
    const int64_t rows = a.numel() / n;
    auto x = a.data();
    std::vector<Scalar> out(x.size());
    for (int64_t r = 0; r < rows; ++r) {
        const Scalar* xr = x.data() + r * n;
        Scalar* yr = out.data() + r * n;
        const Scalar m = *std::max_element(xr, xr + n);
        Scalar total = 0;
        for (int64_t j = 0; j < n; ++j) total += yr[j] = std::exp(xr[j] - m);
        for (int64_t j = 0; j < n; ++j) yr[j] /= total;
    }
    auto holder = std::make_shared<std::vector<Scalar>>(out);
    auto backward = [holder, n, rows](std::span<const Scalar> g, Grads grads) {
        const auto& y = *holder;
        auto& ga = *grads[0];
        for (int64_t r = 0; r < rows; ++r) {
            Scalar dot = 0;
            for (int64_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
            for (int64_t j = 0; j < n; ++j) ga[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
        }
    };
    return finish("softmax", {a}, a.shape(), std::move(out), backward);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.rank() != 3 || k.rank() != 3 || v.rank() != 3) throw ShapeError("attention expects rank-3 q, k, v");
    const int64_t B = q.dim(0), Lq = q.dim(1), d = q.dim(2);
    const int64_t Lk = k.dim(1), dv = v.dim(2);
    if (k.dim(0) != B || v.dim(0) != B || k.dim(2) != d || v.dim(1) != Lk)
        throw ShapeError("attention shape mismatch q" + shape_str(q.shape()) + " k" + shape_str(k.shape()) + " v" +
                         shape_str(v.shape()));
    const Scalar inv = Scalar(1) / std::sqrt(static_cast<Scalar>(d));
    auto probs = std::make_shared<std::vector<Scalar>>(static_cast<size_t>(B * Lq * Lk), Scalar(0));
    std::vector<Scalar> out(static_cast<size_t>(B * Lq * dv), Scalar(0));
    const Scalar* Q = q.data().data();
    const Scalar* K = k.data().data();
    const Scalar* V = v.data().data();
    for (int64_t b = 0; b < B; ++b) {
        Scalar* P = probs->data() + b * Lq * Lk;
        gemm_nt(Q + b * Lq * d, K + b * Lk * d, P, Lq, d, Lk);
        for (int64_t i = 0; i < Lq; ++i) {
            Scalar* row = P + i * Lk;
            Scalar m = row[0] * inv;
            for (int64_t j = 0; j < Lk; ++j) m = std::max(m, row[j] * inv);
            Scalar total = 0;
            for (int64_t j = 0; j < Lk; ++j) total += row[j] = std::exp(row[j] * inv - m);
            for (int64_t j = 0; j < Lk; ++j) row[j] /= total;
        }
        gemm_nn(P, V + b * Lk * dv, out.data() + b * Lq * dv, Lq, Lk, dv);
    }
    auto backward = [q, k, v, probs, B, Lq, Lk, d, dv, inv](std::span<const Scalar> g, Grads grads) {
        const Scalar* Q = q.data().data();
        const Scalar* K = k.data().data();
        const Scalar* V = v.data().data();
        std::vector<Scalar> dP(static_cast<size_t>(Lq * Lk));
        for (int64_t b = 0; b < B; ++b) {
            const Scalar* P = probs->data() + b * Lq * Lk;
            const Scalar* G = g.data() + b * Lq * dv;
            if (grads[2]) gemm_tn(P, G, grads[2]->data() + b * Lk * dv, Lq, Lk, dv);
            if (!grads[0] && !grads[1]) continue;
            std::fill(dP.begin(), dP.end(), Scalar(0));
            gemm_nt(G, V + b * Lk * dv, dP.data(), Lq, dv, Lk);
            // dS = P ⊙ (dP - rowsum(dP ⊙ P)), pre-scaled by 1/√d.
            for (int64_t i = 0; i < Lq; ++i) {
                Scalar dot = 0;
                for (int64_t j = 0; j < Lk; ++j) dot += dP[i * Lk + j] * P[i * Lk + j];
                for (int64_t j = 0; j < Lk; ++j) dP[i * Lk + j] = P[i * Lk + j] * (dP[i * Lk + j] - dot) * inv;
            }
            if (grads[0]) gemm_nn(dP.data(), K + b * Lk * d, grads[0]->data() + b * Lq * d, Lq, Lk, d);
            if (grads[1]) gemm_tn(dP.data(), Q + b * Lq * d, grads[1]->data() + b * Lk * d, Lq, Lk, d);
        }
    };
    return finish("scaled_dot_attention", {q, k, v}, {B, Lq, dv}, std::move(out), backward);
}

Tensor apply_primitive(Primitive kind, std::span<const Tensor> in, const PrimitiveAttrs& attrs) {
    auto need = [&](size_t n) {
        if (in.size() != n)
            throw ShapeError(std::string(primitive_name(kind)) + " expects " + std::to_string(n) + " inputs");
    };
    switch (kind) {
        case Primitive::Add: need(2); return add(in[0], in[1]);
        case Primitive::Sub: need(2); return sub(in[0], in[1]);
        case Primitive::Mul: need(2); return mul(in[0], in[1]);
        case Primitive::Div: need(2); return div(in[0], in[1]);
        case Primitive::MatMul: need(2); return matmul(in[0], in[1]);
        case Primitive::Conv1d: need(2); return conv1d(in[0], in[1], attrs.padding);
        case Primitive::Transpose: need(1); return transpose(in[0], attrs.axis, attrs.axis2);
        case Primitive::Reshape: need(1); return reshape(in[0], attrs.shape);
        case Primitive::Concat: return concat(in, attrs.axis);
        case Primitive::Slice: need(1); return slice(in[0], attrs.axis, attrs.start, attrs.end);
        case Primitive::Mean: need(1); return attrs.reduce_all ? mean(in[0]) : mean(in[0], attrs.axis);
        case Primitive::Sum: need(1); return attrs.reduce_all ? sum(in[0]) : sum(in[0], attrs.axis);
        case Primitive::Exp: need(1); return exp(in[0]);
        case Primitive::Log: need(1); return log(in[0]);
        case Primitive::Tanh: need(1); return tanh(in[0]);
        case Primitive::Softplus: need(1); return softplus(in[0]);
        case Primitive::Sqrt: need(1); return sqrt(in[0]);
        case Primitive::Softmax: need(1); return softmax(in[0]);
        case Primitive::ScaledDotAttention: need(3); return scaled_dot_attention(in[0], in[1], in[2]);
    }
    throw std::invalid_argument("unknown primitive");
}

}  // namespace updd
