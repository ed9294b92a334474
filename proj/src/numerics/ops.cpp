#include "kicl/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "gemm.hpp"
#include "kicl/error.hpp"

namespace kicl::ops {
namespace {

void require_matrix(const Var& v, const char* op) {
    KICL_REQUIRE(v.value().rank() == 2, std::string(op) + " expects a rank-2 operand, got " +
                                            shape_string(v.dims()));
}

void require_same(const Var& a, const Var& b, const char* op) {
    KICL_REQUIRE(a.tape == b.tape, std::string(op) + ": operands on different tapes");
    KICL_REQUIRE(a.value().same_shape(b.value()), std::string(op) + ": shape mismatch " +
                                                      shape_string(a.dims()) + " vs " +
                                                      shape_string(b.dims()));
}

template <typename F>
Var unary(Var x, std::uint64_t flops_per_elem, F&& forward,
          std::function<void(const Tensor& in, const Tensor& out, const Tensor& g, Tensor& gx)> back) {
    const Tensor& in = x.value();
    Tensor out(in.dims());
    for (std::size_t i = 0; i < in.numel(); ++i) out[i] = forward(in[i]);
    const Var parents[] = {x};
    return x.tape->record(
        std::move(out), parents,
        [x, back = std::move(back)](Tape& t, const Tensor& o, const Tensor& g) {
            back(t.value(x), o, g, t.grad_of(x));
        },
        flops_per_elem * in.numel());
}

}  // namespace

Var matmul(Var a, Var b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    KICL_REQUIRE(a.tape == b.tape, "matmul: operands on different tapes");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    KICL_REQUIRE(k == b.rows(), "matmul inner dims disagree: " + shape_string(a.dims()) + " x " +
                                    shape_string(b.dims()));
    Tensor out({m, n});
    detail::gemm_nn(a.value().ptr(), b.value().ptr(), out.ptr(), m, k, n, false);
    const Var parents[] = {a, b};
    return a.tape->record(
        std::move(out), parents,
        [a, b, m, k, n](Tape& t, const Tensor&, const Tensor& g) {
            if (t.requires_grad(a))
                detail::gemm_nt(g.ptr(), t.value(b).ptr(), t.grad_of(a).ptr(), m, n, k, true);
            if (t.requires_grad(b))
                detail::gemm_tn(t.value(a).ptr(), g.ptr(), t.grad_of(b).ptr(), m, k, n, true);
        },
        cost::matmul(m, k, n));
}

Var add(Var a, Var b) {
    require_same(a, b, "add");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
    const Var parents[] = {a, b};
    return a.tape->record(
        std::move(out), parents,
        [a, b](Tape& t, const Tensor&, const Tensor& g) {
            for (Var p : {a, b}) {
                if (!t.requires_grad(p)) continue;
                auto& gp = t.grad_of(p);
                for (std::size_t i = 0; i < g.numel(); ++i) gp[i] += g[i];
            }
        },
        a.value().numel());
}

Var sub(Var a, Var b) {
    require_same(a, b, "sub");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
    const Var parents[] = {a, b};
    return a.tape->record(
        std::move(out), parents,
        [a, b](Tape& t, const Tensor&, const Tensor& g) {
            if (t.requires_grad(a)) {
                auto& ga = t.grad_of(a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
            }
            if (t.requires_grad(b)) {
                auto& gb = t.grad_of(b);
                for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
            }
        },
        a.value().numel());
}

Var mul(Var a, Var b) {
    require_same(a, b, "mul");
    Tensor out = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
    const Var parents[] = {a, b};
    return a.tape->record(
        std::move(out), parents,
        [a, b](Tape& t, const Tensor&, const Tensor& g) {
            const auto& av = t.value(a);
            const auto& bv = t.value(b);
            if (t.requires_grad(a)) {
                auto& ga = t.grad_of(a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv[i];
            }
            if (t.requires_grad(b)) {
                auto& gb = t.grad_of(b);
                for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av[i];
            }
        },
        a.value().numel());
}

Var scale(Var a, double s) {
    return unary(
        a, 1, [s](double v) { return s * v; },
        [s](const Tensor&, const Tensor&, const Tensor& g, Tensor& gx) {
            for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += s * g[i];
        });
}

Var add_bias(Var x, Var b) {
    require_matrix(x, "add_bias");
    const std::size_t r = x.rows(), c = x.cols();
    KICL_REQUIRE(b.value().numel() == c, "add_bias: bias has " + std::to_string(b.value().numel()) +
                                             " elements, rows have " + std::to_string(c));
    Tensor out = x.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
    const Var parents[] = {x, b};
    return x.tape->record(
        std::move(out), parents,
        [x, b, r, c](Tape& t, const Tensor&, const Tensor& g) {
            if (t.requires_grad(x)) {
                auto& gx = t.grad_of(x);
                for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
            }
            if (t.requires_grad(b)) {
                auto& gb = t.grad_of(b);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
            }
        },
        r * c);
}

namespace {
constexpr double kSqrt2OverPi = 0.7978845608028654;
constexpr double kGeluCubic = 0.044715;
}  // namespace

Var gelu(Var x) {
    return unary(
        x, cost::kGeluPerElement,
        [](double v) { return 0.5 * v * (1.0 + std::tanh(kSqrt2OverPi * (v + kGeluCubic * v * v * v))); },
        [](const Tensor& in, const Tensor&, const Tensor& g, Tensor& gx) {
            for (std::size_t i = 0; i < g.numel(); ++i) {
                const double v = in[i];
                const double u = kSqrt2OverPi * (v + kGeluCubic * v * v * v);
                const double th = std::tanh(u);
                const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCubic * v * v);
                gx[i] += g[i] * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du);
            }
        });
}

Var exp(Var x) {
    return unary(
        x, 1, [](double v) { return std::exp(v); },
        [](const Tensor&, const Tensor& out, const Tensor& g, Tensor& gx) {
            for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * out[i];
        });
}

Var log(Var x) {
    for (double v : x.value().data()) KICL_REQUIRE(v > 0.0, "log of non-positive value");
    return unary(
        x, 1, [](double v) { return std::log(v); },
        [](const Tensor& in, const Tensor&, const Tensor& g, Tensor& gx) {
            for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] / in[i];
        });
}

Var clamp(Var x, double lo, double hi) {
    KICL_REQUIRE(lo <= hi, "clamp bounds reversed");
    return unary(
        x, 1, [lo, hi](double v) { return std::clamp(v, lo, hi); },
        [lo, hi](const Tensor& in, const Tensor&, const Tensor& g, Tensor& gx) {
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (in[i] > lo && in[i] < hi) gx[i] += g[i];
        });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    require_matrix(x, "layer_norm");
    const std::size_t r = x.rows(), c = x.cols();
    KICL_REQUIRE(gamma.value().numel() == c && beta.value().numel() == c,
                 "layer_norm: affine parameters must have " + std::to_string(c) + " elements");
    const Tensor& in = x.value();
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    Tensor out({r, c});
    // Normalized values and inverse std are kept for the backward pass.
    auto xhat = std::make_shared<Tensor>(std::vector<std::size_t>{r, c});
    auto rstd = std::make_shared<std::vector<double>>(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = in.ptr() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += row[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(c);
        const double rs = 1.0 / std::sqrt(var + eps);
        (*rstd)[i] = rs;
        for (std::size_t j = 0; j < c; ++j) {
            const double h = (row[j] - mu) * rs;
            (*xhat)[i * c + j] = h;
            out[i * c + j] = h * gv[j] + bv[j];
        }
    }
    const Var parents[] = {x, gamma, beta};
    return x.tape->record(
        std::move(out), parents,
        [x, gamma, beta, r, c, xhat, rstd](Tape& t, const Tensor&, const Tensor& g) {
            const auto& gv = t.value(gamma);
            if (t.requires_grad(gamma)) {
                auto& gg = t.grad_of(gamma);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * (*xhat)[i * c + j];
            }
            if (t.requires_grad(beta)) {
                auto& gb = t.grad_of(beta);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
            }
            if (t.requires_grad(x)) {
                auto& gx = t.grad_of(x);
                const double inv_c = 1.0 / static_cast<double>(c);
                for (std::size_t i = 0; i < r; ++i) {
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t j = 0; j < c; ++j) {
                        const double dh = g[i * c + j] * gv[j];
                        s1 += dh;
                        s2 += dh * (*xhat)[i * c + j];
                    }
                    for (std::size_t j = 0; j < c; ++j) {
                        const double dh = g[i * c + j] * gv[j];
                        gx[i * c + j] += (*rstd)[i] * (dh - inv_c * s1 - (*xhat)[i * c + j] * inv_c * s2);
                    }
                }
            }
        },
        cost::kLayerNormPerElement * r * c);
}

Var softmax_rows(Var x) {
    require_matrix(x, "softmax_rows");
    KICL_REQUIRE(x.cols() > 0, "softmax over empty axis");
    Tensor out = softmax_stable(x.value(), 1);
    const std::size_t r = x.rows(), c = x.cols();
    const Var parents[] = {x};
    return x.tape->record(
        std::move(out), parents,
        [x, r, c](Tape& t, const Tensor& p, const Tensor& g) {
            auto& gx = t.grad_of(x);
            for (std::size_t i = 0; i < r; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * p[i * c + j];
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += p[i * c + j] * (g[i * c + j] - dot);
            }
        },
        cost::kSoftmaxPerElement * r * c);
}

Var row_normalize(Var x) {
    require_matrix(x, "row_normalize");
    const std::size_t r = x.rows(), c = x.cols();
    const Tensor& in = x.value();
    Tensor out({r, c});
    auto norms = std::make_shared<std::vector<double>>(r);
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += in[i * c + j] * in[i * c + j];
        KICL_REQUIRE(s > 0.0, "row_normalize of a zero row");
        const double nrm = std::sqrt(s);
        (*norms)[i] = nrm;
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = in[i * c + j] / nrm;
    }
    const Var parents[] = {x};
    return x.tape->record(
        std::move(out), parents,
        [x, r, c, norms](Tape& t, const Tensor& u, const Tensor& g) {
            auto& gx = t.grad_of(x);
            for (std::size_t i = 0; i < r; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * u[i * c + j];
                for (std::size_t j = 0; j < c; ++j)
                    gx[i * c + j] += (g[i * c + j] - dot * u[i * c + j]) / (*norms)[i];
            }
        },
        3 * r * c);
}

Var gather_rows(Var x, std::vector<std::size_t> indices) {
    require_matrix(x, "gather_rows");
    const std::size_t c = x.cols(), src_rows = x.rows();
    Tensor out({indices.size(), c});
    const Tensor& in = x.value();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        KICL_REQUIRE(indices[i] < src_rows, "gather_rows index out of range");
        std::copy_n(in.ptr() + indices[i] * c, c, out.ptr() + i * c);
    }
    const Var parents[] = {x};
    return x.tape->record(
        std::move(out), parents,
        [x, c, idx = std::move(indices)](Tape& t, const Tensor&, const Tensor& g) {
            auto& gx = t.grad_of(x);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                double* dst = gx.ptr() + idx[i] * c;
                const double* src = g.ptr() + i * c;
                for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
            }
        },
        0);
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
    require_matrix(x, "slice_rows");
    KICL_REQUIRE(begin <= end && end <= x.rows(), "slice_rows range out of bounds");
    const std::size_t c = x.cols();
    const Var parents[] = {x};
    return x.tape->record(
        x.value().rows_slice(begin, end), parents,
        [x, begin, c](Tape& t, const Tensor&, const Tensor& g) {
            auto& gx = t.grad_of(x);
            for (std::size_t i = 0; i < g.numel(); ++i) gx[begin * c + i] += g[i];
        },
        0);
}

Var concat_rows(std::span<const Var> parts) {
    KICL_REQUIRE(!parts.empty(), "concat_rows of nothing");
    std::vector<Tensor> values;
    values.reserve(parts.size());
    for (const auto& p : parts) {
        require_matrix(p, "concat_rows");
        values.push_back(p.value());
    }
    std::vector<Var> keep(parts.begin(), parts.end());
    return parts.front().tape->record(
        kicl::concat_rows(values), parts,
        [keep](Tape& t, const Tensor&, const Tensor& g) {
            std::size_t offset = 0;
            for (const auto& p : keep) {
                const std::size_t len = t.value(p).numel();
                if (t.requires_grad(p)) {
                    auto& gp = t.grad_of(p);
                    for (std::size_t i = 0; i < len; ++i) gp[i] += g[offset + i];
                }
                offset += len;
            }
        },
        0);
}

Var reshape(Var x, std::vector<std::size_t> dims) {
    const Var parents[] = {x};
    return x.tape->record(
        x.value().reshaped(std::move(dims)), parents,
        [x](Tape& t, const Tensor&, const Tensor& g) {
            auto& gx = t.grad_of(x);
            for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
        },
        0);
}

Var transpose(Var x) {
    require_matrix(x, "transpose");
    const std::size_t r = x.rows(), c = x.cols();
    Tensor out({c, r});
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
    const Var parents[] = {x};
    return x.tape->record(
        std::move(out), parents,
        [x, r, c](Tape& t, const Tensor&, const Tensor& g) {
            auto& gx = t.grad_of(x);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
        },
        0);
}

Var select_per_row(Var x, std::vector<std::size_t> cols) {
    require_matrix(x, "select_per_row");
    const std::size_t r = x.rows(), c = x.cols();
    KICL_REQUIRE(cols.size() == r, "select_per_row needs one column index per row");
    Tensor out({r, 1});
    for (std::size_t i = 0; i < r; ++i) {
        KICL_REQUIRE(cols[i] < c, "select_per_row column out of range");
        out[i] = x.value()[i * c + cols[i]];
    }
    const Var parents[] = {x};
    return x.tape->record(
        std::move(out), parents,
        [x, c, idx = std::move(cols)](Tape& t, const Tensor&, const Tensor& g) {
            auto& gx = t.grad_of(x);
            for (std::size_t i = 0; i < idx.size(); ++i) gx[i * c + idx[i]] += g[i];
        },
        0);
}

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    const Var parents[] = {x};
    return x.tape->record(
        Tensor::scalar(s), parents,
        [x](Tape& t, const Tensor&, const Tensor& g) {
            auto& gx = t.grad_of(x);
            for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[0];
        },
        x.value().numel());
}

Var mean(Var x) {
    const auto n = x.value().numel();
    KICL_REQUIRE(n > 0, "mean of empty tensor");
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    const double inv = 1.0 / static_cast<double>(n);
    const Var parents[] = {x};
    return x.tape->record(
        Tensor::scalar(s * inv), parents,
        [x, inv](Tape& t, const Tensor&, const Tensor& g) {
            auto& gx = t.grad_of(x);
            for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[0] * inv;
        },
        n + 1);
}

Var sqdist(Var q, Var k) {
    require_matrix(q, "sqdist");
    require_matrix(k, "sqdist");
    const std::size_t m = q.rows(), n = k.rows(), d = q.cols();
    KICL_REQUIRE(k.cols() == d, "sqdist: query and key widths differ");
    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < d; ++p) {
                const double diff = qv[i * d + p] - kv[j * d + p];
                s += diff * diff;
            }
            out[i * n + j] = s;
        }
    const Var parents[] = {q, k};
    return q.tape->record(
        std::move(out), parents,
        [q, k, m, n, d](Tape& t, const Tensor&, const Tensor& g) {
            const Tensor& qv = t.value(q);
            const Tensor& kv = t.value(k);
            const bool gq = t.requires_grad(q), gk = t.requires_grad(k);
            Tensor* dq = gq ? &t.grad_of(q) : nullptr;
            Tensor* dk = gk ? &t.grad_of(k) : nullptr;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double w = 2.0 * g[i * n + j];
                    for (std::size_t p = 0; p < d; ++p) {
                        const double diff = qv[i * d + p] - kv[j * d + p];
                        if (gq) (*dq)[i * d + p] += w * diff;
                        if (gk) (*dk)[j * d + p] -= w * diff;
                    }
                }
        },
        3 * m * n * d);
}

}  // namespace kicl::ops
