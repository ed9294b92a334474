#include <algorithm>
#include <cmath>
#include <memory>

#include "kicl/error.hpp"
#include "kicl/numerics/ops.hpp"

namespace kicl::ops {

Var attention(Var q, Var k, Var v, AttentionLayout layout) {
    const std::size_t groups = layout.groups, heads = layout.heads;
    KICL_REQUIRE(groups > 0 && heads > 0, "attention needs at least one group and head");
    KICL_REQUIRE(q.value().rank() == 2 && k.value().rank() == 2 && v.value().rank() == 2,
                 "attention operands must be rank-2");
    const std::size_t width = q.cols();
    KICL_REQUIRE(k.cols() == width && v.cols() == width, "attention: q/k/v widths differ");
    KICL_REQUIRE(width % heads == 0, "attention: width " + std::to_string(width) +
                                         " not divisible by " + std::to_string(heads) + " heads");
    KICL_REQUIRE(q.rows() % groups == 0 && k.rows() % groups == 0,
                 "attention: rows not divisible into groups");
    KICL_REQUIRE(k.rows() == v.rows(), "attention: key and value counts differ");
    const std::size_t lq = q.rows() / groups, lk = k.rows() / groups;
    KICL_REQUIRE(lk > 0, "attention over an empty key set");
    const std::size_t dh = width / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    const Tensor& qv = q.value();
    const Tensor& kv = k.value();
    const Tensor& vv = v.value();
    Tensor out({groups * lq, width});
    auto probs = std::make_shared<std::vector<double>>(groups * heads * lq * lk);
    std::vector<double> scores(lk);

    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < lq; ++i) {
                const double* qi = qv.ptr() + (g * lq + i) * width + h * dh;
                double mx = -INFINITY;
                for (std::size_t j = 0; j < lk; ++j) {
                    const double* kj = kv.ptr() + (g * lk + j) * width + h * dh;
                    double s = 0.0;
                    for (std::size_t p = 0; p < dh; ++p) s += qi[p] * kj[p];
                    scores[j] = s * sc;
                    mx = std::max(mx, scores[j]);
                }
                double z = 0.0;
                for (std::size_t j = 0; j < lk; ++j) {
                    scores[j] = std::exp(scores[j] - mx);
                    z += scores[j];
                }
                double* pr = probs->data() + ((g * heads + h) * lq + i) * lk;
                double* oi = out.ptr() + (g * lq + i) * width + h * dh;
                for (std::size_t j = 0; j < lk; ++j) {
                    const double pj = scores[j] / z;
                    pr[j] = pj;
                    const double* vj = vv.ptr() + (g * lk + j) * width + h * dh;
                    for (std::size_t p = 0; p < dh; ++p) oi[p] += pj * vj[p];
                }
            }
        }
    }

    const Var parents[] = {q, k, v};
    return q.tape->record(
        std::move(out), parents,
        [q, k, v, groups, heads, lq, lk, dh, width, sc, probs](Tape& t, const Tensor&, const Tensor& gout) {
            const Tensor& qv = t.value(q);
            const Tensor& kv = t.value(k);
            const Tensor& vv = t.value(v);
            const bool gq = t.requires_grad(q), gk = t.requires_grad(k), gv = t.requires_grad(v);
            Tensor* dq = gq ? &t.grad_of(q) : nullptr;
            Tensor* dk = gk ? &t.grad_of(k) : nullptr;
            Tensor* dv = gv ? &t.grad_of(v) : nullptr;
            std::vector<double> ds(lk);
            for (std::size_t g = 0; g < groups; ++g) {
                for (std::size_t h = 0; h < heads; ++h) {
                    for (std::size_t i = 0; i < lq; ++i) {
                        const double* pr = probs->data() + ((g * heads + h) * lq + i) * lk;
                        const double* go = gout.ptr() + (g * lq + i) * width + h * dh;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < lk; ++j) {
                            const double* vj = vv.ptr() + (g * lk + j) * width + h * dh;
                            double dp = 0.0;
                            for (std::size_t p = 0; p < dh; ++p) dp += go[p] * vj[p];
                            ds[j] = dp;
                            dot += dp * pr[j];
                        }
                        const double* qi = qv.ptr() + (g * lq + i) * width + h * dh;
                        double* dqi = gq ? dq->ptr() + (g * lq + i) * width + h * dh : nullptr;
                        for (std::size_t j = 0; j < lk; ++j) {
                            const double s = pr[j] * (ds[j] - dot) * sc;
                            const std::size_t kr = (g * lk + j) * width + h * dh;
                            if (gq) {
                                const double* kj = kv.ptr() + kr;
                                for (std::size_t p = 0; p < dh; ++p) dqi[p] += s * kj[p];
                            }
                            if (gk) {
                                double* dkj = dk->ptr() + kr;
                                for (std::size_t p = 0; p < dh; ++p) dkj[p] += s * qi[p];
                            }
                            if (gv) {
                                double* dvj = dv->ptr() + kr;
                                for (std::size_t p = 0; p < dh; ++p) dvj[p] += pr[j] * go[p];
                            }
                        }
                    }
                }
            }
        },
        groups * cost::attention(lq, lk, width, heads));
}

}  // namespace kicl::ops
