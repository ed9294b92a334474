#include "kicl/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kicl/error.hpp"
#include "kicl/numerics/ops.hpp"

namespace kicl {

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::dot: return "dot";
        case KernelKind::gaussian: return "gaussian";
        case KernelKind::knn: return "knn";
    }
    return "?";
}

KernelKind parse_kernel_kind(const std::string& s) {
    if (s == "dot") return KernelKind::dot;
    if (s == "gaussian") return KernelKind::gaussian;
    if (s == "knn") return KernelKind::knn;
    throw ContractViolation("unknown kernel '" + s + "' (expected dot|gaussian|knn)");
}

KernelSpec KernelSpec::default_for(KernelKind kind, std::size_t key_dim) {
    KICL_REQUIRE(key_dim >= 1, "key dimension must be at least 1");
    const double root = std::sqrt(static_cast<double>(key_dim));
    switch (kind) {
        case KernelKind::dot: return dot(1.0 / root);
        case KernelKind::gaussian: return gaussian(1.0 / (2.0 * root));
        case KernelKind::knn: return knn(5);
    }
    return {};
}

std::size_t KernelSpec::neighbors() const {
    KICL_REQUIRE(kind == KernelKind::knn, "neighbour count requested from a soft kernel");
    return static_cast<std::size_t>(scale);
}

void KernelSpec::validate(std::size_t context) const {
    if (kind == KernelKind::knn) {
        KICL_REQUIRE(scale >= 1.0 && scale == std::floor(scale), "knn needs a positive integer k, got " + describe());
        KICL_REQUIRE(static_cast<std::size_t>(scale) <= context,
                     "knn k=" + std::to_string(static_cast<std::size_t>(scale)) + " exceeds context size " +
                         std::to_string(context));
    } else {
        KICL_REQUIRE(std::isfinite(scale) && scale > 0.0, "kernel scale must be positive and finite, got " + describe());
    }
}

std::string KernelSpec::describe() const {
    std::ostringstream os;
    os << to_string(kind) << (kind == KernelKind::knn ? "(k=" : "(gamma=") << scale << ')';
    return os.str();
}

namespace {

void check_embeddings(const Tensor& q, const Tensor& k) {
    KICL_REQUIRE(q.rank() == 2 && k.rank() == 2, "kernel inputs must be rank-2");
    KICL_REQUIRE(k.rows() >= 1, "kernel needs at least one key");
    KICL_REQUIRE(q.cols() == k.cols() || q.rows() == 0, "query and key dimensions differ");
    KICL_REQUIRE(q.all_finite() && k.all_finite(), "non-finite embeddings passed to a kernel");
}

// Softmax of each row of logits in place.
void normalize_rows(Tensor& logits) {
    const std::size_t n = logits.cols();
    for (std::size_t j = 0; j < logits.rows(); ++j) {
        double* row = logits.ptr() + j * n;
        const double mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            row[i] = std::exp(row[i] - mx);
            z += row[i];
        }
        for (std::size_t i = 0; i < n; ++i) row[i] /= z;
    }
}

double squared_distance(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
        const double diff = a[p] - b[p];
        s += diff * diff;
    }
    return s;
}

}  // namespace

WeightMatrix kernel_dot(const Tensor& q, const Tensor& k, double gamma) {
    check_embeddings(q, k);
    KernelSpec::dot(gamma).validate(k.rows());
    const std::size_t m = q.rows(), n = k.rows(), d = k.cols();
    Tensor w({m, n});
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t p = 0; p < d; ++p) s += q(j, p) * k(i, p);
            w(j, i) = gamma * s;
        }
    normalize_rows(w);
    return {std::move(w)};
}

WeightMatrix kernel_gaussian(const Tensor& q, const Tensor& k, double gamma) {
    check_embeddings(q, k);
    KernelSpec::gaussian(gamma).validate(k.rows());
    const std::size_t m = q.rows(), n = k.rows(), d = k.cols();
    Tensor w({m, n});
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) w(j, i) = -gamma * squared_distance(q.ptr() + j * d, k.ptr() + i * d, d);
    normalize_rows(w);
    return {std::move(w)};
}

std::vector<std::size_t> nearest_keys(std::span<const double> query, const Tensor& keys, std::size_t k) {
    const std::size_t n = keys.rows(), d = keys.cols();
    KICL_REQUIRE(k >= 1 && k <= n, "knn k=" + std::to_string(k) + " must lie in 1.." + std::to_string(n));
    KICL_REQUIRE(query.size() == d, "query and key dimensions differ");
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(query.data(), keys.ptr() + i * d, d);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto closer = [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), closer);
    idx.resize(k);
    return idx;
}

WeightMatrix kernel_knn(const Tensor& q, const Tensor& k, std::size_t neighbours) {
    check_embeddings(q, k);
    KernelSpec::knn(neighbours).validate(k.rows());
    const std::size_t m = q.rows(), n = k.rows();
    Tensor w({m, n});
    const double share = 1.0 / static_cast<double>(neighbours);
    for (std::size_t j = 0; j < m; ++j)
        for (auto i : nearest_keys(q.row(j), k, neighbours)) w(j, i) = share;
    return {std::move(w)};
}

WeightMatrix kernel_weights(const KernelSpec& spec, const Tensor& q, const Tensor& k) {
    switch (spec.kind) {
        case KernelKind::dot: return kernel_dot(q, k, spec.scale);
        case KernelKind::gaussian: return kernel_gaussian(q, k, spec.scale);
        case KernelKind::knn:
            spec.validate(k.rows());
            return kernel_knn(q, k, spec.neighbors());
    }
    throw ContractViolation("unknown kernel kind");
}

ClassProbabilities predict(const WeightMatrix& wm, std::span<const int> labels, std::size_t classes) {
    const std::size_t m = wm.queries(), n = wm.context();
    KICL_REQUIRE(labels.size() == n, "label count " + std::to_string(labels.size()) +
                                         " does not match weight columns " + std::to_string(n));
    KICL_REQUIRE(classes >= 1, "need at least one class");
    for (int y : labels)
        KICL_REQUIRE(y >= 0 && static_cast<std::size_t>(y) < classes, "label " + std::to_string(y) + " out of range");
    ClassProbabilities out{Tensor({m, classes}), std::vector<int>(m, 0)};
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) out.probs(j, static_cast<std::size_t>(labels[i])) += wm.weights(j, i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (out.probs(j, c) > out.probs(j, best)) best = c;
        out.predicted[j] = static_cast<int>(best);
    }
    return out;
}

double perplexity(std::span<const double> w) {
    KICL_REQUIRE(!w.empty(), "perplexity of an empty weight vector");
    double total = 0.0, entropy = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        KICL_REQUIRE(w[i] >= 0.0, "negative weight " + std::to_string(w[i]) + " at index " + std::to_string(i));
        total += w[i];
        if (w[i] > 0.0) entropy -= w[i] * std::log(w[i]);
    }
    KICL_REQUIRE(std::abs(total - 1.0) <= 1e-6, "weights sum to " + std::to_string(total) + ", not 1");
    // Uniform over its support: the entropy is exactly log(support).
    double lo = INFINITY, hi = 0.0;
    std::size_t support = 0;
    for (double v : w)
        if (v > 0.0) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            ++support;
        }
    if (lo == hi) return static_cast<double>(support);
    return std::clamp(std::exp(entropy), 1.0, static_cast<double>(w.size()));
}

RelativePerplexity relative_perplexity(const WeightMatrix& wm) {
    KICL_REQUIRE(wm.queries() >= 1, "relative perplexity needs at least one test point");
    RelativePerplexity out;
    const double n = static_cast<double>(wm.context());
    double log_sum = 0.0;
    for (std::size_t j = 0; j < wm.queries(); ++j) {
        const double r = perplexity(wm.row(j)) / n;
        out.per_point.push_back(r);
        log_sum += std::log(r);
    }
    const auto [lo, hi] = std::minmax_element(out.per_point.begin(), out.per_point.end());
    // Equal rows (e.g. kNN) keep their exact value instead of a rounded exp(log).
    out.dataset = *lo == *hi ? *lo : std::exp(log_sum / static_cast<double>(wm.queries()));
    return out;
}

PredictionReport make_report(WeightMatrix weights, std::span<const int> labels, std::size_t classes) {
    auto cls = predict(weights, labels, classes);
    PredictionReport r;
    r.probs = std::move(cls.probs);
    r.predicted = std::move(cls.predicted);
    for (std::size_t j = 0; j < weights.queries(); ++j) r.perplexity.push_back(perplexity(weights.row(j)));
    if (weights.queries() > 0) r.relative = relative_perplexity(weights);
    r.weights = std::move(weights);
    return r;
}

namespace ops {

Var kernel_weights(const KernelSpec& spec, Var queries, Var keys) {
    KICL_REQUIRE(spec.is_soft(), "kNN weights are not differentiable; train with dot or gaussian");
    spec.validate(keys.rows());
    Var logits;
    if (spec.kind == KernelKind::dot) {
        logits = kicl::ops::scale(kicl::ops::matmul(queries, kicl::ops::transpose(keys)), spec.scale);
    } else {
        logits = kicl::ops::scale(kicl::ops::sqdist(queries, keys), -spec.scale);
    }
    return kicl::ops::softmax_rows(logits);
}

Var class_probabilities(Var weights, std::span<const int> labels, std::size_t classes) {
    const std::size_t n = weights.cols();
    KICL_REQUIRE(labels.size() == n, "label count does not match weight columns");
    Tensor onehot({n, classes});
    for (std::size_t i = 0; i < n; ++i) {
        KICL_REQUIRE(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes, "label out of range");
        onehot(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return kicl::ops::matmul(weights, weights.tape->constant(std::move(onehot)));
}

Var cross_entropy(Var probs, std::span<const int> targets) {
    KICL_REQUIRE(targets.size() == probs.rows(), "target count does not match probability rows");
    std::vector<std::size_t> cols(targets.begin(), targets.end());
    Var picked = kicl::ops::select_per_row(kicl::ops::clamp(probs, 1e-7, 1.0 - 1e-7), std::move(cols));
    return kicl::ops::scale(kicl::ops::mean(kicl::ops::log(picked)), -1.0);
}

}  // namespace ops
}  // namespace kicl
