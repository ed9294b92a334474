#include "kicl/backbone/backbone.hpp"

#include <cmath>
#include <numeric>

#include "kicl/error.hpp"
#include "kicl/numerics/ops.hpp"

namespace kicl {

Standardized standardize(const Tensor& train, const Tensor& test) {
    KICL_REQUIRE(train.rank() == 2 && test.rank() == 2, "features must be rank-2");
    KICL_REQUIRE(train.rows() >= 1, "standardization needs at least one training sample");
    KICL_REQUIRE(train.cols() == test.cols() || test.rows() == 0,
                 "train and test feature counts differ");
    KICL_REQUIRE(train.all_finite() && test.all_finite(), "non-finite feature values are not supported");
    const std::size_t n = train.rows(), d = train.cols();
    Standardized out{Tensor({n, d}), Tensor({test.rows(), d})};
    for (std::size_t c = 0; c < d; ++c) {
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += train(i, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (train(i, c) - mu) * (train(i, c) - mu);
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mu)));
        for (std::size_t i = 0; i < n; ++i) out.train(i, c) = constant ? 0.0 : (train(i, c) - mu) / sd;
        for (std::size_t i = 0; i < test.rows(); ++i)
            out.test(i, c) = constant ? 0.0 : (test(i, c) - mu) / sd;
    }
    return out;
}

namespace {

Var norm(const BoundParameters& p, Var x, const std::string& prefix) {
    return ops::layer_norm(x, p[prefix + ".g"], p[prefix + ".b"]);
}

Var feed_forward(const BoundParameters& p, Var x, const std::string& prefix) {
    Var h = ops::add_bias(ops::matmul(norm(p, x, prefix + ".ln_ff"), p[prefix + ".ff1.w"]), p[prefix + ".ff1.b"]);
    h = ops::gelu(h);
    h = ops::add_bias(ops::matmul(h, p[prefix + ".ff2.w"]), p[prefix + ".ff2.b"]);
    return ops::add(x, h);
}

Var attend(const BoundParameters& p, Var q_in, Var kv_in, const std::string& prefix, std::size_t groups) {
    Var q = ops::matmul(q_in, p[prefix + ".wq"]);
    Var k = ops::matmul(kv_in, p[prefix + ".wk"]);
    Var v = ops::matmul(kv_in, p[prefix + ".wv"]);
    Var a = ops::attention(q, k, v, {groups, p.hyper().heads});
    return ops::matmul(a, p[prefix + ".wo"]);
}

// Pre-norm block where queries and keys come from different streams.
Var cross_block(const BoundParameters& p, Var q, Var kv, const std::string& prefix, std::size_t groups) {
    Var qn = norm(p, q, prefix + ".ln_q");
    Var kvn = norm(p, kv, prefix + ".ln_kv");
    Var x = ops::add(q, attend(p, qn, kvn, prefix, groups));
    return feed_forward(p, x, prefix);
}

// Pre-norm block over one stream; keys/values are the rows [0, kv_rows) of
// each group. kv_rows == 0 means all rows.
Var self_block(const BoundParameters& p, Var x, const std::string& prefix, std::size_t groups,
               std::size_t kv_rows = 0) {
    Var xn = norm(p, x, prefix + ".ln_q");
    Var kv = kv_rows == 0 ? xn : ops::slice_rows(xn, 0, kv_rows);
    Var y = ops::add(x, attend(p, xn, kv, prefix, groups));
    return feed_forward(p, y, prefix);
}

void check_labels(std::span<const int> labels, std::size_t classes) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        KICL_REQUIRE(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes,
                     "label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                         " outside 0.." + std::to_string(classes - 1));
}

}  // namespace

Tensor ColumnEmbeddings::train() const {
    const Tensor& t = tokens.value();
    const std::size_t w = t.cols(), total = n + m;
    Tensor out({n, d, w});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t c = 0; c < d; ++c)
            std::copy_n(t.ptr() + (c * total + s) * w, w, out.ptr() + (s * d + c) * w);
    return out;
}

Tensor ColumnEmbeddings::test() const {
    const Tensor& t = tokens.value();
    const std::size_t w = t.cols(), total = n + m;
    Tensor out({m, d, w});
    for (std::size_t s = 0; s < m; ++s)
        for (std::size_t c = 0; c < d; ++c)
            std::copy_n(t.ptr() + (c * total + n + s) * w, w, out.ptr() + (s * d + c) * w);
    return out;
}

Var RowEmbeddings::train() const { return ops::slice_rows(all, 0, n); }
Var RowEmbeddings::test() const { return ops::slice_rows(all, n, n + m); }

ColumnEmbeddings embed_columns(const BoundParameters& p, const Tensor& x_train, const Tensor& x_test) {
    KICL_REQUIRE(x_train.rank() == 2 && x_test.rank() == 2, "features must be rank-2");
    const std::size_t n = x_train.rows(), m = x_test.rows(), d = x_train.cols();
    KICL_REQUIRE(n >= 1, "column embedding needs at least one training sample");
    KICL_REQUIRE(d >= 1, "column embedding needs at least one feature");
    KICL_REQUIRE(m == 0 || x_test.cols() == d, "train and test feature counts differ");
    const auto& hp = p.hyper();
    const std::size_t total = n + m, inducing = hp.inducing;
    Tape& tape = p.tape();

    Tensor values({d * total, 1});
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t s = 0; s < n; ++s) values[c * total + s] = x_train(s, c);
        for (std::size_t s = 0; s < m; ++s) values[c * total + n + s] = x_test(s, c);
    }
    Var e = ops::add_bias(ops::matmul(tape.constant(std::move(values)), p["col.embed.w"]), p["col.embed.b"]);

    std::vector<std::size_t> train_rows;
    train_rows.reserve(d * n);
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t s = 0; s < n; ++s) train_rows.push_back(c * total + s);
    std::vector<std::size_t> tile;
    tile.reserve(d * inducing);
    for (std::size_t c = 0; c < d; ++c)
        for (std::size_t i = 0; i < inducing; ++i) tile.push_back(i);

    for (std::size_t l = 0; l < hp.col_layers; ++l) {
        const auto prefix = "col." + std::to_string(l);
        Var ind = ops::gather_rows(p[prefix + ".inducing"], tile);
        // Summaries see training samples only.
        Var summaries = cross_block(p, ind, ops::gather_rows(e, train_rows), prefix + ".ind", d);
        e = cross_block(p, e, summaries, prefix + ".out", d);
    }
    e = norm(p, e, "col.norm");
    return ColumnEmbeddings{e, n, m, d};
}

Tensor feature_position_codes(std::size_t features, std::size_t width) {
    Tensor pe({features, width});
    for (std::size_t j = 0; j < features; ++j) {
        const double pos = static_cast<double>(j + 1);
        for (std::size_t i = 0; i < width; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
            pe(j, i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
        }
    }
    return pe;
}

RowEmbeddings embed_rows(const BoundParameters& p, const ColumnEmbeddings& cols) {
    const auto& hp = p.hyper();
    const std::size_t total = cols.n + cols.m, d = cols.d, w = hp.width, len = d + 1;
    KICL_REQUIRE(cols.tokens.cols() == w, "column embeddings do not match model width");
    KICL_REQUIRE(cols.tokens.rows() == d * total, "column embeddings have an unexpected row count");
    Tape& tape = p.tape();

    const Var parts[] = {cols.tokens, p["row.cls"]};
    Var pool = ops::concat_rows(parts);
    std::vector<std::size_t> order;
    order.reserve(total * len);
    for (std::size_t s = 0; s < total; ++s) {
        order.push_back(d * total);  // pooling token
        for (std::size_t c = 0; c < d; ++c) order.push_back(c * total + s);
    }
    Var x = ops::gather_rows(pool, std::move(order));

    const Tensor pe = feature_position_codes(d, w);
    Tensor codes({total * len, w});
    for (std::size_t s = 0; s < total; ++s)
        for (std::size_t c = 0; c < d; ++c) std::copy_n(pe.ptr() + c * w, w, codes.ptr() + (s * len + c + 1) * w);
    x = ops::add(x, tape.constant(std::move(codes)));

    for (std::size_t l = 0; l < hp.row_layers; ++l) x = self_block(p, x, "row." + std::to_string(l), total);

    std::vector<std::size_t> cls_rows(total);
    for (std::size_t s = 0; s < total; ++s) cls_rows[s] = s * len;
    Var pooled = norm(p, ops::gather_rows(x, std::move(cls_rows)), "row.norm");
    return RowEmbeddings{pooled, cols.n, cols.m};
}

Var encode_labels(const BoundParameters& p, std::span<const int> labels) {
    check_labels(labels, p.hyper().classes);
    std::vector<std::size_t> idx(labels.begin(), labels.end());
    return ops::gather_rows(p["label.table"], std::move(idx));
}

namespace {

Var run_icl(const BoundParameters& p, Var x, std::size_t context) {
    for (std::size_t l = 0; l < p.hyper().icl_layers; ++l) x = self_block(p, x, "icl." + std::to_string(l), 1, context);
    return norm(p, x, "icl.norm");
}

}  // namespace

IclEmbeddings embed_icl_asymmetric(const BoundParameters& p, const RowEmbeddings& rows, std::span<const int> labels) {
    const std::size_t n = rows.n, m = rows.m;
    KICL_REQUIRE(n >= 1, "in-context stage needs at least one context sample");
    KICL_REQUIRE(labels.size() == n, "label count does not match the context size");
    Var context = ops::add(rows.train(), encode_labels(p, labels));
    const Var parts[] = {context, rows.test()};
    Var x = run_icl(p, ops::concat_rows(parts), n);
    return IclEmbeddings{ops::slice_rows(x, 0, n), ops::slice_rows(x, n, n + m)};
}

IclEmbeddings embed_icl_symmetric(const BoundParameters& p, const RowEmbeddings& rows, std::span<const int> labels) {
    const std::size_t n = rows.n, m = rows.m;
    KICL_REQUIRE(n >= 1, "in-context stage needs at least one context sample");
    KICL_REQUIRE(labels.size() == n, "label count does not match the context size");
    Var train = rows.train();
    Var context = ops::add(train, encode_labels(p, labels));
    // Training samples re-enter as label-free queries next to the test rows.
    const Var parts[] = {context, train, rows.test()};
    Var x = run_icl(p, ops::concat_rows(parts), n);
    return IclEmbeddings{ops::slice_rows(x, n, 2 * n), ops::slice_rows(x, 2 * n, 2 * n + m)};
}

IclEmbeddings embed_icl(const BoundParameters& p, const RowEmbeddings& rows, std::span<const int> labels,
                        EmbeddingMode mode) {
    return mode == EmbeddingMode::symmetric ? embed_icl_symmetric(p, rows, labels)
                                            : embed_icl_asymmetric(p, rows, labels);
}

Var project(const BoundParameters& p, Var embeddings, ProjectionRole role, EmbeddingMode mode) {
    const auto& hp = p.hyper();
    KICL_REQUIRE(embeddings.cols() == hp.width, "projection input width " + std::to_string(embeddings.cols()) +
                                                    " does not match model width " + std::to_string(hp.width));
    const bool separate = role == ProjectionRole::query && mode == EmbeddingMode::asymmetric &&
                          hp.mode == EmbeddingMode::asymmetric;
    Var out = ops::matmul(embeddings, p[separate ? "proj.query" : "proj.key"]);
    return hp.unit_norm ? ops::row_normalize(out) : out;
}

ForwardPass forward(const BoundParameters& p, const Tensor& x_train, std::span<const int> y_train,
                    const Tensor& x_test, EmbeddingMode mode) {
    KICL_REQUIRE(y_train.size() == x_train.rows(), "label count does not match training rows");
    const auto z = standardize(x_train, x_test.rows() == 0 ? Tensor({0, x_train.cols()}) : x_test);
    ForwardPass f;
    f.columns = embed_columns(p, z.train, z.test);
    f.rows = embed_rows(p, f.columns);
    f.icl = embed_icl(p, f.rows, y_train, mode);
    f.keys = project(p, f.icl.train, ProjectionRole::key, mode);
    f.queries = project(p, f.icl.test, ProjectionRole::query, mode);
    return f;
}

EmbeddingBundle embed(const ModelParameters& params, const Tensor& x_train, std::span<const int> y_train,
                      const Tensor& x_test, EmbeddingMode mode) {
    Tape tape;
    BoundParameters p(tape, params, false);
    const auto f = forward(p, x_train, y_train, x_test, mode);
    EmbeddingBundle b;
    b.mode = mode;
    b.col_train = f.columns.train();
    b.col_test = f.columns.test();
    b.row_train = f.rows.train().value();
    b.row_test = f.rows.test().value();
    b.icl_train = f.icl.train.value();
    b.icl_test = f.icl.test.value();
    b.keys = f.keys.value();
    b.queries = f.queries.value();
    return b;
}

}  // namespace kicl
