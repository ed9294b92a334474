#include "kicl/priorgen/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "kicl/error.hpp"

namespace kicl {

void PriorConfig::validate() const {
    KICL_REQUIRE(d_min >= 1 && d_min <= d_max, "prior feature range must satisfy 1 <= d_min <= d_max");
    KICL_REQUIRE(train_min > 0.0 && train_min <= train_max && train_max < 1.0,
                 "prior train fraction range must satisfy 0 < min <= max < 1");
    KICL_REQUIRE(min_samples >= 4 && min_samples <= max_samples, "prior sample range must satisfy 4 <= min <= max");
    KICL_REQUIRE(datasets_per_batch >= 1, "prior needs at least one dataset per batch");
    KICL_REQUIRE(classes >= 2, "prior needs at least two classes");
    KICL_REQUIRE(irrelevant_probability >= 0.0 && irrelevant_probability <= 1.0,
                 "irrelevant-feature probability must lie in [0, 1]");
}

PriorConfig PriorConfig::paper_scale() {
    PriorConfig c;
    c.d_min = 5;
    c.d_max = 100;
    c.min_samples = 64;
    c.max_samples = 1024;
    c.datasets_per_batch = 64;
    return c;
}

namespace {

constexpr int kMaxRetries = 32;
constexpr double kMinorityFloor = 0.1;

std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Rows drawn from a mixture of 1-4 Gaussians with random means and full
// covariances (x = mu + A z).
Tensor sample_inputs(std::mt19937_64& rng, std::size_t rows, std::size_t d) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t components = uniform_int(rng, 1, 4);
    std::vector<std::vector<double>> means(components, std::vector<double>(d));
    std::vector<std::vector<double>> mix(components, std::vector<double>(d * d));
    for (std::size_t k = 0; k < components; ++k) {
        const double spread = uniform_real(rng, 0.5, 2.0);
        for (auto& v : means[k]) v = spread * normal(rng);
        const double scale = uniform_real(rng, 0.3, 1.5) / std::sqrt(static_cast<double>(d));
        for (auto& v : mix[k]) v = scale * normal(rng);
        for (std::size_t i = 0; i < d; ++i) mix[k][i * d + i] += uniform_real(rng, 0.2, 1.0);
    }
    std::vector<double> weights(components);
    for (auto& w : weights) w = uniform_real(rng, 0.2, 1.0);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

    Tensor x({rows, d});
    std::vector<double> z(d);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t k = pick(rng);
        for (auto& v : z) v = normal(rng);
        for (std::size_t i = 0; i < d; ++i) {
            double s = means[k][i];
            for (std::size_t j = 0; j < d; ++j) s += mix[k][i * d + j] * z[j];
            x(r, i) = s;
        }
    }
    return x;
}

// Random MLP with 1-3 hidden layers of width 4-32. Only the columns in
// `relevant` feed the first layer. Returns `outputs` scores per row.
Tensor random_mlp_scores(std::mt19937_64& rng, const Tensor& x, const std::vector<std::size_t>& relevant,
                         std::size_t outputs) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t layers = uniform_int(rng, 1, 3);
    const bool use_tanh = uniform_int(rng, 0, 1) == 0;
    std::vector<std::size_t> widths{relevant.size()};
    for (std::size_t l = 0; l < layers; ++l) widths.push_back(uniform_int(rng, 4, 32));
    widths.push_back(outputs);

    std::vector<std::vector<double>> w(widths.size() - 1), b(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const double sd = 1.0 / std::sqrt(static_cast<double>(widths[l]));
        w[l].resize(widths[l] * widths[l + 1]);
        b[l].resize(widths[l + 1]);
        for (auto& v : w[l]) v = sd * normal(rng);
        for (auto& v : b[l]) v = 0.5 * normal(rng);
    }

    Tensor out({x.rows(), outputs});
    std::vector<double> h, next;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        h.clear();
        for (auto c : relevant) h.push_back(x(r, c));
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            next.assign(widths[l + 1], 0.0);
            for (std::size_t o = 0; o < widths[l + 1]; ++o) {
                double s = b[l][o];
                for (std::size_t i = 0; i < widths[l]; ++i) s += h[i] * w[l][i * widths[l + 1] + o];
                const bool hidden = l + 2 < widths.size();
                next[o] = !hidden ? s : use_tanh ? std::tanh(s) : std::max(0.0, s);
            }
            h.swap(next);
        }
        for (std::size_t o = 0; o < outputs; ++o) out(r, o) = h[o];
    }
    return out;
}

// Binary: threshold the score at a random quantile in [0.2, 0.8].
// Multiclass: cut the first score at C-1 jittered quantiles.
std::vector<int> threshold_labels(std::mt19937_64& rng, const Tensor& scores, std::size_t classes) {
    const std::size_t rows = scores.rows();
    std::vector<double> sorted(rows);
    for (std::size_t r = 0; r < rows; ++r) sorted[r] = scores(r, 0);
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const auto idx = std::min(rows - 1, static_cast<std::size_t>(q * static_cast<double>(rows)));
        return sorted[idx];
    };
    std::vector<double> cuts;
    if (classes == 2) {
        cuts.push_back(quantile(uniform_real(rng, 0.2, 0.8)));
    } else {
        const double step = 1.0 / static_cast<double>(classes);
        for (std::size_t c = 1; c < classes; ++c)
            cuts.push_back(quantile(static_cast<double>(c) * step + uniform_real(rng, -0.3, 0.3) * step));
    }
    std::vector<int> labels(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double s = scores(r, 0);
        labels[r] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), s) - cuts.begin());
    }
    return labels;
}

bool balanced(const std::vector<int>& labels, std::size_t n, std::size_t classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(labels[i])];
    const auto floor = kMinorityFloor * static_cast<double>(n);
    return std::all_of(counts.begin(), counts.end(), [&](std::size_t c) { return c > 0 && static_cast<double>(c) >= floor; });
}

std::vector<std::size_t> choose_relevant(std::mt19937_64& rng, const PriorConfig& cfg, std::size_t d) {
    std::vector<std::size_t> all(d);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (d == 1 || uniform_real(rng, 0.0, 1.0) >= cfg.irrelevant_probability) return all;
    const std::size_t keep = uniform_int(rng, 1, std::min<std::size_t>(d - 1, 4));
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(keep);
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace

Dataset sample_prior_dataset(const PriorConfig& cfg, std::uint64_t batch_index, std::size_t dataset_index) {
    cfg.validate();
    for (int retry = 0; retry < kMaxRetries; ++retry) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(batch_index), static_cast<std::uint32_t>(batch_index >> 32),
                          static_cast<std::uint32_t>(dataset_index), static_cast<std::uint32_t>(retry)};
        std::mt19937_64 rng(seq);
        const std::size_t d = uniform_int(rng, cfg.d_min, cfg.d_max);
        const std::size_t total = uniform_int(rng, cfg.min_samples, cfg.max_samples);
        const double fraction = uniform_real(rng, cfg.train_min, cfg.train_max);
        const std::size_t n = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total))), 2, total - 1);

        Tensor x = sample_inputs(rng, total, d);
        const auto relevant = choose_relevant(rng, cfg, d);
        const Tensor scores = random_mlp_scores(rng, x, relevant, 1);
        const auto labels = threshold_labels(rng, scores, cfg.classes);
        if (!balanced(labels, n, cfg.classes)) continue;

        SplitIndices split;
        for (std::size_t i = 0; i < total; ++i) (i < n ? split.train : split.test).push_back(i);
        Dataset ds = make_split_dataset(x, labels, split,
                                        "prior:" + std::to_string(batch_index) + ":" + std::to_string(dataset_index));
        ds.validate(cfg.classes);
        return ds;
    }
    throw ContractViolation("prior draw (seed " + std::to_string(cfg.seed) + ", batch " + std::to_string(batch_index) +
                            ", dataset " + std::to_string(dataset_index) + ") stayed unbalanced after " +
                            std::to_string(kMaxRetries) + " retries");
}

std::vector<Dataset> sample_prior_batch(const PriorConfig& cfg, std::uint64_t batch_index) {
    cfg.validate();
    std::vector<Dataset> out;
    out.reserve(cfg.datasets_per_batch);
    for (std::size_t i = 0; i < cfg.datasets_per_batch; ++i) out.push_back(sample_prior_dataset(cfg, batch_index, i));
    return out;
}

std::string to_string(ToyKind kind) {
    switch (kind) {
        case ToyKind::moons: return "moons";
        case ToyKind::circles: return "circles";
        case ToyKind::linear: return "linear";
    }
    return "?";
}

ToyKind parse_toy_kind(const std::string& s) {
    if (s == "moons") return ToyKind::moons;
    if (s == "circles") return ToyKind::circles;
    if (s == "linear") return ToyKind::linear;
    throw ContractViolation("unknown toy kind '" + s + "' (expected moons|circles|linear)");
}

Dataset generate_toy(const ToyConfig& cfg) {
    KICL_REQUIRE(cfg.n_total >= 10, "toy datasets need at least 10 samples");
    KICL_REQUIRE(cfg.noise_std >= 0.0 && cfg.signal_noise >= 0.0, "noise levels must be nonnegative");
    KICL_REQUIRE(cfg.circle_factor > 0.0 && cfg.circle_factor < 1.0, "circle factor must lie in (0, 1)");
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t total = cfg.n_total, d = 2 + cfg.noise_features;
    const std::size_t first = total / 2;  // class 0 gets the smaller half on odd totals
    Tensor x({total, d});
    std::vector<int> y(total);
    constexpr double pi = std::numbers::pi;

    for (std::size_t i = 0; i < total; ++i) {
        const int label = i < first ? 0 : 1;
        const std::size_t pos = label == 0 ? i : i - first;
        const std::size_t count = label == 0 ? first : total - first;
        const double t = count > 1 ? static_cast<double>(pos) / static_cast<double>(count - 1) : 0.0;
        double a = 0.0, b = 0.0;
        switch (cfg.kind) {
            case ToyKind::moons:
                if (label == 0) {
                    a = std::cos(pi * t);
                    b = std::sin(pi * t);
                } else {
                    a = 1.0 - std::cos(pi * t);
                    b = 0.5 - std::sin(pi * t);
                }
                break;
            case ToyKind::circles: {
                const double angle = 2.0 * pi * static_cast<double>(pos) / static_cast<double>(count);
                const double radius = label == 0 ? 1.0 : cfg.circle_factor;
                a = radius * std::cos(angle);
                b = radius * std::sin(angle);
                break;
            }
            case ToyKind::linear: {
                const double offset = (label == 0 ? -0.5 : 0.5) * cfg.separation / std::numbers::sqrt2;
                a = offset + normal(rng);
                b = offset + normal(rng);
                break;
            }
        }
        if (cfg.kind != ToyKind::linear) {
            a += cfg.signal_noise * normal(rng);
            b += cfg.signal_noise * normal(rng);
        }
        x(i, 0) = a;
        x(i, 1) = b;
        for (std::size_t c = 2; c < d; ++c) x(i, c) = cfg.noise_std * normal(rng);
        y[i] = label;
    }
    const auto split = stratified_split(y, cfg.train_fraction, rng());
    Dataset ds = make_split_dataset(x, y, split, "toy:" + to_string(cfg.kind) + ":" + std::to_string(cfg.seed));
    ds.validate(2);
    return ds;
}

}  // namespace kicl
