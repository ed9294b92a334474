#include "kicl/evaluation/compactness.hpp"

#include <cmath>
#include <fstream>

#include "kicl/backbone/backbone.hpp"
#include "kicl/error.hpp"
#include "kicl/kernels/kernels.hpp"

namespace kicl {

std::vector<double> feature_compactness(const Embedder& embedder, const Dataset& ds, std::size_t k) {
    return feature_compactness(embedder.embed(ds.features_train, ds.labels_train, ds.features_test), ds, k);
}

std::vector<double> feature_compactness(const KernelSpace& space, const Dataset& ds, std::size_t k) {
    KICL_REQUIRE(k >= 1 && k <= ds.n(), "compactness k=" + std::to_string(k) + " must lie in 1.." +
                                            std::to_string(ds.n()));
    KICL_REQUIRE(ds.m() >= 1, "compactness needs test points");
    KICL_REQUIRE(space.keys.rows() == ds.n() && space.queries.rows() == ds.m(),
                 "kernel space does not match the dataset");
    const auto z = standardize(ds.features_train, ds.features_test);
    const std::size_t d = ds.d();
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < ds.m(); ++j) {
        for (auto i : nearest_keys(space.queries.row(j), space.keys, k))
            for (std::size_t c = 0; c < d; ++c) out[c] += std::abs(z.test(j, c) - z.train(i, c));
    }
    const double denom = static_cast<double>(ds.m() * k);
    for (auto& v : out) v /= denom;
    return out;
}

std::vector<double> normalize_by_mean(const std::vector<double>& raw) {
    KICL_REQUIRE(!raw.empty(), "nothing to normalize");
    double mean = 0.0;
    for (double v : raw) mean += v;
    mean /= static_cast<double>(raw.size());
    KICL_REQUIRE(mean > 0.0, "compactness is zero on every feature");
    std::vector<double> out;
    for (double v : raw) out.push_back(v / mean);
    return out;
}

std::vector<CompactnessRow> compare_compactness(const std::vector<double>& baseline_raw,
                                                const std::vector<double>& method_raw,
                                                const std::vector<std::string>& names) {
    KICL_REQUIRE(baseline_raw.size() == method_raw.size() && names.size() == method_raw.size(),
                 "compactness vectors and feature names differ in length");
    const auto b = normalize_by_mean(baseline_raw);
    const auto m = normalize_by_mean(method_raw);
    std::vector<CompactnessRow> rows;
    for (std::size_t c = 0; c < b.size(); ++c)
        rows.push_back({names[c], b[c], m[c], b[c] > 0.0 ? 100.0 * (b[c] - m[c]) / b[c] : 0.0});
    return rows;
}

void write_compactness_csv(const std::filesystem::path& path, const std::vector<CompactnessRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.precision(17);
    out << "feature,baseline_norm,method_norm,rel_diff_pct\n";
    for (const auto& r : rows)
        out << r.feature << ',' << r.baseline_norm << ',' << r.method_norm << ',' << r.rel_diff_pct << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace kicl
