#include "kicl/evaluation/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>

#include "kicl/error.hpp"

namespace kicl {

Prediction predict_dataset(const MethodSpec& method, const Dataset& ds) {
    KICL_REQUIRE(method.embedder != nullptr, "method '" + method.name + "' has no embedder");
    KICL_REQUIRE(ds.m() >= 1, "dataset '" + ds.source + "' has no test points");
    ds.validate(method.classes);
    const auto space = method.embedder->embed(ds.features_train, ds.labels_train, ds.features_test);

    KernelSpec spec;
    if (method.calibrate) {
        const auto grid = method.grid.value_or(default_grid(method.kernel));
        KICL_REQUIRE(grid.kind == method.kernel, "calibration grid kind does not match the method kernel");
        CalibrationOptions opt;
        opt.folds = method.folds;
        opt.seed = method.seed;
        opt.classes = method.classes;
        spec = calibrate(*method.embedder, ds.features_train, ds.labels_train, grid, opt).chosen;
    } else if (method.scale) {
        spec = KernelSpec{method.kernel, *method.scale};
    } else {
        spec = KernelSpec::default_for(method.kernel, space.keys.cols());
    }
    spec.validate(ds.n());
    return {make_report(kernel_weights(spec, space.queries, space.keys), ds.labels_train, method.classes), spec};
}

MethodResult evaluate(const MethodSpec& method, const Dataset& ds) {
    const auto start = std::chrono::steady_clock::now();
    const auto p = predict_dataset(method, ds);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {method.name, ds.source, accuracy(p.report.predicted, ds.labels_test), p.report.relative.dataset, seconds,
            p.kernel};
}

void write_results_csv(const std::filesystem::path& path, const std::vector<MethodResult>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.precision(17);
    out << "method,dataset,accuracy,rel_perplexity,seconds\n";
    for (const auto& r : rows)
        out << r.method << ',' << r.dataset << ',' << r.accuracy << ',' << r.rel_perplexity << ',' << r.seconds << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

RankSummary mean_rank(const std::vector<MethodResult>& rows) {
    std::set<std::string> methods, datasets;
    std::map<std::pair<std::string, std::string>, double> acc;
    for (const auto& r : rows) {
        methods.insert(r.method);
        datasets.insert(r.dataset);
        KICL_REQUIRE(acc.emplace(std::pair{r.method, r.dataset}, r.accuracy).second,
                     "duplicate result for (" + r.method + ", " + r.dataset + ")");
    }
    KICL_REQUIRE(!methods.empty(), "mean rank over an empty result table");
    RankSummary out;
    out.methods.assign(methods.begin(), methods.end());
    out.mean_rank.assign(methods.size(), 0.0);
    out.mean_accuracy.assign(methods.size(), 0.0);
    for (const auto& ds : datasets) {
        std::vector<double> a;
        for (const auto& m : out.methods) {
            auto it = acc.find({m, ds});
            KICL_REQUIRE(it != acc.end(), "missing result for (" + m + ", " + ds + ")");
            a.push_back(it->second);
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            std::size_t better = 0, equal = 0;
            for (double v : a) {
                better += v > a[i] ? 1 : 0;
                equal += v == a[i] ? 1 : 0;
            }
            // Positions better+1 .. better+equal share their average.
            out.mean_rank[i] += static_cast<double>(better) + (static_cast<double>(equal) + 1.0) / 2.0;
            out.mean_accuracy[i] += a[i];
        }
    }
    for (std::size_t i = 0; i < out.methods.size(); ++i) {
        out.mean_rank[i] /= static_cast<double>(datasets.size());
        out.mean_accuracy[i] /= static_cast<double>(datasets.size());
    }
    return out;
}

}  // namespace kicl
