#include "kicl/evaluation/sweep.hpp"

#include <cmath>
#include <fstream>

#include "kicl/calibration/calibrate.hpp"
#include "kicl/error.hpp"

namespace kicl {

std::vector<SweepMeasurement> measure_ladder(const Embedder& embedder, const Dataset& ds, KernelKind kind,
                                             const std::vector<double>& ladder, std::size_t classes) {
    KICL_REQUIRE(!ladder.empty(), "sweep ladder is empty");
    KICL_REQUIRE(ds.m() >= 1, "sweep needs test points");
    const auto space = embedder.embed(ds.features_train, ds.labels_train, ds.features_test);
    std::vector<SweepMeasurement> out;
    for (double s : ladder) {
        const KernelSpec spec{kind, s};
        spec.validate(ds.n());
        const auto report = make_report(kernel_weights(spec, space.queries, space.keys), ds.labels_train, classes);
        out.push_back({s, report.relative.dataset, accuracy(report.predicted, ds.labels_test)});
    }
    return out;
}

std::vector<SweepPoint> select_targets(const std::vector<SweepMeasurement>& measured,
                                       const std::vector<double>& targets) {
    KICL_REQUIRE(!targets.empty(), "sweep needs at least one target");
    std::vector<SweepPoint> out;
    for (double t : targets) {
        SweepPoint p;
        p.target = t;
        for (const auto& m : measured) {
            if (m.achieved > t) continue;
            if (!p.attained || m.achieved > p.achieved) {
                p.attained = true;
                p.achieved = m.achieved;
                p.scale = m.scale;
                p.accuracy = m.accuracy;
            }
        }
        out.push_back(p);
    }
    return out;
}

std::vector<SweepPoint> tradeoff_sweep(const Embedder& embedder, const Dataset& ds, KernelKind kind,
                                       const std::vector<double>& ladder, const std::vector<double>& targets,
                                       std::size_t classes) {
    return select_targets(measure_ladder(embedder, ds, kind, ladder, classes), targets);
}

std::vector<double> default_ladder(KernelKind kind, std::size_t n) {
    std::vector<double> out;
    if (kind == KernelKind::knn) {
        for (std::size_t k = 1; k <= n; ++k) out.push_back(static_cast<double>(k));
        return out;
    }
    out.push_back(1e-12);
    for (int e = -24; e <= 12; ++e) out.push_back(std::pow(10.0, e / 4.0));
    return out;
}

std::vector<double> default_targets() {
    std::vector<double> out;
    for (int e = -12; e <= 0; ++e) out.push_back(std::pow(10.0, e / 4.0));
    out.back() = 1.0;
    return out;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepPoint>& points) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.precision(17);
    out << "target,achieved,scale,accuracy\n";
    for (const auto& p : points) {
        out << p.target << ',';
        if (p.attained) out << p.achieved << ',' << p.scale << ',' << p.accuracy;
        else out << ",,";
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace kicl
