#include <algorithm>
#include <fstream>
#include <numeric>

#include "kicl/error.hpp"
#include "kicl/kernels/kernels.hpp"

namespace kicl {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.precision(17);
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

void write_weights_csv(const std::filesystem::path& path, const WeightMatrix& wm, std::size_t top) {
    const std::size_t n = wm.context();
    const std::size_t keep = top == 0 ? n : std::min(top, n);
    auto out = open_output(path);
    out << "test_index,train_index,weight,rank\n";
    std::vector<std::size_t> order(n);
    for (std::size_t j = 0; j < wm.queries(); ++j) {
        const auto w = wm.row(j);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
        for (std::size_t r = 0; r < keep; ++r)
            out << j << ',' << order[r] << ',' << w[order[r]] << ',' << r + 1 << '\n';
    }
    finish(out, path);
}

void write_perplexity_csv(const std::filesystem::path& path, const PredictionReport& report) {
    auto out = open_output(path);
    out << "test_index,perplexity,relative_perplexity,predicted\n";
    for (std::size_t j = 0; j < report.perplexity.size(); ++j)
        out << j << ',' << report.perplexity[j] << ',' << report.relative.per_point[j] << ','
            << report.predicted[j] << '\n';
    finish(out, path);
}

}  // namespace kicl
