#include "kicl/priorgen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "kicl/error.hpp"

namespace kicl {

void Dataset::validate(std::size_t classes) const {
    KICL_REQUIRE(n() >= 1, "dataset '" + source + "' has no training samples");
    KICL_REQUIRE(features_train.rank() == 2 && features_train.rows() == n(),
                 "dataset '" + source + "': training features do not match labels");
    KICL_REQUIRE(features_test.rank() == 2 && features_test.rows() == m(),
                 "dataset '" + source + "': test features do not match labels");
    KICL_REQUIRE(m() == 0 || features_test.cols() == d(), "dataset '" + source + "': feature counts differ");
    KICL_REQUIRE(features_train.all_finite() && features_test.all_finite(),
                 "dataset '" + source + "' contains non-finite features");
    std::vector<std::size_t> counts(classes, 0);
    for (const auto* labels : {&labels_train, &labels_test})
        for (int y : *labels) {
            KICL_REQUIRE(y >= 0 && static_cast<std::size_t>(y) < classes,
                         "dataset '" + source + "': label " + std::to_string(y) + " out of range");
        }
    for (int y : labels_train) ++counts[static_cast<std::size_t>(y)];
    if (classes == 2)
        KICL_REQUIRE(counts[0] > 0 && counts[1] > 0,
                     "dataset '" + source + "': training split is missing a class");
}

std::size_t class_count(const std::vector<int>& labels) {
    if (labels.empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

SplitIndices stratified_split(const std::vector<int>& labels, double fraction, std::uint64_t seed) {
    const std::size_t total = labels.size();
    KICL_REQUIRE(fraction > 0.0 && fraction < 1.0, "split fraction must lie in (0, 1)");
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
    KICL_REQUIRE(n_train >= 1 && n_train < total,
                 "split of " + std::to_string(total) + " rows at " + std::to_string(fraction) +
                     " leaves an empty side");
    for (int y : labels) KICL_REQUIRE(y >= 0, "labels must be nonnegative");

    const std::size_t classes = class_count(labels);
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < total; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);

    // Largest-remainder allocation of training slots per class.
    std::vector<std::size_t> quota(classes);
    std::vector<double> remainder(classes);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double exact = static_cast<double>(members[c].size()) * static_cast<double>(n_train) /
                             static_cast<double>(total);
        quota[c] = static_cast<std::size_t>(std::floor(exact));
        remainder[c] = exact - static_cast<double>(quota[c]);
        assigned += quota[c];
    }
    std::vector<std::size_t> order(classes);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t r = 0; assigned < n_train; r = (r + 1) % classes) {
        const std::size_t c = order[r];
        if (quota[c] < members[c].size()) {
            ++quota[c];
            ++assigned;
        }
    }

    std::mt19937_64 rng(seed);
    SplitIndices out;
    for (std::size_t c = 0; c < classes; ++c) {
        auto idx = members[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(quota[c]));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(quota[c]), idx.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

Dataset make_split_dataset(const Tensor& features, const std::vector<int>& labels, const SplitIndices& split,
                           std::string source) {
    KICL_REQUIRE(features.rank() == 2 && features.rows() == labels.size(), "features and labels disagree in length");
    const std::size_t d = features.cols();
    auto take = [&](const std::vector<std::size_t>& idx, Tensor& x, std::vector<int>& y) {
        x = Tensor({idx.size(), d});
        for (std::size_t r = 0; r < idx.size(); ++r) {
            KICL_REQUIRE(idx[r] < labels.size(), "split index out of range");
            std::copy_n(features.ptr() + idx[r] * d, d, x.ptr() + r * d);
            y.push_back(labels[idx[r]]);
        }
    };
    Dataset ds;
    take(split.train, ds.features_train, ds.labels_train);
    take(split.test, ds.features_test, ds.labels_test);
    ds.source = std::move(source);
    return ds;
}

}  // namespace kicl
