#include "kicl/evaluation/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kicl/error.hpp"

namespace kicl {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string where(const std::filesystem::path& path, std::size_t row, const std::string& column) {
    return path.string() + ": line " + std::to_string(row) + ", column '" + column + "'";
}

}  // namespace

LabeledTable load_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError(path.string() + ": missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);

    std::ptrdiff_t label_at = -1, split_at = -1;
    std::vector<std::size_t> feature_at;
    LabeledTable t;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == label_column) {
            label_at = static_cast<std::ptrdiff_t>(c);
        } else if (header[c] == "split") {
            split_at = static_cast<std::ptrdiff_t>(c);
        } else {
            feature_at.push_back(c);
            t.feature_names.push_back(header[c]);
        }
    }
    if (label_at < 0) throw IoError(path.string() + ": no label column named '" + label_column + "'");
    if (feature_at.empty()) throw IoError(path.string() + ": no feature columns");

    std::vector<double> values;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw IoError(path.string() + ": line " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                          " cells, header has " + std::to_string(header.size()));
        for (auto c : feature_at) {
            const auto& s = cells[c];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
                throw IoError(where(path, row, header[c]) + ": '" + s + "' is not a finite number");
            values.push_back(v);
        }
        const auto& ls = cells[static_cast<std::size_t>(label_at)];
        int y = -1;
        const auto [ptr, ec] = std::from_chars(ls.data(), ls.data() + ls.size(), y);
        if (ls.empty() || ec != std::errc() || ptr != ls.data() + ls.size() || y < 0)
            throw IoError(where(path, row, label_column) + ": '" + ls + "' is not a nonnegative integer label");
        t.labels.push_back(y);
        if (split_at >= 0) {
            const auto& ss = cells[static_cast<std::size_t>(split_at)];
            if (ss == "train")
                t.split.push_back(0);
            else if (ss == "test")
                t.split.push_back(1);
            else
                throw IoError(where(path, row, "split") + ": expected 'train' or 'test', got '" + ss + "'");
        }
    }
    if (t.labels.empty()) throw IoError(path.string() + ": no data rows");
    t.features = Tensor({t.labels.size(), feature_at.size()}, std::move(values));
    t.source = path.string();
    const std::set<int> distinct(t.labels.begin(), t.labels.end());
    KICL_REQUIRE(distinct.size() >= 2, path.string() + ": only one class present");
    return t;
}

Dataset split(const LabeledTable& t, double fraction, std::uint64_t seed) {
    SplitIndices s;
    if (!t.split.empty()) {
        for (std::size_t i = 0; i < t.split.size(); ++i) (t.split[i] == 0 ? s.train : s.test).push_back(i);
        KICL_REQUIRE(!s.train.empty() && !s.test.empty(), t.source + ": split column leaves an empty side");
    } else {
        s = stratified_split(t.labels, fraction, seed);
    }
    return make_split_dataset(t.features, t.labels, s, t.source);
}

std::vector<std::string> default_feature_names(std::size_t d) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < d; ++c) names.push_back("x" + std::to_string(c));
    return names;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds, const std::vector<std::string>& names_in) {
    const std::size_t d = ds.d();
    const auto names = names_in.empty() ? default_feature_names(d) : names_in;
    KICL_REQUIRE(names.size() == d, "feature name count does not match the dataset");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& n : names) out << n << ',';
    out << "label,split\n";
    char buf[64];
    auto put = [&](double v) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        out.write(buf, ptr - buf);
    };
    auto rows = [&](const Tensor& x, const std::vector<int>& y, const char* tag) {
        for (std::size_t r = 0; r < y.size(); ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                put(x(r, c));
                out << ',';
            }
            out << y[r] << ',' << tag << '\n';
        }
    };
    rows(ds.features_train, ds.labels_train, "train");
    rows(ds.features_test, ds.labels_test, "test");
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace kicl
