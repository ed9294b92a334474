#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "kicl/backbone/backbone.hpp"
#include "kicl/backbone/checkpoint.hpp"
#include "kicl/backbone/embedder.hpp"
#include "kicl/calibration/calibrate.hpp"
#include "kicl/error.hpp"
#include "kicl/evaluation/compactness.hpp"
#include "kicl/evaluation/csv.hpp"
#include "kicl/evaluation/evaluate.hpp"
#include "kicl/evaluation/overhead.hpp"
#include "kicl/evaluation/sweep.hpp"
#include "kicl/kernels/kernels.hpp"
#include "kicl/priorgen/prior.hpp"
#include "kicl/training/train.hpp"

namespace kicl::cli {

namespace {

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
    std::vector<T> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto end = std::min(s.find(',', start), s.size());
        const auto item = s.substr(start, end - start);
        try {
            std::size_t used = 0;
            if constexpr (std::is_same_v<T, double>) {
                out.push_back(std::stod(item, &used));
            } else {
                if (!item.empty() && item[0] == '-') throw std::invalid_argument(item);
                out.push_back(static_cast<T>(std::stoull(item, &used)));
            }
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ContractViolation(std::string("--") + what + ": '" + item + "' is not a valid number");
        }
        start = end + 1;
    }
    return out;
}

std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

// Options shared by the commands that read a dataset.
struct DataOptions {
    std::string data;
    std::string label = "label";
    double fraction = kDefaultTrainFraction;

    void add(CLI::App* app) {
        app->add_option("--data", data, "Input CSV (header row; optional split column)")->required();
        app->add_option("--label", label, "Label column name")->capture_default_str();
        app->add_option("--train-fraction", fraction, "Train fraction when the CSV has no split column")
            ->capture_default_str();
    }
    Dataset load(std::uint64_t seed, std::vector<std::string>* names = nullptr) const {
        const auto table = load_csv(data, label);
        if (names) *names = table.feature_names;
        return split(table, fraction, seed);
    }
};

struct ModelOptions {
    std::string model;
    std::string mode = "symmetric";

    void add(CLI::App* app, bool required) {
        auto* o = app->add_option("--model", model, required ? "Checkpoint" : "Checkpoint (omit for input space)");
        if (required) o->required();
        app->add_option("--mode", mode, "Embedding mode: symmetric|asymmetric")->capture_default_str();
    }
    std::unique_ptr<Embedder> embedder(std::ostream& err, std::optional<KernelKind> kernel = std::nullopt) const {
        const auto m = parse_embedding_mode(mode);
        if (model.empty()) return std::make_unique<InputSpaceEmbedder>();
        auto ckpt = load_checkpoint(model);
        if (kernel) {
            auto it = ckpt.annotations.find("kernel");
            const auto wanted = to_string(training_kernel_for(*kernel));
            if (it != ckpt.annotations.end() && it->second != wanted)
                err << "warning: " << to_string(*kernel) << " expects embeddings trained with " << wanted
                    << ", this checkpoint was trained with " << it->second << '\n';
        }
        return std::make_unique<ModelEmbedder>(std::move(ckpt.params), m);
    }
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.precision(17);
    return out;
}

std::string sibling(const std::string& path, const std::string& suffix) {
    std::filesystem::path p(path);
    return (p.parent_path() / (p.stem().string() + suffix + p.extension().string())).string();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"KernelICL: inspectable kernel heads on in-context tabular embeddings", "kernelicl"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train backbone and projection on the synthetic prior");
    TrainConfig tc;
    PriorConfig pc;
    std::string train_kernel = "gaussian", train_mode = "symmetric", ckpt_out, log_out;
    bool unit_norm = false, asym_model = false;
    train_cmd->add_option("--kernel", train_kernel, "Training kernel: gaussian|dot")->capture_default_str();
    train_cmd->add_option("--mode", train_mode, "Embedding mode: symmetric|asymmetric")->capture_default_str();
    train_cmd->add_option("--batches", tc.batches, "Optimizer steps")->capture_default_str();
    train_cmd->add_option("--datasets-per-batch", pc.datasets_per_batch, "Datasets per batch")->capture_default_str();
    train_cmd->add_option("--val-batches", tc.validation_batches, "Validation batches")->capture_default_str();
    train_cmd->add_option("--val-interval", tc.validation_interval, "Batches between validations")->capture_default_str();
    train_cmd->add_option("--lr", tc.adam.learning_rate, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--width", tc.model.width, "Model width")->capture_default_str();
    train_cmd->add_option("--heads", tc.model.heads, "Attention heads")->capture_default_str();
    train_cmd->add_option("--col-layers", tc.model.col_layers, "Column-stage layers")->capture_default_str();
    train_cmd->add_option("--row-layers", tc.model.row_layers, "Row-stage layers")->capture_default_str();
    train_cmd->add_option("--icl-layers", tc.model.icl_layers, "In-context layers")->capture_default_str();
    train_cmd->add_option("--inducing", tc.model.inducing, "Inducing vectors per column layer")->capture_default_str();
    train_cmd->add_option("--key-dim", tc.model.key_dim, "Kernel space dimension")->capture_default_str();
    train_cmd->add_flag("--unit-norm", unit_norm, "Normalize projected rows");
    train_cmd->add_flag("--query-projection", asym_model, "Give the model a separate query projection");
    train_cmd->add_option("--d-min", pc.d_min, "Prior: fewest features")->capture_default_str();
    train_cmd->add_option("--d-max", pc.d_max, "Prior: most features")->capture_default_str();
    train_cmd->add_option("--min-samples", pc.min_samples, "Prior: fewest samples")->capture_default_str();
    train_cmd->add_option("--max-samples", pc.max_samples, "Prior: most samples")->capture_default_str();
    train_cmd->add_option("--irrelevant", pc.irrelevant_probability, "Prior: chance of distractor features")
        ->capture_default_str();
    train_cmd->add_option("--out", ckpt_out, "Checkpoint path")->required();
    train_cmd->add_option("--log", log_out, "Training log CSV");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "Predict the test split and optionally export weights");
    DataOptions pd;
    ModelOptions pm;
    std::string p_kernel = "gaussian", p_out = "predictions.csv", p_explain, p_ppl;
    std::optional<double> p_scale;
    bool no_calibrate = false;
    std::size_t p_folds = 5, p_top = 0;
    pd.add(predict_cmd);
    pm.add(predict_cmd, false);
    predict_cmd->add_option("--kernel", p_kernel, "Kernel: gaussian|dot|knn")->capture_default_str();
    predict_cmd->add_option("--scale", p_scale, "Fixed gamma (or k for knn); skips calibration");
    predict_cmd->add_flag("--no-calibrate", no_calibrate, "Use the default scale instead of cross-validation");
    predict_cmd->add_option("--folds", p_folds, "Calibration folds")->capture_default_str();
    predict_cmd->add_option("--out", p_out, "Predictions CSV")->capture_default_str();
    predict_cmd->add_option("--explain", p_explain, "Weight export CSV (test_index,train_index,weight,rank)");
    predict_cmd->add_option("--perplexity", p_ppl, "Per-point perplexity CSV (default: <explain>_perplexity.csv)");
    predict_cmd->add_option("--top", p_top, "Weights per test point in the export (0 = all)")->capture_default_str();

    // calibrate
    auto* cal_cmd = app.add_subcommand("calibrate", "Cross-validate the kernel scale on the training split");
    DataOptions cd;
    ModelOptions cm;
    std::string c_kernel = "gaussian", c_grid, c_out;
    std::size_t c_folds = 5;
    cd.add(cal_cmd);
    cm.add(cal_cmd, false);
    cal_cmd->add_option("--kernel", c_kernel, "Kernel: gaussian|dot|knn")->capture_default_str();
    cal_cmd->add_option("--grid", c_grid, "Comma-separated candidates (default: the standard grid)");
    cal_cmd->add_option("--folds", c_folds, "Folds")->capture_default_str();
    cal_cmd->add_option("--out", c_out, "Per-candidate CSV");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Accuracy against relative perplexity on the test split");
    DataOptions sd;
    ModelOptions sm;
    std::string s_kernel = "gaussian", s_ladder, s_targets, s_out = "sweep.csv";
    sd.add(sweep_cmd);
    sm.add(sweep_cmd, false);
    sweep_cmd->add_option("--kernel", s_kernel, "Kernel: gaussian|dot|knn")->capture_default_str();
    sweep_cmd->add_option("--ladder", s_ladder, "Comma-separated scales (default: log ladder, or k=1..n)");
    sweep_cmd->add_option("--targets", s_targets, "Comma-separated relative-perplexity targets");
    sweep_cmd->add_option("--out", s_out, "Sweep CSV")->capture_default_str();

    // compactness
    auto* comp_cmd = app.add_subcommand("compactness", "Per-feature neighbourhood compactness vs input space");
    DataOptions md;
    ModelOptions mm;
    std::size_t m_k = 5;
    std::string m_out = "compactness.csv";
    md.add(comp_cmd);
    mm.add(comp_cmd, true);
    comp_cmd->add_option("--k", m_k, "Neighbours per test point")->capture_default_str();
    comp_cmd->add_option("--out", m_out, "Compactness CSV")->capture_default_str();

    // bench-overhead
    auto* bench_cmd = app.add_subcommand("bench-overhead", "Symmetric/asymmetric embedding cost ratios");
    OverheadConfig oc;
    std::string b_model, b_sizes, b_features, b_out = "overhead.csv";
    bool no_time = false;
    double budget_mb = static_cast<double>(oc.memory_budget_bytes) / (1 << 20);
    bench_cmd->add_option("--model", b_model, "Checkpoint (default: freshly initialized default model)");
    bench_cmd->add_option("--sizes", b_sizes, "Comma-separated n values (default: 1e3..2e5)");
    bench_cmd->add_option("--features", b_features, "Comma-separated d values (default: 1,5,20,100)");
    bench_cmd->add_option("--m", oc.m, "Test points")->capture_default_str();
    bench_cmd->add_option("--reps", oc.repetitions, "Timed repetitions")->capture_default_str();
    bench_cmd->add_option("--memory-budget-mb", budget_mb, "Skip timing above this footprint")->capture_default_str();
    bench_cmd->add_flag("--no-time", no_time, "Only count FLOPs");
    bench_cmd->add_option("--out", b_out, "Overhead CSV")->capture_default_str();

    // toy
    auto* toy_cmd = app.add_subcommand("toy", "Write a toy dataset with appended noise features");
    ToyConfig toy;
    std::string t_kind = "moons", t_out;
    toy_cmd->add_option("--kind", t_kind, "moons|circles|linear")->capture_default_str();
    toy_cmd->add_option("--n", toy.n_total, "Total samples")->capture_default_str();
    toy_cmd->add_option("--noise-features", toy.noise_features, "Appended Gaussian columns")->capture_default_str();
    toy_cmd->add_option("--noise-std", toy.noise_std, "Std of the appended columns")->capture_default_str();
    toy_cmd->add_option("--train-fraction", toy.train_fraction, "Train share")->capture_default_str();
    toy_cmd->add_option("--out", t_out, "Output CSV")->required();

    // export-embeddings
    auto* exp_cmd = app.add_subcommand("export-embeddings", "Dump per-sample embeddings of one stage");
    DataOptions ed;
    ModelOptions em;
    std::string e_stage = "icl", e_out;
    ed.add(exp_cmd);
    em.add(exp_cmd, true);
    exp_cmd->add_option("--stage", e_stage, "row|icl|kernel")->capture_default_str();
    exp_cmd->add_option("--out", e_out, "Output CSV")->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Accuracy, relative perplexity and time over several datasets");
    std::vector<std::string> v_data;
    std::string v_model, v_kernels = "gaussian,dot,knn", v_label = "label", v_out = "results.csv", v_mode = "symmetric";
    double v_fraction = kDefaultTrainFraction;
    bool v_no_cal = false;
    eval_cmd->add_option("--data", v_data, "Input CSVs")->required();
    eval_cmd->add_option("--model", v_model, "Checkpoint (adds KernelICL methods)");
    eval_cmd->add_option("--mode", v_mode, "Embedding mode")->capture_default_str();
    eval_cmd->add_option("--kernels", v_kernels, "Comma-separated kernels")->capture_default_str();
    eval_cmd->add_option("--label", v_label, "Label column name")->capture_default_str();
    eval_cmd->add_option("--train-fraction", v_fraction, "Train fraction")->capture_default_str();
    eval_cmd->add_flag("--no-calibrate", v_no_cal, "Default scales instead of cross-validation");
    eval_cmd->add_option("--out", v_out, "Results CSV")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    try {
        if (*train_cmd) {
            tc.kernel = parse_kernel_kind(train_kernel);
            tc.mode = parse_embedding_mode(train_mode);
            tc.model.unit_norm = unit_norm;
            tc.model.mode = (asym_model || tc.mode == EmbeddingMode::asymmetric) ? EmbeddingMode::asymmetric
                                                                                 : EmbeddingMode::symmetric;
            tc.model.classes = pc.classes;
            tc.seed = seed;
            pc.seed = seed;
            tc.checkpoint = ckpt_out;
            const auto result = train(tc, pc);
            if (!log_out.empty()) result.log.write_csv(log_out);
            const auto& best = result.log.rows[result.log.best];
            out << "trained " << tc.batches << " batches; best validation loss " << best.val_loss << " at batch "
                << best.batch << "; checkpoint " << ckpt_out << '\n';
        } else if (*predict_cmd) {
            const auto kind = parse_kernel_kind(p_kernel);
            const auto ds = pd.load(seed);
            const auto embedder = pm.embedder(err, kind);
            MethodSpec spec;
            spec.name = embedder->name() + "-" + p_kernel;
            spec.embedder = embedder.get();
            spec.kernel = kind;
            spec.scale = p_scale;
            spec.calibrate = !no_calibrate && !p_scale;
            spec.folds = p_folds;
            spec.seed = seed;
            spec.classes = std::max<std::size_t>(2, std::max(class_count(ds.labels_train), class_count(ds.labels_test)));
            const auto p = predict_dataset(spec, ds);
            const auto& r = p.report;
            auto f = open_out(p_out);
            f << "test_index,label,predicted";
            for (std::size_t c = 0; c < spec.classes; ++c) f << ",prob_" << c;
            f << ",perplexity\n";
            for (std::size_t j = 0; j < ds.m(); ++j) {
                f << j << ',' << ds.labels_test[j] << ',' << r.predicted[j];
                for (std::size_t c = 0; c < spec.classes; ++c) f << ',' << r.probs(j, c);
                f << ',' << r.perplexity[j] << '\n';
            }
            if (!f) throw IoError("failed writing '" + p_out + "'");
            if (!p_explain.empty()) {
                write_weights_csv(p_explain, r.weights, p_top);
                write_perplexity_csv(p_ppl.empty() ? sibling(p_explain, "_perplexity") : p_ppl, r);
            } else if (!p_ppl.empty()) {
                write_perplexity_csv(p_ppl, r);
            }
            out << spec.name << ' ' << p.kernel.describe() << ": accuracy " << accuracy(r.predicted, ds.labels_test)
                << ", relative perplexity " << r.relative.dataset << " (n=" << ds.n() << ", m=" << ds.m() << ")\n";
        } else if (*cal_cmd) {
            const auto kind = parse_kernel_kind(c_kernel);
            const auto ds = cd.load(seed);
            const auto embedder = cm.embedder(err, kind);
            CalibrationGrid grid = c_grid.empty() ? default_grid(kind) : CalibrationGrid{kind, parse_list<double>(c_grid, "grid")};
            CalibrationOptions opt;
            opt.folds = c_folds;
            opt.seed = seed;
            opt.classes = std::max<std::size_t>(2, class_count(ds.labels_train));
            const auto res = calibrate(*embedder, ds.features_train, ds.labels_train, grid, opt);
            if (!c_out.empty()) res.write_csv(c_out);
            for (const auto& c : res.candidates) {
                out << "  " << c.scale << ": ";
                if (c.skipped) out << "skipped\n";
                else out << c.mean_accuracy << '\n';
            }
            out << "chosen " << res.chosen.describe() << '\n';
        } else if (*sweep_cmd) {
            const auto kind = parse_kernel_kind(s_kernel);
            const auto ds = sd.load(seed);
            const auto embedder = sm.embedder(err, kind);
            const auto ladder = s_ladder.empty() ? default_ladder(kind, ds.n()) : parse_list<double>(s_ladder, "ladder");
            const auto targets = s_targets.empty() ? default_targets() : parse_list<double>(s_targets, "targets");
            const auto points = tradeoff_sweep(*embedder, ds, kind, ladder, targets,
                                               std::max<std::size_t>(2, class_count(ds.labels_train)));
            write_sweep_csv(s_out, points);
            for (const auto& p : points) {
                out << "target " << p.target << ": ";
                if (p.attained) out << "achieved " << p.achieved << ", accuracy " << p.accuracy << '\n';
                else out << "unattained\n";
            }
        } else if (*comp_cmd) {
            std::vector<std::string> names;
            const auto ds = md.load(seed, &names);
            const auto embedder = mm.embedder(err);
            const auto base = feature_compactness(InputSpaceEmbedder{}, ds, m_k);
            const auto meth = feature_compactness(*embedder, ds, m_k);
            const auto rows = compare_compactness(base, meth, names);
            write_compactness_csv(m_out, rows);
            for (const auto& r : rows)
                out << r.feature << ": baseline " << r.baseline_norm << ", method " << r.method_norm << ", "
                    << (r.rel_diff_pct >= 0 ? "+" : "") << std::lround(r.rel_diff_pct) << "%\n";
        } else if (*bench_cmd) {
            ModelParameters params = b_model.empty() ? ModelParameters::initialize(Hyperparameters{}, seed)
                                                     : load_checkpoint(b_model).params;
            if (!b_sizes.empty()) oc.sizes = parse_list<std::size_t>(b_sizes, "sizes");
            if (!b_features.empty()) oc.features = parse_list<std::size_t>(b_features, "features");
            KICL_REQUIRE(budget_mb > 0.0, "--memory-budget-mb must be positive");
            oc.memory_budget_bytes = static_cast<std::uint64_t>(budget_mb * (1 << 20));
            oc.measure_time = !no_time;
            oc.seed = seed;
            const auto rows = overhead_benchmark(params, oc);
            write_overhead_csv(b_out, rows);
            for (const auto& r : rows) {
                out << "n=" << r.n << " d=" << r.d << ": flop ratio " << r.flop_ratio;
                if (r.skipped) out << ", timing skipped (memory budget)";
                else if (!std::isnan(r.time_ratio)) out << ", time ratio " << r.time_ratio;
                out << '\n';
            }
        } else if (*toy_cmd) {
            toy.kind = parse_toy_kind(t_kind);
            toy.seed = seed;
            const auto ds = generate_toy(toy);
            write_dataset_csv(t_out, ds);
            out << "wrote " << t_out << ": " << ds.n() << " train / " << ds.m() << " test, " << ds.d()
                << " features\n";
        } else if (*exp_cmd) {
            const auto ds = ed.load(seed);
            const auto mode = parse_embedding_mode(em.mode);
            const auto ckpt = load_checkpoint(em.model);
            const auto b = embed(ckpt.params, ds.features_train, ds.labels_train, ds.features_test, mode);
            const Tensor *tr = nullptr, *te = nullptr;
            if (e_stage == "row") {
                tr = &b.row_train;
                te = &b.row_test;
            } else if (e_stage == "icl") {
                tr = &b.icl_train;
                te = &b.icl_test;
            } else if (e_stage == "kernel") {
                tr = &b.keys;
                te = &b.queries;
            } else {
                throw ContractViolation("unknown stage '" + e_stage + "' (expected row|icl|kernel)");
            }
            auto f = open_out(e_out);
            f << "split,index,label";
            for (std::size_t c = 0; c < tr->cols(); ++c) f << ",e" << c;
            f << '\n';
            auto dump = [&](const Tensor& t, const std::vector<int>& y, const char* tag) {
                for (std::size_t r = 0; r < t.rows(); ++r) {
                    f << tag << ',' << r << ',' << y[r];
                    for (std::size_t c = 0; c < t.cols(); ++c) f << ',' << t(r, c);
                    f << '\n';
                }
            };
            dump(*tr, ds.labels_train, "train");
            dump(*te, ds.labels_test, "test");
            if (!f) throw IoError("failed writing '" + e_out + "'");
            out << "wrote " << ds.n() + ds.m() << " rows of " << e_stage << " embeddings to " << e_out << '\n';
        } else if (*eval_cmd) {
            std::vector<KernelKind> kinds;
            {
                std::size_t start = 0;
                while (start <= v_kernels.size()) {
                    const auto end = std::min(v_kernels.find(',', start), v_kernels.size());
                    kinds.push_back(parse_kernel_kind(v_kernels.substr(start, end - start)));
                    start = end + 1;
                }
            }
            std::vector<std::unique_ptr<Embedder>> embedders;
            embedders.push_back(std::make_unique<InputSpaceEmbedder>());
            if (!v_model.empty())
                embedders.push_back(std::make_unique<ModelEmbedder>(load_checkpoint(v_model).params,
                                                                    parse_embedding_mode(v_mode)));
            std::vector<MethodResult> rows;
            for (const auto& path : v_data) {
                const auto ds = split(load_csv(path, v_label), v_fraction, seed);
                for (const auto& e : embedders)
                    for (auto k : kinds) {
                        MethodSpec m;
                        m.name = e->name() + "-" + to_string(k);
                        m.embedder = e.get();
                        m.kernel = k;
                        m.calibrate = !v_no_cal;
                        m.seed = seed;
                        m.classes = std::max<std::size_t>(2, class_count(ds.labels_train));
                        rows.push_back(evaluate(m, ds));
                    }
            }
            write_results_csv(v_out, rows);
            const auto ranks = mean_rank(rows);
            for (std::size_t i = 0; i < ranks.methods.size(); ++i)
                out << ranks.methods[i] << ": mean accuracy " << ranks.mean_accuracy[i] << ", mean rank "
                    << ranks.mean_rank[i] << '\n';
        }
    } catch (const ContractViolation& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace kicl::cli
