// rsgnn command-line tool.
//
//   rsgnn gen-synthetic  --out DIR [sbm flags]
//   rsgnn build-temporal --frames FILE --out DIR
//   rsgnn train          --data DIR --out DIR [--count N --jobs J ...]
//   rsgnn eval           --run DIR --data DIR [--out DIR]
//   rsgnn report         --runs DIR... [--out FILE]
//
// --config FILE (TOML/INI) may appear before or after the subcommand; keys
// go under a section named after it, e.g. [train]. Explicit flags win.
// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsgnn/rsgnn.hpp"

namespace fs = std::filesystem;
using namespace rsgnn;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct GenOptions {
    SbmConfig sbm;
    std::string out;
};

struct TemporalOptions {
    std::string frames;
    TemporalGraphConfig cfg;
    std::string out;
};

struct TrainOptions {
    std::string data;
    std::string out;
    std::string model = "rsgnn";
    std::string optimizer = "gd";
    std::string norm_penalty = "absolute";
    std::vector<int> ood_classes;
    int count = 1;
    int jobs = 1;
    TrainConfig cfg;
};

struct EvalOptions {
    std::string run;
    std::string data;
    std::string out;
};

struct ReportOptions {
    std::vector<std::string> runs;
    std::string out;
};

void add_gen(CLI::App& app, GenOptions& o) {
    auto* c = app.add_subcommand("gen-synthetic", "Generate a stochastic block model graph");
    c->add_option("--classes", o.sbm.num_classes, "Number of classes")->capture_default_str();
    c->add_option("--nodes-per-class", o.sbm.nodes_per_class)->capture_default_str();
    c->add_option("--p-in", o.sbm.p_in, "Within-class edge probability")->capture_default_str();
    c->add_option("--p-out", o.sbm.p_out, "Between-class edge probability")->capture_default_str();
    c->add_option("--feature-dim", o.sbm.feature_dim)->capture_default_str();
    c->add_option("--feature-shift", o.sbm.feature_shift)->capture_default_str();
    c->add_option("--seed", o.sbm.seed)->capture_default_str();
    c->add_option("--out", o.out, "Output graph directory")->required();
}

void add_temporal(CLI::App& app, TemporalOptions& o) {
    auto* c = app.add_subcommand("build-temporal", "Build windowed scene graphs from frame annotations");
    c->add_option("--frames", o.frames, "Annotation JSON file")->required();
    c->add_option("--window-size", o.cfg.window_size)->capture_default_str();
    c->add_option("--window-stride", o.cfg.window_stride)->capture_default_str();
    c->add_option("--frame-step", o.cfg.frame_step)->capture_default_str();
    c->add_option("--out", o.out, "Output directory (one window_NNN subdirectory per window)")->required();
}

void add_train(CLI::App& app, TrainOptions& o) {
    auto* c = app.add_subcommand("train", "Train vanilla or rsgnn models under the leave-out-class protocol");
    auto& cfg = o.cfg;
    c->add_option("--data", o.data, "Graph directory")->required();
    c->add_option("--out", o.out, "Output directory; runs go to seed_<s>/")->required();
    c->add_option("--model", o.model)->check(CLI::IsMember({"vanilla", "rsgnn"}))->capture_default_str();
    c->add_option("--ood-classes", o.ood_classes, "Comma-separated held-out classes")->delimiter(',');
    c->add_option("--count", o.count, "Number of seeds (seed, seed+1, ...)")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--jobs", o.jobs, "Concurrent runs")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_option("--epochs", cfg.epochs)->capture_default_str();
    c->add_option("--warmup-epochs", cfg.warmup_epochs)->capture_default_str();
    c->add_option("--lr", cfg.lr)->capture_default_str();
    c->add_option("--optimizer", o.optimizer)->check(CLI::IsMember({"gd", "adam"}))->capture_default_str();
    c->add_option("--hidden", cfg.hidden)->capture_default_str();
    c->add_option("--heads", cfg.heads)->capture_default_str();
    c->add_option("--dropout", cfg.dropout)->capture_default_str();
    c->add_option("--alpha", cfg.loss.alpha)->capture_default_str();
    c->add_option("--beta", cfg.loss.beta)->capture_default_str();
    c->add_option("--norm-penalty", o.norm_penalty)->check(CLI::IsMember({"absolute", "relaxed"}))->capture_default_str();
    c->add_option("--budget", cfg.budget)->capture_default_str();
    c->add_option("--max-card", cfg.max_card)->capture_default_str();
    c->add_flag("--full-power-set", cfg.full_power_set);
    c->add_option("--label-smoothing", cfg.loss.label_smoothing)->capture_default_str();
    c->add_option("--class-weights", cfg.loss.class_weights, "Comma-separated, one per class")->delimiter(',');
    c->add_option("--seed", cfg.seed)->capture_default_str();
}

void add_eval(CLI::App& app, EvalOptions& o) {
    auto* c = app.add_subcommand("eval", "Evaluate a run (or every run under a train output) on a graph");
    c->add_option("--run", o.run, "Run directory or train output directory")->required();
    c->add_option("--data", o.data, "Graph directory")->required();
    c->add_option("--out", o.out, "Where metrics go (default: alongside each run)");
}

void add_report(CLI::App& app, ReportOptions& o) {
    auto* c = app.add_subcommand("report", "Aggregate metrics.csv files: mean/std per metric and model");
    c->add_option("--runs", o.runs, "Directories searched recursively for metrics.csv")->required();
    c->add_option("--out", o.out, "Output CSV (default: stdout)");
}

int cmd_gen(const GenOptions& o) {
    write_graph(o.out, generate_sbm(o.sbm));
    std::cout << "wrote " << o.out << '\n';
    return kOk;
}

int cmd_temporal(const TemporalOptions& o) {
    const auto graphs = build_temporal_graph(read_frames(o.frames), o.cfg);
    fs::create_directories(o.out);
    for (std::size_t w = 0; w < graphs.size(); ++w) {
        char name[32];
        std::snprintf(name, sizeof(name), "window_%03zu", w);
        write_graph(fs::path(o.out) / name, graphs[w]);
    }
    std::cout << "wrote " << graphs.size() << " window graph(s) to " << o.out << '\n';
    return kOk;
}

fs::path run_dir_for(const fs::path& out, std::uint64_t seed) { return out / ("seed_" + std::to_string(seed)); }

int cmd_train(TrainOptions o) {
    TrainConfig base = o.cfg;
    base.model = parse_model_kind(o.model);
    base.optimizer = parse_optimizer(o.optimizer);
    base.loss.norm_penalty = parse_norm_penalty(o.norm_penalty);
    base.ood_classes = std::set<int>(o.ood_classes.begin(), o.ood_classes.end());
    base.validate();

    const NodeGraph g = read_graph(o.data);
    const fs::path out(o.out);
    fs::create_directories(out);

    const auto n = static_cast<std::size_t>(o.count);
    std::vector<TrainConfig> configs(n, base);
    for (std::size_t i = 0; i < n; ++i) configs[i].seed = base.seed + i;
    std::vector<double> seconds(n, 0.0);
    std::vector<std::exception_ptr> errors(n);

    // Runs share only the read-only graph; each writes its own directory.
    std::atomic<std::size_t> next{0};
    std::mutex log_mu;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                const auto t0 = std::chrono::steady_clock::now();
                TrainResult r = train(configs[i], g);
                write_run(run_dir_for(out, configs[i].seed), configs[i], r, g.feature_dim());
                seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                std::lock_guard lock(log_mu);
                std::cout << "seed " << configs[i].seed << ": best epoch " << r.best_epoch << ", val acc "
                          << r.best_val_acc << '\n';
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto jobs = std::min<std::size_t>(static_cast<std::size_t>(o.jobs), n);
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    nlohmann::ordered_json manifest;
    manifest["tool"] = "rsgnn";
    manifest["version"] = kVersion;
    manifest["data"] = fs::absolute(o.data).lexically_normal().string();
    manifest["config"] = to_json(base);
    manifest["runs"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
        const auto dir = run_dir_for(out, configs[i].seed);
        manifest["runs"].push_back({{"seed", configs[i].seed},
                                    {"dir", dir.filename().string()},
                                    {"artifacts", {"config.json", "checkpoint.bin", "trace.csv"}},
                                    {"seconds", seconds[i]}});
        if (base.model == ModelKind::rsgnn) manifest["runs"].back()["artifacts"].push_back("family.txt");
    }
    auto os = open_out(out / "manifest.json");
    os << manifest.dump(2) << '\n';
    return kOk;
}

std::vector<fs::path> run_dirs_under(const fs::path& p) {
    if (fs::exists(p / "config.json")) return {p};
    std::vector<fs::path> dirs;
    if (fs::is_directory(p))
        for (const auto& e : fs::directory_iterator(p))
            if (e.is_directory() && fs::exists(e.path() / "config.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw DataError("no run directories found under " + p.string());
    return dirs;
}

int cmd_eval(const EvalOptions& o) {
    const NodeGraph g = read_graph(o.data);
    const auto dirs = run_dirs_under(o.run);
    for (const auto& dir : dirs) {
        LoadedRun run = load_run(dir);
        const OodSplit split = OodSplit::leave_out(run.model.num_classes, run.config.ood_classes);
        const EvalReport report = evaluate(run.model, g, split, run.config.seed);
        fs::path dest = dir;
        if (!o.out.empty()) dest = dirs.size() == 1 && dir == fs::path(o.run) ? fs::path(o.out) : fs::path(o.out) / dir.filename();
        write_metrics(dest, report);
        std::cout << dest.string() << ": accuracy " << report.accuracy << '\n';
    }
    return kOk;
}

int cmd_report(const ReportOptions& o) {
    std::vector<fs::path> files;
    for (const auto& r : o.runs) {
        const fs::path root(r);
        if (fs::is_regular_file(root)) {
            files.push_back(root);
            continue;
        }
        if (!fs::is_directory(root)) throw DataError("not a file or directory: " + r);
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file() && e.path().filename() == "metrics.csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no metrics.csv files found");
    std::vector<MetricsRow> rows;
    for (const auto& f : files) rows.push_back(read_metrics_csv(f));
    const std::string csv = aggregate_csv(aggregate_metrics(rows));
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        auto os = open_out(o.out);
        os << csv;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random-set graph neural networks: training, evaluation and data tools", "rsgnn"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    GenOptions gen;
    TemporalOptions temporal;
    TrainOptions train_opts;
    EvalOptions eval;
    ReportOptions report;
    add_gen(app, gen);
    add_temporal(app, temporal);
    add_train(app, train_opts);
    add_eval(app, eval);
    add_report(app, report);

    app.set_config("--config", "", "TOML/INI file with one [section] per subcommand");

    // CLI11 reads config files at the root only, so hoist --config there.
    std::vector<std::string> args(argv + 1, argv + argc);
    for (std::size_t i = 0; i < args.size(); ++i) {
        const bool split = args[i] == "--config" && i + 1 < args.size();
        if (!split && !args[i].starts_with("--config=")) continue;
        const auto n = split ? 2 : 1;
        std::rotate(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + n));
        break;
    }
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back

    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (app.got_subcommand("gen-synthetic")) return cmd_gen(gen);
        if (app.got_subcommand("build-temporal")) return cmd_temporal(temporal);
        if (app.got_subcommand("train")) return cmd_train(train_opts);
        if (app.got_subcommand("eval")) return cmd_eval(eval);
        if (app.got_subcommand("report")) return cmd_report(report);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
