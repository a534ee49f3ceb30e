// sparsebound command line: architecture inspection, dataset tooling,
// training, capacity-bound reports, numeric verification and experiment
// sweeps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparsebound/arch.hpp"
#include "sparsebound/bounds.hpp"
#include "sparsebound/config.hpp"
#include "sparsebound/dataio.hpp"
#include "sparsebound/sweep.hpp"
#include "sparsebound/train.hpp"
#include "sparsebound/verify.hpp"

#include "fetch_mnist.hpp"

namespace fs = std::filesystem;
using namespace sparsebound;

namespace {

int cmd_arch_describe(const std::string& path) {
    const ArchGraph g = load_arch(path);
    std::cout << "depth (L)        " << g.depth() << "\n";
    std::cout << "widths           ";
    for (std::size_t l = 0; l <= g.depth(); ++l) {
        std::cout << g.real_width(l);
        if (g.zero_count(l) > 0) std::cout << "(+" << g.zero_count(l) << " pad)";
        std::cout << (l == g.depth() ? "\n" : " ");
    }
    std::cout << "channels         ";
    for (std::size_t l = 0; l <= g.depth(); ++l)
        std::cout << g.channels(l) << (l == g.depth() ? "\n" : " ");
    if (!g.grid_dims().empty()) {
        std::cout << "spatial chain    ";
        for (std::size_t i = 0; i < g.grid_dims().size(); ++i)
            std::cout << g.grid_dims()[i][0] << "x" << g.grid_dims()[i][1]
                      << (i + 1 == g.grid_dims().size() ? "\n" : " -> ");
    }
    std::cout << "shared weights   " << (g.shared() ? "yes" : "no") << "\n";
    std::cout << "deg(G)           " << degree(g) << "\n";
    const PathProduct pp = max_path_pred_product(g);
    std::cout << "max path product " << pp.value << "\n";
    std::cout << "parameters       " << parameter_count(g) << "\n";
    if (g.dead_real_nodes() > 0)
        std::cout << "dead neurons     " << g.dead_real_nodes() << " (pruned by stride)\n";
    return 0;
}

Dataset load_split(const std::string& root, const std::string& split) {
    return load_dataset(root + "/" + split);
}

int cmd_data_synth(std::uint64_t seed, std::size_t m, std::size_t test_m, std::size_t height,
                   std::size_t width, const std::string& out) {
    SynthSpec spec;
    spec.height = height;
    spec.width = width;
    const Dataset train = synth_dataset(seed, m, spec);
    const Dataset test = synth_dataset(seed ^ 0x7e57u, test_m, spec);
    save_dataset(train, out + "/train", height, width);
    save_dataset(test, out + "/test", height, width);
    std::cout << "wrote " << m << " train and " << test_m << " test samples under " << out << "\n";
    return 0;
}

int cmd_data_subset(const std::string& data_dir, int class_a, int class_b, std::size_t m,
                    std::uint64_t seed, const std::string& out) {
    LabelledImages pool = parse_idx_images(read_file_bytes(data_dir + "/train-images.idx3"));
    pool.labels = parse_idx_labels(read_file_bytes(data_dir + "/train-labels.idx1"));
    const Dataset subset = binary_subset(pool, class_a, class_b, m, seed);
    save_dataset(subset, out, pool.height, pool.width);
    std::cout << "wrote " << m << " samples of classes " << class_a << "/" << class_b << " to "
              << out << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& arch_flag,
              const std::string& data_root, const std::string& out) {
    const FlatConfig fc = FlatConfig::from_file(config_path);
    const TrainConfig cfg = train_config_from(fc, {"arch"});
    const std::string arch_path = !arch_flag.empty() ? arch_flag : fc.get_string("arch");
    const ArchGraph g = load_arch(arch_path);

    const Dataset train_set = load_split(data_root, "train");
    const Dataset test_set = load_split(data_root, "test");

    const TrainResult result = train(g, train_set, test_set, cfg);

    fs::create_directories(out);
    save_weights(result.weights, out + "/weights.bin");
    {
        std::ofstream manifest(out + "/weights.manifest");
        manifest << weights_manifest(result.weights);
        manifest << "config " << config_path << "\n";
        for (const auto& [k, v] : fc.entries()) manifest << "  " << k << " = " << v << "\n";
    }
    {
        std::ofstream hist(out + "/history.csv", std::ios::binary);
        hist << "epoch,lr,train_loss,train_error,test_loss,test_error,rho\n";
        char buf[256];
        for (const auto& row : result.history) {
            std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", row.epoch,
                          row.lr, row.train_loss, row.train_error, row.test_loss, row.test_error,
                          row.rho);
            hist << buf;
        }
    }
    if (!result.history.empty()) {
        const auto& last = result.history.back();
        std::cout << "final train error " << last.train_error << ", test error " << last.test_error
                  << ", rho " << last.rho << "\n";
    }
    std::cout << "checkpoint written to " << out << "\n";
    return 0;
}

Dataset load_bound_data(const std::string& data_root) {
    return fs::exists(data_root + "/train") ? load_split(data_root, "train")
                                            : load_dataset(data_root);
}

int cmd_bound(const std::string& arch_path, const std::string& weights_path,
              const std::string& data_root, double delta, std::optional<double> gamma,
              const std::string& out) {
    const ArchGraph g = load_arch(arch_path);
    const WeightSet w = load_weights(weights_path);
    if (!w.shape_matches(g)) {
        std::cerr << "error: weight container does not match the architecture\n";
        return 1;
    }
    const Dataset ds = load_bound_data(data_root);
    const BoundReport report = assemble_bound_report(g, w, ds, delta, gamma);
    const nlohmann::json j = bound_report_to_json(report);
    if (out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream of(out);
        of << j.dump(2) << "\n";
        std::cout << "report written to " << out << "\n";
    }
    return 0;
}

int cmd_report(const std::string& arch_path, const std::string& weights_path,
               const std::string& data_root, double delta, std::optional<double> gamma) {
    const ArchGraph g = load_arch(arch_path);
    const WeightSet w = load_weights(weights_path);
    if (!w.shape_matches(g)) {
        std::cerr << "error: weight container does not match the architecture\n";
        return 1;
    }
    const Dataset ds = load_bound_data(data_root);
    const BoundReport report = assemble_bound_report(g, w, ds, delta, gamma);
    std::cout << comparison_report(g, report);
    if (!gamma)
        std::cout << "note: pass --gamma to evaluate the parameter-counting baseline\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& arch_flag,
              std::size_t threads_flag, const std::string& out) {
    const FlatConfig fc = FlatConfig::from_file(config_path);
    SweepConfig sc = sweep_config_from(fc);
    const std::string arch_path = !arch_flag.empty() ? arch_flag : fc.get_string("arch");
    if (threads_flag > 0) sc.threads = threads_flag;
    const ArchGraph g = load_arch(arch_path);

    const SweepResult result = run_sweep(g, sc);
    std::map<std::string, std::string> echo(fc.entries().begin(), fc.entries().end());
    write_sweep_outputs(result, sc, echo, out);

    std::size_t failed = 0;
    for (const auto& rec : result.records) failed += rec.failed ? 1 : 0;
    std::cout << sweep_csv(result.rows);
    std::cout << "cells " << result.records.size() << ", failed " << failed << ", outputs in "
              << out << "\n";
    return failed == 0 ? 0 : 2;
}

int cmd_verify(const std::string& which, std::uint64_t seed, std::size_t trials,
               const std::string& out) {
    nlohmann::json j;
    j["check"] = which;
    j["seed"] = seed;
    j["trials"] = trials;
    std::size_t violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    Rng rng(seed);

    if (which == "peeling") {
        for (std::size_t t = 0; t < trials; ++t) {
            const PeelingInstance inst = random_peeling_instance(rng);
            const double lhs = peeling_lhs(inst);
            const double rhs = peeling_rhs(inst);
            min_slack = std::min(min_slack, rhs - lhs);
            if (lhs > rhs + 1e-9) ++violations;
        }
    } else if (which == "rademacher") {
        const double rhos[3] = {0.5, 1.0, 2.0};
        for (std::size_t t = 0; t < trials; ++t) {
            RandomDagSpec spec;
            const ArchGraph g = random_dag(rng, spec);
            const std::size_t m = 2 + rng.bounded(7);
            Tensor inputs({m, 1, g.pixel_count()});
            for (double& v : inputs.data) v = rng.uniform(-1.0, 1.0);
            const double rho_cap = rhos[rng.bounded(3)];

            std::vector<double> patches(g.width(0), 0.0);
            for (std::size_t jn = 0; jn < g.width(0); ++jn) {
                const std::int64_t px = g.input_pixel(jn);
                if (px < 0) continue;
                for (std::size_t i = 0; i < m; ++i) {
                    const double v = inputs.data[i * g.pixel_count() + static_cast<std::size_t>(px)];
                    patches[jn] += v * v;
                }
            }
            const double upper = rademacher_bound(g, rho_cap, patches, m);
            RademacherBudget budget;
            const double lower = empirical_rademacher(g, rho_cap, inputs, budget, rng.next_u64());
            min_slack = std::min(min_slack, upper - lower);
            if (lower > upper) ++violations;
        }
    } else if (which == "concentration") {
        for (std::size_t t = 0; t < trials; ++t) {
            const std::size_t m = 1 + rng.bounded(10);
            const std::size_t p = 1 + rng.bounded(3);
            std::vector<std::vector<double>> z(m, std::vector<double>(p));
            for (auto& v : z)
                for (double& x : v) x = rng.uniform(-1.0, 1.0);
            const double alpha = 0.05 + rng.uniform() * 1.2;
            const ConcentrationResult res = concentration_check(z, alpha);
            min_slack = std::min(min_slack, res.slack);
            if (!res.holds) ++violations;
        }
    } else if (which == "lambda") {
        for (std::size_t t = 0; t < trials; ++t) {
            const std::size_t L = 1 + rng.bounded(5);
            const std::size_t deg = 1 + rng.bounded(8);
            const double rho_v = 0.25 + rng.uniform() * 4.0;
            const double patch = 0.5 + rng.uniform() * 50.0;
            const double star = lambda_star(L, deg, rho_v, patch);
            const double at_star = peeling_chain_bound(star, L, deg, rho_v, patch);
            double grid_min = std::numeric_limits<double>::infinity();
            for (int i = 0; i < 1000; ++i) {
                const double lambda = star * std::pow(10.0, -3.0 + 6.0 * i / 999.0);
                grid_min = std::min(grid_min, peeling_chain_bound(lambda, L, deg, rho_v, patch));
            }
            const double rel = (grid_min - at_star) / grid_min;
            min_slack = std::min(min_slack, rel);
            if (at_star > grid_min * (1.0 + 1e-3)) ++violations;
        }
    } else {
        std::cerr << "unknown verify target: " << which << "\n";
        return 1;
    }

    j["violations"] = violations;
    j["min_slack"] = min_slack;
    j["pass"] = violations == 0;
    const std::string text = j.dump(2);
    if (out.empty()) {
        std::cout << text << "\n";
    } else {
        std::ofstream of(out);
        of << text << "\n";
        std::cout << (violations == 0 ? "pass" : "FAIL") << ", report in " << out << "\n";
    }
    return violations == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compositionally sparse networks: training, bounds, verification"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::size_t threads = 0;
    app.add_option("--seed", seed, "global seed (subcommands may override)");
    app.add_option("--threads", threads, "worker threads for sweeps");

    auto* arch = app.add_subcommand("arch", "inspect architectures");
    auto* describe = arch->add_subcommand("describe", "print summary quantities");
    std::string arch_file;
    describe->add_option("file", arch_file, "architecture JSON")->required();

    auto* data = app.add_subcommand("data", "dataset tooling");
    auto* synth = data->add_subcommand("synth", "generate a synthetic binary dataset");
    std::size_t synth_m = 2000, synth_test_m = 2000, synth_h = 16, synth_w = 16;
    std::string synth_out = "data-synth";
    synth->add_option("--m", synth_m, "training samples");
    synth->add_option("--test-m", synth_test_m, "test samples");
    synth->add_option("--height", synth_h, "image height");
    synth->add_option("--width", synth_w, "image width");
    synth->add_option("--out", synth_out, "output directory")->required();

    auto* fetch = data->add_subcommand("fetch", "download MNIST-format IDX files (SHA-256 verified)");
    std::string fetch_out = "data-mnist", fetch_base = kDefaultMnistBaseUrl, fetch_from;
    bool fetch_no_verify = false;
    fetch->add_option("--out", fetch_out, "output directory")->required();
    fetch->add_option("--base-url", fetch_base, "http mirror base url");
    fetch->add_option("--from-dir", fetch_from, "ingest pre-downloaded .gz files instead");
    fetch->add_flag("--no-verify", fetch_no_verify, "skip SHA-256 verification");

    auto* subset = data->add_subcommand("subset", "binary class subset of an IDX pool");
    std::string subset_data, subset_out;
    int subset_a = 0, subset_b = 1;
    std::size_t subset_m = 1000;
    subset->add_option("--data", subset_data, "directory with train-images.idx3 etc.")->required();
    subset->add_option("--class-a", subset_a, "first class (maps to +1)");
    subset->add_option("--class-b", subset_b, "second class (maps to -1)");
    subset->add_option("--m", subset_m, "samples to draw");
    subset->add_option("--out", subset_out, "output dataset directory")->required();

    auto* train_cmd = app.add_subcommand("train", "weight-normalized SGD training");
    std::string train_config, train_arch, train_data, train_out = "run";
    train_cmd->add_option("--config", train_config, "flat key=value training config")->required();
    train_cmd->add_option("--arch", train_arch, "architecture JSON (overrides config key)");
    train_cmd->add_option("--data", train_data, "dataset root with train/ and test/")->required();
    train_cmd->add_option("--out", train_out, "output directory");

    auto* bound = app.add_subcommand("bound", "capacity quantities and bounds as JSON");
    std::string bound_arch, bound_weights, bound_data, bound_out;
    double bound_delta = 0.01;
    double bound_gamma = -1.0;
    bound->add_option("--arch", bound_arch)->required();
    bound->add_option("--weights", bound_weights)->required();
    bound->add_option("--data", bound_data)->required();
    bound->add_option("--delta", bound_delta, "confidence level");
    bound->add_option("--gamma", bound_gamma, "margin for the parameter-counting baseline");
    bound->add_option("--out", bound_out, "output JSON path (stdout when absent)");

    auto* report = app.add_subcommand("report", "human-readable bound comparison");
    std::string report_arch, report_weights, report_data;
    double report_delta = 0.01, report_gamma = -1.0;
    report->add_option("--arch", report_arch)->required();
    report->add_option("--weights", report_weights)->required();
    report->add_option("--data", report_data)->required();
    report->add_option("--delta", report_delta);
    report->add_option("--gamma", report_gamma, "margin for the parameter-counting baseline");

    auto* sweep = app.add_subcommand("sweep", "m-grid experiment sweep");
    std::string sweep_config, sweep_arch, sweep_out = "sweep-out";
    sweep->add_option("--config", sweep_config)->required();
    sweep->add_option("--arch", sweep_arch, "architecture JSON (overrides config key)");
    sweep->add_option("--out", sweep_out, "output directory");

    auto* verify = app.add_subcommand("verify", "numeric checks of the proof machinery");
    std::string verify_which, verify_out;
    std::size_t verify_trials = 50;
    verify->add_option("target", verify_which, "peeling|rademacher|concentration|lambda")
        ->required();
    verify->add_option("--trials", verify_trials, "instances to test");
    verify->add_option("--out", verify_out, "JSON slack report path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (describe->parsed()) return cmd_arch_describe(arch_file);
        if (synth->parsed())
            return cmd_data_synth(seed, synth_m, synth_test_m, synth_h, synth_w, synth_out);
        if (fetch->parsed())
            return fetch_mnist(fetch_out, fetch_base, fetch_from, !fetch_no_verify);
        if (subset->parsed())
            return cmd_data_subset(subset_data, subset_a, subset_b, subset_m, seed, subset_out);
        if (train_cmd->parsed()) return cmd_train(train_config, train_arch, train_data, train_out);
        if (bound->parsed())
            return cmd_bound(bound_arch, bound_weights, bound_data, bound_delta,
                             bound_gamma > 0 ? std::optional<double>(bound_gamma) : std::nullopt,
                             bound_out);
        if (report->parsed())
            return cmd_report(report_arch, report_weights, report_data, report_delta,
                              report_gamma > 0 ? std::optional<double>(report_gamma) : std::nullopt);
        if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_arch, threads, sweep_out);
        if (verify->parsed()) return cmd_verify(verify_which, seed, verify_trials, verify_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "no subcommand executed\n";
    return 1;
}
