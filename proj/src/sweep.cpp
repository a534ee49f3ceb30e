#include "sparsebound/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace sparsebound {
namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

struct Pools {
    LabelledImages train;
    LabelledImages test;
};

Pools load_pools(const std::string& dir) {
    Pools p;
    p.train = parse_idx_images(read_file_bytes(dir + "/train-images.idx3"));
    const auto train_labels = parse_idx_labels(read_file_bytes(dir + "/train-labels.idx1"));
    p.test = parse_idx_images(read_file_bytes(dir + "/test-images.idx3"));
    const auto test_labels = parse_idx_labels(read_file_bytes(dir + "/test-labels.idx1"));
    if (train_labels.size() != p.train.images.dim(0) || test_labels.size() != p.test.images.dim(0))
        throw std::runtime_error("sweep data dir: image/label count mismatch");
    p.train.labels = train_labels;
    p.test.labels = test_labels;
    return p;
}

}  // namespace

void SweepConfig::validate() const {
    if (m_values.empty()) throw std::invalid_argument("sweep: m_values must be non-empty");
    for (std::size_t i = 0; i < m_values.size(); ++i) {
        if (m_values[i] == 0) throw std::invalid_argument("sweep: m values must be positive");
        if (i > 0 && m_values[i] <= m_values[i - 1])
            throw std::invalid_argument("sweep: m values must be strictly ascending");
    }
    if (seeds_per_cell == 0) throw std::invalid_argument("sweep: seeds_per_cell >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("sweep: delta in (0,1)");
    train.validate();
}

SweepResult run_sweep(const ArchGraph& g, const SweepConfig& cfg) {
    cfg.validate();

    struct Cell {
        std::size_t m;
        std::size_t seed_index;
    };
    std::vector<Cell> cells;
    for (std::size_t m : cfg.m_values)
        for (std::size_t s = 0; s < cfg.seeds_per_cell; ++s) cells.push_back({m, s});

    // shared test set
    Dataset test_set;
    Pools pools;
    if (cfg.use_synth) {
        test_set = synth_dataset(mix_seed(cfg.base_seed, 0x7e57), cfg.test_size, cfg.synth);
    } else {
        pools = load_pools(cfg.data_dir);
        const std::size_t avail = pools.test.images.dim(0);
        test_set = binary_subset(pools.test, cfg.class_a, cfg.class_b,
                                 std::min(cfg.test_size, avail), mix_seed(cfg.base_seed, 0x7e57));
    }

    SweepResult result;
    result.records.assign(cells.size(), RunRecord{});

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            const Cell cell = cells[idx];
            RunRecord rec;
            rec.m = cell.m;
            const std::uint64_t cell_seed = mix_seed(mix_seed(cfg.base_seed, cell.m), cell.seed_index);
            rec.seed = cell_seed;

            const auto t0 = std::chrono::steady_clock::now();
            try {
                Dataset train_set =
                    cfg.use_synth
                        ? synth_dataset(mix_seed(cell_seed, 0xda7a), cell.m, cfg.synth)
                        : binary_subset(pools.train, cfg.class_a, cfg.class_b, cell.m,
                                        mix_seed(cell_seed, 0xda7a));

                TrainConfig tc = cfg.train;
                tc.seed = cell_seed;
                const TrainResult tr = train(g, train_set, test_set, tc);

                if (tr.history.empty()) {
                    const EvalResult on_train = evaluate(g, tr.weights, train_set);
                    const EvalResult on_test = evaluate(g, tr.weights, test_set);
                    rec.train_error = on_train.error;
                    rec.train_loss = on_train.loss_mean;
                    rec.test_error = on_test.error;
                    rec.test_loss = on_test.loss_mean;
                    rec.rho = rho(g, tr.weights);
                } else {
                    rec.rho = trailing_average(tr.history, &EpochStats::rho, cfg.window);
                    rec.train_error =
                        trailing_average(tr.history, &EpochStats::train_error, cfg.window);
                    rec.test_error = trailing_average(tr.history, &EpochStats::test_error, cfg.window);
                    rec.train_loss = trailing_average(tr.history, &EpochStats::train_loss, cfg.window);
                    rec.test_loss = trailing_average(tr.history, &EpochStats::test_loss, cfg.window);
                }
                rec.gen_gap = std::abs(rec.test_error - rec.train_error);
                rec.rho_over_sqrt_m = rec.rho / std::sqrt(static_cast<double>(cell.m));
                rec.interpolation = evaluate(g, tr.weights, train_set).ramp_mean == 0.0;
            } catch (const TrainingDiverged& e) {
                rec.failed = true;
                rec.note = e.what();
            }
            rec.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.records[idx] = rec;
        }
    };

    const std::size_t nthreads = std::max<std::size_t>(1, cfg.threads);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < nthreads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    // aggregate per m, skipping failed cells
    for (std::size_t m : cfg.m_values) {
        SweepRow row;
        row.m = m;
        std::vector<const RunRecord*> group;
        for (const auto& rec : result.records)
            if (rec.m == m && !rec.failed) group.push_back(&rec);
        row.cells_used = group.size();
        if (!group.empty()) {
            const double n = static_cast<double>(group.size());
            for (const auto* rec : group) {
                row.rho += rec->rho;
                row.train_error += rec->train_error;
                row.test_error += rec->test_error;
                row.train_loss += rec->train_loss;
                row.test_loss += rec->test_loss;
            }
            row.rho /= n;
            row.train_error /= n;
            row.test_error /= n;
            row.train_loss /= n;
            row.test_loss /= n;
            row.gen_gap = std::abs(row.test_error - row.train_error);
            row.rho_over_sqrt_m = row.rho / std::sqrt(static_cast<double>(m));
            double var_rho = 0.0, var_err = 0.0;
            for (const auto* rec : group) {
                var_rho += (rec->rho - row.rho) * (rec->rho - row.rho);
                var_err += (rec->test_error - row.test_error) * (rec->test_error - row.test_error);
            }
            row.rho_std = std::sqrt(var_rho / n);
            row.test_error_std = std::sqrt(var_err / n);
        }
        result.rows.push_back(row);
    }
    return result;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "m,rho,train_error,test_error,train_loss,test_loss,gen_gap,rho_over_sqrt_m\n";
    for (const auto& r : rows) {
        out += std::to_string(r.m) + "," + fmt(r.rho) + "," + fmt(r.train_error) + "," +
               fmt(r.test_error) + "," + fmt(r.train_loss) + "," + fmt(r.test_loss) + "," +
               fmt(r.gen_gap) + "," + fmt(r.rho_over_sqrt_m) + "\n";
    }
    return out;
}

void write_sweep_outputs(const SweepResult& result, const SweepConfig& cfg,
                         const std::map<std::string, std::string>& config_echo,
                         const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    {
        std::ofstream csv(out_dir + "/summary.csv", std::ios::binary);
        csv << sweep_csv(result.rows);
    }

    nlohmann::json runs;
    runs["records"] = nlohmann::json::array();
    for (const auto& rec : result.records) {
        nlohmann::json j;
        j["m"] = rec.m;
        j["seed"] = rec.seed;
        j["rho"] = rec.rho;
        j["train_error"] = rec.train_error;
        j["test_error"] = rec.test_error;
        j["train_loss"] = rec.train_loss;
        j["test_loss"] = rec.test_loss;
        j["gen_gap"] = rec.gen_gap;
        j["rho_over_sqrt_m"] = rec.rho_over_sqrt_m;
        j["interpolation"] = rec.interpolation;
        j["wall_seconds"] = rec.wall_seconds;
        j["failed"] = rec.failed;
        if (!rec.note.empty()) j["note"] = rec.note;
        runs["records"].push_back(j);
    }
    runs["rows"] = nlohmann::json::array();
    for (const auto& row : result.rows) {
        nlohmann::json j;
        j["m"] = row.m;
        j["rho"] = row.rho;
        j["train_error"] = row.train_error;
        j["test_error"] = row.test_error;
        j["train_loss"] = row.train_loss;
        j["test_loss"] = row.test_loss;
        j["gen_gap"] = row.gen_gap;
        j["rho_over_sqrt_m"] = row.rho_over_sqrt_m;
        j["rho_std"] = row.rho_std;
        j["test_error_std"] = row.test_error_std;
        j["cells_used"] = row.cells_used;
        runs["rows"].push_back(j);
    }
    {
        std::ofstream jf(out_dir + "/runs.json");
        jf << runs.dump(2) << "\n";
    }

    nlohmann::json manifest;
    manifest["version"] = kVersionString;
    manifest["config"] = config_echo;
    manifest["m_values"] = cfg.m_values;
    manifest["seeds_per_cell"] = cfg.seeds_per_cell;
    manifest["window"] = cfg.window;
    manifest["delta"] = cfg.delta;
    manifest["base_seed"] = cfg.base_seed;
    {
        std::ofstream mf(out_dir + "/manifest.json");
        mf << manifest.dump(2) << "\n";
    }
}

BoundReport assemble_bound_report(const ArchGraph& g, const WeightSet& w, const Dataset& ds,
                                  double delta, std::optional<double> gamma) {
    const std::size_t m = ds.size();
    const std::size_t L = g.depth();

    BoundReport r;
    r.m = m;
    r.depth = L;
    r.deg = degree(g);
    r.delta = delta;

    const SpectralResult top = spectral_norm(w.layers[L - 1][0]);
    r.spectral_converged = top.converged;
    r.rho = rho(g, w);
    r.rho_tilde = rho_tilde(g, w);
    r.rho_over_sqrt_m = r.rho / std::sqrt(static_cast<double>(m));

    const std::vector<double> patches = extract_patches(ds, g);
    const PathProduct unweighted = max_path_pred_product(g);
    r.path_product = unweighted.value;
    const PathProduct weighted = patch_term(g, patches);
    r.patch_term = weighted.value;
    r.witness_path = weighted.path;

    r.rademacher_bound = rademacher_bound(g, r.rho, patches, m);
    r.gen_bound = gen_bound(g, r.rho, patches, m, delta);
    r.convnet_bound = convnet_bound(g, r.rho, patches, m);

    const BetaBalance bb = beta_balance(ds.images);
    r.beta = bb.beta;
    r.beta_degenerate = bb.degenerate;

    double sum_input_sq = 0.0;
    for (double v : ds.images.data) sum_input_sq += v * v;
    r.simplified_bound = simplified_bound(r.rho, m, L, r.deg, bb.beta,
                                          sum_input_sq / static_cast<double>(m));
    r.naive_bound = naive_bound(g, r.rho, sum_input_sq, m);

    if (gamma) {
        std::vector<double> layer_spectral(L, 0.0);
        bool converged = true;
        for (std::size_t l = 1; l <= L; ++l) {
            double best = 0.0;
            for (const Matrix& mat : w.layers[l - 1]) {
                if (mat.a.empty()) continue;
                const SpectralResult s = spectral_norm(mat);
                converged = converged && s.converged;
                best = std::max(best, s.value);
            }
            layer_spectral[l - 1] = best;
        }
        r.spectral_converged = r.spectral_converged && converged;
        r.long_bound = long_bound(parameter_count(g), layer_spectral, *gamma, delta, m);
    }

    r.interpolation = evaluate(g, w, ds).ramp_mean == 0.0;
    return r;
}

std::string comparison_report(const ArchGraph& g, const BoundReport& report) {
    // non-overlap: pred lists pairwise disjoint within each layer
    bool non_overlap = true;
    for (std::size_t l = 1; l <= g.depth() && non_overlap; ++l) {
        std::set<std::uint32_t> seen;
        std::size_t total = 0;
        for (std::size_t j = 0; j < g.width(l); ++j) {
            if (g.is_zero(l, j)) continue;
            for (std::uint32_t p : g.pred(l, j)) seen.insert(p);
            total += g.pred_size(l, j);
        }
        non_overlap = seen.size() == total;
    }

    std::ostringstream os;
    os << "bound comparison (m = " << report.m << ", L = " << report.depth
       << ", deg = " << report.deg << ")\n";
    os << "  rho                    " << fmt3(report.rho) << "\n";
    os << "  rho_tilde              " << fmt3(report.rho_tilde) << "\n";
    os << "  rho/sqrt(m)            " << fmt3(report.rho_over_sqrt_m) << "\n";
    os << "  this bound (Radem.)    " << fmt3(report.rademacher_bound) << "\n";
    if (report.convnet_bound)
        os << "  shared-kernel form     " << fmt3(*report.convnet_bound) << "\n";
    os << "  test-error bound       " << fmt3(report.gen_bound) << " (delta = " << report.delta
       << (report.interpolation ? ", interpolation holds" : ", interpolation FAILS") << ")\n";
    os << "  naive dense expansion  " << fmt3(report.naive_bound);
    if (report.rademacher_bound > 0.0)
        os << "   ratio " << fmt3(report.naive_bound / report.rademacher_bound) << "x";
    os << "\n";
    if (report.long_bound) {
        os << "  parameter counting     " << fmt3(*report.long_bound);
        if (report.rademacher_bound > 0.0)
            os << "   ratio " << fmt3(*report.long_bound / report.rademacher_bound) << "x";
        os << "\n";
    } else {
        os << "  parameter counting     (needs --gamma)\n";
    }
    os << "  simplified scale form  " << fmt3(report.simplified_bound) << "\n";
    os << "  assumptions: non-overlapping patches: " << (non_overlap ? "yes" : "no");
    if (report.beta_degenerate) {
        os << "; beta: undefined (all-zero data)";
    } else {
        os << "; beta = " << fmt3(report.beta);
    }
    os << "\n";
    if (!report.spectral_converged)
        os << "  WARNING: power iteration did not converge on some layer\n";
    return os.str();
}

SweepConfig sweep_config_from(const FlatConfig& cfg) {
    const std::vector<std::string> sweep_keys = {
        "arch",      "m_values",       "seeds_per_cell", "data",      "test_size", "class_a",
        "class_b",   "window",         "delta",          "base_seed", "threads",
        "synth_height", "synth_width", "synth_band",     "synth_amplitude",
        "synth_background", "synth_noise"};

    SweepConfig sc;
    sc.train = train_config_from(cfg, sweep_keys);
    if (cfg.has("m_values")) sc.m_values = cfg.get_size_list("m_values");
    sc.seeds_per_cell = cfg.get_size("seeds_per_cell", sc.seeds_per_cell);
    const std::string data = cfg.get_string("data", "synth");
    if (data == "synth") {
        sc.use_synth = true;
    } else {
        sc.use_synth = false;
        sc.data_dir = data;
    }
    sc.test_size = cfg.get_size("test_size", sc.test_size);
    sc.class_a = static_cast<int>(cfg.get_size("class_a", 0));
    sc.class_b = static_cast<int>(cfg.get_size("class_b", 1));
    sc.window = cfg.get_size("window", sc.window);
    sc.delta = cfg.get_double("delta", sc.delta);
    sc.base_seed = cfg.get_u64("base_seed", sc.base_seed);
    sc.threads = cfg.get_size("threads", sc.threads);
    sc.synth.height = cfg.get_size("synth_height", sc.synth.height);
    sc.synth.width = cfg.get_size("synth_width", sc.synth.width);
    sc.synth.band_halfwidth = cfg.get_size("synth_band", sc.synth.band_halfwidth);
    sc.synth.amplitude = cfg.get_double("synth_amplitude", sc.synth.amplitude);
    sc.synth.background = cfg.get_double("synth_background", sc.synth.background);
    sc.synth.noise = cfg.get_double("synth_noise", sc.synth.noise);
    sc.validate();
    return sc;
}

}  // namespace sparsebound
