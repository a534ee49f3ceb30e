#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sparsebound/bounds.hpp"
#include "sparsebound/config.hpp"
#include "sparsebound/dataio.hpp"
#include "sparsebound/train.hpp"

namespace sparsebound {

inline constexpr const char* kVersionString = "sparsebound 0.1.0";

/// One sweep grid: the m values, seeds per cell, a training template and a
/// data source (seeded synthetic generation or a dataset directory holding
/// train/ and test/ subdirectories).
struct SweepConfig {
    std::vector<std::size_t> m_values = {500, 1000, 2000, 4000};
    std::size_t seeds_per_cell = 3;
    TrainConfig train;

    bool use_synth = true;
    SynthSpec synth;
    std::size_t test_size = 2000;
    std::string data_dir;
    int class_a = 0, class_b = 1;

    std::size_t window = 100;  // trailing-average window in epochs
    double delta = 0.01;
    std::uint64_t base_seed = 0;
    std::size_t threads = 1;

    void validate() const;
};

/// One sweep cell, trailing-window averaged (mirrors the report columns).
struct RunRecord {
    std::size_t m = 0;
    std::uint64_t seed = 0;
    double rho = 0.0;
    double train_error = 0.0;
    double test_error = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double gen_gap = 0.0;
    double rho_over_sqrt_m = 0.0;
    bool interpolation = false;
    double wall_seconds = 0.0;
    bool failed = false;
    std::string note;
};

/// Seed-averaged row for one m.
struct SweepRow {
    std::size_t m = 0;
    double rho = 0.0;
    double train_error = 0.0;
    double test_error = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double gen_gap = 0.0;         // |mean test_error - mean train_error|
    double rho_over_sqrt_m = 0.0; // mean rho / sqrt(m)
    double rho_std = 0.0;
    double test_error_std = 0.0;
    std::size_t cells_used = 0;
};

struct SweepResult {
    std::vector<RunRecord> records;
    std::vector<SweepRow> rows;
};

SweepResult run_sweep(const ArchGraph& g, const SweepConfig& cfg);

/// CSV with the exact column contract
/// m,rho,train_error,test_error,train_loss,test_loss,gen_gap,rho_over_sqrt_m.
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Writes summary.csv, runs.json (full precision, including failed cells)
/// and manifest.json (config echo + version) into out_dir.
void write_sweep_outputs(const SweepResult& result, const SweepConfig& cfg,
                         const std::map<std::string, std::string>& config_echo,
                         const std::string& out_dir);

/// All capacity quantities for one (graph, weights, dataset) triple.
BoundReport assemble_bound_report(const ArchGraph& g, const WeightSet& w, const Dataset& ds,
                                  double delta, std::optional<double> gamma = std::nullopt);

/// Human-readable side-by-side of this bound against the dense-expansion and
/// parameter-counting baselines, with assumption flags.
std::string comparison_report(const ArchGraph& g, const BoundReport& report);

/// Parses sweep keys (m_values, seeds_per_cell, data, test_size, class_a,
/// class_b, window, delta, base_seed, threads, synth_*) plus the training
/// keys from one flat file.
SweepConfig sweep_config_from(const FlatConfig& cfg);

}  // namespace sparsebound
