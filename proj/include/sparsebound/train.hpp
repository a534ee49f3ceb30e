#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sparsebound/arch.hpp"
#include "sparsebound/dataio.hpp"
#include "sparsebound/metrics.hpp"
#include "sparsebound/rng.hpp"
#include "sparsebound/weights.hpp"

namespace sparsebound {

class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainConfig {
    double lr = 0.03;
    double momentum = 0.9;
    std::size_t batch_size = 128;
    std::size_t epochs = 200;
    double weight_decay = 1e-3;  // applied to the top layer only (default mode)

    /// Fixed magnitude of normalized hidden layers; rho_scales overrides it
    /// per layer when non-empty (one entry per layer 1..L-1).
    double rho_scale = 0.1;
    std::vector<double> rho_scales;

    enum class Scheduler { cosine, step };
    Scheduler scheduler = Scheduler::cosine;
    std::vector<std::size_t> milestones = {60, 100, 300};
    double step_factor = 0.1;

    /// Variant protocol: standard weight normalization (trainable magnitude)
    /// on every layer, with decay acting on the magnitudes.
    bool normalize_all = false;

    std::uint64_t seed = 0;

    void validate() const;
    double hidden_magnitude(std::size_t layer) const;  // layer in 1..L-1
};

/// mu * (1 + cos(pi t / T)) / 2.
double cosine_lr(std::size_t t, std::size_t total, double mu);
/// Learning rate for an epoch under the configured scheduler.
double scheduled_lr(const TrainConfig& cfg, std::size_t epoch);

/// Weight-normalized reparametrization w^l = rho^l v^l with ||v^l||_F = 1.
/// In the default protocol hidden layers hold fixed magnitudes and a trained
/// direction while the top layer stays raw; with normalize_all every layer
/// carries a trainable magnitude.
struct NormalizedWeights {
    WeightSet directions;             // unit-Frobenius matrices where normalized
    std::vector<double> magnitudes;   // one per layer (unused entries 0)
    std::vector<std::uint8_t> layer_normalized;

    WeightSet materialize() const;
    /// max_l | ||v^l||_F - 1 | over normalized matrices.
    double max_direction_norm_error() const;
};

/// Per-matrix uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) draw, then unit
/// Frobenius rescaling of every normalized direction. Deterministic per seed.
NormalizedWeights init_weights(const ArchGraph& g, const TrainConfig& cfg, std::uint64_t seed);

struct EpochStats {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_error = 0.0;
    double test_loss = 0.0;
    double test_error = 0.0;
    double rho = 0.0;
};

struct TrainerState {
    NormalizedWeights weights;
    WeightSet momentum_buf;              // direction space for normalized layers
    std::vector<double> magnitude_buf;   // momentum on magnitudes (normalize_all)
    Rng shuffle_rng{0};
    std::size_t epoch = 0;
};

TrainerState make_trainer(const ArchGraph& g, const TrainConfig& cfg);

/// One pass over the shuffled training set. Throws TrainingDiverged when a
/// batch loss goes non-finite. Returns the mean batch loss.
double sgd_epoch(TrainerState& state, const ArchGraph& g, const Dataset& train,
                 const TrainConfig& cfg);

struct TrainResult {
    WeightSet weights;
    NormalizedWeights state;
    std::vector<EpochStats> history;
};

/// Full training loop; history rows carry per-epoch train/test error and
/// loss plus rho(w) so callers can average a trailing window.
TrainResult train(const ArchGraph& g, const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& cfg);

/// Scalar decision values f_w(x_i): the single logit when c_L = 1, otherwise
/// (logit_0 - logit_1)/2.
std::vector<double> scalar_predictions(const ArchGraph& g, const WeightSet& w, const Dataset& ds);

/// Error, ramp and MSE statistics of a weight set on a dataset.
EvalResult evaluate(const ArchGraph& g, const WeightSet& w, const Dataset& ds);

/// Mean over the trailing `window` entries of a history column.
double trailing_average(const std::vector<EpochStats>& history, double EpochStats::* column,
                        std::size_t window);

}  // namespace sparsebound
