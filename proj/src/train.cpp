#include "sparsebound/train.hpp"

#include <cmath>
#include <numbers>

#include "sparsebound/autodiff.hpp"
#include "sparsebound/bounds.hpp"
#include "sparsebound/simd.hpp"

namespace sparsebound {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw std::invalid_argument("train config: momentum in [0,1)");
    if (batch_size == 0) throw std::invalid_argument("train config: batch_size >= 1");
    if (weight_decay < 0.0) throw std::invalid_argument("train config: weight_decay >= 0");
    if (!(rho_scale > 0.0)) throw std::invalid_argument("train config: rho_scale must be positive");
    for (double r : rho_scales)
        if (!(r > 0.0)) throw std::invalid_argument("train config: rho scales must be positive");
    if (scheduler == Scheduler::step && !(step_factor > 0.0))
        throw std::invalid_argument("train config: step_factor must be positive");
}

double TrainConfig::hidden_magnitude(std::size_t layer) const {
    if (!rho_scales.empty()) {
        if (layer - 1 >= rho_scales.size())
            throw std::invalid_argument("train config: rho_scales shorter than hidden depth");
        return rho_scales[layer - 1];
    }
    return rho_scale;
}

double cosine_lr(std::size_t t, std::size_t total, double mu) {
    if (total == 0) return mu;
    const double ratio = static_cast<double>(t) / static_cast<double>(total);
    return mu * (1.0 + std::cos(std::numbers::pi * ratio)) / 2.0;
}

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.scheduler == TrainConfig::Scheduler::cosine) return cosine_lr(epoch, cfg.epochs, cfg.lr);
    double rate = cfg.lr;
    for (std::size_t milestone : cfg.milestones)
        if (epoch >= milestone) rate *= cfg.step_factor;
    return rate;
}

WeightSet NormalizedWeights::materialize() const {
    WeightSet w = directions;
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        if (!layer_normalized[l]) continue;
        for (auto& m : w.layers[l]) simd::scale(m.a.data(), magnitudes[l], m.a.size());
    }
    return w;
}

double NormalizedWeights::max_direction_norm_error() const {
    double worst = 0.0;
    for (std::size_t l = 0; l < directions.layers.size(); ++l) {
        if (!layer_normalized[l]) continue;
        for (const auto& m : directions.layers[l]) {
            if (m.a.empty()) continue;
            worst = std::max(worst, std::abs(m.frobenius() - 1.0));
        }
    }
    return worst;
}

NormalizedWeights init_weights(const ArchGraph& g, const TrainConfig& cfg, std::uint64_t seed) {
    const std::size_t L = g.depth();
    NormalizedWeights nw;
    nw.directions = WeightSet::zeros_like(g);
    nw.magnitudes.assign(L, 0.0);
    nw.layer_normalized.assign(L, 0);

    Rng rng(seed);
    for (std::size_t l = 1; l <= L; ++l) {
        for (auto& m : nw.directions.layers[l - 1]) {
            if (m.a.empty()) continue;
            const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols));
            for (double& v : m.a) v = rng.uniform(-bound, bound);
        }
        const bool normalize = cfg.normalize_all || l < L;
        if (!normalize) continue;
        nw.layer_normalized[l - 1] = 1;
        double magnitude =
            cfg.normalize_all ? 0.0 : cfg.hidden_magnitude(l);
        for (auto& m : nw.directions.layers[l - 1]) {
            if (m.a.empty()) continue;
            const double fro = m.frobenius();
            if (cfg.normalize_all) magnitude = std::max(magnitude, fro);
            if (fro > 0.0) simd::scale(m.a.data(), 1.0 / fro, m.a.size());
        }
        nw.magnitudes[l - 1] = magnitude;
    }
    return nw;
}

TrainerState make_trainer(const ArchGraph& g, const TrainConfig& cfg) {
    cfg.validate();
    TrainerState state;
    state.weights = init_weights(g, cfg, cfg.seed);
    state.momentum_buf = WeightSet::zeros_like(g);
    state.magnitude_buf.assign(g.depth(), 0.0);
    state.shuffle_rng = Rng(cfg.seed).fork(0x0d0e0f10ull);
    return state;
}

namespace {

/// Project the raw weight gradient onto the unit sphere's tangent space at v
/// and rescale by the layer magnitude: g_v = rho * (g_w - <g_w, v> v).
void direction_gradient(const Matrix& v, Matrix& g, double magnitude) {
    const double radial = simd::dot(g.a.data(), v.a.data(), g.a.size());
    simd::axpy(-radial, v.a.data(), g.a.data(), g.a.size());
    simd::scale(g.a.data(), magnitude, g.a.size());
}

void renormalize(Matrix& v) {
    const double fro = v.frobenius();
    if (fro > 0.0) simd::scale(v.a.data(), 1.0 / fro, v.a.size());
}

}  // namespace

double sgd_epoch(TrainerState& state, const ArchGraph& g, const Dataset& train,
                 const TrainConfig& cfg) {
    const std::size_t L = g.depth();
    const std::size_t m = train.size();
    const std::size_t k = g.channels(L);
    const double rate = scheduled_lr(cfg, state.epoch);

    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    state.shuffle_rng.shuffle(order);

    WeightSet materialized = state.weights.materialize();
    WeightSet grad = WeightSet::zeros_like(g);
    ActivationTrace trace;
    std::vector<double> out(k), upstream(k);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < m; start += cfg.batch_size) {
        const std::size_t bsize = std::min(cfg.batch_size, m - start);
        const double inv_b = 1.0 / static_cast<double>(bsize);
        grad.fill(0.0);
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < bsize; ++b) {
            const std::size_t i = order[start + b];
            forward_into(g, materialized, train.image(i), trace, out.data());
            double sample_loss = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                const double target = k == 1 ? train.labels_pm[i] : train.labels_onehot.at(i, r);
                const double diff = out[r] - target;
                sample_loss += diff * diff;
                upstream[r] = 2.0 * diff * inv_b;
            }
            batch_loss += sample_loss * inv_b;
            backward_accumulate(g, materialized, trace, upstream.data(), grad);
        }
        if (!std::isfinite(batch_loss)) {
            throw TrainingDiverged("non-finite batch loss at epoch " + std::to_string(state.epoch) +
                                   ", batch " + std::to_string(batches));
        }
        loss_sum += batch_loss;
        ++batches;

        for (std::size_t l = 1; l <= L; ++l) {
            const bool normalized = state.weights.layer_normalized[l - 1] != 0;
            auto& dir_layer = state.weights.directions.layers[l - 1];
            auto& buf_layer = state.momentum_buf.layers[l - 1];
            auto& grad_layer = grad.layers[l - 1];

            if (normalized) {
                double magnitude_grad = 0.0;
                for (std::size_t j = 0; j < dir_layer.size(); ++j) {
                    Matrix& v = dir_layer[j];
                    if (v.a.empty()) continue;
                    Matrix& gw = grad_layer[j];
                    if (cfg.normalize_all)
                        magnitude_grad += simd::dot(gw.a.data(), v.a.data(), gw.a.size());
                    direction_gradient(v, gw, state.weights.magnitudes[l - 1]);
                    Matrix& buf = buf_layer[j];
                    simd::scale(buf.a.data(), cfg.momentum, buf.a.size());
                    simd::axpy(1.0, gw.a.data(), buf.a.data(), buf.a.size());
                    simd::axpy(-rate, buf.a.data(), v.a.data(), v.a.size());
                    renormalize(v);
                }
                if (cfg.normalize_all) {
                    magnitude_grad += cfg.weight_decay * state.weights.magnitudes[l - 1];
                    double& buf = state.magnitude_buf[l - 1];
                    buf = cfg.momentum * buf + magnitude_grad;
                    state.weights.magnitudes[l - 1] -= rate * buf;
                }
            } else {
                // raw top layer: decay folds into the gradient
                Matrix& w = dir_layer[0];
                Matrix& gw = grad_layer[0];
                simd::axpy(cfg.weight_decay, w.a.data(), gw.a.data(), gw.a.size());
                Matrix& buf = buf_layer[0];
                simd::scale(buf.a.data(), cfg.momentum, buf.a.size());
                simd::axpy(1.0, gw.a.data(), buf.a.data(), buf.a.size());
                simd::axpy(-rate, buf.a.data(), w.a.data(), w.a.size());
            }
        }
        materialized = state.weights.materialize();
    }
    ++state.epoch;
    return batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
}

std::vector<double> scalar_predictions(const ArchGraph& g, const WeightSet& w, const Dataset& ds) {
    const std::size_t k = g.channels(g.depth());
    if (k != 1 && k != 2)
        throw std::invalid_argument("scalar_predictions: output dimension must be 1 or 2");
    std::vector<double> preds(ds.size());
    ActivationTrace trace;
    std::vector<double> out(k);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        forward_into(g, w, ds.image(i), trace, out.data());
        preds[i] = k == 1 ? out[0] : two_logit_score(out[0], out[1]);
    }
    return preds;
}

EvalResult evaluate(const ArchGraph& g, const WeightSet& w, const Dataset& ds) {
    const std::size_t k = g.channels(g.depth());
    const std::size_t m = ds.size();
    if (m == 0) throw std::invalid_argument("evaluate: empty dataset");

    EvalResult res;
    res.m = m;
    ActivationTrace trace;
    std::vector<double> out(k);
    std::size_t wrong = 0;
    double ramp_sum = 0.0, loss_sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        forward_into(g, w, ds.image(i), trace, out.data());
        const double f = k == 1 ? out[0] : two_logit_score(out[0], out[1]);
        const double y = ds.labels_pm[i];
        if (y * f <= 0.0) ++wrong;
        ramp_sum += ramp_loss(y, f);
        for (std::size_t r = 0; r < k; ++r) {
            const double target = k == 1 ? y : ds.labels_onehot.at(i, r);
            const double diff = out[r] - target;
            loss_sum += diff * diff;
        }
    }
    res.error = static_cast<double>(wrong) / static_cast<double>(m);
    res.ramp_mean = ramp_sum / static_cast<double>(m);
    res.loss_mean = loss_sum / static_cast<double>(m);
    return res;
}

TrainResult train(const ArchGraph& g, const Dataset& train_set, const Dataset& test_set,
                  const TrainConfig& cfg) {
    cfg.validate();
    TrainerState state = make_trainer(g, cfg);

    TrainResult result;
    result.history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = scheduled_lr(cfg, epoch);
        sgd_epoch(state, g, train_set, cfg);

        const WeightSet w = state.weights.materialize();
        const EvalResult on_train = evaluate(g, w, train_set);
        const EvalResult on_test = evaluate(g, w, test_set);
        stats.train_loss = on_train.loss_mean;
        stats.train_error = on_train.error;
        stats.test_loss = on_test.loss_mean;
        stats.test_error = on_test.error;
        stats.rho = rho(g, w);
        result.history.push_back(stats);
    }
    result.state = state.weights;
    result.weights = state.weights.materialize();
    return result;
}

double trailing_average(const std::vector<EpochStats>& history, double EpochStats::* column,
                        std::size_t window) {
    if (history.empty()) return 0.0;
    const std::size_t n = std::min(window == 0 ? history.size() : window, history.size());
    double sum = 0.0;
    for (std::size_t i = history.size() - n; i < history.size(); ++i) sum += history[i].*column;
    return sum / static_cast<double>(n);
}

}  // namespace sparsebound
