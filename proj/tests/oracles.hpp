#pragma once

// Independent reference implementations used only by tests. Each oracle
// computes its quantity by a different route than the library (exhaustive
// enumeration, dense linear algebra, finite differences) so agreement is
// meaningful.

#include <cmath>
#include <functional>
#include <vector>

#include "sparsebound/arch.hpp"
#include "sparsebound/autodiff.hpp"
#include "sparsebound/rng.hpp"
#include "sparsebound/weights.hpp"

namespace oracles {

/// Exhaustive enumeration of all output-to-input chains; returns the maximum
/// of prod |pred| (times the terminal weight when given).
inline double brute_force_path_product(const sparsebound::ArchGraph& g,
                                       const std::vector<double>* weights = nullptr) {
    double best = -1.0;
    std::function<void(std::size_t, std::size_t, double)> walk =
        [&](std::size_t layer, std::size_t node, double acc) {
            if (layer == 0) {
                const double w = weights ? (*weights)[node] : 1.0;
                best = std::max(best, acc * w);
                return;
            }
            const auto& pred = g.pred(layer, node);
            const double factor = static_cast<double>(pred.size());
            for (auto q : pred) walk(layer - 1, q, acc * factor);
        };
    walk(g.depth(), 0, 1.0);
    return best;
}

/// Central finite differences of a scalar function of the weights.
inline sparsebound::WeightSet finite_difference_grad(
    const sparsebound::ArchGraph& g, sparsebound::WeightSet w,
    const std::function<double(const sparsebound::WeightSet&)>& f, double step) {
    sparsebound::WeightSet grad = sparsebound::WeightSet::zeros_like(g);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        for (std::size_t j = 0; j < w.layers[l].size(); ++j) {
            for (std::size_t t = 0; t < w.layers[l][j].a.size(); ++t) {
                const double saved = w.layers[l][j].a[t];
                w.layers[l][j].a[t] = saved + step;
                const double up = f(w);
                w.layers[l][j].a[t] = saved - step;
                const double down = f(w);
                w.layers[l][j].a[t] = saved;
                grad.layers[l][j].a[t] = (up - down) / (2.0 * step);
            }
        }
    }
    return grad;
}

inline double weightset_norm(const sparsebound::WeightSet& w) {
    double acc = 0.0;
    for (const auto& layer : w.layers)
        for (const auto& m : layer)
            for (double v : m.a) acc += v * v;
    return std::sqrt(acc);
}

inline double weightset_diff_norm(const sparsebound::WeightSet& a,
                                  const sparsebound::WeightSet& b) {
    double acc = 0.0;
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        for (std::size_t j = 0; j < a.layers[l].size(); ++j)
            for (std::size_t t = 0; t < a.layers[l][j].a.size(); ++t) {
                const double d = a.layers[l][j].a[t] - b.layers[l][j].a[t];
                acc += d * d;
            }
    return std::sqrt(acc);
}

/// Largest singular value by one-sided Jacobi rotations on a dense copy;
/// independent of the library's power iteration.
inline double jacobi_spectral_norm(const sparsebound::Matrix& m) {
    const std::size_t rows = m.rows, cols = m.cols;
    // columns of a working copy; Jacobi orthogonalizes column pairs
    std::vector<std::vector<double>> a(cols, std::vector<double>(rows));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) a[c][r] = m.at(r, c);

    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t r = 0; r < rows; ++r) {
                    app += a[p][r] * a[p][r];
                    aqq += a[q][r] * a[q][r];
                    apq += a[p][r] * a[q][r];
                }
                off = std::max(off, std::abs(apq));
                if (std::abs(apq) < 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t r = 0; r < rows; ++r) {
                    const double vp = a[p][r], vq = a[q][r];
                    a[p][r] = c * vp - s * vq;
                    a[q][r] = s * vp + c * vq;
                }
            }
        }
        if (off < 1e-14) break;
    }
    double best = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
        double norm_sq = 0.0;
        for (std::size_t r = 0; r < rows; ++r) norm_sq += a[c][r] * a[c][r];
        best = std::max(best, norm_sq);
    }
    return std::sqrt(best);
}

/// Random weights for a graph, entries uniform in [-scale, scale].
inline sparsebound::WeightSet random_weights(const sparsebound::ArchGraph& g,
                                             sparsebound::Rng& rng, double scale = 1.0) {
    sparsebound::WeightSet w = sparsebound::WeightSet::zeros_like(g);
    for (auto& layer : w.layers)
        for (auto& m : layer)
            for (double& v : m.a) v = rng.uniform(-scale, scale);
    return w;
}

/// Random pixel tensor (c0, pixels) for a graph input.
inline sparsebound::Tensor random_input(const sparsebound::ArchGraph& g, sparsebound::Rng& rng,
                                        double lo = -1.0, double hi = 1.0) {
    sparsebound::Tensor x({g.channels(0), g.pixel_count()});
    for (double& v : x.data) v = rng.uniform(lo, hi);
    return x;
}

}  // namespace oracles
