#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparsebound/arch.hpp"
#include "sparsebound/tensor.hpp"
#include "sparsebound/weights.hpp"

namespace sparsebound {

/// Largest singular value estimate. Power iteration reports its convergence
/// state instead of silently accepting a stale iterate.
struct SpectralResult {
    double value = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
};

/// Largest singular value. Closed form when min(rows, cols) <= 2, otherwise
/// power iteration on the Gram matrix (relative tolerance 1e-9, at most 1000
/// iterations, deterministic all-ones start, one seeded restart on
/// stagnation).
SpectralResult spectral_norm(const Matrix& m);

/// rho(w): spectral norm of the output matrix times the product over hidden
/// layers of the maximum per-neuron Frobenius norm.
double rho(const ArchGraph& g, const WeightSet& w);

/// rho~(w): product over all layers of the root-sum-square of the per-neuron
/// Frobenius norms; shared layers expand to one copy per real neuron.
double rho_tilde(const ArchGraph& g, const WeightSet& w);

/// Joint maximum over chains of (product of |pred| sizes) * (terminal patch
/// norm); patch_norms[j] = sum_i ||z^0_j(x_i)||^2 from data-io.
PathProduct patch_term(const ArchGraph& g, const std::vector<double>& patch_norms);

/// (rho/m) * (1 + sqrt(2 L log(2 deg))) * sqrt(patch term).
double rademacher_bound(const ArchGraph& g, double rho_value,
                        const std::vector<double>& patch_norms, std::size_t m);

/// Test-error bound for interpolating networks at confidence delta:
/// ((rho+1)/m)(1+sqrt(2L log(2 deg))) sqrt(patch term)
///   + 3 sqrt(log(2(rho+2)^2/delta) / (2m)).
double gen_bound(const ArchGraph& g, double rho_value, const std::vector<double>& patch_norms,
                 std::size_t m, double delta);

/// Shared-kernel specialization: (rho/m)(1+sqrt(2L log(2 max k_l)))
/// * sqrt(prod k_l * max_j patch_norms[j]); only defined when every layer has
/// a uniform predecessor count.
std::optional<double> convnet_bound(const ArchGraph& g, double rho_value,
                                    const std::vector<double>& patch_norms, std::size_t m);

struct BetaBalance {
    double beta = 1.0;
    bool degenerate = false;  // all-zero dataset, beta undefined
};

/// Smallest beta with max-pixel-norm^2 <= beta * mean-pixel-norm^2 per
/// sample; padding nodes are skipped. images: (m, c_0, pixels).
BetaBalance beta_balance(const Tensor& images);

/// Scale form (rho/sqrt(m)) sqrt(L beta log(deg) avg ||x||^2), constant 1.
double simplified_bound(double rho_value, std::size_t m, std::size_t depth, std::size_t deg,
                        double beta, double avg_input_norm_sq);

/// Dense-expansion baseline (rho/m) sqrt(L prod_l d_l sum_i ||x_i||^2) using
/// real layer widths.
double naive_bound(const ArchGraph& g, double rho_value, double sum_input_norm_sq,
                   std::size_t m);

/// Parameter-counting baseline sqrt((N (sum_l ||w^l||_2 + log(1/gamma))
/// + log(1/delta)) / m), constant 1.
double long_bound(std::size_t parameter_count, const std::vector<double>& spectral_norms,
                  double gamma, double delta, std::size_t m);

/// All capacity quantities of one (graph, weights, dataset) triple.
struct BoundReport {
    double rho = 0.0;
    double rho_tilde = 0.0;
    std::size_t deg = 0;
    std::size_t depth = 0;
    std::size_t m = 0;
    double path_product = 0.0;
    double patch_term = 0.0;
    std::vector<std::uint32_t> witness_path;
    double rademacher_bound = 0.0;
    double gen_bound = 0.0;
    std::optional<double> convnet_bound;
    double beta = 1.0;
    bool beta_degenerate = false;
    double simplified_bound = 0.0;
    double naive_bound = 0.0;
    std::optional<double> long_bound;
    double rho_over_sqrt_m = 0.0;
    bool interpolation = false;  // all training ramp losses zero
    double delta = 0.0;
    bool spectral_converged = true;
};

nlohmann::json bound_report_to_json(const BoundReport& r);

}  // namespace sparsebound
