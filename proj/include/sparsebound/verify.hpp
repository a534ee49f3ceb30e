#pragma once

#include <cstdint>
#include <vector>

#include "sparsebound/arch.hpp"
#include "sparsebound/rng.hpp"
#include "sparsebound/tensor.hpp"

namespace sparsebound {

/// One peeling-lemma test case: q fixed branch functions sampled at m points,
/// each a p-vector; the inner supremum ranges over per-branch matrices W_j of
/// Frobenius norm at most norm_cap, with hidden width h.
struct PeelingInstance {
    std::size_t q = 1;
    std::size_t m = 1;
    std::size_t p = 1;
    std::size_t h = 1;
    double norm_cap = 1.0;

    /// f[(j*m + i)*p + d] = component d of f_j(x_i).
    std::vector<double> f;

    enum class GFunc { identity, exp_scaled };
    GFunc g = GFunc::identity;
    double g_scale = 1.0;

    double apply_g(double t) const;
    const double* branch_at(std::size_t j, std::size_t i) const {
        return f.data() + (j * m + i) * p;
    }
};

struct PeelingLhsOptions {
    std::size_t ascent_restarts = 16;
    std::size_t ascent_iters = 30;
};

/// Exact expectation over all 2^m sign vectors of
/// g(sqrt(sum_j sup_{||W_j|| <= R} ||sum_i xi_i relu(W_j f_j(x_i))||^2)).
/// The inner supremum combines multi-start projected gradient ascent with the
/// proof's extremal rank-one candidates (all norm concentrated on one row),
/// so the estimate is a lower bound that attains the dominating term.
double peeling_lhs(const PeelingInstance& inst, const PeelingLhsOptions& opts = {});

/// Exact expectation of 2 max_j g(sqrt(q) R ||sum_i xi_i f_j(x_i)||).
double peeling_rhs(const PeelingInstance& inst);

/// Monte-Carlo estimate of the same quantity (mean, standard error).
std::pair<double, double> peeling_rhs_mc(const PeelingInstance& inst, std::size_t draws,
                                         Rng& rng);

PeelingInstance random_peeling_instance(Rng& rng, std::size_t max_m = 8, std::size_t max_q = 3,
                                        std::size_t max_p = 3, std::size_t max_h = 3);

struct RademacherBudget {
    std::size_t weight_samples = 128;
    std::size_t ascent_restarts = 2;
    std::size_t ascent_iters = 30;
    std::size_t mc_draws = 10000;  // used when m is too large for exhaustive signs
};

/// Certified lower-bound estimate of the empirical Rademacher complexity of
/// F_{G,rho} on X: (1/m) E_xi sup |sum_i xi_i f_w(x_i)| with the supremum
/// searched over sampled weight sets plus projected gradient ascent, all
/// canonicalized to rho(w) = rho. Exhaustive signs for m <= 12. Requires a
/// scalar output (c_L = 1).
double empirical_rademacher(const ArchGraph& g, double rho_cap, const Tensor& inputs,
                            const RademacherBudget& budget, std::uint64_t seed);

struct ConcentrationResult {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    double slack = 0.0;
};

/// Checks E_xi exp(alpha ||sum_i xi_i z_i||) <= exp(alpha^2 S/2 + alpha
/// sqrt(S)) with S = sum_i ||z_i||^2, by exhaustive sign enumeration.
ConcentrationResult concentration_check(const std::vector<std::vector<double>>& z, double alpha);

/// Monte-Carlo estimate of the concentration LHS (mean, standard error).
std::pair<double, double> concentration_lhs_mc(const std::vector<std::vector<double>>& z,
                                               double alpha, std::size_t draws, Rng& rng);

/// The chain bound whose lambda trade-off the proof optimizes:
/// L log(2 deg)/lambda + lambda rho^2 patch/2 + rho sqrt(patch).
double peeling_chain_bound(double lambda, std::size_t depth, std::size_t deg, double rho,
                           double patch_term);

/// Closed-form minimizer sqrt(2 L log(2 deg) / (rho^2 patch)).
double lambda_star(std::size_t depth, std::size_t deg, double rho, double patch_term);

/// Small random scalar-output DAGs for property suites; widths and depth
/// bounded, full coverage patched in so validation passes.
struct RandomDagSpec {
    std::size_t max_depth = 3;
    std::size_t max_width = 8;
    std::size_t max_pred = 4;
    std::size_t max_channels = 1;
};
ArchGraph random_dag(Rng& rng, const RandomDagSpec& spec);

}  // namespace sparsebound
