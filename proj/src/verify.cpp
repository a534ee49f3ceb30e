#include "sparsebound/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sparsebound/autodiff.hpp"
#include "sparsebound/bounds.hpp"
#include "sparsebound/simd.hpp"
#include "sparsebound/weights.hpp"

namespace sparsebound {

double PeelingInstance::apply_g(double t) const {
    return g == GFunc::exp_scaled ? std::exp(g_scale * t) : t;
}

namespace {

double sq(double v) { return v * v; }

/// Value of the rank-one candidate W = R e_0 v^T for a unit direction v:
/// ||sum_i xi_i relu(W f_i)||^2 = R^2 (sum_i xi_i relu(v.f_i))^2.
double rank_one_value(const PeelingInstance& inst, std::size_t j, const std::vector<double>& xi,
                      const double* v) {
    double s = 0.0;
    for (std::size_t i = 0; i < inst.m; ++i) {
        const double a = simd::dot(v, inst.branch_at(j, i), inst.p);
        s += xi[i] * (a > 0.0 ? a : 0.0);
    }
    return sq(inst.norm_cap * s);
}

/// phi(W) = ||sum_i xi_i relu(W f_i)||^2 for an h x p matrix W (row-major).
double matrix_value(const PeelingInstance& inst, std::size_t j, const std::vector<double>& xi,
                    const std::vector<double>& w) {
    double total = 0.0;
    for (std::size_t r = 0; r < inst.h; ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < inst.m; ++i) {
            const double a = simd::dot(w.data() + r * inst.p, inst.branch_at(j, i), inst.p);
            s += xi[i] * (a > 0.0 ? a : 0.0);
        }
        total += sq(s);
    }
    return total;
}

void project_to_cap(std::vector<double>& w, double cap) {
    const double norm = std::sqrt(simd::norm_sq(w.data(), w.size()));
    if (norm > cap && norm > 0.0) simd::scale(w.data(), cap / norm, w.size());
}

/// Multi-start projected gradient ascent of phi over the Frobenius ball.
double ascend_matrix(const PeelingInstance& inst, std::size_t j, const std::vector<double>& xi,
                     const PeelingLhsOptions& opts, Rng& rng) {
    const std::size_t n = inst.h * inst.p;
    double best = 0.0;
    std::vector<double> w(n), grad(n), row_sums(inst.h);
    for (std::size_t restart = 0; restart < opts.ascent_restarts; ++restart) {
        for (double& x : w) x = rng.uniform(-1.0, 1.0);
        const double norm = std::sqrt(simd::norm_sq(w.data(), w.size()));
        if (norm > 0.0) simd::scale(w.data(), inst.norm_cap / norm, w.size());

        for (std::size_t it = 0; it < opts.ascent_iters; ++it) {
            // grad phi row r = 2 s_r sum_i xi_i 1[(W f_i)_r > 0] f_i
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t r = 0; r < inst.h; ++r) {
                double s = 0.0;
                for (std::size_t i = 0; i < inst.m; ++i) {
                    const double a = simd::dot(w.data() + r * inst.p, inst.branch_at(j, i), inst.p);
                    s += xi[i] * (a > 0.0 ? a : 0.0);
                }
                row_sums[r] = s;
            }
            for (std::size_t r = 0; r < inst.h; ++r) {
                for (std::size_t i = 0; i < inst.m; ++i) {
                    const double a = simd::dot(w.data() + r * inst.p, inst.branch_at(j, i), inst.p);
                    if (a > 0.0)
                        simd::axpy(2.0 * row_sums[r] * xi[i], inst.branch_at(j, i),
                                   grad.data() + r * inst.p, inst.p);
                }
            }
            const double gnorm = std::sqrt(simd::norm_sq(grad.data(), grad.size()));
            if (gnorm == 0.0) break;
            const double step = 0.4 * inst.norm_cap / (gnorm * std::sqrt(1.0 + static_cast<double>(it)));
            simd::axpy(step, grad.data(), w.data(), w.size());
            project_to_cap(w, inst.norm_cap);
        }
        best = std::max(best, matrix_value(inst, j, xi, w));
    }
    return best;
}

/// Best rank-one candidates: the sign-weighted branch sum and the individual
/// branch vectors, plus short ascent over the direction sphere.
double best_rank_one(const PeelingInstance& inst, std::size_t j, const std::vector<double>& xi,
                     Rng& rng) {
    std::vector<std::vector<double>> candidates;
    std::vector<double> s(inst.p, 0.0);
    for (std::size_t i = 0; i < inst.m; ++i)
        simd::axpy(xi[i], inst.branch_at(j, i), s.data(), inst.p);
    candidates.push_back(s);
    for (double& v : s) v = -v;
    candidates.push_back(s);
    for (std::size_t i = 0; i < inst.m; ++i) {
        std::vector<double> v(inst.branch_at(j, i), inst.branch_at(j, i) + inst.p);
        candidates.push_back(v);
        for (double& x : v) x = -x;
        candidates.push_back(v);
    }
    for (int extra = 0; extra < 4; ++extra) {
        std::vector<double> v(inst.p);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        candidates.push_back(v);
    }

    double best = 0.0;
    std::vector<double> grad(inst.p);
    for (auto& v : candidates) {
        double norm = std::sqrt(simd::norm_sq(v.data(), v.size()));
        if (norm == 0.0) continue;
        simd::scale(v.data(), 1.0 / norm, v.size());
        best = std::max(best, rank_one_value(inst, j, xi, v.data()));
        // a few ascent steps on the direction sphere
        for (int it = 0; it < 12; ++it) {
            double sgn_sum = 0.0;
            for (std::size_t i = 0; i < inst.m; ++i) {
                const double a = simd::dot(v.data(), inst.branch_at(j, i), inst.p);
                sgn_sum += xi[i] * (a > 0.0 ? a : 0.0);
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = 0; i < inst.m; ++i) {
                const double a = simd::dot(v.data(), inst.branch_at(j, i), inst.p);
                if (a > 0.0) simd::axpy(2.0 * sgn_sum * xi[i], inst.branch_at(j, i), grad.data(), inst.p);
            }
            const double gnorm = std::sqrt(simd::norm_sq(grad.data(), grad.size()));
            if (gnorm == 0.0) break;
            simd::axpy(0.25 / gnorm, grad.data(), v.data(), v.size());
            norm = std::sqrt(simd::norm_sq(v.data(), v.size()));
            if (norm == 0.0) break;
            simd::scale(v.data(), 1.0 / norm, v.size());
            best = std::max(best, rank_one_value(inst, j, xi, v.data()));
        }
    }
    return best;
}

void check_instance(const PeelingInstance& inst) {
    if (inst.m == 0 || inst.m > 16)
        throw std::invalid_argument("peeling instance: m must be in 1..16 for exhaustive signs");
    if (inst.f.size() != inst.q * inst.m * inst.p)
        throw std::invalid_argument("peeling instance: branch tensor size mismatch");
    if (!(inst.norm_cap > 0.0)) throw std::invalid_argument("peeling instance: norm cap > 0");
}

}  // namespace

double peeling_lhs(const PeelingInstance& inst, const PeelingLhsOptions& opts) {
    check_instance(inst);
    const std::size_t count = std::size_t{1} << inst.m;
    Rng rng(0xabcd1234u ^ (inst.q * 31 + inst.m));
    std::vector<double> xi(inst.m);
    double total = 0.0;
    for (std::size_t mask = 0; mask < count; ++mask) {
        for (std::size_t i = 0; i < inst.m; ++i) xi[i] = (mask >> i) & 1 ? 1.0 : -1.0;
        double sum_best = 0.0;
        for (std::size_t j = 0; j < inst.q; ++j) {
            const double rank_one = best_rank_one(inst, j, xi, rng);
            const double full = ascend_matrix(inst, j, xi, opts, rng);
            sum_best += std::max(rank_one, full);
        }
        total += inst.apply_g(std::sqrt(sum_best));
    }
    return total / static_cast<double>(count);
}

double peeling_rhs(const PeelingInstance& inst) {
    check_instance(inst);
    const std::size_t count = std::size_t{1} << inst.m;
    const double scale = std::sqrt(static_cast<double>(inst.q)) * inst.norm_cap;
    std::vector<double> xi(inst.m), s(inst.p);
    double total = 0.0;
    for (std::size_t mask = 0; mask < count; ++mask) {
        for (std::size_t i = 0; i < inst.m; ++i) xi[i] = (mask >> i) & 1 ? 1.0 : -1.0;
        double best = 0.0;
        for (std::size_t j = 0; j < inst.q; ++j) {
            std::fill(s.begin(), s.end(), 0.0);
            for (std::size_t i = 0; i < inst.m; ++i)
                simd::axpy(xi[i], inst.branch_at(j, i), s.data(), inst.p);
            best = std::max(best, inst.apply_g(scale * std::sqrt(simd::norm_sq(s.data(), s.size()))));
        }
        total += 2.0 * best;
    }
    return total / static_cast<double>(count);
}

std::pair<double, double> peeling_rhs_mc(const PeelingInstance& inst, std::size_t draws, Rng& rng) {
    check_instance(inst);
    const double scale = std::sqrt(static_cast<double>(inst.q)) * inst.norm_cap;
    std::vector<double> xi(inst.m), s(inst.p);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        for (std::size_t i = 0; i < inst.m; ++i) xi[i] = rng.sign();
        double best = 0.0;
        for (std::size_t j = 0; j < inst.q; ++j) {
            std::fill(s.begin(), s.end(), 0.0);
            for (std::size_t i = 0; i < inst.m; ++i)
                simd::axpy(xi[i], inst.branch_at(j, i), s.data(), inst.p);
            best = std::max(best, inst.apply_g(scale * std::sqrt(simd::norm_sq(s.data(), s.size()))));
        }
        const double v = 2.0 * best;
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / static_cast<double>(draws);
    const double var = std::max(0.0, sum_sq / static_cast<double>(draws) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(draws))};
}

PeelingInstance random_peeling_instance(Rng& rng, std::size_t max_m, std::size_t max_q,
                                        std::size_t max_p, std::size_t max_h) {
    PeelingInstance inst;
    inst.m = 1 + rng.bounded(max_m);
    inst.q = 1 + rng.bounded(max_q);
    inst.p = 1 + rng.bounded(max_p);
    inst.h = 1 + rng.bounded(max_h);
    inst.norm_cap = 0.25 + rng.uniform() * 1.75;
    inst.f.resize(inst.q * inst.m * inst.p);
    for (double& v : inst.f) v = rng.uniform(-1.0, 1.0);
    if (rng.bounded(2) == 0) {
        inst.g = PeelingInstance::GFunc::identity;
    } else {
        inst.g = PeelingInstance::GFunc::exp_scaled;
        inst.g_scale = 0.05 + rng.uniform() * 0.95;
        // overflow guard: scale * sqrt(q) R sum_i ||f|| stays <= 30
        const double worst_norm = static_cast<double>(inst.m) * std::sqrt(static_cast<double>(inst.p));
        const double worst_arg =
            std::sqrt(static_cast<double>(inst.q)) * inst.norm_cap * worst_norm;
        inst.g_scale = std::min(inst.g_scale, 30.0 / worst_arg);
    }
    return inst;
}

double empirical_rademacher(const ArchGraph& g, double rho_cap, const Tensor& inputs,
                            const RademacherBudget& budget, std::uint64_t seed) {
    if (g.channels(g.depth()) != 1)
        throw std::invalid_argument("empirical_rademacher: scalar output required");
    if (inputs.rank() != 3) throw std::invalid_argument("empirical_rademacher: inputs are (m, c0, pixels)");
    const std::size_t m = inputs.dim(0);
    if (m == 0) throw std::invalid_argument("empirical_rademacher: empty sample");
    if (rho_cap == 0.0) return 0.0;

    Rng rng(seed);
    const std::size_t L = g.depth();
    const std::size_t sample_stride = inputs.dim(1) * inputs.dim(2);

    // Canonicalize: hidden layers to unit max-Frobenius (folding the scale
    // into the top layer leaves the function intact), then top layer to
    // spectral norm rho. Keeps every iterate inside F_{G,rho}.
    auto canonicalize = [&](WeightSet& w) -> bool {
        double fold = 1.0;
        for (std::size_t l = 1; l < L; ++l) {
            double layer_max = 0.0;
            for (const Matrix& mat : w.layers[l - 1])
                if (!mat.a.empty()) layer_max = std::max(layer_max, mat.frobenius());
            if (layer_max == 0.0) return false;
            for (Matrix& mat : w.layers[l - 1])
                simd::scale(mat.a.data(), 1.0 / layer_max, mat.a.size());
            fold *= layer_max;
        }
        Matrix& top = w.layers[L - 1][0];
        simd::scale(top.a.data(), fold, top.a.size());
        const double sigma = spectral_norm(top).value;
        if (sigma == 0.0) return false;
        simd::scale(top.a.data(), rho_cap / sigma, top.a.size());
        return true;
    };

    auto random_weights = [&]() {
        WeightSet w = WeightSet::zeros_like(g);
        for (auto& layer : w.layers)
            for (auto& mat : layer)
                for (double& v : mat.a) v = rng.uniform(-1.0, 1.0);
        return w;
    };

    // precompute f_w(x_i) for the sampled weight sets
    std::vector<WeightSet> samples;
    std::vector<std::vector<double>> preds;
    samples.reserve(budget.weight_samples);
    ActivationTrace trace;
    double out = 0.0;
    while (samples.size() < budget.weight_samples) {
        WeightSet w = random_weights();
        if (!canonicalize(w)) continue;
        std::vector<double> row(m);
        for (std::size_t i = 0; i < m; ++i) {
            forward_into(g, w, inputs.data.data() + i * sample_stride, trace, &out);
            row[i] = out;
        }
        samples.push_back(std::move(w));
        preds.push_back(std::move(row));
    }

    const bool exhaustive = m <= 12;
    const std::size_t count = exhaustive ? (std::size_t{1} << m) : budget.mc_draws;

    std::vector<double> xi(m);
    WeightSet grad = WeightSet::zeros_like(g);
    double total = 0.0;
    for (std::size_t draw = 0; draw < count; ++draw) {
        if (exhaustive) {
            for (std::size_t i = 0; i < m; ++i) xi[i] = (draw >> i) & 1 ? 1.0 : -1.0;
        } else {
            for (std::size_t i = 0; i < m; ++i) xi[i] = rng.sign();
        }

        // best sampled weight set for this sign vector
        double best = 0.0;
        std::size_t best_idx = 0;
        for (std::size_t s = 0; s < samples.size(); ++s) {
            const double corr = std::abs(simd::dot(preds[s].data(), xi.data(), m));
            if (corr > best) {
                best = corr;
                best_idx = s;
            }
        }

        // refine by projected gradient ascent from the strongest starts
        for (std::size_t restart = 0; restart < budget.ascent_restarts; ++restart) {
            WeightSet w = restart == 0 ? samples[best_idx] : samples[rng.bounded(samples.size())];
            for (std::size_t it = 0; it < budget.ascent_iters; ++it) {
                double corr = 0.0;
                grad.fill(0.0);
                for (std::size_t i = 0; i < m; ++i) {
                    forward_into(g, w, inputs.data.data() + i * sample_stride, trace, &out);
                    corr += xi[i] * out;
                    const double upstream = xi[i];
                    backward_accumulate(g, w, trace, &upstream, grad);
                }
                const double sgn = corr >= 0.0 ? 1.0 : -1.0;
                double gnorm_sq = 0.0;
                for (const auto& layer : grad.layers)
                    for (const auto& mat : layer) gnorm_sq += simd::norm_sq(mat.a.data(), mat.a.size());
                if (gnorm_sq == 0.0) break;
                const double step = 0.3 / (std::sqrt(gnorm_sq) * std::sqrt(1.0 + static_cast<double>(it)));
                w.add_scaled(grad, sgn * step);
                if (!canonicalize(w)) break;
                best = std::max(best, std::abs(corr));
            }
            double corr = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                forward_into(g, w, inputs.data.data() + i * sample_stride, trace, &out);
                corr += xi[i] * out;
            }
            best = std::max(best, std::abs(corr));
        }
        total += best;
    }
    return total / static_cast<double>(count) / static_cast<double>(m);
}

ConcentrationResult concentration_check(const std::vector<std::vector<double>>& z, double alpha) {
    const std::size_t m = z.size();
    if (m == 0 || m > 16)
        throw std::invalid_argument("concentration_check: m must be in 1..16 for exhaustive signs");
    const std::size_t p = z[0].size();
    double sum_norm_sq = 0.0;
    for (const auto& v : z) {
        if (v.size() != p) throw std::invalid_argument("concentration_check: ragged vectors");
        sum_norm_sq += simd::norm_sq(v.data(), v.size());
    }

    const std::size_t count = std::size_t{1} << m;
    std::vector<double> acc(p);
    double lhs = 0.0;
    for (std::size_t mask = 0; mask < count; ++mask) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i)
            simd::axpy((mask >> i) & 1 ? 1.0 : -1.0, z[i].data(), acc.data(), p);
        lhs += std::exp(alpha * std::sqrt(simd::norm_sq(acc.data(), acc.size())));
    }
    lhs /= static_cast<double>(count);

    ConcentrationResult res;
    res.lhs = lhs;
    res.rhs = std::exp(alpha * alpha * sum_norm_sq / 2.0 + alpha * std::sqrt(sum_norm_sq));
    res.slack = res.rhs - res.lhs;
    res.holds = res.lhs <= res.rhs;
    return res;
}

std::pair<double, double> concentration_lhs_mc(const std::vector<std::vector<double>>& z,
                                               double alpha, std::size_t draws, Rng& rng) {
    const std::size_t m = z.size();
    const std::size_t p = z.empty() ? 0 : z[0].size();
    std::vector<double> acc(p);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) simd::axpy(rng.sign(), z[i].data(), acc.data(), p);
        const double v = std::exp(alpha * std::sqrt(simd::norm_sq(acc.data(), acc.size())));
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / static_cast<double>(draws);
    const double var = std::max(0.0, sum_sq / static_cast<double>(draws) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(draws))};
}

double peeling_chain_bound(double lambda, std::size_t depth, std::size_t deg, double rho,
                           double patch_term) {
    if (!(lambda > 0.0)) throw std::invalid_argument("peeling_chain_bound: lambda > 0");
    const double a = static_cast<double>(depth) * std::log(2.0 * static_cast<double>(deg));
    return a / lambda + lambda * rho * rho * patch_term / 2.0 + rho * std::sqrt(patch_term);
}

double lambda_star(std::size_t depth, std::size_t deg, double rho, double patch_term) {
    const double a = static_cast<double>(depth) * std::log(2.0 * static_cast<double>(deg));
    return std::sqrt(2.0 * a / (rho * rho * patch_term));
}

ArchGraph random_dag(Rng& rng, const RandomDagSpec& spec) {
    const std::size_t L = 1 + rng.bounded(spec.max_depth);
    std::vector<std::size_t> widths(L + 1);
    std::vector<std::size_t> channels(L + 1);
    for (std::size_t l = 0; l <= L; ++l) {
        widths[l] = l == L ? 1 : 1 + rng.bounded(spec.max_width);
        channels[l] = 1 + rng.bounded(spec.max_channels);
    }

    std::vector<std::vector<std::vector<std::uint32_t>>> preds(L);
    for (std::size_t l = 1; l <= L; ++l) {
        preds[l - 1].resize(widths[l]);
        std::vector<std::uint8_t> covered(widths[l - 1], 0);
        for (std::size_t j = 0; j < widths[l]; ++j) {
            const std::size_t cap = std::min(spec.max_pred, widths[l - 1]);
            const std::size_t take = 1 + rng.bounded(cap);
            std::vector<std::uint32_t> all(widths[l - 1]);
            for (std::size_t t = 0; t < all.size(); ++t) all[t] = static_cast<std::uint32_t>(t);
            rng.shuffle(all);
            std::vector<std::uint32_t> pick(all.begin(), all.begin() + take);
            std::sort(pick.begin(), pick.end());
            for (std::uint32_t t : pick) covered[t] = 1;
            preds[l - 1][j] = std::move(pick);
        }
        // patch coverage so the dead-neuron validation passes
        for (std::size_t t = 0; t < widths[l - 1]; ++t) {
            if (covered[t]) continue;
            auto& list = preds[l - 1][rng.bounded(widths[l])];
            list.push_back(static_cast<std::uint32_t>(t));
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
        }
    }
    return build_dag(std::move(widths), std::move(channels), std::move(preds), false);
}

}  // namespace sparsebound
