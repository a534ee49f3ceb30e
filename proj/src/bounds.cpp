#include "sparsebound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sparsebound/rng.hpp"
#include "sparsebound/simd.hpp"

namespace sparsebound {
namespace {

/// Largest singular value of a matrix whose smaller side has <= 2 rows:
/// eigenvalues of the 2x2 Gram matrix in closed form.
double tiny_spectral(const Matrix& m) {
    const bool wide = m.rows <= m.cols;
    const std::size_t small_dim = wide ? m.rows : m.cols;
    if (small_dim == 0) return 0.0;
    if (small_dim == 1) return std::sqrt(m.frobenius_sq());

    // G = A A^T (wide) or A^T A (tall), a 2x2 symmetric PSD matrix
    double g00 = 0.0, g01 = 0.0, g11 = 0.0;
    if (wide) {
        g00 = simd::dot(m.row(0), m.row(0), m.cols);
        g01 = simd::dot(m.row(0), m.row(1), m.cols);
        g11 = simd::dot(m.row(1), m.row(1), m.cols);
    } else {
        for (std::size_t r = 0; r < m.rows; ++r) {
            const double a = m.at(r, 0), b = m.at(r, 1);
            g00 += a * a;
            g01 += a * b;
            g11 += b * b;
        }
    }
    const double tr = g00 + g11;
    const double disc = std::sqrt(std::max(0.0, (g00 - g11) * (g00 - g11) + 4.0 * g01 * g01));
    return std::sqrt(std::max(0.0, 0.5 * (tr + disc)));
}

double apply_gram(const Matrix& m, const std::vector<double>& v, std::vector<double>& mv,
                  std::vector<double>& out) {
    // out = A^T (A v); returns ||A v||
    mv.resize(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) mv[r] = simd::dot(m.row(r), v.data(), m.cols);
    const double norm_av = std::sqrt(simd::norm_sq(mv.data(), mv.size()));
    out.assign(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) simd::axpy(mv[r], m.row(r), out.data(), m.cols);
    return norm_av;
}

}  // namespace

namespace {

/// One power-iteration run on the Gram matrix from a given start vector.
/// Stops on the eigen-residual ||G v - sigma^2 v|| <= 1e-9 sigma^2, which
/// pins the returned value to an eigenvalue of G within that tolerance.
SpectralResult power_iterate(const Matrix& m, std::vector<double> v) {
    constexpr double kRelTol = 1e-9;
    constexpr std::size_t kMaxIters = 1000;

    SpectralResult res;
    std::vector<double> mv, next, residual;
    double sigma = 0.0;
    for (std::size_t it = 1; it <= kMaxIters; ++it) {
        const double norm_av = apply_gram(m, v, mv, next);  // next = G v, ||v|| = 1
        res.iterations = it;
        sigma = norm_av;
        const double sigma_sq = norm_av * norm_av;

        residual = next;
        simd::axpy(-sigma_sq, v.data(), residual.data(), residual.size());
        const double res_norm = std::sqrt(simd::norm_sq(residual.data(), residual.size()));
        if (res_norm <= kRelTol * std::max(sigma_sq, 1e-300)) {
            res.value = sigma;
            return res;
        }

        const double norm_next = std::sqrt(simd::norm_sq(next.data(), next.size()));
        if (norm_next == 0.0) {
            // start vector sat in the null space
            res.value = 0.0;
            return res;
        }
        simd::scale(next.data(), 1.0 / norm_next, next.size());
        v.swap(next);
    }
    res.value = sigma;
    res.converged = false;
    return res;
}

}  // namespace

SpectralResult spectral_norm(const Matrix& m) {
    SpectralResult res;
    if (m.rows == 0 || m.cols == 0) return res;
    if (std::min(m.rows, m.cols) <= 2) {
        res.value = tiny_spectral(m);
        return res;
    }
    if (m.frobenius_sq() == 0.0) return res;

    std::vector<double> ones(m.cols, 1.0 / std::sqrt(static_cast<double>(m.cols)));
    SpectralResult first = power_iterate(m, std::move(ones));

    // the all-ones start can stagnate in a subdominant eigenspace; one seeded
    // random restart guards against that
    Rng rng(0x5eed5eedu);
    std::vector<double> randomized(m.cols);
    for (double& x : randomized) x = rng.uniform(-1.0, 1.0);
    const double nv = std::sqrt(simd::norm_sq(randomized.data(), randomized.size()));
    simd::scale(randomized.data(), 1.0 / nv, randomized.size());
    SpectralResult second = power_iterate(m, std::move(randomized));

    res = first.value >= second.value ? first : second;
    res.converged = first.converged && second.converged;
    res.iterations = first.iterations + second.iterations;
    return res;
}

double rho(const ArchGraph& g, const WeightSet& w) {
    if (!w.shape_matches(g)) throw std::invalid_argument("rho: weights do not match the graph");
    const std::size_t L = g.depth();
    // d_L = 1, so the output layer holds exactly one matrix either way
    double product = spectral_norm(w.layers[L - 1][0]).value;
    for (std::size_t l = 1; l < L; ++l) {
        double layer_max = 0.0;
        for (const Matrix& m : w.layers[l - 1]) {
            if (m.a.empty()) continue;
            layer_max = std::max(layer_max, m.frobenius());
        }
        product *= layer_max;
    }
    return product;
}

double rho_tilde(const ArchGraph& g, const WeightSet& w) {
    if (!w.shape_matches(g)) throw std::invalid_argument("rho_tilde: weights do not match the graph");
    double product = 1.0;
    for (std::size_t l = 1; l <= g.depth(); ++l) {
        double sum_sq = 0.0;
        if (g.shared()) {
            sum_sq = static_cast<double>(g.real_width(l)) * w.layers[l - 1][0].frobenius_sq();
        } else {
            for (const Matrix& m : w.layers[l - 1]) sum_sq += m.frobenius_sq();
        }
        product *= std::sqrt(sum_sq);
    }
    return product;
}

PathProduct patch_term(const ArchGraph& g, const std::vector<double>& patch_norms) {
    return max_path_pred_product(g, &patch_norms);
}

namespace {
double depth_log_factor(const ArchGraph& g) {
    const double L = static_cast<double>(g.depth());
    const double deg = static_cast<double>(degree(g));
    return 1.0 + std::sqrt(2.0 * L * std::log(2.0 * deg));
}
}  // namespace

double rademacher_bound(const ArchGraph& g, double rho_value,
                        const std::vector<double>& patch_norms, std::size_t m) {
    if (m == 0) throw std::invalid_argument("rademacher_bound: m must be positive");
    const double term = max_path_pred_product(g, &patch_norms).value;
    return rho_value / static_cast<double>(m) * depth_log_factor(g) * std::sqrt(term);
}

double gen_bound(const ArchGraph& g, double rho_value, const std::vector<double>& patch_norms,
                 std::size_t m, double delta) {
    if (m == 0) throw std::invalid_argument("gen_bound: m must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("gen_bound: delta in (0,1)");
    const double term = max_path_pred_product(g, &patch_norms).value;
    const double md = static_cast<double>(m);
    const double first = (rho_value + 1.0) / md * depth_log_factor(g) * std::sqrt(term);
    const double second =
        3.0 * std::sqrt(std::log(2.0 * (rho_value + 2.0) * (rho_value + 2.0) / delta) / (2.0 * md));
    return first + second;
}

std::optional<double> convnet_bound(const ArchGraph& g, double rho_value,
                                    const std::vector<double>& patch_norms, std::size_t m) {
    const auto kernels = g.uniform_pred_sizes();
    if (!kernels) return std::nullopt;
    double prod_k = 1.0;
    std::size_t max_k = 0;
    for (std::size_t k : *kernels) {
        prod_k *= static_cast<double>(k);
        max_k = std::max(max_k, k);
    }
    double max_patch = 0.0;
    for (std::size_t j = 0; j < g.width(0); ++j) {
        if (!g.is_zero(0, j)) max_patch = std::max(max_patch, patch_norms[j]);
    }
    const double L = static_cast<double>(g.depth());
    const double factor = 1.0 + std::sqrt(2.0 * L * std::log(2.0 * static_cast<double>(max_k)));
    return rho_value / static_cast<double>(m) * factor * std::sqrt(prod_k * max_patch);
}

BetaBalance beta_balance(const Tensor& images) {
    if (images.rank() != 3) throw std::invalid_argument("beta_balance: images must be (m, c0, pixels)");
    const std::size_t m = images.dim(0), c0 = images.dim(1), npix = images.dim(2);
    BetaBalance out;
    double worst = 0.0;
    bool any_nonzero = false;
    for (std::size_t i = 0; i < m; ++i) {
        double max_sq = 0.0, sum_sq = 0.0;
        for (std::size_t j = 0; j < npix; ++j) {
            double pixel_sq = 0.0;
            for (std::size_t r = 0; r < c0; ++r) {
                const double v = images.data[(i * c0 + r) * npix + j];
                pixel_sq += v * v;
            }
            max_sq = std::max(max_sq, pixel_sq);
            sum_sq += pixel_sq;
        }
        if (sum_sq == 0.0) continue;
        any_nonzero = true;
        worst = std::max(worst, max_sq / (sum_sq / static_cast<double>(npix)));
    }
    if (!any_nonzero) {
        out.degenerate = true;
        return out;
    }
    out.beta = worst;
    return out;
}

double simplified_bound(double rho_value, std::size_t m, std::size_t depth, std::size_t deg,
                        double beta, double avg_input_norm_sq) {
    const double inner = static_cast<double>(depth) * beta * std::log(static_cast<double>(deg)) *
                         avg_input_norm_sq;
    return rho_value / std::sqrt(static_cast<double>(m)) * std::sqrt(inner);
}

double naive_bound(const ArchGraph& g, double rho_value, double sum_input_norm_sq,
                   std::size_t m) {
    double prod_d = 1.0;
    for (std::size_t l = 1; l <= g.depth(); ++l) prod_d *= static_cast<double>(g.real_width(l));
    const double L = static_cast<double>(g.depth());
    return rho_value / static_cast<double>(m) * std::sqrt(L * prod_d * sum_input_norm_sq);
}

double long_bound(std::size_t parameter_count, const std::vector<double>& spectral_norms,
                  double gamma, double delta, std::size_t m) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("long_bound: gamma in (0,1]");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("long_bound: delta in (0,1)");
    if (m == 0) throw std::invalid_argument("long_bound: m must be positive");
    double sum_spectral = 0.0;
    for (double s : spectral_norms) sum_spectral += s;
    const double n = static_cast<double>(parameter_count);
    return std::sqrt((n * (sum_spectral + std::log(1.0 / gamma)) + std::log(1.0 / delta)) /
                     static_cast<double>(m));
}

nlohmann::json bound_report_to_json(const BoundReport& r) {
    nlohmann::json j;
    j["rho"] = r.rho;
    j["rho_tilde"] = r.rho_tilde;
    j["deg"] = r.deg;
    j["depth"] = r.depth;
    j["m"] = r.m;
    j["path_product"] = r.path_product;
    j["patch_term"] = r.patch_term;
    j["witness_path"] = r.witness_path;
    j["rademacher_bound"] = r.rademacher_bound;
    j["gen_bound"] = r.gen_bound;
    if (r.convnet_bound) j["convnet_bound"] = *r.convnet_bound;
    j["beta"] = r.beta;
    j["beta_degenerate"] = r.beta_degenerate;
    j["simplified_bound"] = r.simplified_bound;
    j["naive_bound"] = r.naive_bound;
    if (r.long_bound) j["long_bound"] = *r.long_bound;
    j["rho_over_sqrt_m"] = r.rho_over_sqrt_m;
    j["interpolation"] = r.interpolation;
    j["delta"] = r.delta;
    j["spectral_converged"] = r.spectral_converged;
    return j;
}

}  // namespace sparsebound
