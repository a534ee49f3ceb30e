#include "sparsebound/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace sparsebound {

double classification_error(const std::vector<double>& predictions,
                            const std::vector<double>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("classification_error: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("classification_error: empty set");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] * predictions[i] <= 0.0) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

double ramp_loss(double label, double prediction) {
    const double margin = label * prediction;
    if (margin <= 0.0) return 1.0;
    if (margin >= 1.0) return 0.0;
    return 1.0 - margin;
}

double lemma1_rhs(double rademacher_value, std::size_t m, double delta) {
    if (m == 0) throw std::invalid_argument("lemma1_rhs: m must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("lemma1_rhs: delta in (0,1)");
    return 2.0 * rademacher_value +
           3.0 * std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(m)));
}

double generalization_gap(const EvalResult& train, const EvalResult& test) {
    return std::abs(test.error - train.error);
}

double two_logit_score(double logit0, double logit1) { return 0.5 * (logit0 - logit1); }

}  // namespace sparsebound
