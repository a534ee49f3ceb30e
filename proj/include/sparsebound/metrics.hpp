#pragma once

#include <cstddef>
#include <vector>

namespace sparsebound {

/// Error and loss summary over one dataset. ramp_mean dominates error on any
/// dataset (the ramp loss upper-bounds the 0-1 indicator pointwise).
struct EvalResult {
    double error = 0.0;      // misclassification rate in [0,1]
    double ramp_mean = 0.0;  // mean ramp loss in [0,1]
    double loss_mean = 0.0;  // mean MSE
    std::size_t m = 0;
};

/// Fraction of samples with sign(f) != y; sign(0) counts as an error.
double classification_error(const std::vector<double>& predictions,
                            const std::vector<double>& labels);

/// 1 if yf <= 0; 1 - yf if 0 <= yf <= 1; 0 if yf >= 1.
double ramp_loss(double label, double prediction);

/// 2 R + 3 sqrt(log(2/delta) / (2m)).
double lemma1_rhs(double rademacher_value, std::size_t m, double delta);

/// |test.error - train.error|.
double generalization_gap(const EvalResult& train, const EvalResult& test);

/// Scalar decision value of a two-logit network: (logit_0 - logit_1) / 2.
/// Sign-consistent with argmax; class 0 maps to label +1.
double two_logit_score(double logit0, double logit1);

}  // namespace sparsebound
