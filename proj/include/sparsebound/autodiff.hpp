#pragma once

#include <vector>

#include "sparsebound/arch.hpp"
#include "sparsebound/tensor.hpp"
#include "sparsebound/weights.hpp"

namespace sparsebound {

/// Per-neuron pre-activation values for one input, node-major: the value of
/// component r of node j at layer l sits at z[l][j * c_l + r]. Layer 0 holds
/// the raw input patches. Constant-zero nodes stay zero.
struct ActivationTrace {
    std::vector<std::vector<double>> z;

    const double* node(const ArchGraph& g, std::size_t l, std::size_t j) const {
        return z[l].data() + j * g.channels(l);
    }
};

/// Bottom-up evaluation of the DAG recursion. The input is the pixel tensor
/// of shape (c_0, pixel_count); the graph's input map places pixels on input
/// nodes (identity when the graph has no padding). ReLU is applied to every
/// layer's input except layer 1's consumption of the raw patches; no ReLU
/// follows the output map.
Tensor forward(const ArchGraph& g, const WeightSet& w, const Tensor& x,
               ActivationTrace* trace = nullptr);

/// Allocation-free core for batch loops; x is (c_0 * pixel_count) channel-major.
void forward_into(const ArchGraph& g, const WeightSet& w, const double* x,
                  ActivationTrace& trace, double* out);

/// Exact reverse-mode gradients of a scalar loss with respect to every
/// weight, given d(loss)/d(output). ReLU subgradient at 0 is 0.
WeightSet backward(const ArchGraph& g, const WeightSet& w, const ActivationTrace& trace,
                   const std::vector<double>& out_grad);

/// Accumulating form used across a batch; the reduction order is the caller's
/// sample order, so batch gradients are deterministic.
void backward_accumulate(const ArchGraph& g, const WeightSet& w, const ActivationTrace& trace,
                         const double* out_grad, WeightSet& grad_accum);

}  // namespace sparsebound
