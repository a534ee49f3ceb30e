#include "sparsebound/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sparsebound/simd.hpp"

namespace sparsebound {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(shape_numel(shape), 0.0);
}

void Tensor::check_finite(const char* what) const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(what) + ": non-finite tensor entry");
        }
    }
}

Tensor relu(const Tensor& t) {
    Tensor out(t.shape);
    simd::relu(t.data.data(), out.data.data(), t.numel());
    return out;
}

double mse_loss(const Tensor& logits, const Tensor& targets) {
    if (!logits.same_shape(targets) || logits.rank() != 2) {
        throw std::invalid_argument("mse_loss: logits/targets must share a (batch, k) shape");
    }
    const std::size_t batch = logits.dim(0);
    const std::size_t k = logits.dim(1);
    if (batch == 0) throw std::invalid_argument("mse_loss: empty batch");
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < k; ++j) {
            const double d = logits.at(b, j) - targets.at(b, j);
            total += d * d;
        }
    }
    return total / static_cast<double>(batch);
}

}  // namespace sparsebound
