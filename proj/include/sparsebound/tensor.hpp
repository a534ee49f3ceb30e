#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace sparsebound {

/// Dense row-major array of 64-bit floats; the only numeric carrier that
/// crosses module boundaries. Values are required to be finite there;
/// check_finite() enforces it.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);

    static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

    std::size_t numel() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t rank() const { return shape.size(); }

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    /// Throws std::invalid_argument on NaN/Inf entries.
    void check_finite(const char* what) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

/// Elementwise max(0, x).
Tensor relu(const Tensor& t);

/// Mean over the batch (rows) of the squared Euclidean distance between each
/// logit row and its one-hot target row. Sum over dimensions, mean over batch.
double mse_loss(const Tensor& logits, const Tensor& targets);

}  // namespace sparsebound
