#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsebound/arch.hpp"

namespace sparsebound {

/// Row-major dense matrix, the per-neuron weight block w^l_j of shape
/// c_l x (c_{l-1} * |pred(l,j)|).
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double* row(std::size_t r) { return a.data() + r * cols; }
    const double* row(std::size_t r) const { return a.data() + r * cols; }
    double& at(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    double frobenius_sq() const;
    double frobenius() const;
};

/// Trainable state of a network. Layer l holds one matrix when the graph is
/// shared, otherwise one per node (empty matrices at constant-zero nodes).
struct WeightSet {
    std::vector<std::vector<Matrix>> layers;  // layers[l-1]
    bool shared = false;

    static WeightSet zeros_like(const ArchGraph& g);

    const Matrix& matrix(std::size_t l, std::size_t j) const {
        return shared ? layers[l - 1][0] : layers[l - 1][j];
    }
    Matrix& matrix(std::size_t l, std::size_t j) {
        return shared ? layers[l - 1][0] : layers[l - 1][j];
    }

    /// True when every matrix has the shape the graph dictates.
    bool shape_matches(const ArchGraph& g) const;
    void check_finite(const char* what) const;

    // elementwise helpers used by the optimizer and ascent loops
    void fill(double v);
    void add_scaled(const WeightSet& other, double factor);
    void scale_all(double factor);
};

/// Flat binary container: magic "SBWT", u32 version, u32 layer count,
/// u8 shared flag, then per layer a u32 matrix count and per matrix a
/// u32 rows / u32 cols header; payload is all matrices' row-major doubles.
/// All integers and doubles little-endian.
void save_weights(const WeightSet& w, const std::string& path);
WeightSet load_weights(const std::string& path);

/// Human-readable manifest describing a saved container.
std::string weights_manifest(const WeightSet& w);

}  // namespace sparsebound
