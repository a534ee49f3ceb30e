#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace sparsebound {

class ArchError : public std::runtime_error {
public:
    explicit ArchError(const std::string& msg) : std::runtime_error(msg) {}
};

/// One layer of a convolutional stack. Fully-connected layers consume every
/// real neuron of the previous grid and are only legal at the tail.
struct LayerSpec {
    enum class Kind { conv, fully_connected };
    Kind kind = Kind::conv;
    std::array<std::size_t, 2> kernel = {1, 1};   // (h, w)
    std::array<std::size_t, 2> stride = {1, 1};
    std::array<std::size_t, 2> padding = {0, 0};
    std::size_t out_channels = 1;
    bool bias = false;
};

struct InputShape {
    std::size_t channels = 1;
    std::size_t height = 1;
    std::size_t width = 1;
};

struct BuildOptions {
    /// Dead-neuron validation is on by default; set to true for deliberately
    /// pruned graphs (e.g. strided convolutions that miss border pixels).
    bool allow_dead = false;
};

/// Layered DAG of neurons. Layer 0 holds the input patches, layer `depth`
/// a single output neuron of dimension channels[depth].
///
/// Padding is realized as synthetic constant-zero nodes: they occupy grid
/// positions, carry no weights, always evaluate to the zero vector, and are
/// excluded from norms, patch maxima and parameter counts. Real neurons keep
/// a full homogeneous window over the padded grid, which is what makes
/// weight sharing well-defined in the presence of padding.
class ArchGraph {
public:
    ArchGraph() = default;

    std::size_t depth() const { return depth_; }                    // L
    std::size_t width(std::size_t l) const { return widths_[l]; }   // d_l incl. zero nodes
    std::size_t channels(std::size_t l) const { return channels_[l]; }
    bool shared() const { return shared_; }

    const std::vector<std::size_t>& widths() const { return widths_; }
    const std::vector<std::size_t>& channel_dims() const { return channels_; }

    /// Predecessor list of neuron j at layer l (l in 1..L); sorted, unique.
    const std::vector<std::uint32_t>& pred(std::size_t l, std::size_t j) const {
        return preds_[l - 1][j];
    }
    std::size_t pred_size(std::size_t l, std::size_t j) const { return preds_[l - 1][j].size(); }

    bool is_zero(std::size_t l, std::size_t j) const {
        return zero_nodes_[l].empty() ? false : zero_nodes_[l][j] != 0;
    }
    std::size_t real_width(std::size_t l) const { return real_widths_[l]; }
    std::size_t zero_count(std::size_t l) const { return widths_[l] - real_widths_[l]; }

    /// Pixel index behind input node j, or -1 for a padding node.
    std::int64_t input_pixel(std::size_t j) const { return input_pixel_[j]; }
    std::size_t pixel_count() const { return pixel_count_; }

    /// Per-layer kernel size k_l when every real neuron of every layer has
    /// the same |pred| (the shared-kernel setting); nullopt otherwise.
    std::optional<std::vector<std::size_t>> uniform_pred_sizes() const;

    /// Real spatial grid dimensions per level, when built by conv_arch.
    const std::vector<std::array<std::size_t, 2>>& grid_dims() const { return grid_dims_; }

    /// Count of real neurons whose output no next-layer neuron consumes.
    std::size_t dead_real_nodes() const { return dead_real_nodes_; }

    friend ArchGraph build_dag(std::vector<std::size_t> widths, std::vector<std::size_t> channels,
                               std::vector<std::vector<std::vector<std::uint32_t>>> preds,
                               bool shared, const BuildOptions& opts);
    friend ArchGraph conv_arch(const InputShape& input, const std::vector<LayerSpec>& specs,
                               bool shared, const BuildOptions& opts);
    friend ArchGraph arch_from_json(const nlohmann::json& j);
    friend nlohmann::json arch_to_json(const ArchGraph& g);

private:
    void validate(const BuildOptions& opts);

    std::size_t depth_ = 0;
    std::vector<std::size_t> widths_;
    std::vector<std::size_t> channels_;
    std::vector<std::vector<std::vector<std::uint32_t>>> preds_;  // [l-1][j]
    std::vector<std::vector<std::uint8_t>> zero_nodes_;           // [l][j]; may be empty per layer
    std::vector<std::size_t> real_widths_;
    std::vector<std::int64_t> input_pixel_;
    std::size_t pixel_count_ = 0;
    std::vector<std::array<std::size_t, 2>> grid_dims_;
    std::size_t dead_real_nodes_ = 0;
    bool shared_ = false;
};

/// Validated layered DAG from explicit predecessor lists.
ArchGraph build_dag(std::vector<std::size_t> widths, std::vector<std::size_t> channels,
                    std::vector<std::vector<std::vector<std::uint32_t>>> preds, bool shared,
                    const BuildOptions& opts = {});

/// DAG for a convolutional stack. Each conv neuron's predecessor list is its
/// kernel window over the (zero-padded) previous grid, so |pred| equals the
/// kernel area; trailing fully-connected layers consume all real neurons.
ArchGraph conv_arch(const InputShape& input, const std::vector<LayerSpec>& specs, bool shared,
                    const BuildOptions& opts = {});

/// deg(G): maximum predecessor-set size over all neurons.
std::size_t degree(const ArchGraph& g);

struct PathProduct {
    double value = 0.0;
    /// Witness chain, output to input: path[t] is the node index at layer L-t.
    std::vector<std::uint32_t> path;
};

/// Maximum over output-to-input chains of the product of |pred| sizes, times
/// patch_norms[terminal input node] when given. Reverse dynamic programming;
/// ties broken towards the smallest node index.
PathProduct max_path_pred_product(const ArchGraph& g,
                                  const std::vector<double>* patch_norms = nullptr);

/// Total trainable scalars; shared layers count one matrix per layer and
/// constant-zero nodes count nothing.
std::size_t parameter_count(const ArchGraph& g, bool bias = false);

struct ConvCount {
    std::size_t kernel_area;
    std::size_t out_channels;
};
struct DenseCount {
    std::size_t in_dim;
    std::size_t out_dim;
};

/// Closed-form parameter count of a shared conv stack followed by explicit
/// fully-connected dims. Used where a stated flat dimension (rather than the
/// derived grid) defines the dense layer input.
std::size_t shared_stack_parameter_count(std::size_t in_channels,
                                         const std::vector<ConvCount>& convs,
                                         const std::vector<DenseCount>& dense, bool bias = false);

/// CONV-L-H family: two 2x2/stride-2 convolutions, then 3x3/stride-1/pad-1
/// convolutions with H channels, then one fully-connected layer. With
/// literal_depth=false (default), `layers` counts parametric layers, so the
/// stack holds layers-3 middle convolutions; with literal_depth=true it holds
/// layers-2 of them (the stated composition, giving layers+1 parametric
/// layers). Both interpretations are exposed.
std::vector<LayerSpec> conv_lh_stack(std::size_t layers, std::size_t h_channels,
                                     std::size_t out_dim, bool literal_depth = false);

nlohmann::json arch_to_json(const ArchGraph& g);
ArchGraph arch_from_json(const nlohmann::json& j);
ArchGraph load_arch(const std::string& path);
void save_arch(const ArchGraph& g, const std::string& path);

}  // namespace sparsebound
