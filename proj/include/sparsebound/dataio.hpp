#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsebound/arch.hpp"
#include "sparsebound/tensor.hpp"

namespace sparsebound {

class IdxError : public std::runtime_error {
public:
    explicit IdxError(const std::string& msg) : std::runtime_error(msg) {}
};
class IdxBadMagic : public IdxError {
public:
    explicit IdxBadMagic(const std::string& msg) : IdxError(msg) {}
};
class IdxTruncated : public IdxError {
public:
    explicit IdxTruncated(const std::string& msg) : IdxError(msg) {}
};
class IdxDimensionOverflow : public IdxError {
public:
    explicit IdxDimensionOverflow(const std::string& msg) : IdxError(msg) {}
};

/// Binary-labelled image set. Labels carried both as +/-1 scalars and as
/// 2-dim one-hot rows (class +1 <-> one-hot index 0); images are (m, c0,
/// pixels) with values in [0,1] on a 1/255 grid.
struct Dataset {
    Tensor images;
    std::vector<double> labels_pm;
    Tensor labels_onehot;

    std::string source;  // provenance: "synth", "idx", "subset:<a>,<b>"
    std::uint64_t seed = 0;
    int class_a = -1, class_b = -1;

    std::size_t size() const { return images.rank() == 3 ? images.dim(0) : 0; }
    std::size_t input_channels() const { return images.dim(1); }
    std::size_t pixels() const { return images.dim(2); }
    const double* image(std::size_t i) const {
        return images.data.data() + i * images.dim(1) * images.dim(2);
    }
};

/// Raw multi-class IDX pair before binary subsetting.
struct LabelledImages {
    Tensor images;                    // (m, c0, pixels)
    std::vector<std::uint8_t> labels;
    std::size_t height = 0, width = 0;
};

/// IDX decoding: big-endian magic 0x00000801 (labels, 1-D) or 0x00000803
/// (images, 3-D), big-endian u32 dimension sizes, then unsigned bytes.
/// Pixels scale to [0,1] by /255.
std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes);
LabelledImages parse_idx_images(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> write_idx_labels(const std::vector<std::uint8_t>& labels);
std::vector<std::uint8_t> write_idx_images(const Tensor& images, std::size_t height,
                                           std::size_t width);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

struct SynthSpec {
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t band_halfwidth = 1;
    double amplitude = 0.8;
    double background = 0.1;
    double noise = 0.05;
};

/// Two balanced classes of diagonally oriented band patterns (+45 vs -45
/// degrees) at a random offset with pixel noise; deterministic per seed and
/// learnable by a small conv net but not by a linear scorer on raw pixels.
Dataset synth_dataset(std::uint64_t seed, std::size_t m, const SynthSpec& spec = {});

/// m random samples of the two named classes with +/-1 labels; class_a maps
/// to +1 (first class convention). Throws when a class lacks samples.
Dataset binary_subset(const LabelledImages& full, int class_a, int class_b, std::size_t m,
                      std::uint64_t seed);

/// Per-input-node patch norms sum_i ||z^0_j(x_i)||^2 under the graph's input
/// map; padding nodes contribute zero.
std::vector<double> extract_patches(const Dataset& ds, const ArchGraph& g);

/// Dataset directory: images.idx3 + labels.idx1 + manifest.json.
void save_dataset(const Dataset& ds, const std::string& dir, std::size_t height,
                  std::size_t width);
Dataset load_dataset(const std::string& dir);

}  // namespace sparsebound
