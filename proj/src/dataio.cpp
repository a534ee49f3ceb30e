#include "sparsebound/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sparsebound/rng.hpp"

namespace sparsebound {
namespace {

constexpr std::uint32_t kLabelMagic = 0x00000801u;
constexpr std::uint32_t kImageMagic = 0x00000803u;
constexpr std::uint64_t kMaxElements = 1ull << 40;

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const char* what) {
    if (offset + 4 > bytes.size())
        throw IdxTruncated(std::string("IDX stream truncated while reading ") + what);
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

double byte_to_unit(std::uint8_t b) { return static_cast<double>(b) / 255.0; }

std::uint8_t unit_to_byte(double v) {
    const long long q = std::llround(v * 255.0);
    return static_cast<std::uint8_t>(std::clamp(q, 0ll, 255ll));
}

}  // namespace

std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
    const std::uint32_t magic = read_be32(bytes, 0, "magic");
    if (magic != kLabelMagic)
        throw IdxBadMagic("expected label magic 0x00000801, got " + std::to_string(magic));
    const std::uint32_t n = read_be32(bytes, 4, "label count");
    if (n > kMaxElements) throw IdxDimensionOverflow("label count overflows sane limits");
    if (bytes.size() < 8 + static_cast<std::size_t>(n))
        throw IdxTruncated("label payload shorter than header promises");
    return std::vector<std::uint8_t>(bytes.begin() + 8, bytes.begin() + 8 + n);
}

LabelledImages parse_idx_images(const std::vector<std::uint8_t>& bytes) {
    const std::uint32_t magic = read_be32(bytes, 0, "magic");
    if (magic != kImageMagic)
        throw IdxBadMagic("expected image magic 0x00000803, got " + std::to_string(magic));
    const std::uint64_t m = read_be32(bytes, 4, "image count");
    const std::uint64_t rows = read_be32(bytes, 8, "row count");
    const std::uint64_t cols = read_be32(bytes, 12, "column count");
    if (rows == 0 || cols == 0 || m > kMaxElements || rows > kMaxElements ||
        cols > kMaxElements || rows * cols > kMaxElements ||
        (m != 0 && rows * cols > kMaxElements / m))
        throw IdxDimensionOverflow("image dimensions overflow sane limits");
    const std::uint64_t total = m * rows * cols;
    if (bytes.size() < 16 + total) throw IdxTruncated("image payload shorter than header promises");

    LabelledImages out;
    out.height = rows;
    out.width = cols;
    out.images = Tensor({static_cast<std::size_t>(m), 1, static_cast<std::size_t>(rows * cols)});
    for (std::uint64_t i = 0; i < total; ++i) out.images.data[i] = byte_to_unit(bytes[16 + i]);
    return out;
}

std::vector<std::uint8_t> write_idx_labels(const std::vector<std::uint8_t>& labels) {
    std::vector<std::uint8_t> out;
    append_be32(out, kLabelMagic);
    append_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

std::vector<std::uint8_t> write_idx_images(const Tensor& images, std::size_t height,
                                           std::size_t width) {
    if (images.rank() != 3 || images.dim(1) != 1 || images.dim(2) != height * width)
        throw std::invalid_argument("write_idx_images: images must be (m, 1, height*width)");
    std::vector<std::uint8_t> out;
    append_be32(out, kImageMagic);
    append_be32(out, static_cast<std::uint32_t>(images.dim(0)));
    append_be32(out, static_cast<std::uint32_t>(height));
    append_be32(out, static_cast<std::uint32_t>(width));
    out.reserve(out.size() + images.numel());
    for (double v : images.data) out.push_back(unit_to_byte(v));
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

Dataset synth_dataset(std::uint64_t seed, std::size_t m, const SynthSpec& spec) {
    if (m < 2) throw std::invalid_argument("synth_dataset: need at least two samples");
    const std::size_t h = spec.height, w = spec.width;

    Dataset ds;
    ds.source = "synth";
    ds.seed = seed;
    ds.class_a = 0;
    ds.class_b = 1;
    ds.images = Tensor({m, 1, h * w});
    ds.labels_pm.resize(m);
    ds.labels_onehot = Tensor({m, 2});

    Rng rng(seed);
    const int bw = static_cast<int>(spec.band_halfwidth);
    for (std::size_t i = 0; i < m; ++i) {
        const bool positive = (i % 2) == 0;  // alternating keeps classes balanced
        ds.labels_pm[i] = positive ? 1.0 : -1.0;
        ds.labels_onehot.at(i, positive ? 0 : 1) = 1.0;

        // diagonal band: r - c = offset for +45 degrees, r + c = offset for -45
        const int lo = positive ? -(static_cast<int>(w) - 1) + bw : bw;
        const int hi = positive ? static_cast<int>(h) - 1 - bw
                                : static_cast<int>(h + w) - 2 - bw;
        const int offset = lo + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(hi - lo + 1)));

        double* img = ds.images.data.data() + i * h * w;
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                const int diag = positive ? static_cast<int>(r) - static_cast<int>(c)
                                          : static_cast<int>(r) + static_cast<int>(c);
                const bool on_band = std::abs(diag - offset) <= bw;
                double v = (on_band ? spec.amplitude : spec.background) +
                           rng.uniform(-spec.noise, spec.noise);
                v = std::clamp(v, 0.0, 1.0);
                // quantize to the 1/255 grid so IDX round-trips are exact
                img[r * w + c] = byte_to_unit(unit_to_byte(v));
            }
        }
    }
    return ds;
}

Dataset binary_subset(const LabelledImages& full, int class_a, int class_b, std::size_t m,
                      std::uint64_t seed) {
    if (m == 0) throw std::invalid_argument("binary_subset: m must be positive");
    if (class_a == class_b) throw std::invalid_argument("binary_subset: classes must differ");

    std::vector<std::size_t> idx_a, idx_b;
    for (std::size_t i = 0; i < full.images.dim(0); ++i) {
        if (full.labels[i] == static_cast<std::uint8_t>(class_a)) idx_a.push_back(i);
        if (full.labels[i] == static_cast<std::uint8_t>(class_b)) idx_b.push_back(i);
    }
    const std::size_t need_a = (m + 1) / 2;
    const std::size_t need_b = m - need_a;
    if (idx_a.size() < need_a || idx_b.size() < need_b)
        throw std::runtime_error("binary_subset: insufficient samples in requested classes");

    Rng rng(seed);
    rng.shuffle(idx_a);
    rng.shuffle(idx_b);

    std::vector<std::pair<std::size_t, bool>> picks;  // (source index, is class_a)
    for (std::size_t i = 0; i < need_a; ++i) picks.push_back({idx_a[i], true});
    for (std::size_t i = 0; i < need_b; ++i) picks.push_back({idx_b[i], false});
    rng.shuffle(picks);

    const std::size_t c0 = full.images.dim(1), npix = full.images.dim(2);
    Dataset ds;
    ds.source = "subset:" + std::to_string(class_a) + "," + std::to_string(class_b);
    ds.seed = seed;
    ds.class_a = class_a;
    ds.class_b = class_b;
    ds.images = Tensor({m, c0, npix});
    ds.labels_pm.resize(m);
    ds.labels_onehot = Tensor({m, 2});
    for (std::size_t i = 0; i < m; ++i) {
        const auto [src, is_a] = picks[i];
        std::copy_n(full.images.data.begin() + src * c0 * npix, c0 * npix,
                    ds.images.data.begin() + i * c0 * npix);
        ds.labels_pm[i] = is_a ? 1.0 : -1.0;
        ds.labels_onehot.at(i, is_a ? 0 : 1) = 1.0;
    }
    return ds;
}

std::vector<double> extract_patches(const Dataset& ds, const ArchGraph& g) {
    if (ds.input_channels() != g.channels(0) || ds.pixels() != g.pixel_count())
        throw std::invalid_argument("extract_patches: dataset does not fit the graph input");
    const std::size_t m = ds.size(), c0 = ds.input_channels(), npix = ds.pixels();
    std::vector<double> norms(g.width(0), 0.0);
    for (std::size_t j = 0; j < g.width(0); ++j) {
        const std::int64_t px = g.input_pixel(j);
        if (px < 0) continue;
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double* img = ds.image(i);
            for (std::size_t r = 0; r < c0; ++r) {
                const double v = img[r * npix + static_cast<std::size_t>(px)];
                acc += v * v;
            }
        }
        norms[j] = acc;
    }
    return norms;
}

void save_dataset(const Dataset& ds, const std::string& dir, std::size_t height,
                  std::size_t width) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_file_bytes(dir + "/images.idx3", write_idx_images(ds.images, height, width));
    std::vector<std::uint8_t> labels(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) labels[i] = ds.labels_pm[i] > 0 ? 0 : 1;
    write_file_bytes(dir + "/labels.idx1", write_idx_labels(labels));

    nlohmann::json manifest;
    manifest["source"] = ds.source;
    manifest["seed"] = ds.seed;
    manifest["class_a"] = ds.class_a;
    manifest["class_b"] = ds.class_b;
    manifest["m"] = ds.size();
    manifest["height"] = height;
    manifest["width"] = width;
    manifest["label_convention"] = "byte 0 <-> +1 <-> one-hot index 0";
    std::ofstream out(dir + "/manifest.json");
    out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
    const LabelledImages imgs = parse_idx_images(read_file_bytes(dir + "/images.idx3"));
    const std::vector<std::uint8_t> labels = parse_idx_labels(read_file_bytes(dir + "/labels.idx1"));
    if (labels.size() != imgs.images.dim(0))
        throw std::runtime_error("dataset dir: image/label count mismatch");

    Dataset ds;
    ds.source = "idx";
    ds.images = imgs.images;
    const std::size_t m = labels.size();
    ds.labels_pm.resize(m);
    ds.labels_onehot = Tensor({m, 2});
    for (std::size_t i = 0; i < m; ++i) {
        if (labels[i] > 1) throw std::runtime_error("dataset dir: labels must be binary (0/1)");
        const bool positive = labels[i] == 0;
        ds.labels_pm[i] = positive ? 1.0 : -1.0;
        ds.labels_onehot.at(i, positive ? 0 : 1) = 1.0;
    }
    std::ifstream mf(dir + "/manifest.json");
    if (mf) {
        nlohmann::json manifest;
        mf >> manifest;
        ds.source = manifest.value("source", std::string("idx"));
        ds.seed = manifest.value("seed", 0ull);
        ds.class_a = manifest.value("class_a", -1);
        ds.class_b = manifest.value("class_b", -1);
    }
    return ds;
}

}  // namespace sparsebound
