#include <doctest.h>

#include <filesystem>

#include "sparsebound/dataio.hpp"
#include "sparsebound/rng.hpp"

using namespace sparsebound;

namespace {

std::vector<std::uint8_t> random_image_stream(Rng& rng, std::size_t m, std::size_t rows,
                                              std::size_t cols) {
    std::vector<std::uint8_t> bytes = {0, 0, 8, 3};
    auto be32 = [&](std::uint32_t v) {
        bytes.push_back((v >> 24) & 0xff);
        bytes.push_back((v >> 16) & 0xff);
        bytes.push_back((v >> 8) & 0xff);
        bytes.push_back(v & 0xff);
    };
    be32(static_cast<std::uint32_t>(m));
    be32(static_cast<std::uint32_t>(rows));
    be32(static_cast<std::uint32_t>(cols));
    for (std::size_t i = 0; i < m * rows * cols; ++i)
        bytes.push_back(static_cast<std::uint8_t>(rng.bounded(256)));
    return bytes;
}

}  // namespace

TEST_CASE("idx header fixtures") {
    SUBCASE("one 2x2 image") {
        const std::vector<std::uint8_t> bytes = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2,
                                                 0, 0, 0, 2, 0, 51, 102, 255};
        const LabelledImages imgs = parse_idx_images(bytes);
        CHECK(imgs.images.dim(0) == 1);
        CHECK(imgs.height == 2);
        CHECK(imgs.width == 2);
        CHECK(imgs.images.data[0] == doctest::Approx(0.0));
        CHECK(imgs.images.data[1] == doctest::Approx(51.0 / 255.0));
        CHECK(imgs.images.data[3] == doctest::Approx(1.0));
    }
    SUBCASE("three labels") {
        const std::vector<std::uint8_t> bytes = {0, 0, 8, 1, 0, 0, 0, 3, 0, 1, 2};
        CHECK(parse_idx_labels(bytes) == std::vector<std::uint8_t>{0, 1, 2});
    }
}

TEST_CASE("idx malformed streams raise distinct errors") {
    const std::vector<std::uint8_t> bad_magic = {0, 0, 9, 9, 0, 0, 0, 1};
    CHECK_THROWS_AS(parse_idx_labels(bad_magic), IdxBadMagic);
    CHECK_THROWS_AS(parse_idx_images(bad_magic), IdxBadMagic);

    std::vector<std::uint8_t> truncated = {0, 0, 8, 1, 0, 0, 0, 5, 1, 2};  // promises 5 labels
    CHECK_THROWS_AS(parse_idx_labels(truncated), IdxTruncated);
    const std::vector<std::uint8_t> short_header = {0, 0, 8, 3, 0, 0};
    CHECK_THROWS_AS(parse_idx_images(short_header), IdxTruncated);

    std::vector<std::uint8_t> overflow = {0, 0, 8, 3, 0xff, 0xff, 0xff, 0xff,
                                          0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff};
    CHECK_THROWS_AS(parse_idx_images(overflow), IdxDimensionOverflow);
}

TEST_CASE("idx byte-stream round trip is exact") {
    Rng rng(404);
    const auto stream = random_image_stream(rng, 100, 6, 5);
    const LabelledImages parsed = parse_idx_images(stream);
    CHECK(write_idx_images(parsed.images, parsed.height, parsed.width) == stream);

    std::vector<std::uint8_t> labels(100);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.bounded(10));
    CHECK(parse_idx_labels(write_idx_labels(labels)) == labels);
}

TEST_CASE("synthetic dataset determinism and balance") {
    const Dataset a = synth_dataset(99, 101);
    const Dataset b = synth_dataset(99, 101);
    CHECK(a.images.data == b.images.data);
    CHECK(a.labels_pm == b.labels_pm);

    const Dataset c = synth_dataset(100, 101);
    CHECK(a.images.data != c.images.data);

    long balance = 0;
    for (double y : a.labels_pm) balance += y > 0 ? 1 : -1;
    CHECK(std::abs(balance) <= 1);

    // labels consistent between the two encodings
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool positive = a.labels_pm[i] > 0;
        CHECK(a.labels_onehot.at(i, 0) == (positive ? 1.0 : 0.0));
        CHECK(a.labels_onehot.at(i, 1) == (positive ? 0.0 : 1.0));
    }

    // pixel values on the 1/255 grid inside [0, 1]
    for (double v : a.images.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        const double q = v * 255.0;
        CHECK(std::abs(q - std::round(q)) < 1e-9);
    }
}

TEST_CASE("binary subset selection") {
    Rng rng(7);
    LabelledImages pool;
    pool.height = 2;
    pool.width = 2;
    pool.images = Tensor({40, 1, 4});
    for (double& v : pool.images.data) v = rng.uniform(0.0, 1.0);
    pool.labels.resize(40);
    for (std::size_t i = 0; i < 40; ++i) pool.labels[i] = static_cast<std::uint8_t>(i % 4);

    CHECK_THROWS(binary_subset(pool, 0, 1, 0, 1));            // m = 0
    CHECK_THROWS(binary_subset(pool, 0, 1, 25, 1));           // insufficient
    CHECK_THROWS(binary_subset(pool, 2, 2, 4, 1));            // identical classes

    const Dataset s1 = binary_subset(pool, 0, 1, 10, 5);
    const Dataset s2 = binary_subset(pool, 0, 1, 10, 5);
    CHECK(s1.images.data == s2.images.data);  // seeded determinism

    long balance = 0;
    for (double y : s1.labels_pm) balance += y > 0 ? 1 : -1;
    CHECK(std::abs(balance) <= 1);

    // class_a maps to +1 and its images come from class-0 rows
    const Dataset odd = binary_subset(pool, 0, 1, 7, 9);
    long pos = 0;
    for (double y : odd.labels_pm) pos += y > 0 ? 1 : 0;
    CHECK(pos == 4);  // ceil(7/2)
}

TEST_CASE("patch extraction") {
    LayerSpec conv;
    conv.kernel = {2, 2};
    conv.stride = {2, 2};
    conv.out_channels = 2;
    LayerSpec fc;
    fc.kind = LayerSpec::Kind::fully_connected;
    fc.out_channels = 1;
    const ArchGraph g = conv_arch({1, 4, 4}, {conv, fc}, true);

    SUBCASE("all-zero images give all-zero norms") {
        Dataset ds;
        ds.images = Tensor({3, 1, 16});
        ds.labels_pm.assign(3, 1.0);
        ds.labels_onehot = Tensor({3, 2});
        const auto norms = extract_patches(ds, g);
        for (double n : norms) CHECK(n == 0.0);
    }

    SUBCASE("single unit pixel shows up at exactly its node") {
        Dataset ds;
        ds.images = Tensor({1, 1, 16});
        ds.images.data[5] = 1.0;
        ds.labels_pm.assign(1, 1.0);
        ds.labels_onehot = Tensor({1, 2});
        const auto norms = extract_patches(ds, g);
        for (std::size_t j = 0; j < norms.size(); ++j)
            CHECK(norms[j] == (g.input_pixel(j) == 5 ? 1.0 : 0.0));
    }

    SUBCASE("matches a direct per-pixel scan and partitions the total") {
        Rng rng(11);
        Dataset ds;
        ds.images = Tensor({4, 1, 16});
        for (double& v : ds.images.data) v = rng.uniform(0.0, 1.0);
        ds.labels_pm.assign(4, 1.0);
        ds.labels_onehot = Tensor({4, 2});
        const auto norms = extract_patches(ds, g);

        double scan_total = 0.0;
        for (double v : ds.images.data) scan_total += v * v;
        double norm_total = 0.0;
        for (double n : norms) norm_total += n;
        // non-overlapping windows partition the pixels
        CHECK(norm_total == doctest::Approx(scan_total).epsilon(1e-12));
    }
}

TEST_CASE("dataset directory round trip") {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "sparsebound_ds_test").string();
    fs::remove_all(dir);

    const Dataset ds = synth_dataset(31, 24);
    save_dataset(ds, dir, 16, 16);
    const Dataset back = load_dataset(dir);
    CHECK(back.size() == ds.size());
    CHECK(back.images.data == ds.images.data);
    CHECK(back.labels_pm == ds.labels_pm);
    CHECK(back.seed == ds.seed);
    fs::remove_all(dir);
}
