#pragma once

#include <string>

inline constexpr const char* kDefaultMnistBaseUrl =
    "http://ossci-datasets.s3.amazonaws.com/mnist/";

/// Downloads (or ingests from `from_dir`) the four canonical MNIST .gz
/// files, verifies their SHA-256, inflates them and writes
/// train-images.idx3 / train-labels.idx1 / test-images.idx3 /
/// test-labels.idx1 into out_dir. Returns a process exit code.
int fetch_mnist(const std::string& out_dir, const std::string& base_url,
                const std::string& from_dir, bool verify);
