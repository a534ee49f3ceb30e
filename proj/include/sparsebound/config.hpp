#pragma once

#include <map>
#include <string>
#include <vector>

#include "sparsebound/train.hpp"

namespace sparsebound {

/// Flat key-value file: one `key = value` per line, '#' starts a comment,
/// blank lines ignored. Keys are tracked so callers can reject unknown ones.
class FlatConfig {
public:
    static FlatConfig from_file(const std::string& path);
    static FlatConfig from_string(const std::string& text);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::size_t> get_size_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    /// Keys present in the file but never consumed by a keyset.
    std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

/// TrainConfig keys: lr, momentum, batch_size, epochs, weight_decay,
/// rho_scale, rho_scales, scheduler, milestones, step_factor, normalize_all,
/// seed. Unknown keys in `cfg` are rejected unless more_known lists them.
TrainConfig train_config_from(const FlatConfig& cfg,
                              const std::vector<std::string>& more_known = {});

extern const std::vector<std::string> kTrainConfigKeys;

}  // namespace sparsebound
