#include "sparsebound/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sparsebound {
namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) parts.push_back(item);
    }
    return parts;
}

}  // namespace

FlatConfig FlatConfig::from_string(const std::string& text) {
    FlatConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
        cfg.entries_[key] = value;
    }
    return cfg;
}

FlatConfig FlatConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_string(buffer.str());
}

bool FlatConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string FlatConfig::get_string(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) throw std::runtime_error("config key missing: " + key);
    return it->second;
}

std::string FlatConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double FlatConfig::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : std::stod(it->second);
}

std::size_t FlatConfig::get_size(const std::string& key, std::size_t fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : static_cast<std::size_t>(std::stoull(it->second));
}

std::uint64_t FlatConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : std::stoull(it->second);
}

bool FlatConfig::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config key " + key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::size_t> FlatConfig::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    const auto it = entries_.find(key);
    if (it == entries_.end()) return out;
    for (const auto& part : split_commas(it->second))
        out.push_back(static_cast<std::size_t>(std::stoull(part)));
    return out;
}

std::vector<double> FlatConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    const auto it = entries_.find(key);
    if (it == entries_.end()) return out;
    for (const auto& part : split_commas(it->second)) out.push_back(std::stod(part));
    return out;
}

std::vector<std::string> FlatConfig::unknown_keys(const std::vector<std::string>& known) const {
    std::vector<std::string> out;
    for (const auto& [key, value] : entries_) {
        if (std::find(known.begin(), known.end(), key) == known.end()) out.push_back(key);
    }
    return out;
}

const std::vector<std::string> kTrainConfigKeys = {
    "lr",        "momentum",   "batch_size",  "epochs",        "weight_decay", "rho_scale",
    "rho_scales", "scheduler", "milestones",  "step_factor",   "normalize_all", "seed"};

TrainConfig train_config_from(const FlatConfig& cfg, const std::vector<std::string>& more_known) {
    std::vector<std::string> known = kTrainConfigKeys;
    known.insert(known.end(), more_known.begin(), more_known.end());
    const auto unknown = cfg.unknown_keys(known);
    if (!unknown.empty()) {
        std::string msg = "unknown config key(s):";
        for (const auto& k : unknown) msg += " " + k;
        throw std::runtime_error(msg);
    }

    TrainConfig tc;
    tc.lr = cfg.get_double("lr", tc.lr);
    tc.momentum = cfg.get_double("momentum", tc.momentum);
    tc.batch_size = cfg.get_size("batch_size", tc.batch_size);
    tc.epochs = cfg.get_size("epochs", tc.epochs);
    tc.weight_decay = cfg.get_double("weight_decay", tc.weight_decay);
    tc.rho_scale = cfg.get_double("rho_scale", tc.rho_scale);
    tc.rho_scales = cfg.get_double_list("rho_scales");
    const std::string sched = cfg.get_string("scheduler", "cosine");
    if (sched == "cosine") {
        tc.scheduler = TrainConfig::Scheduler::cosine;
    } else if (sched == "step") {
        tc.scheduler = TrainConfig::Scheduler::step;
    } else {
        throw std::runtime_error("scheduler must be 'cosine' or 'step', got '" + sched + "'");
    }
    if (cfg.has("milestones")) tc.milestones = cfg.get_size_list("milestones");
    tc.step_factor = cfg.get_double("step_factor", tc.step_factor);
    tc.normalize_all = cfg.get_bool("normalize_all", tc.normalize_all);
    tc.seed = cfg.get_u64("seed", tc.seed);
    tc.validate();
    return tc;
}

}  // namespace sparsebound
