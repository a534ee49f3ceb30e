#include "sparsebound/weights.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sparsebound/simd.hpp"

namespace sparsebound {

double Matrix::frobenius_sq() const { return simd::norm_sq(a.data(), a.size()); }
double Matrix::frobenius() const { return std::sqrt(frobenius_sq()); }

WeightSet WeightSet::zeros_like(const ArchGraph& g) {
    WeightSet w;
    w.shared = g.shared();
    w.layers.resize(g.depth());
    for (std::size_t l = 1; l <= g.depth(); ++l) {
        const std::size_t rows = g.channels(l);
        const std::size_t cin = g.channels(l - 1);
        if (g.shared()) {
            std::size_t k = 0;
            for (std::size_t j = 0; j < g.width(l); ++j) {
                if (!g.is_zero(l, j)) {
                    k = g.pred_size(l, j);
                    break;
                }
            }
            w.layers[l - 1].emplace_back(rows, cin * k);
        } else {
            w.layers[l - 1].reserve(g.width(l));
            for (std::size_t j = 0; j < g.width(l); ++j) {
                if (g.is_zero(l, j)) {
                    w.layers[l - 1].emplace_back();
                } else {
                    w.layers[l - 1].emplace_back(rows, cin * g.pred_size(l, j));
                }
            }
        }
    }
    return w;
}

bool WeightSet::shape_matches(const ArchGraph& g) const {
    if (shared != g.shared() || layers.size() != g.depth()) return false;
    for (std::size_t l = 1; l <= g.depth(); ++l) {
        const std::size_t rows = g.channels(l);
        const std::size_t cin = g.channels(l - 1);
        if (shared) {
            if (layers[l - 1].size() != 1) return false;
            std::size_t k = 0;
            for (std::size_t j = 0; j < g.width(l); ++j) {
                if (!g.is_zero(l, j)) {
                    k = g.pred_size(l, j);
                    break;
                }
            }
            const Matrix& m = layers[l - 1][0];
            if (m.rows != rows || m.cols != cin * k) return false;
        } else {
            if (layers[l - 1].size() != g.width(l)) return false;
            for (std::size_t j = 0; j < g.width(l); ++j) {
                const Matrix& m = layers[l - 1][j];
                if (g.is_zero(l, j)) {
                    if (m.rows != 0) return false;
                } else if (m.rows != rows || m.cols != cin * g.pred_size(l, j)) {
                    return false;
                }
            }
        }
    }
    return true;
}

void WeightSet::check_finite(const char* what) const {
    for (const auto& layer : layers)
        for (const auto& m : layer)
            for (double v : m.a)
                if (!std::isfinite(v))
                    throw std::invalid_argument(std::string(what) + ": non-finite weight");
}

void WeightSet::fill(double v) {
    for (auto& layer : layers)
        for (auto& m : layer) std::fill(m.a.begin(), m.a.end(), v);
}

void WeightSet::add_scaled(const WeightSet& other, double factor) {
    for (std::size_t l = 0; l < layers.size(); ++l)
        for (std::size_t j = 0; j < layers[l].size(); ++j)
            simd::axpy(factor, other.layers[l][j].a.data(), layers[l][j].a.data(),
                       layers[l][j].a.size());
}

void WeightSet::scale_all(double factor) {
    for (auto& layer : layers)
        for (auto& m : layer) simd::scale(m.a.data(), factor, m.a.size());
}

namespace {

constexpr char kMagic[4] = {'S', 'B', 'W', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("weight container truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("weight container truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void save_weights(const WeightSet& w, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write weight container: " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(w.layers.size()));
    out.put(w.shared ? 1 : 0);
    for (const auto& layer : w.layers) {
        put_u32(out, static_cast<std::uint32_t>(layer.size()));
        for (const auto& m : layer) {
            put_u32(out, static_cast<std::uint32_t>(m.rows));
            put_u32(out, static_cast<std::uint32_t>(m.cols));
        }
    }
    for (const auto& layer : w.layers)
        for (const auto& m : layer)
            for (double v : m.a) put_f64(out, v);
    if (!out) throw std::runtime_error("failed writing weight container: " + path);
}

WeightSet load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open weight container: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a weight container (bad magic): " + path);
    const std::uint32_t version = get_u32(in);
    if (version != kVersion)
        throw std::runtime_error("unsupported weight container version " + std::to_string(version));
    const std::uint32_t nlayers = get_u32(in);
    const int shared_flag = in.get();
    if (shared_flag < 0) throw std::runtime_error("weight container truncated");

    WeightSet w;
    w.shared = shared_flag != 0;
    w.layers.resize(nlayers);
    for (auto& layer : w.layers) {
        const std::uint32_t count = get_u32(in);
        layer.resize(count);
        for (auto& m : layer) {
            m.rows = get_u32(in);
            m.cols = get_u32(in);
            m.a.assign(m.rows * m.cols, 0.0);
        }
    }
    for (auto& layer : w.layers)
        for (auto& m : layer)
            for (double& v : m.a) v = get_f64(in);
    return w;
}

std::string weights_manifest(const WeightSet& w) {
    std::ostringstream os;
    os << "layers " << w.layers.size() << "\n";
    os << "shared " << (w.shared ? 1 : 0) << "\n";
    std::size_t total = 0;
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        os << "layer " << (l + 1) << " matrices " << w.layers[l].size() << " shapes";
        for (const auto& m : w.layers[l]) {
            os << " " << m.rows << "x" << m.cols;
            total += m.a.size();
        }
        os << "\n";
    }
    os << "scalars " << total << "\n";
    return os.str();
}

}  // namespace sparsebound
