#include "sparsebound/arch.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace sparsebound {
namespace {

std::string at_node(std::size_t l, std::size_t j) {
    std::ostringstream os;
    os << " (layer " << l << ", node " << j << ")";
    return os.str();
}

/// floor((in + 2*pad - kernel) / stride) + 1, rejecting collapsed extents.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                            std::size_t pad, std::size_t layer) {
    const std::size_t padded = in + 2 * pad;
    if (kernel > padded) {
        std::ostringstream os;
        os << "conv layer " << layer << ": kernel " << kernel << " exceeds padded extent "
           << padded;
        throw ArchError(os.str());
    }
    return (padded - kernel) / stride + 1;
}

}  // namespace

void ArchGraph::validate(const BuildOptions& opts) {
    if (widths_.size() < 2) throw ArchError("graph needs at least one layer");
    depth_ = widths_.size() - 1;
    if (channels_.size() != widths_.size())
        throw ArchError("widths/channels length mismatch");
    if (preds_.size() != depth_) throw ArchError("predecessor lists must cover layers 1..L");
    if (widths_.back() != 1) throw ArchError("output layer must hold exactly one neuron");
    for (std::size_t l = 0; l <= depth_; ++l) {
        if (widths_[l] == 0) throw ArchError("empty layer " + std::to_string(l));
        if (channels_[l] == 0) throw ArchError("zero channel dimension at layer " + std::to_string(l));
    }

    if (zero_nodes_.empty()) zero_nodes_.assign(depth_ + 1, {});
    if (zero_nodes_.size() != depth_ + 1) throw ArchError("zero-node mask layer count mismatch");
    real_widths_.resize(depth_ + 1);
    for (std::size_t l = 0; l <= depth_; ++l) {
        if (!zero_nodes_[l].empty() && zero_nodes_[l].size() != widths_[l])
            throw ArchError("zero-node mask width mismatch at layer " + std::to_string(l));
        std::size_t zeros = 0;
        for (std::uint8_t z : zero_nodes_[l]) zeros += (z != 0);
        real_widths_[l] = widths_[l] - zeros;
        if (real_widths_[l] == 0) throw ArchError("layer " + std::to_string(l) + " has no real neurons");
    }
    if (is_zero(depth_, 0)) throw ArchError("output neuron cannot be a padding node");

    for (std::size_t l = 1; l <= depth_; ++l) {
        if (preds_[l - 1].size() != widths_[l])
            throw ArchError("predecessor list count mismatch at layer " + std::to_string(l));
        for (std::size_t j = 0; j < widths_[l]; ++j) {
            const auto& p = preds_[l - 1][j];
            if (p.empty()) throw ArchError("empty predecessor list" + at_node(l, j));
            for (std::size_t t = 0; t < p.size(); ++t) {
                if (p[t] >= widths_[l - 1])
                    throw ArchError("predecessor index out of range" + at_node(l, j));
                if (t > 0 && p[t] <= p[t - 1])
                    throw ArchError("predecessor list not sorted/unique" + at_node(l, j));
            }
        }
        if (shared_) {
            // one matrix must fit every real neuron of the layer
            std::size_t expect = 0;
            bool first = true;
            for (std::size_t j = 0; j < widths_[l]; ++j) {
                if (is_zero(l, j)) continue;
                if (first) {
                    expect = preds_[l - 1][j].size();
                    first = false;
                } else if (preds_[l - 1][j].size() != expect) {
                    throw ArchError("shared layer " + std::to_string(l) +
                                    " has heterogeneous predecessor counts");
                }
            }
        }
    }

    // input pixel map
    if (input_pixel_.empty()) {
        input_pixel_.resize(widths_[0]);
        for (std::size_t j = 0; j < widths_[0]; ++j)
            input_pixel_[j] = is_zero(0, j) ? -1 : static_cast<std::int64_t>(j);
        if (pixel_count_ == 0) pixel_count_ = real_widths_[0];
    }
    if (input_pixel_.size() != widths_[0]) throw ArchError("input pixel map width mismatch");
    std::set<std::int64_t> seen;
    for (std::size_t j = 0; j < widths_[0]; ++j) {
        const std::int64_t px = input_pixel_[j];
        if (is_zero(0, j)) {
            if (px != -1) throw ArchError("padding input node mapped to a pixel");
            continue;
        }
        if (px < 0 || px >= static_cast<std::int64_t>(pixel_count_))
            throw ArchError("input node pixel index out of range");
        if (!seen.insert(px).second) throw ArchError("input pixel mapped twice");
    }

    // dead-neuron scan
    dead_real_nodes_ = 0;
    for (std::size_t l = 0; l < depth_; ++l) {
        std::vector<std::uint8_t> consumed(widths_[l], 0);
        for (const auto& plist : preds_[l])
            for (std::uint32_t p : plist) consumed[p] = 1;
        for (std::size_t j = 0; j < widths_[l]; ++j) {
            if (!consumed[j] && !is_zero(l, j)) ++dead_real_nodes_;
        }
    }
    if (dead_real_nodes_ > 0 && !opts.allow_dead) {
        throw ArchError(std::to_string(dead_real_nodes_) +
                        " dead neuron(s); pass allow_dead for deliberately pruned graphs");
    }
}

ArchGraph build_dag(std::vector<std::size_t> widths, std::vector<std::size_t> channels,
                    std::vector<std::vector<std::vector<std::uint32_t>>> preds, bool shared,
                    const BuildOptions& opts) {
    ArchGraph g;
    g.widths_ = std::move(widths);
    g.channels_ = std::move(channels);
    g.preds_ = std::move(preds);
    g.shared_ = shared;
    g.validate(opts);
    return g;
}

ArchGraph conv_arch(const InputShape& input, const std::vector<LayerSpec>& specs, bool shared,
                    const BuildOptions& opts) {
    if (specs.empty()) throw ArchError("conv_arch: empty layer list");
    if (specs.back().kind != LayerSpec::Kind::fully_connected)
        throw ArchError("conv_arch: final layer must be fully-connected");
    for (const auto& s : specs) {
        if (s.out_channels == 0) throw ArchError("conv_arch: zero out_channels");
        if (s.kind == LayerSpec::Kind::conv &&
            (s.kernel[0] == 0 || s.kernel[1] == 0 || s.stride[0] == 0 || s.stride[1] == 0))
            throw ArchError("conv_arch: kernel and stride must be positive");
    }

    ArchGraph g;
    g.shared_ = shared;
    g.pixel_count_ = input.height * input.width;

    // The ring of zero nodes materialized at a grid is the padding its
    // consumer layer asks for; the last grid before an fc layer has none.
    auto ring_of = [&](std::size_t layer_index) -> std::array<std::size_t, 2> {
        if (layer_index >= specs.size()) return {0, 0};
        const auto& s = specs[layer_index];
        if (s.kind != LayerSpec::Kind::conv) return {0, 0};
        return {s.padding[0], s.padding[1]};
    };

    std::size_t h = input.height, w = input.width;
    std::array<std::size_t, 2> ring = ring_of(0);
    std::size_t padded_h = h + 2 * ring[0], padded_w = w + 2 * ring[1];

    g.grid_dims_.push_back({h, w});
    g.widths_.push_back(padded_h * padded_w);
    g.channels_.push_back(input.channels);
    g.zero_nodes_.emplace_back(padded_h * padded_w, 0);
    g.input_pixel_.resize(padded_h * padded_w, -1);
    for (std::size_t r = 0; r < padded_h; ++r) {
        for (std::size_t c = 0; c < padded_w; ++c) {
            const std::size_t node = r * padded_w + c;
            const bool pad = r < ring[0] || r >= ring[0] + h || c < ring[1] || c >= ring[1] + w;
            g.zero_nodes_.back()[node] = pad ? 1 : 0;
            if (!pad)
                g.input_pixel_[node] =
                    static_cast<std::int64_t>((r - ring[0]) * w + (c - ring[1]));
        }
    }

    bool seen_fc = false;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& s = specs[i];
        const std::size_t prev_width = g.widths_.back();
        std::vector<std::vector<std::uint32_t>> layer_preds;

        if (s.kind == LayerSpec::Kind::fully_connected) {
            seen_fc = true;
            std::vector<std::uint32_t> all;
            for (std::size_t j = 0; j < prev_width; ++j)
                if (!g.zero_nodes_.back()[j]) all.push_back(static_cast<std::uint32_t>(j));
            layer_preds.push_back(std::move(all));
            g.widths_.push_back(1);
            g.channels_.push_back(s.out_channels);
            g.zero_nodes_.emplace_back(1, 0);
            g.grid_dims_.push_back({1, 1});
            h = w = 1;
        } else {
            if (seen_fc) throw ArchError("conv_arch: conv layer after a fully-connected layer");
            const std::size_t out_h = conv_out_extent(h, s.kernel[0], s.stride[0], s.padding[0], i + 1);
            const std::size_t out_w = conv_out_extent(w, s.kernel[1], s.stride[1], s.padding[1], i + 1);

            const std::array<std::size_t, 2> next_ring = ring_of(i + 1);
            const std::size_t out_padded_h = out_h + 2 * next_ring[0];
            const std::size_t out_padded_w = out_w + 2 * next_ring[1];
            std::vector<std::uint8_t> out_zero(out_padded_h * out_padded_w, 0);

            layer_preds.resize(out_padded_h * out_padded_w);
            for (std::size_t r = 0; r < out_padded_h; ++r) {
                for (std::size_t c = 0; c < out_padded_w; ++c) {
                    const std::size_t node = r * out_padded_w + c;
                    const bool pad = r < next_ring[0] || r >= next_ring[0] + out_h ||
                                     c < next_ring[1] || c >= next_ring[1] + out_w;
                    if (pad) {
                        out_zero[node] = 1;
                        layer_preds[node] = {0};
                        continue;
                    }
                    const std::size_t rr0 = (r - next_ring[0]) * s.stride[0];
                    const std::size_t cc0 = (c - next_ring[1]) * s.stride[1];
                    std::vector<std::uint32_t> window;
                    window.reserve(s.kernel[0] * s.kernel[1]);
                    for (std::size_t u = 0; u < s.kernel[0]; ++u)
                        for (std::size_t v = 0; v < s.kernel[1]; ++v)
                            window.push_back(
                                static_cast<std::uint32_t>((rr0 + u) * padded_w + (cc0 + v)));
                    std::sort(window.begin(), window.end());
                    layer_preds[node] = std::move(window);
                }
            }
            g.widths_.push_back(out_padded_h * out_padded_w);
            g.channels_.push_back(s.out_channels);
            g.zero_nodes_.push_back(std::move(out_zero));
            g.grid_dims_.push_back({out_h, out_w});
            h = out_h;
            w = out_w;
            padded_h = out_padded_h;
            padded_w = out_padded_w;
        }
        g.preds_.push_back(std::move(layer_preds));
    }

    // zero-node rings are synthetic; only real dead neurons need the override
    g.validate(BuildOptions{true});
    if (g.dead_real_nodes_ > 0 && !opts.allow_dead) {
        throw ArchError(std::to_string(g.dead_real_nodes_) +
                        " dead neuron(s); pass allow_dead for deliberately pruned graphs");
    }
    return g;
}

std::size_t degree(const ArchGraph& g) {
    std::size_t best = 0;
    for (std::size_t l = 1; l <= g.depth(); ++l)
        for (std::size_t j = 0; j < g.width(l); ++j)
            if (!g.is_zero(l, j)) best = std::max(best, g.pred_size(l, j));
    return best;
}

PathProduct max_path_pred_product(const ArchGraph& g, const std::vector<double>* patch_norms) {
    const std::size_t L = g.depth();
    if (patch_norms && patch_norms->size() != g.width(0))
        throw ArchError("patch norm vector length must equal d_0");

    std::vector<double> down(g.width(0));
    for (std::size_t j = 0; j < g.width(0); ++j)
        down[j] = patch_norms ? (*patch_norms)[j] : 1.0;

    std::vector<std::vector<std::uint32_t>> choice(L);
    for (std::size_t l = 1; l <= L; ++l) {
        std::vector<double> next(g.width(l));
        choice[l - 1].resize(g.width(l));
        for (std::size_t j = 0; j < g.width(l); ++j) {
            const auto& p = g.pred(l, j);
            double best = -1.0;
            std::uint32_t pick = p[0];
            for (std::uint32_t q : p) {
                if (down[q] > best) {
                    best = down[q];
                    pick = q;
                }
            }
            next[j] = static_cast<double>(p.size()) * best;
            choice[l - 1][j] = pick;
        }
        down = std::move(next);
    }

    PathProduct out;
    out.value = down[0];
    out.path.resize(L + 1);
    out.path[0] = 0;
    for (std::size_t t = 0; t < L; ++t) out.path[t + 1] = choice[L - 1 - t][out.path[t]];
    return out;
}

std::size_t parameter_count(const ArchGraph& g, bool bias) {
    std::size_t total = 0;
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
            total += rows * (cin * k) + (bias ? rows : 0);
        } else {
            for (std::size_t j = 0; j < g.width(l); ++j) {
                if (g.is_zero(l, j)) continue;
                total += rows * (cin * g.pred_size(l, j)) + (bias ? rows : 0);
            }
        }
    }
    return total;
}

std::size_t shared_stack_parameter_count(std::size_t in_channels,
                                         const std::vector<ConvCount>& convs,
                                         const std::vector<DenseCount>& dense, bool bias) {
    std::size_t total = 0;
    std::size_t c = in_channels;
    for (const auto& conv : convs) {
        total += conv.out_channels * (c * conv.kernel_area) + (bias ? conv.out_channels : 0);
        c = conv.out_channels;
    }
    for (const auto& d : dense) total += d.out_dim * d.in_dim + (bias ? d.out_dim : 0);
    return total;
}

std::vector<LayerSpec> conv_lh_stack(std::size_t layers, std::size_t h_channels,
                                     std::size_t out_dim, bool literal_depth) {
    const std::size_t min_layers = literal_depth ? 2 : 3;
    if (layers < min_layers) throw ArchError("conv_lh_stack: depth too small for the family");
    const std::size_t middle = literal_depth ? layers - 2 : layers - 3;

    std::vector<LayerSpec> specs;
    for (int i = 0; i < 2; ++i) {
        LayerSpec s;
        s.kind = LayerSpec::Kind::conv;
        s.kernel = {2, 2};
        s.stride = {2, 2};
        s.padding = {0, 0};
        s.out_channels = h_channels;
        specs.push_back(s);
    }
    for (std::size_t i = 0; i < middle; ++i) {
        LayerSpec s;
        s.kind = LayerSpec::Kind::conv;
        s.kernel = {3, 3};
        s.stride = {1, 1};
        s.padding = {1, 1};
        s.out_channels = h_channels;
        specs.push_back(s);
    }
    LayerSpec fc;
    fc.kind = LayerSpec::Kind::fully_connected;
    fc.out_channels = out_dim;
    specs.push_back(fc);
    return specs;
}

std::optional<std::vector<std::size_t>> ArchGraph::uniform_pred_sizes() const {
    std::vector<std::size_t> out(depth_);
    for (std::size_t l = 1; l <= depth_; ++l) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < widths_[l]; ++j) {
            if (is_zero(l, j)) continue;
            const std::size_t sz = preds_[l - 1][j].size();
            if (k == 0) {
                k = sz;
            } else if (sz != k) {
                return std::nullopt;
            }
        }
        out[l - 1] = k;
    }
    return out;
}

nlohmann::json arch_to_json(const ArchGraph& g) {
    nlohmann::json j;
    j["format"] = "sparsebound-arch-v1";
    j["widths"] = g.widths_;
    j["channels"] = g.channels_;
    j["shared"] = g.shared_;
    j["preds"] = g.preds_;
    nlohmann::json zeros = nlohmann::json::array();
    bool any_zero = false;
    for (std::size_t l = 0; l <= g.depth_; ++l) {
        nlohmann::json layer = nlohmann::json::array();
        for (std::size_t k = 0; k < g.widths_[l]; ++k) {
            if (g.is_zero(l, k)) {
                layer.push_back(k);
                any_zero = true;
            }
        }
        zeros.push_back(layer);
    }
    if (any_zero) j["zero_nodes"] = zeros;
    j["input_pixel"] = g.input_pixel_;
    j["pixel_count"] = g.pixel_count_;
    if (!g.grid_dims_.empty()) {
        nlohmann::json dims = nlohmann::json::array();
        for (const auto& d : g.grid_dims_) dims.push_back({d[0], d[1]});
        j["grid_dims"] = dims;
    }
    if (g.dead_real_nodes_ > 0) j["allow_dead"] = true;
    return j;
}

ArchGraph arch_from_json(const nlohmann::json& j) {
    if (j.contains("conv")) {
        const auto& c = j.at("conv");
        InputShape input;
        input.channels = c.at("input").at("channels").get<std::size_t>();
        input.height = c.at("input").at("height").get<std::size_t>();
        input.width = c.at("input").at("width").get<std::size_t>();
        std::vector<LayerSpec> specs;
        for (const auto& e : c.at("layers")) {
            LayerSpec s;
            const std::string kind = e.at("kind").get<std::string>();
            if (kind == "conv") {
                s.kind = LayerSpec::Kind::conv;
                s.kernel = {e.at("kernel")[0].get<std::size_t>(), e.at("kernel")[1].get<std::size_t>()};
                s.stride = {e.at("stride")[0].get<std::size_t>(), e.at("stride")[1].get<std::size_t>()};
                if (e.contains("padding"))
                    s.padding = {e.at("padding")[0].get<std::size_t>(),
                                 e.at("padding")[1].get<std::size_t>()};
            } else if (kind == "fc") {
                s.kind = LayerSpec::Kind::fully_connected;
            } else {
                throw ArchError("unknown layer kind: " + kind);
            }
            s.out_channels = e.at("channels").get<std::size_t>();
            if (e.contains("bias")) s.bias = e.at("bias").get<bool>();
            specs.push_back(s);
        }
        BuildOptions opts;
        if (c.contains("allow_dead")) opts.allow_dead = c.at("allow_dead").get<bool>();
        return conv_arch(input, specs, c.value("shared", true), opts);
    }

    ArchGraph g;
    g.widths_ = j.at("widths").get<std::vector<std::size_t>>();
    g.channels_ = j.at("channels").get<std::vector<std::size_t>>();
    g.shared_ = j.at("shared").get<bool>();
    g.preds_ = j.at("preds").get<std::vector<std::vector<std::vector<std::uint32_t>>>>();
    if (j.contains("zero_nodes")) {
        const auto& zeros = j.at("zero_nodes");
        g.zero_nodes_.resize(g.widths_.size());
        for (std::size_t l = 0; l < g.widths_.size(); ++l) {
            g.zero_nodes_[l].assign(g.widths_[l], 0);
            for (const auto& idx : zeros.at(l)) g.zero_nodes_[l][idx.get<std::size_t>()] = 1;
        }
    }
    if (j.contains("input_pixel"))
        g.input_pixel_ = j.at("input_pixel").get<std::vector<std::int64_t>>();
    if (j.contains("pixel_count")) g.pixel_count_ = j.at("pixel_count").get<std::size_t>();
    if (j.contains("grid_dims")) {
        for (const auto& d : j.at("grid_dims"))
            g.grid_dims_.push_back({d[0].get<std::size_t>(), d[1].get<std::size_t>()});
    }
    BuildOptions opts;
    opts.allow_dead = j.value("allow_dead", false);
    g.validate(opts);
    return g;
}

ArchGraph load_arch(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArchError("cannot open architecture file: " + path);
    nlohmann::json j;
    in >> j;
    return arch_from_json(j);
}

void save_arch(const ArchGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ArchError("cannot write architecture file: " + path);
    out << arch_to_json(g).dump(2) << "\n";
}

}  // namespace sparsebound
