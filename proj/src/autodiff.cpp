#include "sparsebound/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "sparsebound/simd.hpp"

namespace sparsebound {
namespace {

void require_shapes(const ArchGraph& g, const WeightSet& w) {
    if (!w.shape_matches(g)) throw std::invalid_argument("weights do not match the graph");
}

void size_trace(const ArchGraph& g, ActivationTrace& trace) {
    trace.z.resize(g.depth() + 1);
    for (std::size_t l = 0; l <= g.depth(); ++l) trace.z[l].assign(g.width(l) * g.channels(l), 0.0);
}

}  // namespace

void forward_into(const ArchGraph& g, const WeightSet& w, const double* x,
                  ActivationTrace& trace, double* out) {
    size_trace(g, trace);

    // layer 0: place pixels on the real input nodes
    const std::size_t c0 = g.channels(0);
    const std::size_t npix = g.pixel_count();
    for (std::size_t j = 0; j < g.width(0); ++j) {
        const std::int64_t px = g.input_pixel(j);
        if (px < 0) continue;
        double* dst = trace.z[0].data() + j * c0;
        for (std::size_t r = 0; r < c0; ++r) dst[r] = x[r * npix + static_cast<std::size_t>(px)];
    }

    std::vector<double> sigma;   // ReLU of the previous layer
    std::vector<double> gather;  // one node's stacked input
    for (std::size_t l = 1; l <= g.depth(); ++l) {
        const std::size_t cin = g.channels(l - 1);
        const std::size_t cout = g.channels(l);
        const std::vector<double>& prev = trace.z[l - 1];

        const double* source = prev.data();
        if (l >= 2) {
            sigma.resize(prev.size());
            simd::relu(prev.data(), sigma.data(), prev.size());
            source = sigma.data();
        }

        for (std::size_t j = 0; j < g.width(l); ++j) {
            if (g.is_zero(l, j)) continue;
            const auto& pred = g.pred(l, j);
            gather.resize(cin * pred.size());
            for (std::size_t t = 0; t < pred.size(); ++t) {
                const double* src = source + pred[t] * cin;
                double* dst = gather.data() + t * cin;
                for (std::size_t r = 0; r < cin; ++r) dst[r] = src[r];
            }
            const Matrix& m = w.matrix(l, j);
            double* dst = trace.z[l].data() + j * cout;
            for (std::size_t r = 0; r < cout; ++r)
                dst[r] = simd::dot(m.row(r), gather.data(), gather.size());
        }
    }

    const double* top = trace.z[g.depth()].data();
    for (std::size_t r = 0; r < g.channels(g.depth()); ++r) out[r] = top[r];
}

Tensor forward(const ArchGraph& g, const WeightSet& w, const Tensor& x, ActivationTrace* trace) {
    require_shapes(g, w);
    if (x.rank() != 2 || x.dim(0) != g.channels(0) || x.dim(1) != g.pixel_count())
        throw std::invalid_argument("forward: input must have shape (c_0, pixel_count)");
    x.check_finite("forward input");

    ActivationTrace local;
    ActivationTrace& tr = trace ? *trace : local;
    Tensor out({g.channels(g.depth())});
    forward_into(g, w, x.data.data(), tr, out.data.data());
    return out;
}

void backward_accumulate(const ArchGraph& g, const WeightSet& w, const ActivationTrace& trace,
                         const double* out_grad, WeightSet& grad_accum) {
    const std::size_t L = g.depth();

    std::vector<double> gz(trace.z[L].size());
    for (std::size_t r = 0; r < gz.size(); ++r) gz[r] = out_grad[r];

    std::vector<double> sigma, gather, gsig, gz_prev, gu;
    for (std::size_t l = L; l >= 1; --l) {
        const std::size_t cin = g.channels(l - 1);
        const std::size_t cout = g.channels(l);
        const std::vector<double>& prev = trace.z[l - 1];

        const double* source = prev.data();
        if (l >= 2) {
            sigma.resize(prev.size());
            simd::relu(prev.data(), sigma.data(), prev.size());
            source = sigma.data();
        }
        gsig.assign(prev.size(), 0.0);

        for (std::size_t j = 0; j < g.width(l); ++j) {
            if (g.is_zero(l, j)) continue;
            const auto& pred = g.pred(l, j);
            const std::size_t in_dim = cin * pred.size();
            gather.resize(in_dim);
            for (std::size_t t = 0; t < pred.size(); ++t) {
                const double* src = source + pred[t] * cin;
                double* dst = gather.data() + t * cin;
                for (std::size_t r = 0; r < cin; ++r) dst[r] = src[r];
            }

            const double* gz_node = gz.data() + j * cout;
            const Matrix& m = w.matrix(l, j);
            Matrix& gm = grad_accum.matrix(l, j);
            gu.assign(in_dim, 0.0);
            for (std::size_t r = 0; r < cout; ++r) {
                const double gr = gz_node[r];
                simd::axpy(gr, gather.data(), gm.row(r), in_dim);
                simd::axpy(gr, m.row(r), gu.data(), in_dim);
            }
            for (std::size_t t = 0; t < pred.size(); ++t) {
                double* dst = gsig.data() + pred[t] * cin;
                const double* src = gu.data() + t * cin;
                for (std::size_t r = 0; r < cin; ++r) dst[r] += src[r];
            }
        }

        if (l == 1) break;
        gz_prev.assign(prev.size(), 0.0);
        simd::relu_grad_accum(prev.data(), gsig.data(), gz_prev.data(), prev.size());
        gz.swap(gz_prev);
    }
}

WeightSet backward(const ArchGraph& g, const WeightSet& w, const ActivationTrace& trace,
                   const std::vector<double>& out_grad) {
    require_shapes(g, w);
    if (trace.z.size() != g.depth() + 1) throw std::invalid_argument("backward: stale trace");
    if (out_grad.size() != g.channels(g.depth()))
        throw std::invalid_argument("backward: upstream gradient has wrong dimension");
    WeightSet grad = WeightSet::zeros_like(g);
    backward_accumulate(g, w, trace, out_grad.data(), grad);
    return grad;
}

}  // namespace sparsebound
