#include "bipembed/nn.hpp"

#include <algorithm>
#include <cmath>

namespace bipembed::nn {

std::string_view to_string(Activation a) noexcept {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "?";
}

DenseLayer add_layer(std::vector<double>& params, std::size_t in, std::size_t out,
                     Activation activation) {
    DenseLayer layer{in, out, activation, params.size()};
    params.resize(params.size() + layer.param_count(), 0.0);
    return layer;
}

void glorot_init(const DenseLayer& layer, std::span<double> params, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    double* w = params.data() + layer.offset;
    for (std::size_t k = 0; k < layer.in * layer.out; ++k) w[k] = rng.uniform(-limit, limit);
    std::fill_n(w + layer.in * layer.out, layer.out, 0.0);
}

namespace {

double apply(Activation a, double x) noexcept {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    return x;
}

double derivative(Activation a, double pre, double y) noexcept {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Sigmoid: return y * (1.0 - y);
    }
    return 1.0;
}

}  // namespace

void forward(const DenseLayer& layer, std::span<const double> params, std::span<const double> x,
             std::span<double> pre, std::span<double> y) {
    const double* w = params.data() + layer.offset;
    const double* b = w + layer.in * layer.out;
    for (std::size_t o = 0; o < layer.out; ++o) {
        const double* row = w + o * layer.in;
        double s = b[o];
        for (std::size_t i = 0; i < layer.in; ++i) s += row[i] * x[i];
        pre[o] = s;
        y[o] = apply(layer.activation, s);
    }
}

void backward(const DenseLayer& layer, std::span<const double> params, std::span<const double> x,
              std::span<const double> pre, std::span<const double> y, std::span<const double> dy,
              std::span<double> dx, std::span<double> grad) {
    const double* w = params.data() + layer.offset;
    double* gw = grad.data() + layer.offset;
    double* gb = gw + layer.in * layer.out;
    for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = dy[o] * derivative(layer.activation, pre[o], y[o]);
        if (d == 0.0) continue;
        gb[o] += d;
        double* grow = gw + o * layer.in;
        const double* row = w + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) grow[i] += d * x[i];
        if (!dx.empty()) {
            for (std::size_t i = 0; i < layer.in; ++i) dx[i] += d * row[i];
        }
    }
}

void Adagrad::step(std::span<double> params, std::span<const double> grad) {
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (grad[k] == 0.0) continue;
        accumulated_[k] += grad[k] * grad[k];
        params[k] -= learning_rate_ * grad[k] / std::sqrt(accumulated_[k] + eps_);
    }
}

}  // namespace bipembed::nn
