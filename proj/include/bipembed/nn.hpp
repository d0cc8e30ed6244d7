#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bipembed/random.hpp"

namespace bipembed::nn {

enum class Activation : std::uint8_t { Identity, Relu, Tanh, Sigmoid };

std::string_view to_string(Activation a) noexcept;

/// Fully connected layer whose weights (out x in, row-major) and bias live
/// at `offset` inside a flat parameter vector.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::Identity;
    std::size_t offset = 0;

    std::size_t param_count() const noexcept { return in * out + out; }
};

/// Appends a layer's parameters to `params` and returns its descriptor.
DenseLayer add_layer(std::vector<double>& params, std::size_t in, std::size_t out,
                     Activation activation);

/// Glorot-uniform weights, zero bias.
void glorot_init(const DenseLayer& layer, std::span<double> params, Rng& rng);

/// pre = W x + b, y = act(pre).
void forward(const DenseLayer& layer, std::span<const double> params, std::span<const double> x,
             std::span<double> pre, std::span<double> y);

/// Accumulates parameter gradients for upstream dy into `grad` and, when dx
/// is non-empty, adds W^T (dy * act'(pre)) to it.
void backward(const DenseLayer& layer, std::span<const double> params, std::span<const double> x,
              std::span<const double> pre, std::span<const double> y, std::span<const double> dy,
              std::span<double> dx, std::span<double> grad);

class Adagrad {
public:
    Adagrad(std::size_t size, double learning_rate, double eps)
        : learning_rate_(learning_rate), eps_(eps), accumulated_(size, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad);

private:
    double learning_rate_;
    double eps_;
    std::vector<double> accumulated_;
};

}  // namespace bipembed::nn
