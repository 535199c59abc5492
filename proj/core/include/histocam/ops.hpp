#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

#include "histocam/tensor.hpp"

// Differentiable tensor operations. Every op takes the tape it records onto
// as its first argument; layouts follow NCHW for images and [N, D] for
// feature vectors.
namespace histocam::ag::ops {

enum class Mode { train, eval };

/// 2-D cross-correlation. input [N,C,H,W], kernel [K,C,kh,kw], bias [K].
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride, std::size_t padding);

// Windowed pooling over [N,C,H,W]. Max pooling sends the gradient to the first
// maximal element (row-major) of each window.
Tensor max_pool2d(Tape& tape, const Tensor& input, std::size_t window, std::size_t stride);
Tensor avg_pool2d(Tape& tape, const Tensor& input, std::size_t window, std::size_t stride);

// Pool over the whole H x W plane: [N,C,H,W] -> [N,C].
Tensor global_max_pool(Tape& tape, const Tensor& input);
Tensor global_avg_pool(Tape& tape, const Tensor& input);

/// input [N,D], weights [D,M], bias [M] -> [N,M].
Tensor dense(Tape& tape, const Tensor& input, const Tensor& weights, const Tensor& bias);

Tensor relu(Tape& tape, const Tensor& input);
Tensor sigmoid(Tape& tape, const Tensor& input);

/// [N, ...] -> [N, prod(...)]
Tensor flatten(Tape& tape, const Tensor& input);
Tensor reshape(Tape& tape, const Tensor& input, Shape shape);

Tensor concat(Tape& tape, std::span<const Tensor> inputs, std::size_t axis);

/// Inverted dropout: survivors are scaled by 1/(1-rate) in train mode; eval
/// mode returns the input unchanged.
Tensor dropout(Tape& tape, const Tensor& input, double rate, Mode mode, std::mt19937_64& rng);

Tensor sum(Tape& tape, const Tensor& input);
Tensor scale(Tape& tape, const Tensor& input, double factor);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

/// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
double uniform01(std::mt19937_64& rng);

}  // namespace histocam::ag::ops
