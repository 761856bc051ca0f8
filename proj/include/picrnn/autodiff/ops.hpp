#pragma once

#include "picrnn/autodiff/tensor.hpp"

#include <Eigen/SparseCore>

#include <memory>
#include <vector>

namespace picrnn::ad {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Elementwise. Binary ops require equal element counts; the result takes
// the shape of the first operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
/// scale * x + shift
Tensor affine(const Tensor& x, double scale, double shift = 0.0);
/// x * weights, weights a constant with one entry per element.
Tensor scale(const Tensor& x, const std::vector<double>& weights);
/// x + offset, offset a constant with one entry per element.
Tensor add_constant(const Tensor& x, const std::vector<double>& offset);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return hadamard(a, b); }

Tensor reshape(const Tensor& x, const Shape& shape);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// 2D cross-correlation. input NCHW, weight O x C x kh x kw, bias [O] or
/// undefined. Output spatial size floor((H + 2p - k) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride = 1, int padding = 0);

/// N x C x H x W -> N x (C r^2) x H/r x W/r. Channel c * r^2 + dy * r + dx
/// holds input (c, y * r + dy, x * r + dx).
Tensor pixel_unshuffle(const Tensor& input, int factor);
/// Inverse of pixel_unshuffle.
Tensor pixel_shuffle(const Tensor& input, int factor);

/// Nearest-neighbour upsampling by an integer factor on both spatial axes.
Tensor upsample_nearest(const Tensor& input, int factor);

/// w_o = g_o v_o / ||v_o|| with the norm over all non-output axes.
/// Throws std::domain_error for a zero-norm filter.
Tensor weight_norm(const Tensor& v, const Tensor& g);

/// Concatenates NCHW tensors along the channel axis.
Tensor concat_channels(const std::vector<Tensor>& parts);
/// Channels [first, first + count) of an NCHW tensor.
Tensor slice_channels(const Tensor& x, int first, int count);

/// y = A x with x read as a flat vector of length A.cols(). The matrix is
/// shared with the recorded graph.
Tensor sparse_matvec(std::shared_ptr<const SparseMatrix> a, const Tensor& x);

/// Mean over elements of 0.5 d^2 / beta (|d| < beta) or |d| - 0.5 beta,
/// with d = pred - target. Throws std::invalid_argument for beta <= 0.
Tensor smooth_l1(const Tensor& pred, const Tensor& target, double beta);

}  // namespace picrnn::ad
