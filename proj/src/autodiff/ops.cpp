#include "picrnn/autodiff/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace picrnn::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

Node& input(const Node& self, std::size_t i) { return *self.inputs[i]; }

void require_same_size(const Tensor& a, const Tensor& b, const char* op) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                                " vs " + to_string(b.shape()));
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.rank() != 4)
    throw std::invalid_argument(std::string(op) + ": expected NCHW tensor, got " + to_string(x.shape()));
}

/// out[i] = x[index[i]]; gradient scatters back.
Tensor gather(const Tensor& x, Shape shape, std::vector<std::size_t> index) {
  const auto src = x.data();
  Buffer out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = src[index[i]];
  return make_result(std::move(shape), std::move(out), {x},
                     [index = std::move(index)](const Node& self) {
                       auto& g = input(self, 0).grad_buffer();
                       for (std::size_t i = 0; i < index.size(); ++i) g[index[i]] += self.grad[i];
                     });
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, Forward f, Derivative df_from_output) {
  const auto src = x.data();
  Buffer out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = f(src[i]);
  return make_result(x.shape(), std::move(out), {x}, [df_from_output](const Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df_from_output(self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "add");
  Buffer out(a.data().begin(), a.data().end());
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](const Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& in = input(self, k);
      if (!in.requires_grad) continue;
      auto& g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "sub");
  Buffer out(a.data().begin(), a.data().end());
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](const Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& in = input(self, k);
      if (!in.requires_grad) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      auto& g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_size(a, b, "hadamard");
  const auto av = a.data();
  const auto bv = b.data();
  Buffer out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](const Node& self) {
    Node& na = input(self, 0);
    Node& nb = input(self, 1);
    if (na.requires_grad) {
      auto& g = na.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      auto& g = nb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * na.value[i];
    }
  });
}

Tensor affine(const Tensor& x, double scale_factor, double shift) {
  const auto src = x.data();
  Buffer out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = scale_factor * src[i] + shift;
  return make_result(x.shape(), std::move(out), {x}, [scale_factor](const Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale_factor * self.grad[i];
  });
}

Tensor scale(const Tensor& x, const std::vector<double>& weights) {
  if (weights.size() != x.size()) throw std::invalid_argument("scale: weight count mismatch");
  const auto src = x.data();
  Buffer out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = weights[i] * src[i];
  return make_result(x.shape(), std::move(out), {x}, [weights](const Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weights[i] * self.grad[i];
  });
}

Tensor add_constant(const Tensor& x, const std::vector<double>& offset) {
  if (offset.size() != x.size()) throw std::invalid_argument("add_constant: offset count mismatch");
  const auto src = x.data();
  Buffer out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i] + offset[i];
  return make_result(x.shape(), std::move(out), {x}, [](const Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double y) { return 1.0 - y * y; });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
  if (numel(shape) != x.size())
    throw std::invalid_argument("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  Buffer out(x.data().begin(), x.data().end());
  return make_result(shape, std::move(out), {x}, [](const Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  const auto src = x.data();
  const double total = std::accumulate(src.begin(), src.end(), 0.0);
  return make_result({}, {total}, {x}, [](const Node& self) {
    auto& g = input(self, 0).grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw std::invalid_argument("mean of an empty tensor");
  return affine(sum(x), 1.0 / double(x.size()));
}

// ---------------------------------------------------------------------------
// convolution

namespace {

struct ConvGeometry {
  int channels, height, width;
  int kernel_h, kernel_w, stride, padding;
  int out_h, out_w;

  int rows() const { return channels * kernel_h * kernel_w; }
  int cols() const { return out_h * out_w; }
};

void im2col(const double* x, const ConvGeometry& g, double* col) {
  const int cols = g.cols();
  for (int c = 0; c < g.channels; ++c) {
    const double* plane = x + std::size_t(c) * g.height * g.width;
    for (int p = 0; p < g.kernel_h; ++p) {
      for (int q = 0; q < g.kernel_w; ++q) {
        double* row = col + std::size_t((c * g.kernel_h + p) * g.kernel_w + q) * cols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + p;
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + std::size_t(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + q;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, const ConvGeometry& g, double* dx) {
  const int cols = g.cols();
  for (int c = 0; c < g.channels; ++c) {
    double* plane = dx + std::size_t(c) * g.height * g.width;
    for (int p = 0; p < g.kernel_h; ++p) {
      for (int q = 0; q < g.kernel_w; ++q) {
        const double* row = col + std::size_t((c * g.kernel_h + p) * g.kernel_w + q) * cols;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + p;
          if (iy < 0 || iy >= g.height) continue;
          double* dst = plane + std::size_t(iy) * g.width;
          const double* src = row + oy * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + q;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input_tensor, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  require_rank4(input_tensor, "conv2d");
  require_rank4(weight, "conv2d weight");
  if (stride < 1 || padding < 0) throw std::invalid_argument("conv2d: invalid stride or padding");
  const int batch = input_tensor.dim(0);
  const int out_channels = weight.dim(0);
  ConvGeometry g{};
  g.channels = input_tensor.dim(1);
  g.height = input_tensor.dim(2);
  g.width = input_tensor.dim(3);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.stride = stride;
  g.padding = padding;
  if (weight.dim(1) != g.channels)
    throw std::invalid_argument("conv2d: input has " + std::to_string(g.channels) +
                                " channels, weight expects " + std::to_string(weight.dim(1)));
  const int span_h = g.height + 2 * padding - g.kernel_h;
  const int span_w = g.width + 2 * padding - g.kernel_w;
  if (span_h < 0 || span_w < 0) throw std::invalid_argument("conv2d: kernel larger than padded input");
  g.out_h = span_h / stride + 1;
  g.out_w = span_w / stride + 1;
  const bool has_bias = bias.defined();
  if (has_bias && (bias.size() != std::size_t(out_channels)))
    throw std::invalid_argument("conv2d: bias length must equal output channels");

  const int rows = g.rows();
  const int cols = g.cols();
  const std::size_t in_stride = std::size_t(g.channels) * g.height * g.width;
  const std::size_t out_stride = std::size_t(out_channels) * cols;
  Buffer out(std::size_t(batch) * out_stride);
  Buffer col(std::size_t(rows) * cols);
  ConstMapMat w(weight.data().data(), out_channels, rows);
  for (int n = 0; n < batch; ++n) {
    im2col(input_tensor.data().data() + n * in_stride, g, col.data());
    MapMat y(out.data() + n * out_stride, out_channels, cols);
    y.noalias() = w * ConstMapMat(col.data(), rows, cols);
    if (has_bias) y.colwise() += ConstMapVec(bias.data().data(), out_channels);
  }

  std::vector<Tensor> inputs{input_tensor, weight};
  if (has_bias) inputs.push_back(bias);
  Shape shape{batch, out_channels, g.out_h, g.out_w};
  return make_result(std::move(shape), std::move(out), std::move(inputs),
                     [g, batch, out_channels, has_bias](const Node& self) {
    Node& x = input(self, 0);
    Node& wn = input(self, 1);
    const int rows = g.rows();
    const int cols = g.cols();
    const std::size_t in_stride = std::size_t(g.channels) * g.height * g.width;
    const std::size_t out_stride = std::size_t(out_channels) * cols;
    ConstMapMat w(wn.value.data(), out_channels, rows);
    Buffer col(std::size_t(rows) * cols);
    for (int n = 0; n < batch; ++n) {
      ConstMapMat dy(self.grad.data() + n * out_stride, out_channels, cols);
      if (wn.requires_grad) {
        im2col(x.value.data() + n * in_stride, g, col.data());
        MapMat(wn.grad_buffer().data(), out_channels, rows).noalias() +=
            dy * ConstMapMat(col.data(), rows, cols).transpose();
      }
      if (has_bias) {
        Node& b = input(self, 2);
        if (b.requires_grad) MapVec(b.grad_buffer().data(), out_channels) += dy.rowwise().sum();
      }
      if (x.requires_grad) {
        MapMat(col.data(), rows, cols).noalias() = w.transpose() * dy;
        col2im(col.data(), g, x.grad_buffer().data() + n * in_stride);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// spatial rearrangements

Tensor pixel_unshuffle(const Tensor& x, int r) {
  require_rank4(x, "pixel_unshuffle");
  if (r < 1) throw std::invalid_argument("pixel_unshuffle: factor must be >= 1");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % r != 0 || w % r != 0)
    throw std::invalid_argument("pixel_unshuffle: spatial dims " + to_string(x.shape()) +
                                " not divisible by " + std::to_string(r));
  const int ho = h / r, wo = w / r, co = c * r * r;
  std::vector<std::size_t> index(x.size());
  std::size_t i = 0;
  for (int b = 0; b < n; ++b)
    for (int oc = 0; oc < co; ++oc) {
      const int ic = oc / (r * r), dy = (oc / r) % r, dx = oc % r;
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx)
          index[i++] = ((std::size_t(b) * c + ic) * h + (y * r + dy)) * w + (xx * r + dx);
    }
  return gather(x, {n, co, ho, wo}, std::move(index));
}

Tensor pixel_shuffle(const Tensor& x, int r) {
  require_rank4(x, "pixel_shuffle");
  if (r < 1) throw std::invalid_argument("pixel_shuffle: factor must be >= 1");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c % (r * r) != 0) throw std::invalid_argument("pixel_shuffle: channels not divisible by r^2");
  const int co = c / (r * r), ho = h * r, wo = w * r;
  std::vector<std::size_t> index(x.size());
  std::size_t i = 0;
  for (int b = 0; b < n; ++b)
    for (int oc = 0; oc < co; ++oc)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx) {
          const int ic = oc * r * r + (y % r) * r + (xx % r);
          index[i++] = ((std::size_t(b) * c + ic) * h + y / r) * w + xx / r;
        }
  return gather(x, {n, co, ho, wo}, std::move(index));
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  require_rank4(x, "upsample_nearest");
  if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = h * factor, wo = w * factor;
  std::vector<std::size_t> index(std::size_t(n) * c * ho * wo);
  std::size_t i = 0;
  for (int plane = 0; plane < n * c; ++plane)
    for (int y = 0; y < ho; ++y)
      for (int xx = 0; xx < wo; ++xx)
        index[i++] = (std::size_t(plane) * h + y / factor) * w + xx / factor;
  return gather(x, {n, c, ho, wo}, std::move(index));
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: nothing to concatenate");
  for (const auto& p : parts) require_rank4(p, "concat_channels");
  const int n = parts[0].dim(0), h = parts[0].dim(2), w = parts[0].dim(3);
  int total = 0;
  for (const auto& p : parts) {
    if (p.dim(0) != n || p.dim(2) != h || p.dim(3) != w)
      throw std::invalid_argument("concat_channels: mismatched shapes");
    total += p.dim(1);
  }
  const std::size_t plane = std::size_t(h) * w;
  Buffer out(std::size_t(n) * total * plane);
  std::vector<int> sizes;
  for (int b = 0; b < n; ++b) {
    double* dst = out.data() + std::size_t(b) * total * plane;
    for (const auto& p : parts) {
      const std::size_t len = std::size_t(p.dim(1)) * plane;
      const double* src = p.data().data() + b * len;
      std::copy(src, src + len, dst);
      dst += len;
    }
  }
  for (const auto& p : parts) sizes.push_back(p.dim(1));
  return make_result({n, total, h, w}, std::move(out), parts,
                     [n, total, plane, sizes](const Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const std::size_t len = std::size_t(sizes[k]) * plane;
      Node& in = input(self, k);
      if (in.requires_grad) {
        auto& g = in.grad_buffer();
        for (int b = 0; b < n; ++b) {
          const double* src = self.grad.data() + std::size_t(b) * total * plane + offset;
          double* dst = g.data() + b * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
      }
      offset += len;
    }
  });
}

Tensor slice_channels(const Tensor& x, int first, int count) {
  require_rank4(x, "slice_channels");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (first < 0 || count < 0 || first + count > c)
    throw std::invalid_argument("slice_channels: range out of bounds");
  const std::size_t plane = std::size_t(h) * w;
  std::vector<std::size_t> index(std::size_t(n) * count * plane);
  std::size_t i = 0;
  for (int b = 0; b < n; ++b)
    for (int ch = first; ch < first + count; ++ch)
      for (std::size_t p = 0; p < plane; ++p) index[i++] = (std::size_t(b) * c + ch) * plane + p;
  return gather(x, {n, count, h, w}, std::move(index));
}

// ---------------------------------------------------------------------------

Tensor weight_norm(const Tensor& v, const Tensor& g) {
  if (v.rank() < 1) throw std::invalid_argument("weight_norm: direction tensor needs an output axis");
  const int filters = v.dim(0);
  if (g.size() != std::size_t(filters))
    throw std::invalid_argument("weight_norm: one magnitude per filter required");
  const std::size_t per = v.size() / std::size_t(filters);
  ConstMapMat vm(v.data().data(), filters, Eigen::Index(per));
  Eigen::VectorXd norms = vm.rowwise().norm();
  for (int o = 0; o < filters; ++o)
    if (!(norms[o] > 0)) throw std::domain_error("weight_norm: zero-norm filter " + std::to_string(o));
  Buffer out(v.size());
  MapMat wm(out.data(), filters, Eigen::Index(per));
  const auto gv = g.data();
  for (int o = 0; o < filters; ++o) wm.row(o) = vm.row(o) * (gv[o] / norms[o]);

  return make_result(v.shape(), std::move(out), {v, g},
                     [filters, per, norms](const Node& self) {
    Node& vn = input(self, 0);
    Node& gn = input(self, 1);
    ConstMapMat vm(vn.value.data(), filters, Eigen::Index(per));
    ConstMapMat dw(self.grad.data(), filters, Eigen::Index(per));
    for (int o = 0; o < filters; ++o) {
      const double proj = dw.row(o).dot(vm.row(o)) / norms[o];
      if (gn.requires_grad) gn.grad_buffer()[o] += proj;
      if (vn.requires_grad) {
        const double scale_factor = gn.value[o] / norms[o];
        MapMat(vn.grad_buffer().data(), filters, Eigen::Index(per)).row(o) +=
            scale_factor * (dw.row(o) - (proj / norms[o]) * vm.row(o));
      }
    }
  });
}

Tensor sparse_matvec(std::shared_ptr<const SparseMatrix> a, const Tensor& x) {
  if (!a) throw std::invalid_argument("sparse_matvec: null matrix");
  if (std::size_t(a->cols()) != x.size())
    throw std::invalid_argument("sparse_matvec: matrix has " + std::to_string(a->cols()) +
                                " columns, tensor has " + std::to_string(x.size()) + " elements");
  Buffer out(std::size_t(a->rows()));
  MapVec(out.data(), a->rows()).noalias() = *a * ConstMapVec(x.data().data(), a->cols());
  return make_result({int(a->rows())}, std::move(out), {x}, [a](const Node& self) {
    auto& g = input(self, 0).grad_buffer();
    MapVec(g.data(), a->cols()).noalias() +=
        a->transpose() * ConstMapVec(self.grad.data(), a->rows());
  });
}

Tensor smooth_l1(const Tensor& pred, const Tensor& target, double beta) {
  if (!(beta > 0)) throw std::invalid_argument("smooth_l1: beta must be positive");
  require_same_size(pred, target, "smooth_l1");
  const auto p = pred.data();
  const auto t = target.data();
  const std::size_t count = p.size();
  if (count == 0) throw std::invalid_argument("smooth_l1: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = p[i] - t[i];
    const double ad = std::abs(d);
    total += ad < beta ? 0.5 * d * d / beta : ad - 0.5 * beta;
  }
  return make_result({}, {total / double(count)}, {pred, target},
                     [beta, count](const Node& self) {
    Node& pn = input(self, 0);
    Node& tn = input(self, 1);
    const double upstream = self.grad[0] / double(count);
    double* gp = pn.requires_grad ? pn.grad_buffer().data() : nullptr;
    double* gt = tn.requires_grad ? tn.grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < count; ++i) {
      const double d = pn.value[i] - tn.value[i];
      const double slope = std::abs(d) < beta ? d / beta : (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
      if (gp) gp[i] += upstream * slope;
      if (gt) gt[i] -= upstream * slope;
    }
  });
}

}  // namespace picrnn::ad
