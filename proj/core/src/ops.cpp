#include "histocam/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "histocam/errors.hpp"

namespace histocam::ag::ops {
namespace {

using NodePtr = std::shared_ptr<detail::Node>;

void expect_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                         shape_to_string(t.shape()));
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w;
  std::size_t k, kh, kw;
  std::size_t stride, pad;
  std::size_t oh, ow;

  std::size_t patch() const { return c * kh * kw; }
  std::size_t positions() const { return oh * ow; }
};

// Unfolds one sample [C,H,W] into a [C*kh*kw, oh*ow] matrix.
void im2col(const ConvGeometry& g, const double* image, std::vector<double>& col) {
  const auto positions = g.positions();
  col.assign(g.patch() * positions, 0.0);
  std::size_t r = 0;
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    const double* plane = image + ch * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj, ++r) {
        double* row = col.data() + r * positions;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const double* src = plane + static_cast<std::size_t>(iy) * g.w;
          double* dst = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const std::vector<double>& col, double* image_grad) {
  const auto positions = g.positions();
  std::size_t r = 0;
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    double* plane = image_grad + ch * g.h * g.w;
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj, ++r) {
        const double* row = col.data() + r * positions;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * g.w;
          const double* src = row + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

struct PoolGeometry {
  std::size_t n, c, h, w;
  std::size_t window, stride;
  std::size_t oh, ow;
};

PoolGeometry pool_geometry(const Tensor& input, std::size_t window, std::size_t stride, const char* op) {
  expect_rank(input, 4, op);
  if (window == 0 || stride == 0) throw ParameterError(std::string(op) + ": window and stride must be positive");
  const auto& s = input.shape();
  if (window > s[2] || window > s[3]) {
    throw DimensionError(std::string(op) + ": window " + std::to_string(window) + " larger than input " +
                         shape_to_string(s));
  }
  return {s[0], s[1], s[2], s[3], window, stride, (s[2] - window) / stride + 1, (s[3] - window) / stride + 1};
}

}  // namespace

std::size_t conv_output_extent(std::size_t extent, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (stride == 0) throw ParameterError("conv2d: stride must be positive");
  if (extent + 2 * padding < kernel) {
    throw DimensionError("conv2d: kernel extent " + std::to_string(kernel) + " exceeds padded input extent " +
                         std::to_string(extent + 2 * padding));
  }
  return (extent + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  expect_rank(input, 4, "conv2d");
  expect_rank(kernel, 4, "conv2d");
  const auto& is = input.shape();
  const auto& ks = kernel.shape();
  if (is[1] != ks[1]) {
    throw DimensionError("conv2d: input " + shape_to_string(is) + " and kernel " + shape_to_string(ks) +
                         " disagree on channels");
  }
  if (bias.rank() != 1 || bias.dim(0) != ks[0]) {
    throw DimensionError("conv2d: bias " + shape_to_string(bias.shape()) + " does not match kernel " +
                         shape_to_string(ks));
  }
  ConvGeometry g{is[0], is[1], is[2], is[3], ks[0], ks[2], ks[3], stride, padding, 0, 0};
  g.oh = conv_output_extent(g.h, g.kh, stride, padding);
  g.ow = conv_output_extent(g.w, g.kw, stride, padding);

  const auto positions = g.positions();
  const auto patch = g.patch();
  const auto x = input.values();
  const auto wt = kernel.values();
  const auto b = bias.values();

  std::vector<double> out(g.n * g.k * positions);
  std::vector<double> col;
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, x.data() + n * g.c * g.h * g.w, col);
    for (std::size_t k = 0; k < g.k; ++k) {
      double* dst = out.data() + (n * g.k + k) * positions;
      std::fill(dst, dst + positions, b[k]);
      const double* wrow = wt.data() + k * patch;
      for (std::size_t r = 0; r < patch; ++r) {
        const double wv = wrow[r];
        const double* src = col.data() + r * positions;
        for (std::size_t p = 0; p < positions; ++p) dst[p] += wv * src[p];
      }
    }
  }

  const std::array<Tensor, 3> inputs{input, kernel, bias};
  NodePtr xn = input.node(), wn = kernel.node(), bn = bias.node();
  return tape.record(inputs, {g.n, g.k, g.oh, g.ow}, std::move(out),
                     [g, xn, wn, bn](std::span<const double> gout) {
                       const auto positions = g.positions();
                       const auto patch = g.patch();
                       if (bn->requires_grad) {
                         std::vector<double> db(g.k, 0.0);
                         for (std::size_t n = 0; n < g.n; ++n)
                           for (std::size_t k = 0; k < g.k; ++k) {
                             const double* src = gout.data() + (n * g.k + k) * positions;
                             double acc = 0.0;
                             for (std::size_t p = 0; p < positions; ++p) acc += src[p];
                             db[k] += acc;
                           }
                         bn->accumulate(db);
                       }
                       if (!wn->requires_grad && !xn->requires_grad) return;
                       std::vector<double> dw(wn->requires_grad ? g.k * patch : 0, 0.0);
                       std::vector<double> dx(xn->requires_grad ? xn->value.size() : 0, 0.0);
                       std::vector<double> col, dcol;
                       for (std::size_t n = 0; n < g.n; ++n) {
                         const double* go = gout.data() + n * g.k * positions;
                         if (wn->requires_grad) {
                           im2col(g, xn->value.data() + n * g.c * g.h * g.w, col);
                           for (std::size_t k = 0; k < g.k; ++k) {
                             const double* grow = go + k * positions;
                             for (std::size_t r = 0; r < patch; ++r) {
                               const double* crow = col.data() + r * positions;
                               double acc = 0.0;
                               for (std::size_t p = 0; p < positions; ++p) acc += grow[p] * crow[p];
                               dw[k * patch + r] += acc;
                             }
                           }
                         }
                         if (xn->requires_grad) {
                           dcol.assign(patch * positions, 0.0);
                           for (std::size_t k = 0; k < g.k; ++k) {
                             const double* grow = go + k * positions;
                             const double* wrow = wn->value.data() + k * patch;
                             for (std::size_t r = 0; r < patch; ++r) {
                               const double wv = wrow[r];
                               double* drow = dcol.data() + r * positions;
                               for (std::size_t p = 0; p < positions; ++p) drow[p] += wv * grow[p];
                             }
                           }
                           col2im_add(g, dcol, dx.data() + n * g.c * g.h * g.w);
                         }
                       }
                       if (wn->requires_grad) wn->accumulate(dw);
                       if (xn->requires_grad) xn->accumulate(dx);
                     });
}

Tensor max_pool2d(Tape& tape, const Tensor& input, std::size_t window, std::size_t stride) {
  const auto g = pool_geometry(input, window, stride, "max_pool2d");
  const auto x = input.values();
  std::vector<double> out(g.n * g.c * g.oh * g.ow);
  std::vector<std::size_t> argmax(out.size());
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < g.n * g.c; ++plane) {
    const std::size_t base = plane * g.h * g.w;
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox, ++o) {
        std::size_t best = base + oy * g.stride * g.w + ox * g.stride;
        for (std::size_t i = 0; i < g.window; ++i) {
          for (std::size_t j = 0; j < g.window; ++j) {
            const std::size_t idx = base + (oy * g.stride + i) * g.w + ox * g.stride + j;
            if (x[idx] > x[best]) best = idx;
          }
        }
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  return tape.record(inputs, {g.n, g.c, g.oh, g.ow}, std::move(out),
                     [xn, argmax = std::move(argmax)](std::span<const double> gout) {
                       std::vector<double> dx(xn->value.size(), 0.0);
                       for (std::size_t o = 0; o < gout.size(); ++o) dx[argmax[o]] += gout[o];
                       xn->accumulate(dx);
                     });
}

Tensor avg_pool2d(Tape& tape, const Tensor& input, std::size_t window, std::size_t stride) {
  const auto g = pool_geometry(input, window, stride, "avg_pool2d");
  const auto x = input.values();
  const double inv = 1.0 / static_cast<double>(window * window);
  std::vector<double> out(g.n * g.c * g.oh * g.ow);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < g.n * g.c; ++plane) {
    const std::size_t base = plane * g.h * g.w;
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox, ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.window; ++i)
          for (std::size_t j = 0; j < g.window; ++j) acc += x[base + (oy * g.stride + i) * g.w + ox * g.stride + j];
        out[o] = acc * inv;
      }
    }
  }
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  return tape.record(inputs, {g.n, g.c, g.oh, g.ow}, std::move(out), [xn, g, inv](std::span<const double> gout) {
    std::vector<double> dx(xn->value.size(), 0.0);
    std::size_t o = 0;
    for (std::size_t plane = 0; plane < g.n * g.c; ++plane) {
      const std::size_t base = plane * g.h * g.w;
      for (std::size_t oy = 0; oy < g.oh; ++oy)
        for (std::size_t ox = 0; ox < g.ow; ++ox, ++o) {
          const double share = gout[o] * inv;
          for (std::size_t i = 0; i < g.window; ++i)
            for (std::size_t j = 0; j < g.window; ++j) dx[base + (oy * g.stride + i) * g.w + ox * g.stride + j] += share;
        }
    }
    xn->accumulate(dx);
  });
}

Tensor global_max_pool(Tape& tape, const Tensor& input) {
  expect_rank(input, 4, "global_max_pool");
  const auto& s = input.shape();
  const std::size_t planes = s[0] * s[1];
  const std::size_t area = s[2] * s[3];
  const auto x = input.values();
  std::vector<double> out(planes);
  std::vector<std::size_t> argmax(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    std::size_t best = p * area;
    for (std::size_t i = p * area + 1; i < (p + 1) * area; ++i)
      if (x[i] > x[best]) best = i;
    out[p] = x[best];
    argmax[p] = best;
  }
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  return tape.record(inputs, {s[0], s[1]}, std::move(out),
                     [xn, argmax = std::move(argmax)](std::span<const double> gout) {
                       std::vector<double> dx(xn->value.size(), 0.0);
                       for (std::size_t p = 0; p < gout.size(); ++p) dx[argmax[p]] += gout[p];
                       xn->accumulate(dx);
                     });
}

Tensor global_avg_pool(Tape& tape, const Tensor& input) {
  expect_rank(input, 4, "global_avg_pool");
  const auto& s = input.shape();
  const std::size_t planes = s[0] * s[1];
  const std::size_t area = s[2] * s[3];
  const auto x = input.values();
  std::vector<double> out(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    double acc = 0.0;
    for (std::size_t i = p * area; i < (p + 1) * area; ++i) acc += x[i];
    out[p] = acc / static_cast<double>(area);
  }
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  return tape.record(inputs, {s[0], s[1]}, std::move(out), [xn, area](std::span<const double> gout) {
    std::vector<double> dx(xn->value.size());
    const double inv = 1.0 / static_cast<double>(area);
    for (std::size_t p = 0; p < gout.size(); ++p)
      std::fill(dx.begin() + static_cast<std::ptrdiff_t>(p * area),
                dx.begin() + static_cast<std::ptrdiff_t>((p + 1) * area), gout[p] * inv);
    xn->accumulate(dx);
  });
}

Tensor dense(Tape& tape, const Tensor& input, const Tensor& weights, const Tensor& bias) {
  expect_rank(input, 2, "dense");
  expect_rank(weights, 2, "dense");
  const std::size_t n_rows = input.dim(0), d = input.dim(1), m = weights.dim(1);
  if (weights.dim(0) != d || bias.rank() != 1 || bias.dim(0) != m) {
    throw DimensionError("dense: input " + shape_to_string(input.shape()) + ", weights " +
                         shape_to_string(weights.shape()) + " and bias " + shape_to_string(bias.shape()) +
                         " are not conformable");
  }
  const auto x = input.values();
  const auto w = weights.values();
  const auto b = bias.values();
  std::vector<double> out(n_rows * m);
  for (std::size_t n = 0; n < n_rows; ++n) {
    double* dst = out.data() + n * m;
    std::copy(b.begin(), b.end(), dst);
    for (std::size_t i = 0; i < d; ++i) {
      const double xv = x[n * d + i];
      const double* wrow = w.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += xv * wrow[j];
    }
  }
  const std::array<Tensor, 3> inputs{input, weights, bias};
  NodePtr xn = input.node(), wn = weights.node(), bn = bias.node();
  return tape.record(inputs, {n_rows, m}, std::move(out), [xn, wn, bn, n_rows, d, m](std::span<const double> gout) {
    if (bn->requires_grad) {
      std::vector<double> db(m, 0.0);
      for (std::size_t n = 0; n < n_rows; ++n)
        for (std::size_t j = 0; j < m; ++j) db[j] += gout[n * m + j];
      bn->accumulate(db);
    }
    if (wn->requires_grad) {
      std::vector<double> dw(d * m, 0.0);
      for (std::size_t n = 0; n < n_rows; ++n)
        for (std::size_t i = 0; i < d; ++i) {
          const double xv = xn->value[n * d + i];
          for (std::size_t j = 0; j < m; ++j) dw[i * m + j] += xv * gout[n * m + j];
        }
      wn->accumulate(dw);
    }
    if (xn->requires_grad) {
      std::vector<double> dx(n_rows * d, 0.0);
      for (std::size_t n = 0; n < n_rows; ++n)
        for (std::size_t i = 0; i < d; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += gout[n * m + j] * wn->value[i * m + j];
          dx[n * d + i] = acc;
        }
      xn->accumulate(dx);
    }
  });
}

Tensor relu(Tape& tape, const Tensor& input) {
  const auto x = input.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  return tape.record(inputs, input.shape(), std::move(out), [xn](std::span<const double> gout) {
    std::vector<double> dx(gout.size());
    for (std::size_t i = 0; i < gout.size(); ++i) dx[i] = xn->value[i] > 0.0 ? gout[i] : 0.0;
    xn->accumulate(dx);
  });
}

Tensor sigmoid(Tape& tape, const Tensor& input) {
  const auto x = input.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    } else {
      const double e = std::exp(x[i]);
      out[i] = e / (1.0 + e);
    }
  }
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  auto y = std::make_shared<std::vector<double>>(out);
  return tape.record(inputs, input.shape(), std::move(out), [xn, y](std::span<const double> gout) {
    std::vector<double> dx(gout.size());
    for (std::size_t i = 0; i < gout.size(); ++i) dx[i] = gout[i] * (*y)[i] * (1.0 - (*y)[i]);
    xn->accumulate(dx);
  });
}

Tensor reshape(Tape& tape, const Tensor& input, Shape shape) {
  if (shape_numel(shape) != input.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(input.shape()) + " as " + shape_to_string(shape));
  }
  const auto x = input.values();
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  return tape.record(inputs, std::move(shape), std::vector<double>(x.begin(), x.end()),
                     [xn](std::span<const double> gout) { xn->accumulate(gout); });
}

Tensor flatten(Tape& tape, const Tensor& input) {
  if (input.rank() < 2) throw DimensionError("flatten: need at least rank 2, got " + shape_to_string(input.shape()));
  return reshape(tape, input, {input.dim(0), input.numel() / input.dim(0)});
}

Tensor concat(Tape& tape, std::span<const Tensor> inputs, std::size_t axis) {
  if (inputs.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = inputs[0].shape();
  if (axis >= first.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& t : inputs) {
    const auto& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      throw DimensionError("concat: " + shape_to_string(s) + " does not match " + shape_to_string(first) +
                           " off axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  std::vector<std::size_t> chunk(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) chunk[t] = inputs[t].dim(axis) * inner;
  const std::size_t row = out_shape[axis] * inner;

  std::vector<double> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto x = inputs[t].values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o * chunk[t]), chunk[t], out.begin() + static_cast<std::ptrdiff_t>(o * row + offset));
    offset += chunk[t];
  }

  std::vector<NodePtr> nodes;
  for (const auto& t : inputs) nodes.push_back(t.node());
  return tape.record(inputs, std::move(out_shape), std::move(out),
                     [nodes, chunk, outer, row](std::span<const double> gout) {
                       std::size_t offset = 0;
                       for (std::size_t t = 0; t < nodes.size(); ++t) {
                         if (nodes[t]->requires_grad) {
                           std::vector<double> dx(outer * chunk[t]);
                           for (std::size_t o = 0; o < outer; ++o)
                             std::copy_n(gout.begin() + static_cast<std::ptrdiff_t>(o * row + offset), chunk[t],
                                         dx.begin() + static_cast<std::ptrdiff_t>(o * chunk[t]));
                           nodes[t]->accumulate(dx);
                         }
                         offset += chunk[t];
                       }
                     });
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor dropout(Tape& tape, const Tensor& input, double rate, Mode mode, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::eval) return input;
  const auto x = input.values();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
    out[i] = x[i] * mask[i];
  }
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  return tape.record(inputs, input.shape(), std::move(out), [xn, mask = std::move(mask)](std::span<const double> gout) {
    std::vector<double> dx(gout.size());
    for (std::size_t i = 0; i < gout.size(); ++i) dx[i] = gout[i] * mask[i];
    xn->accumulate(dx);
  });
}

Tensor sum(Tape& tape, const Tensor& input) {
  double acc = 0.0;
  for (double v : input.values()) acc += v;
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  return tape.record(inputs, {1}, {acc}, [xn](std::span<const double> gout) {
    xn->accumulate(std::vector<double>(xn->value.size(), gout[0]));
  });
}

Tensor scale(Tape& tape, const Tensor& input, double factor) {
  const auto x = input.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  const std::array<Tensor, 1> inputs{input};
  NodePtr xn = input.node();
  return tape.record(inputs, input.shape(), std::move(out), [xn, factor](std::span<const double> gout) {
    std::vector<double> dx(gout.size());
    for (std::size_t i = 0; i < gout.size(); ++i) dx[i] = gout[i] * factor;
    xn->accumulate(dx);
  });
}

namespace {

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "add");
  const auto x = a.values();
  const auto y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  const std::array<Tensor, 2> inputs{a, b};
  NodePtr an = a.node(), bn = b.node();
  return tape.record(inputs, a.shape(), std::move(out), [an, bn](std::span<const double> gout) {
    if (an->requires_grad) an->accumulate(gout);
    if (bn->requires_grad) bn->accumulate(gout);
  });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "mul");
  const auto x = a.values();
  const auto y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  const std::array<Tensor, 2> inputs{a, b};
  NodePtr an = a.node(), bn = b.node();
  return tape.record(inputs, a.shape(), std::move(out), [an, bn](std::span<const double> gout) {
    // Read both operands before accumulating: a and b may share storage.
    std::vector<double> da(gout.size()), db(gout.size());
    for (std::size_t i = 0; i < gout.size(); ++i) {
      da[i] = gout[i] * bn->value[i];
      db[i] = gout[i] * an->value[i];
    }
    if (an->requires_grad) an->accumulate(da);
    if (bn->requires_grad) bn->accumulate(db);
  });
}

}  // namespace histocam::ag::ops
