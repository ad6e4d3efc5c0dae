#include "cubedn/layers.hpp"

#include <cmath>

#include <Eigen/Core>

namespace cubedn::model::layers {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

struct Geometry {
  std::size_t cin, k, s, p;
  std::size_t nx, ny, nz;  // input
  std::size_t ox, oy, oz;  // output
  std::size_t rows() const { return cin * k * k * k; }
  std::size_t cols() const { return ox * oy * oz; }
  bool identity() const { return k == 1 && s == 1; }
};

Geometry geometry_of(const Conv3d& conv, const Volume& x) {
  if (x.rank() != 4 || x.dim(0) != conv.in_channels) {
    fail(ErrorCode::ShapeMismatch, "conv3d expects input (" + std::to_string(conv.in_channels) +
                                       ",x,y,z), got " + shape_string(x.shape()));
  }
  Geometry g{conv.in_channels, conv.kernel, conv.stride, conv.pad(), x.dim(1), x.dim(2), x.dim(3),
             conv.output_extent(x.dim(1)), conv.output_extent(x.dim(2)),
             conv.output_extent(x.dim(3))};
  return g;
}

// Column matrix (cin*k^3, ox*oy*oz) of input patches.
std::vector<double> im2col(const Volume& x, const Geometry& g) {
  std::vector<double> cols(g.rows() * g.cols(), 0.0);
  const auto* src = x.data();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.cin; ++c) {
    const double* plane = src + c * g.nx * g.ny * g.nz;
    for (std::size_t kx = 0; kx < g.k; ++kx) {
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kz = 0; kz < g.k; ++kz, ++row) {
          double* dst = cols.data() + row * g.cols();
          for (std::size_t ox = 0; ox < g.ox; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.s + kx) - static_cast<std::ptrdiff_t>(g.p);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.nx)) {
              dst += g.oy * g.oz;
              continue;
            }
            for (std::size_t oy = 0; oy < g.oy; ++oy) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * g.s + ky) - static_cast<std::ptrdiff_t>(g.p);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.ny)) {
                dst += g.oz;
                continue;
              }
              const double* line = plane + (static_cast<std::size_t>(ix) * g.ny + static_cast<std::size_t>(iy)) * g.nz;
              for (std::size_t oz = 0; oz < g.oz; ++oz, ++dst) {
                const auto iz = static_cast<std::ptrdiff_t>(oz * g.s + kz) - static_cast<std::ptrdiff_t>(g.p);
                if (iz >= 0 && iz < static_cast<std::ptrdiff_t>(g.nz)) *dst = line[iz];
              }
            }
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const std::vector<double>& cols, const Geometry& g, Volume& dx) {
  auto* dst = dx.data();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.cin; ++c) {
    double* plane = dst + c * g.nx * g.ny * g.nz;
    for (std::size_t kx = 0; kx < g.k; ++kx) {
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kz = 0; kz < g.k; ++kz, ++row) {
          const double* src = cols.data() + row * g.cols();
          for (std::size_t ox = 0; ox < g.ox; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.s + kx) - static_cast<std::ptrdiff_t>(g.p);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.nx)) {
              src += g.oy * g.oz;
              continue;
            }
            for (std::size_t oy = 0; oy < g.oy; ++oy) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * g.s + ky) - static_cast<std::ptrdiff_t>(g.p);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.ny)) {
                src += g.oz;
                continue;
              }
              double* line = plane + (static_cast<std::size_t>(ix) * g.ny + static_cast<std::size_t>(iy)) * g.nz;
              for (std::size_t oz = 0; oz < g.oz; ++oz, ++src) {
                const auto iz = static_cast<std::ptrdiff_t>(oz * g.s + kz) - static_cast<std::ptrdiff_t>(g.p);
                if (iz >= 0 && iz < static_cast<std::ptrdiff_t>(g.nz)) line[iz] += *src;
              }
            }
          }
        }
      }
    }
  }
}

void check_params(const Conv3d& conv, std::size_t w, std::size_t b) {
  if (w != shape_size(conv.weight_shape()) || b != conv.out_channels) {
    fail(ErrorCode::ShapeMismatch, "conv3d parameter size mismatch");
  }
}

}  // namespace

Shape Conv3d::output_shape(const Shape& input) const {
  return {out_channels, output_extent(input.at(1)), output_extent(input.at(2)),
          output_extent(input.at(3))};
}

Volume Conv3d::forward(const Volume& x, std::span<const double> w,
                       std::span<const double> b) const {
  check_params(*this, w.size(), b.size());
  const Geometry g = geometry_of(*this, x);
  Volume y({out_channels, g.ox, g.oy, g.oz});
  Map out(y.data(), static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(g.cols()));
  ConstMap weights(w.data(), static_cast<Eigen::Index>(out_channels),
                   static_cast<Eigen::Index>(g.rows()));
  if (g.identity()) {
    ConstMap cols(x.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    out.noalias() = weights * cols;
  } else {
    const auto buf = im2col(x, g);
    ConstMap cols(buf.data(), static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    out.noalias() = weights * cols;
  }
  for (std::size_t o = 0; o < out_channels; ++o) out.row(static_cast<Eigen::Index>(o)).array() += b[o];
  return y;
}

Volume Conv3d::backward(const Volume& x, const Volume& dy, std::span<const double> w,
                        std::span<double> dw, std::span<double> db, bool need_input_grad) const {
  check_params(*this, w.size(), db.size());
  if (dw.size() != w.size()) fail(ErrorCode::ShapeMismatch, "conv3d gradient buffer mismatch");
  const Geometry g = geometry_of(*this, x);
  if (dy.shape() != Shape{out_channels, g.ox, g.oy, g.oz}) {
    fail(ErrorCode::ShapeMismatch, "conv3d backward: gradient shape " + shape_string(dy.shape()));
  }
  const auto nout = static_cast<Eigen::Index>(out_channels);
  const auto nrows = static_cast<Eigen::Index>(g.rows());
  const auto ncols = static_cast<Eigen::Index>(g.cols());
  ConstMap grad_out(dy.data(), nout, ncols);
  ConstMap weights(w.data(), nout, nrows);
  Map grad_w(dw.data(), nout, nrows);
  // Plain loop: a vectorized row sum depends on buffer alignment and would make
  // training results vary between otherwise identical runs.
  for (std::size_t o = 0; o < out_channels; ++o) {
    const double* row = dy.data() + o * static_cast<std::size_t>(ncols);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < ncols; ++i) acc += row[i];
    db[o] += acc;
  }

  if (g.identity()) {
    ConstMap cols(x.data(), nrows, ncols);
    grad_w.noalias() += grad_out * cols.transpose();
    if (!need_input_grad) return {};
    Volume dx(x.shape());
    Map grad_in(dx.data(), nrows, ncols);
    grad_in.noalias() = weights.transpose() * grad_out;
    return dx;
  }
  const auto buf = im2col(x, g);
  ConstMap cols(buf.data(), nrows, ncols);
  grad_w.noalias() += grad_out * cols.transpose();
  if (!need_input_grad) return {};
  std::vector<double> grad_cols(buf.size());
  Map gc(grad_cols.data(), nrows, ncols);
  gc.noalias() = weights.transpose() * grad_out;
  Volume dx(x.shape());
  col2im(grad_cols, g, dx);
  return dx;
}

void relu_inplace(Volume& x) {
  for (auto& v : x.values()) v = v > 0 ? v : 0.0;
}

Volume relu_backward(const Volume& y, Volume dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) {
    if (!(y[i] > 0)) dy[i] = 0.0;
  }
  return dy;
}

Volume upsample2(const Volume& x) {
  const std::size_t c = x.dim(0), nx = x.dim(1), ny = x.dim(2), nz = x.dim(3);
  Volume y({c, 2 * nx, 2 * ny, 2 * nz});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < 2 * nx; ++i) {
      for (std::size_t j = 0; j < 2 * ny; ++j) {
        const double* src = &x.at(ch, i / 2, j / 2, 0);
        double* dst = &y.at(ch, i, j, 0);
        for (std::size_t k = 0; k < 2 * nz; ++k) dst[k] = src[k / 2];
      }
    }
  }
  return y;
}

Volume upsample2_backward(const Volume& dy) {
  const std::size_t c = dy.dim(0), nx = dy.dim(1) / 2, ny = dy.dim(2) / 2, nz = dy.dim(3) / 2;
  Volume dx({c, nx, ny, nz});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < 2 * nx; ++i) {
      for (std::size_t j = 0; j < 2 * ny; ++j) {
        const double* src = &dy.at(ch, i, j, 0);
        double* dst = &dx.at(ch, i / 2, j / 2, 0);
        for (std::size_t k = 0; k < 2 * nz; ++k) dst[k / 2] += src[k];
      }
    }
  }
  return dx;
}

void add_inplace(Volume& acc, const Volume& x) {
  if (acc.shape() != x.shape()) {
    fail(ErrorCode::ShapeMismatch,
         "add: " + shape_string(acc.shape()) + " vs " + shape_string(x.shape()));
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += x[i];
}

void sigmoid_inplace(Tensor<double>& x) {
  for (auto& v : x.values()) v = 1.0 / (1.0 + std::exp(-v));
}

Tensor<double> sigmoid_backward(const Tensor<double>& y, Tensor<double> dy) {
  for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= y[i] * (1.0 - y[i]);
  return dy;
}

double mse(const Tensor<double>& pred, const Tensor<double>& target) {
  if (pred.shape() != target.shape()) {
    fail(ErrorCode::ShapeMismatch,
         "loss: " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  }
  if (pred.empty()) return 0.0;
  const std::size_t classes = pred.dim(0);
  const std::size_t n = pred.size() / classes;
  double total = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    double s = 0.0;
    for (std::size_t i = c * n; i < (c + 1) * n; ++i) {
      const double d = pred[i] - target[i];
      s += d * d;
    }
    total += s / static_cast<double>(n);
  }
  return total / static_cast<double>(classes);
}

Tensor<double> mse_gradient(const Tensor<double>& pred, const Tensor<double>& target) {
  if (pred.shape() != target.shape()) {
    fail(ErrorCode::ShapeMismatch,
         "loss: " + shape_string(pred.shape()) + " vs " + shape_string(target.shape()));
  }
  Tensor<double> g(pred.shape());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

}  // namespace cubedn::model::layers
