// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Dense 3D layers with explicit forward/backward passes. Activations are
// [channels x voxels] row-major matrices over an x-major, z-fastest lattice.
// Everything is templated on the scalar so gradient checks can run in double
// while training runs in float.

#pragma once

#include "semabs/common.hpp"

#include <Eigen/Dense>

#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace semabs::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<Mat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

struct Dims {
  int x = 1, y = 1, z = 1;
  std::size_t voxels() const { return static_cast<std::size_t>(x) * y * z; }
  Dims half() const { return {x / 2, y / 2, z / 2}; }
  Dims twice() const { return {x * 2, y * 2, z * 2}; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

// ---------------------------------------------------------------------------
// Parameters

template <class T>
struct Tensor {
  std::string name;
  std::vector<int> shape;
  AlignedVector<T> value;

  std::size_t size() const { return value.size(); }
};

/// Ordered, named parameter tensors. Gradients and optimizer moments use the
/// same layout (see zeros_like).
template <class T>
class ParamSet {
 public:
  std::size_t add(std::string name, std::vector<int> shape) {
    if (index_.contains(name)) throw ContractViolation("ParamSet: duplicate tensor " + name);
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                          [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
    index_[name] = tensors_.size();
    tensors_.push_back({std::move(name), std::move(shape), AlignedVector<T>(n, T(0))});
    return tensors_.size() - 1;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }
  std::size_t index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractViolation("ParamSet: no tensor named " + name);
    return it->second;
  }
  Tensor<T>& operator[](const std::string& name) { return tensors_[index(name)]; }
  const Tensor<T>& operator[](const std::string& name) const { return tensors_[index(name)]; }

  std::vector<Tensor<T>>& tensors() { return tensors_; }
  const std::vector<Tensor<T>>& tensors() const { return tensors_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& t : tensors_) out.add(t.name, t.shape);
    return out;
  }

  void set_zero() {
    for (auto& t : tensors_) std::fill(t.value.begin(), t.value.end(), T(0));
  }

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& t : tensors_) {
      out.add(t.name, t.shape);
      auto& dst = out[t.name].value;
      for (std::size_t i = 0; i < t.size(); ++i) dst[i] = static_cast<U>(t.value[i]);
    }
    return out;
  }

  bool same_layout(const ParamSet& other) const {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i)
      if (tensors_[i].name != other.tensors_[i].name || tensors_[i].shape != other.tensors_[i].shape) return false;
    return true;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (!a.same_layout(b)) return false;
    for (std::size_t i = 0; i < a.tensors_.size(); ++i)
      if (a.tensors_[i].value != b.tensors_[i].value) return false;
    return true;
  }

 private:
  std::vector<Tensor<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
void init_fan_in(Tensor<T>& t, int fan_in, SeededRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.value) v = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------------------
// 3x3x3 convolution, stride 1, zero padding 1 (im2col + GEMM)

/// Reusable im2col buffer. It only grows, so steady-state steps do not
/// allocate.
template <class T>
struct Scratch {
  AlignedVector<T> buf;

  MatMap<T> view(Eigen::Index rows, Eigen::Index cols) {
    const auto n = static_cast<std::size_t>(rows * cols);
    if (buf.size() < n) buf.resize(n);
    return MatMap<T>(buf.data(), rows, cols);
  }
};

/// cols[(ci * 27 + k), v] = in[ci, v + offset(k)], zero outside the lattice.
template <class T>
MatMap<T> im2col3(const Mat<T>& in, const Dims& d, Scratch<T>& scratch) {
  const int C = static_cast<int>(in.rows());
  const std::size_t V = d.voxels();
  MatMap<T> cols = scratch.view(static_cast<Eigen::Index>(C) * 27, static_cast<Eigen::Index>(V));
  for (int c = 0; c < C; ++c) {
    const T* src = in.data() + c * V;
    for (int k = 0; k < 27; ++k) {
      const int ox = k / 9 - 1, oy = (k / 3) % 3 - 1, oz = k % 3 - 1;
      T* dst = cols.data() + (static_cast<std::size_t>(c) * 27 + k) * V;
      const int z_lo = std::max(0, -oz), z_hi = std::min(d.z, d.z - oz);
      for (int x = 0; x < d.x; ++x) {
        const int xs = x + ox;
        for (int y = 0; y < d.y; ++y) {
          T* row = dst + (static_cast<std::size_t>(x) * d.y + y) * d.z;
          const int ys = y + oy;
          if (xs < 0 || xs >= d.x || ys < 0 || ys >= d.y) {
            std::fill(row, row + d.z, T(0));
            continue;
          }
          const T* srow = src + (static_cast<std::size_t>(xs) * d.y + ys) * d.z;
          for (int z = 0; z < z_lo; ++z) row[z] = T(0);
          for (int z = z_lo; z < z_hi; ++z) row[z] = srow[z + oz];
          for (int z = z_hi; z < d.z; ++z) row[z] = T(0);
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col3: out[ci, v + offset(k)] += cols[(ci * 27 + k), v].
template <class T>
void col2im3(const T* cols, int C, const Dims& d, Mat<T>& out) {
  const std::size_t V = d.voxels();
  out.setZero(C, static_cast<Eigen::Index>(V));
  for (int c = 0; c < C; ++c) {
    T* dst = out.data() + c * V;
    for (int k = 0; k < 27; ++k) {
      const int ox = k / 9 - 1, oy = (k / 3) % 3 - 1, oz = k % 3 - 1;
      const T* src = cols + (static_cast<std::size_t>(c) * 27 + k) * V;
      const int z_lo = std::max(0, -oz), z_hi = std::min(d.z, d.z - oz);
      for (int x = 0; x < d.x; ++x) {
        const int xs = x + ox;
        if (xs < 0 || xs >= d.x) continue;
        for (int y = 0; y < d.y; ++y) {
          const int ys = y + oy;
          if (ys < 0 || ys >= d.y) continue;
          const T* row = src + (static_cast<std::size_t>(x) * d.y + y) * d.z;
          T* drow = dst + (static_cast<std::size_t>(xs) * d.y + ys) * d.z;
          for (int z = z_lo; z < z_hi; ++z) drow[z + oz] += row[z];
        }
      }
    }
  }
}

template <class T>
Mat<T> conv3_forward(const Mat<T>& in, const Dims& d, const Tensor<T>& weight, const Tensor<T>& bias,
                     Scratch<T>& scratch) {
  const auto cout = weight.shape[0];
  const auto k = weight.shape[1];
  SEMABS_EXPECT(in.rows() * 27 == k, "conv3: input channels do not match weight");
  const auto cols = im2col3(in, d, scratch);
  ConstMatMap<T> W(weight.value.data(), cout, k);
  Mat<T> out(cout, static_cast<Eigen::Index>(d.voxels()));
  out.noalias() = W * cols;
  for (int c = 0; c < cout; ++c) out.row(c).array() += bias.value[c];
  return out;
}

/// Accumulates weight/bias gradients; returns d(loss)/d(input) when asked.
template <class T>
void conv3_backward(const Mat<T>& in, const Dims& d, const Tensor<T>& weight, const Mat<T>& dout,
                    Tensor<T>& dweight, Tensor<T>& dbias, Mat<T>* din, Scratch<T>& scratch) {
  const auto cout = weight.shape[0];
  const auto k = weight.shape[1];
  {
    const auto cols = im2col3(in, d, scratch);
    MatMap<T> dW(dweight.value.data(), cout, k);
    dW.noalias() += dout * cols.transpose();
  }
  for (int c = 0; c < cout; ++c) dbias.value[c] += dout.row(c).sum();
  if (din) {
    ConstMatMap<T> W(weight.value.data(), cout, k);
    auto dcols = scratch.view(k, static_cast<Eigen::Index>(d.voxels()));
    dcols.noalias() = W.transpose() * dout;
    col2im3(dcols.data(), static_cast<int>(in.rows()), d, *din);
  }
}

// 1x1x1 convolution (per-voxel linear map).
template <class T>
Mat<T> conv1_forward(const Mat<T>& in, const Tensor<T>& weight, const Tensor<T>& bias) {
  ConstMatMap<T> W(weight.value.data(), weight.shape[0], weight.shape[1]);
  SEMABS_EXPECT(in.rows() == W.cols(), "conv1: input channels do not match weight");
  Mat<T> out = W * in;
  for (Eigen::Index c = 0; c < out.rows(); ++c) out.row(c).array() += bias.value[c];
  return out;
}

template <class T>
void conv1_backward(const Mat<T>& in, const Tensor<T>& weight, const Mat<T>& dout, Tensor<T>& dweight,
                    Tensor<T>& dbias, Mat<T>* din) {
  MatMap<T> dW(dweight.value.data(), weight.shape[0], weight.shape[1]);
  dW.noalias() += dout * in.transpose();
  for (Eigen::Index c = 0; c < dout.rows(); ++c) dbias.value[c] += dout.row(c).sum();
  if (din) {
    ConstMatMap<T> W(weight.value.data(), weight.shape[0], weight.shape[1]);
    din->noalias() = W.transpose() * dout;
  }
}

// ---------------------------------------------------------------------------
// Group normalization + ReLU

inline int group_channels(int channels) { return std::gcd(channels, 4); }

template <class T>
struct NormCache {
  Mat<T> xhat;
  std::vector<T> inv_std;  // per group
};

/// y = relu(gamma * (x - mean_g) / std_g + beta), statistics per channel group
/// over all voxels. Sums run in double.
template <class T>
Mat<T> group_norm_relu_forward(const Mat<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, NormCache<T>& cache,
                               double eps = 1e-5) {
  const int C = static_cast<int>(x.rows());
  const Eigen::Index V = x.cols();
  const int gc = group_channels(C);
  const int G = C / gc;
  cache.xhat.resize(C, V);
  cache.inv_std.assign(G, T(0));
  Mat<T> y(C, V);
  for (int g = 0; g < G; ++g) {
    double sum = 0, sq = 0;
    for (int c = g * gc; c < (g + 1) * gc; ++c) {
      const T* row = x.data() + c * V;
      for (Eigen::Index v = 0; v < V; ++v) sum += row[v];
    }
    const double n = static_cast<double>(gc) * V;
    const double mean = sum / n;
    for (int c = g * gc; c < (g + 1) * gc; ++c) {
      const T* row = x.data() + c * V;
      for (Eigen::Index v = 0; v < V; ++v) {
        const double dv = row[v] - mean;
        sq += dv * dv;
      }
    }
    const double inv = 1.0 / std::sqrt(sq / n + eps);
    cache.inv_std[g] = static_cast<T>(inv);
    for (int c = g * gc; c < (g + 1) * gc; ++c) {
      const T* row = x.data() + c * V;
      T* xh = cache.xhat.data() + c * V;
      T* out = y.data() + c * V;
      const T ga = gamma.value[c], be = beta.value[c];
      const T m = static_cast<T>(mean), is = static_cast<T>(inv);
      for (Eigen::Index v = 0; v < V; ++v) {
        xh[v] = (row[v] - m) * is;
        const T o = ga * xh[v] + be;
        out[v] = o > T(0) ? o : T(0);
      }
    }
  }
  return y;
}

/// `dy` is the gradient w.r.t. the ReLU output `y`; it is overwritten.
template <class T>
Mat<T> group_norm_relu_backward(Mat<T>& dy, const Mat<T>& y, const Tensor<T>& gamma, const NormCache<T>& cache,
                                Tensor<T>& dgamma, Tensor<T>& dbeta) {
  const int C = static_cast<int>(dy.rows());
  const Eigen::Index V = dy.cols();
  const int gc = group_channels(C);
  const int G = C / gc;
  Mat<T> dx(C, V);
  for (int g = 0; g < G; ++g) {
    double m1 = 0, m2 = 0;
    for (int c = g * gc; c < (g + 1) * gc; ++c) {
      T* d = dy.data() + c * V;
      const T* yy = y.data() + c * V;
      const T* xh = cache.xhat.data() + c * V;
      double dg = 0, db = 0;
      const T ga = gamma.value[c];
      for (Eigen::Index v = 0; v < V; ++v) {
        if (!(yy[v] > T(0))) d[v] = T(0);
        dg += static_cast<double>(d[v]) * xh[v];
        db += d[v];
        // reuse d as d(xhat)
        d[v] *= ga;
        m1 += d[v];
        m2 += static_cast<double>(d[v]) * xh[v];
      }
      dgamma.value[c] += static_cast<T>(dg);
      dbeta.value[c] += static_cast<T>(db);
    }
    const double n = static_cast<double>(gc) * V;
    const T a = static_cast<T>(m1 / n), b = static_cast<T>(m2 / n), is = cache.inv_std[g];
    for (int c = g * gc; c < (g + 1) * gc; ++c) {
      const T* d = dy.data() + c * V;
      const T* xh = cache.xhat.data() + c * V;
      T* out = dx.data() + c * V;
      for (Eigen::Index v = 0; v < V; ++v) out[v] = is * (d[v] - a - xh[v] * b);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Resampling

template <class T>
Mat<T> maxpool2_forward(const Mat<T>& in, const Dims& d, std::vector<std::int32_t>& argmax) {
  const Dims h = d.half();
  const int C = static_cast<int>(in.rows());
  Mat<T> out(C, static_cast<Eigen::Index>(h.voxels()));
  argmax.resize(static_cast<std::size_t>(C) * h.voxels());
  for (int c = 0; c < C; ++c) {
    const T* src = in.data() + c * d.voxels();
    for (int x = 0; x < h.x; ++x)
      for (int y = 0; y < h.y; ++y)
        for (int z = 0; z < h.z; ++z) {
          std::int32_t best = -1;
          T best_v = T(0);
          for (int k = 0; k < 8; ++k) {
            const int xs = 2 * x + (k >> 2), ys = 2 * y + ((k >> 1) & 1), zs = 2 * z + (k & 1);
            const auto idx = static_cast<std::int32_t>((static_cast<std::size_t>(xs) * d.y + ys) * d.z + zs);
            if (best < 0 || src[idx] > best_v) {
              best = idx;
              best_v = src[idx];
            }
          }
          const std::size_t o = (static_cast<std::size_t>(x) * h.y + y) * h.z + z;
          out(c, static_cast<Eigen::Index>(o)) = best_v;
          argmax[c * h.voxels() + o] = best;
        }
  }
  return out;
}

template <class T>
Mat<T> maxpool2_backward(const Mat<T>& dout, const Dims& d, const std::vector<std::int32_t>& argmax) {
  const int C = static_cast<int>(dout.rows());
  const std::size_t hv = d.half().voxels();
  Mat<T> din = Mat<T>::Zero(C, static_cast<Eigen::Index>(d.voxels()));
  for (int c = 0; c < C; ++c)
    for (std::size_t o = 0; o < hv; ++o) din(c, argmax[c * hv + o]) += dout(c, static_cast<Eigen::Index>(o));
  return din;
}

/// Nearest-neighbour x2 upsampling from `d` to `d.twice()`.
template <class T>
Mat<T> upsample2_forward(const Mat<T>& in, const Dims& d) {
  const Dims u = d.twice();
  const int C = static_cast<int>(in.rows());
  Mat<T> out(C, static_cast<Eigen::Index>(u.voxels()));
  for (int c = 0; c < C; ++c) {
    const T* src = in.data() + c * d.voxels();
    T* dst = out.data() + c * u.voxels();
    for (int x = 0; x < u.x; ++x)
      for (int y = 0; y < u.y; ++y) {
        const T* srow = src + (static_cast<std::size_t>(x / 2) * d.y + y / 2) * d.z;
        T* drow = dst + (static_cast<std::size_t>(x) * u.y + y) * u.z;
        for (int z = 0; z < u.z; ++z) drow[z] = srow[z / 2];
      }
  }
  return out;
}

template <class T>
Mat<T> upsample2_backward(const Mat<T>& dout, const Dims& d) {
  const Dims u = d.twice();
  const int C = static_cast<int>(dout.rows());
  Mat<T> din = Mat<T>::Zero(C, static_cast<Eigen::Index>(d.voxels()));
  for (int c = 0; c < C; ++c) {
    const T* src = dout.data() + c * u.voxels();
    T* dst = din.data() + c * d.voxels();
    for (int x = 0; x < u.x; ++x)
      for (int y = 0; y < u.y; ++y) {
        const T* srow = src + (static_cast<std::size_t>(x) * u.y + y) * u.z;
        T* drow = dst + (static_cast<std::size_t>(x / 2) * d.y + y / 2) * d.z;
        for (int z = 0; z < u.z; ++z) drow[z / 2] += srow[z];
      }
  }
  return din;
}

}  // namespace semabs::nn
