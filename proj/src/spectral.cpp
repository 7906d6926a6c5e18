// Copyright 2026 The StemGNN-cpp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stemgnn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "stemgnn/errors.hpp"

namespace stemgnn::spectral {

namespace {

struct DftTables {
  Tensor cos;      // C[t,k] = cos(2 pi t k / L)
  Tensor neg_sin;  // -sin(2 pi t k / L)
};

// Tables are symmetric in (t, k), so they serve as both x*C and C*x.
const DftTables& dft_tables(std::size_t len) {
  thread_local std::map<std::size_t, DftTables> cache;
  auto it = cache.find(len);
  if (it != cache.end()) return it->second;
  DftTables tables{Tensor({len, len}), Tensor({len, len})};
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t k = 0; k < len; ++k) {
      // Reduce t*k mod L first so large lengths keep full accuracy.
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((t * k) % len) /
                           static_cast<double>(len);
      tables.cos.at(t, k) = std::cos(angle);
      tables.neg_sin.at(t, k) = -std::sin(angle);
    }
  return cache.emplace(len, std::move(tables)).first->second;
}

std::size_t last_dim(const Shape& shape) {
  if (shape.empty() || shape.back() == 0) {
    throw DimensionError("transform needs a non-empty last axis, got " + shape_string(shape));
  }
  return shape.back();
}

Tensor as_rows(const Tensor& x) {
  const std::size_t len = last_dim(x.shape());
  return x.reshaped({x.size() / len, len});
}

}  // namespace

ComplexMatrix dft_dense(const Tensor& x) {
  const auto& tables = dft_tables(last_dim(x.shape()));
  const Tensor rows = as_rows(x);
  return {matmul(rows, tables.cos).reshaped(x.shape()),
          matmul(rows, tables.neg_sin).reshaped(x.shape())};
}

Tensor idft_dense(const ComplexMatrix& x) {
  require_same_shape(x.re, x.im, "idft_dense");
  const std::size_t len = last_dim(x.re.shape());
  const auto& tables = dft_tables(len);
  // x_t = (1/L) sum_k re_k cos - im_k sin
  Tensor out = add(matmul(as_rows(x.re), tables.cos), matmul(as_rows(x.im), tables.neg_sin));
  return scale(out, 1.0 / static_cast<double>(len)).reshaped(x.re.shape());
}

ComplexVar dft_dense(ad::Var x) {
  const Shape shape = x.shape();
  const std::size_t len = last_dim(shape);
  const auto& tables = dft_tables(len);
  ad::Tape& tape = x.tape();
  ad::Var rows = ad::reshape(x, {x.value().size() / len, len});
  ad::Var re = ad::matmul(rows, tape.constant(tables.cos));
  ad::Var im = ad::matmul(rows, tape.constant(tables.neg_sin));
  return {ad::reshape(re, shape), ad::reshape(im, shape)};
}

ad::Var idft_dense(const ComplexVar& x) {
  require_same_shape(x.re.value(), x.im.value(), "idft_dense");
  const Shape shape = x.re.shape();
  const std::size_t len = last_dim(shape);
  const auto& tables = dft_tables(len);
  ad::Tape& tape = x.re.tape();
  const double inv = 1.0 / static_cast<double>(len);
  const std::size_t rows = x.re.value().size() / len;
  ad::Var re = ad::matmul(ad::reshape(x.re, {rows, len}), tape.constant(scale(tables.cos, inv)));
  ad::Var im = ad::matmul(ad::reshape(x.im, {rows, len}), tape.constant(scale(tables.neg_sin, inv)));
  return ad::reshape(ad::add(re, im), shape);
}

ComplexMatrix fft_radix2(const Tensor& x) {
  const std::size_t len = last_dim(x.shape());
  if ((len & (len - 1)) != 0) {
    throw DimensionError("fft_radix2: length " + std::to_string(len) + " is not a power of two");
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < len) ++bits;

  ComplexMatrix out{Tensor(x.shape()), Tensor(x.shape())};
  std::vector<std::complex<double>> buf(len);
  const std::size_t rows = x.size() / len;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < len; ++i) {
      std::size_t rev = 0;
      for (std::size_t b = 0; b < bits; ++b) rev |= ((i >> b) & 1u) << (bits - 1 - b);
      buf[rev] = x[r * len + i];
    }
    for (std::size_t size = 2; size <= len; size <<= 1) {
      const std::size_t half = size / 2;
      for (std::size_t k = 0; k < half; ++k) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(size);
        const std::complex<double> w(std::cos(angle), std::sin(angle));
        for (std::size_t start = 0; start < len; start += size) {
          const auto even = buf[start + k];
          const auto odd = w * buf[start + k + half];
          buf[start + k] = even + odd;
          buf[start + k + half] = even - odd;
        }
      }
    }
    for (std::size_t i = 0; i < len; ++i) {
      out.re[r * len + i] = buf[i].real();
      out.im[r * len + i] = buf[i].imag();
    }
  }
  return out;
}

Tensor symmetrize(const Tensor& w) {
  if (w.rank() != 2 || w.dim(0) != w.dim(1)) {
    throw DimensionError("symmetrize: expected a square matrix, got " + shape_string(w.shape()));
  }
  return scale(add(w, transpose(w)), 0.5);
}

ad::Var symmetrize(ad::Var w) {
  if (w.value().rank() != 2 || w.value().dim(0) != w.value().dim(1)) {
    throw DimensionError("symmetrize: expected a square matrix, got " + shape_string(w.shape()));
  }
  Tensor out = symmetrize(w.value());
  const ad::NodeId iw = w.id();
  const std::size_t n = w.value().dim(0);
  return w.tape().record(ad::OpKind::kSymmetrize, {iw}, std::move(out), [iw, n](ad::Tape& t, ad::NodeId self) {
    const Tensor& g = t.upstream(self);
    if (auto d = t.accumulator(iw); !d.empty())
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] += 0.5 * (g[i * n + j] + g[j * n + i]);
  });
}

namespace {

// s_i = d_i^{-1/2}, or 0 for isolated nodes.
std::vector<double> inv_sqrt_degrees(const Tensor& w) {
  const std::size_t n = w.dim(0);
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += w.at(i, j);
    s[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  return s;
}

void check_adjacency(const Tensor& w) {
  if (w.rank() != 2 || w.dim(0) != w.dim(1)) {
    throw DimensionError("normalized_laplacian: expected a square matrix, got " +
                         shape_string(w.shape()));
  }
  for (double v : w.data()) {
    if (v < 0.0) throw DomainError("normalized_laplacian: negative edge weight " + std::to_string(v));
  }
}

}  // namespace

Tensor normalized_laplacian(const Tensor& w) {
  check_adjacency(w);
  const std::size_t n = w.dim(0);
  const auto s = inv_sqrt_degrees(w);
  Tensor l({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) l.at(i, j) = (i == j ? 1.0 : 0.0) - s[i] * w.at(i, j) * s[j];
  return l;
}

ad::Var normalized_laplacian(ad::Var w) {
  Tensor out = normalized_laplacian(w.value());
  const ad::NodeId iw = w.id();
  return w.tape().record(ad::OpKind::kNormalizedLaplacian, {iw}, std::move(out), [iw](ad::Tape& t, ad::NodeId self) {
    auto d = t.accumulator(iw);
    if (d.empty()) return;
    const Tensor& g = t.upstream(self);
    const Tensor& wv = t.value(iw);
    const std::size_t n = wv.dim(0);
    const auto s = inv_sqrt_degrees(wv);
    // L_ab = delta_ab - s_a W_ab s_b, s_a = (sum_j W_aj)^{-1/2}.
    std::vector<double> gs(n, 0.0);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const double gab = g[a * n + b];
        d[a * n + b] -= gab * s[a] * s[b];
        gs[a] -= gab * wv.at(a, b) * s[b];
        gs[b] -= gab * s[a] * wv.at(a, b);
      }
    for (std::size_t i = 0; i < n; ++i) {
      if (s[i] == 0.0) continue;
      const double gdeg = gs[i] * (-0.5 * s[i] * s[i] * s[i]);
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += gdeg;
    }
  });
}

SpectralBasis jacobi_eigh(const Tensor& symmetric) {
  if (symmetric.rank() != 2 || symmetric.dim(0) != symmetric.dim(1)) {
    throw DimensionError("jacobi_eigh: expected a square matrix, got " + shape_string(symmetric.shape()));
  }
  const std::size_t n = symmetric.dim(0);
  const double sym_tol = 1e-10 * std::max(1.0, max_abs(symmetric));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(symmetric.at(i, j) - symmetric.at(j, i)) > sym_tol) {
        std::ostringstream os;
        os << "jacobi_eigh: matrix is not symmetric at (" << i << "," << j << "), |a_ij - a_ji| = "
           << std::abs(symmetric.at(i, j) - symmetric.at(j, i));
        throw DomainError(os.str());
      }

  Tensor a = symmetrize(symmetric);
  Tensor v = Tensor::identity(n);
  constexpr double kOffTol = 1e-12;
  constexpr int kMaxSweeps = 100;

  auto off_max = [&] {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m = std::max(m, std::abs(a.at(i, j)));
    return m;
  };

  int sweep = 0;
  for (; sweep < kMaxSweeps && off_max() >= kOffTol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        a.at(p, p) -= t * apq;
        a.at(q, q) += t * apq;
        a.at(p, q) = a.at(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r != p && r != q) {
            const double arp = a.at(r, p), arq = a.at(r, q);
            a.at(r, p) = a.at(p, r) = c * arp - s * arq;
            a.at(r, q) = a.at(q, r) = s * arp + c * arq;
          }
          const double vrp = v.at(r, p), vrq = v.at(r, q);
          v.at(r, p) = c * vrp - s * vrq;
          v.at(r, q) = s * vrp + c * vrq;
        }
      }
  }
  if (const double residual = off_max(); residual >= kOffTol) {
    std::ostringstream os;
    os << "jacobi_eigh: no convergence after " << kMaxSweeps << " sweeps, off-diagonal residual "
       << residual;
    throw NumericError(os.str());
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a.at(x, x) < a.at(y, y); });

  SpectralBasis basis{Tensor({n, n}), Tensor({n}), symmetric};
  for (std::size_t col = 0; col < n; ++col) {
    const std::size_t src = order[col];
    basis.lambda[col] = a.at(src, src);
    std::size_t arg = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(v.at(r, src)) > std::abs(v.at(arg, src))) arg = r;
    const double sign = v.at(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) basis.U.at(r, col) = sign * v.at(r, src);
  }
  return basis;
}

Tensor eigh_backward(const SpectralBasis& basis, const Tensor& dU, const Tensor& dLambda) {
  const std::size_t n = basis.nodes();
  require_same_shape(basis.U, dU, "eigh_backward dU");
  if (dLambda.size() != n) throw DimensionError("eigh_backward: dLambda has wrong length");
  constexpr double kMinGap = 1e-6;

  Tensor inner = matmul(transpose(basis.U), dU);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        inner.at(i, j) = dLambda[i];
        continue;
      }
      double gap = basis.lambda[j] - basis.lambda[i];
      if (std::abs(gap) < kMinGap) gap = gap < 0.0 ? -kMinGap : kMinGap;
      inner.at(i, j) /= gap;
    }
  return symmetrize(matmul(matmul(basis.U, inner), transpose(basis.U)));
}

BasisVar eigh(ad::Var symmetric) {
  SpectralBasis basis = jacobi_eigh(symmetric.value());
  const std::size_t n = basis.nodes();
  // Packed node: row 0 holds lambda, rows 1..n hold U.
  Tensor packed({n + 1, n});
  std::copy(basis.lambda.data().begin(), basis.lambda.data().end(), packed.data().begin());
  std::copy(basis.U.data().begin(), basis.U.data().end(), packed.data().begin() + n);
  const ad::NodeId il = symmetric.id();
  ad::Var node = symmetric.tape().record(
      ad::OpKind::kEigh, {il}, std::move(packed), [il, n](ad::Tape& t, ad::NodeId self) {
        auto d = t.accumulator(il);
        if (d.empty()) return;
        const Tensor& p = t.value(self);
        const Tensor& g = t.upstream(self);
        SpectralBasis b{Tensor({n, n}), Tensor({n}), {}};
        Tensor dU({n, n}), dLambda({n});
        for (std::size_t j = 0; j < n; ++j) {
          b.lambda[j] = p[j];
          dLambda[j] = g[j];
        }
        for (std::size_t i = 0; i < n * n; ++i) {
          b.U[i] = p[n + i];
          dU[i] = g[n + i];
        }
        const Tensor dl = eigh_backward(b, dU, dLambda);
        for (std::size_t i = 0; i < n * n; ++i) d[i] += dl[i];
      });
  return {ad::slice_rows(node, 1, n + 1), ad::reshape(ad::slice_rows(node, 0, 1), {n})};
}

double min_eigen_gap(const Tensor& lambda) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < lambda.size(); ++i) gap = std::min(gap, lambda[i] - lambda[i - 1]);
  return gap;
}

SpectralBasis identity_basis(std::size_t n) {
  return {Tensor::identity(n), Tensor({n}), Tensor({n, n})};
}

namespace {

void check_rows(const SpectralBasis& basis, const Tensor& x, const char* op) {
  if (x.rank() != 2 || x.dim(0) != basis.nodes()) {
    throw DimensionError(std::string(op) + ": basis has " + std::to_string(basis.nodes()) +
                         " nodes, input is " + shape_string(x.shape()));
  }
}

ad::Var apply_left(ad::Var a, ad::Var x, const char* op) {
  if (x.value().rank() == 2) {
    if (a.value().dim(1) != x.value().dim(0)) {
      throw DimensionError(std::string(op) + ": basis " + shape_string(a.shape()) + " vs input " +
                           shape_string(x.shape()));
    }
    return ad::matmul(a, x);
  }
  return ad::batched_left_matmul(a, x);
}

}  // namespace

Tensor gft(const SpectralBasis& basis, const Tensor& x) {
  check_rows(basis, x, "gft");
  return matmul(transpose(basis.U), x);
}

Tensor igft(const SpectralBasis& basis, const Tensor& x_hat) {
  check_rows(basis, x_hat, "igft");
  return matmul(basis.U, x_hat);
}

ad::Var gft(ad::Var U, ad::Var x) { return apply_left(ad::transpose(U), x, "gft"); }

ad::Var igft(ad::Var U, ad::Var x_hat) { return apply_left(U, x_hat, "igft"); }

}  // namespace stemgnn::spectral
