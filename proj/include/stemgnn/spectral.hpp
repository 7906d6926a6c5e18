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

#ifndef STEMGNN_SPECTRAL_HPP
#define STEMGNN_SPECTRAL_HPP

#include <cstddef>

#include "stemgnn/autodiff.hpp"
#include "stemgnn/tensor.hpp"

namespace stemgnn::spectral {

/// Real/imaginary pair with identical shapes.
struct ComplexMatrix {
  Tensor re;
  Tensor im;
};

struct ComplexVar {
  ad::Var re;
  ad::Var im;
};

/// Eigenpairs of a symmetric matrix. Columns of `U` are eigenvectors and
/// `lambda` is ascending. Each eigenvector's largest-magnitude entry is
/// non-negative so the basis is deterministic.
struct SpectralBasis {
  Tensor U;
  Tensor lambda;
  Tensor source_laplacian;

  std::size_t nodes() const { return lambda.size(); }
};

struct BasisVar {
  ad::Var U;
  ad::Var lambda;
};

// Discrete Fourier transform along the last axis, unnormalised forward and
// 1/L inverse. Tape versions are two dense matmuls against cos/sin tables.
ComplexMatrix dft_dense(const Tensor& x);
Tensor idft_dense(const ComplexMatrix& x);
ComplexVar dft_dense(ad::Var x);
ad::Var idft_dense(const ComplexVar& x);

/// Iterative radix-2 FFT along the last axis; same convention as dft_dense.
/// Untaped. Throws DimensionError unless the length is a power of two.
ComplexMatrix fft_radix2(const Tensor& x);

/// (W + W^T) / 2.
Tensor symmetrize(const Tensor& w);
ad::Var symmetrize(ad::Var w);

/// L = I - D^{-1/2} W D^{-1/2} with D_ii the row sums of W. Zero-degree rows
/// use D^{-1/2}_ii = 0. Negative weights raise DomainError.
Tensor normalized_laplacian(const Tensor& w);
ad::Var normalized_laplacian(ad::Var w);

/// Cyclic Jacobi rotations until the largest off-diagonal magnitude is below
/// 1e-12 (at most 100 sweeps).
SpectralBasis jacobi_eigh(const Tensor& symmetric);

/// Adjoint of the symmetric eigendecomposition:
/// dL = sym(U (diag(dLambda) + F o (U^T dU)) U^T), F_ij = 1 / (lambda_j - lambda_i)
/// with gaps below 1e-6 clamped (sign preserved).
Tensor eigh_backward(const SpectralBasis& basis, const Tensor& dU, const Tensor& dLambda);

/// Taped decomposition; gradients flow back through eigh_backward.
BasisVar eigh(ad::Var symmetric);

/// Minimum distance between consecutive (ascending) eigenvalues.
double min_eigen_gap(const Tensor& lambda);

/// U = I, lambda = 0: the GFT becomes the identity.
SpectralBasis identity_basis(std::size_t n);

// Graph Fourier transform GF(X) = U^T X and its inverse U X. X is [N x T], or
// [C x N x K] for the tape versions (applied per channel).
Tensor gft(const SpectralBasis& basis, const Tensor& x);
Tensor igft(const SpectralBasis& basis, const Tensor& x_hat);
ad::Var gft(ad::Var U, ad::Var x);
ad::Var igft(ad::Var U, ad::Var x_hat);

}  // namespace stemgnn::spectral

#endif  // STEMGNN_SPECTRAL_HPP
