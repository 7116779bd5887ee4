#pragma once

#include <cstddef>
#include <span>

#include "motionfc/core.hpp"

namespace motionfc {

/// Orthonormal DCT-II basis restricted to the first `coefficients` rows.
///
/// Row l (0-based) and column t hold
///   sqrt(2/N) * cos(pi / (2N) * (2t + 1) * l) / sqrt(1 + [l == 0]),
/// so the first row is the constant 1/sqrt(N). With L == N the matrix is
/// orthogonal and its transpose is the inverse transform.
class DctBasis {
 public:
  DctBasis(std::size_t length, std::size_t coefficients);

  std::size_t length() const { return length_; }
  std::size_t coefficients() const { return coefficients_; }
  /// L x N.
  const Matrix& matrix() const { return matrix_; }

 private:
  std::size_t length_;
  std::size_t coefficients_;
  Matrix matrix_;
};

DctBasis make_basis(std::size_t length, std::size_t coefficients);

/// Appends `tau` copies of the last entry.
Vector pad_future(const Vector& trajectory, std::size_t tau);
/// Appends `tau` copies of the last frame, visibility included.
PoseSequence pad_future(const PoseSequence& sequence, std::size_t tau);

Vector encode(const Vector& trajectory, const DctBasis& basis);
Vector decode(const Vector& coefficients, const DctBasis& basis);

/// J x (D*L) features. Row j holds joint j's spectra channel-major:
/// columns [d*L, (d+1)*L) are the coefficients of dimension d.
Matrix encode_sequence(const PoseSequence& sequence, const DctBasis& basis);
/// Inverse of encode_sequence. Visibility is all ones.
PoseSequence decode_sequence(const Matrix& features, std::size_t dims,
                             const DctBasis& basis);

}  // namespace motionfc
