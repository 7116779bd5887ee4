#include "motionfc/dct.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace motionfc {

DctBasis::DctBasis(std::size_t length, std::size_t coefficients)
    : length_(length), coefficients_(coefficients) {
  if (length == 0) throw ValidationError("DCT length must be positive");
  if (coefficients == 0 || coefficients > length) {
    throw ValidationError("DCT coefficient count " + std::to_string(coefficients) +
                          " must be in [1, " + std::to_string(length) + "]");
  }
  const double n = static_cast<double>(length);
  const auto rows = static_cast<Eigen::Index>(coefficients);
  const auto cols = static_cast<Eigen::Index>(length);
  matrix_.resize(rows, cols);
  for (Eigen::Index l = 0; l < rows; ++l) {
    const double norm = std::sqrt(2.0 / n) / (l == 0 ? std::sqrt(2.0) : 1.0);
    for (Eigen::Index t = 0; t < cols; ++t) {
      matrix_(l, t) = norm * std::cos(std::numbers::pi / (2.0 * n) *
                                      static_cast<double>((2 * t + 1) * l));
    }
  }
}

DctBasis make_basis(std::size_t length, std::size_t coefficients) {
  return DctBasis(length, coefficients);
}

Vector pad_future(const Vector& trajectory, std::size_t tau) {
  if (trajectory.size() == 0) throw ValidationError("cannot pad an empty trajectory");
  const Eigen::Index n = trajectory.size();
  Vector out(n + static_cast<Eigen::Index>(tau));
  out.head(n) = trajectory;
  out.tail(static_cast<Eigen::Index>(tau)).setConstant(trajectory[n - 1]);
  return out;
}

PoseSequence pad_future(const PoseSequence& sequence, std::size_t tau) {
  if (sequence.frames() == 0) throw ValidationError("cannot pad an empty sequence");
  PoseSequence out = sequence;
  const PoseSequence last = sequence.slice(sequence.frames() - 1, 1);
  for (std::size_t i = 0; i < tau; ++i) out = out.concat(last);
  return out;
}

Vector encode(const Vector& trajectory, const DctBasis& basis) {
  if (static_cast<std::size_t>(trajectory.size()) != basis.length()) {
    throw ValidationError("trajectory length " + std::to_string(trajectory.size()) +
                          " does not match DCT length " + std::to_string(basis.length()));
  }
  return basis.matrix() * trajectory;
}

Vector decode(const Vector& coefficients, const DctBasis& basis) {
  if (static_cast<std::size_t>(coefficients.size()) != basis.coefficients()) {
    throw ValidationError("coefficient count " + std::to_string(coefficients.size()) +
                          " does not match DCT basis " +
                          std::to_string(basis.coefficients()));
  }
  return basis.matrix().transpose() * coefficients;
}

Matrix encode_sequence(const PoseSequence& sequence, const DctBasis& basis) {
  if (sequence.frames() != basis.length()) {
    throw ValidationError("sequence length " + std::to_string(sequence.frames()) +
                          " does not match DCT length " + std::to_string(basis.length()));
  }
  const auto n = static_cast<Eigen::Index>(sequence.frames());
  const auto jn = static_cast<Eigen::Index>(sequence.joints());
  const auto dn = static_cast<Eigen::Index>(sequence.dims());
  const auto l = static_cast<Eigen::Index>(basis.coefficients());
  // Trajectories as columns: (N) x (J*D), column j*D + d.
  Matrix traj(n, jn * dn);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index j = 0; j < jn; ++j)
      for (Eigen::Index d = 0; d < dn; ++d)
        traj(t, j * dn + d) = sequence.at(t, j, d);
  const Matrix coeffs = basis.matrix() * traj;  // L x (J*D)
  Matrix features(jn, dn * l);
  for (Eigen::Index j = 0; j < jn; ++j)
    for (Eigen::Index d = 0; d < dn; ++d)
      features.row(j).segment(d * l, l) = coeffs.col(j * dn + d).transpose();
  return features;
}

PoseSequence decode_sequence(const Matrix& features, std::size_t dims, const DctBasis& basis) {
  const auto l = static_cast<Eigen::Index>(basis.coefficients());
  const auto dn = static_cast<Eigen::Index>(dims);
  if (dims == 0 || features.cols() != dn * l) {
    throw ValidationError("feature width " + std::to_string(features.cols()) +
                          " does not match dims * coefficients");
  }
  const auto jn = features.rows();
  Matrix coeffs(l, jn * dn);
  for (Eigen::Index j = 0; j < jn; ++j)
    for (Eigen::Index d = 0; d < dn; ++d)
      coeffs.col(j * dn + d) = features.row(j).segment(d * l, l).transpose();
  const Matrix traj = basis.matrix().transpose() * coeffs;  // N x (J*D)
  PoseSequence out(basis.length(), static_cast<std::size_t>(jn), dims);
  for (Eigen::Index t = 0; t < traj.rows(); ++t)
    for (Eigen::Index j = 0; j < jn; ++j)
      for (Eigen::Index d = 0; d < dn; ++d)
        out.at(t, j, d) = traj(t, j * dn + d);
  return out;
}

}  // namespace motionfc
