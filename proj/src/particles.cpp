#include "csvgd/particles.hpp"

#include <utility>

#include "csvgd/errors.hpp"

namespace csvgd {

namespace {

void require_finite(const Eigen::MatrixXd& x) {
  if (!x.allFinite()) {
    throw InvalidStateError("particle positions contain NaN or Inf");
  }
}

}  // namespace

ParticleSet::ParticleSet(Eigen::MatrixXd positions)
    : positions_(std::move(positions)) {
  if (positions_.rows() < 1 || positions_.cols() < 1) {
    throw ContractError("a particle set needs n >= 1 particles of dimension d >= 1");
  }
  require_finite(positions_);
}

void ParticleSet::assign(const Eigen::MatrixXd& positions) {
  if (positions.rows() != positions_.rows() || positions.cols() != positions_.cols()) {
    throw ContractError("particle set shape is fixed for its lifetime");
  }
  require_finite(positions);
  positions_ = positions;
}

}  // namespace csvgd
