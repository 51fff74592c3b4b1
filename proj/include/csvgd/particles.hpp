#pragma once

#include <Eigen/Core>

namespace csvgd {

/// A fixed-shape set of particles; row i is particle i. Every entry is finite.
class ParticleSet {
 public:
  explicit ParticleSet(Eigen::MatrixXd positions);

  [[nodiscard]] Eigen::Index size() const { return positions_.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return positions_.cols(); }

  [[nodiscard]] const Eigen::MatrixXd& positions() const { return positions_; }
  [[nodiscard]] Eigen::VectorXd particle(Eigen::Index i) const {
    return positions_.row(i).transpose();
  }

  /// Replaces the positions. Shape must match and entries must be finite.
  void assign(const Eigen::MatrixXd& positions);

 private:
  Eigen::MatrixXd positions_;
};

}  // namespace csvgd
