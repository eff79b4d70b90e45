#pragma once

#include <cstdint>
#include <functional>

#include "tmm/types.hpp"

namespace tmm {

// Matrix-free linear operator: everything the randomized solver needs.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual VectorXd apply(const VectorXd& x) const = 0;          // A x
  virtual VectorXd apply_adjoint(const VectorXd& y) const = 0;  // A^T y
  // Multi-vector applies; the defaults loop over columns, implementations
  // with gemm-friendly structure override them.
  virtual MatrixXd apply_block(const MatrixXd& x) const {
    MatrixXd out(rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) out.col(j) = apply(x.col(j));
    return out;
  }
  virtual MatrixXd apply_adjoint_block(const MatrixXd& y) const {
    MatrixXd out(cols(), y.cols());
    for (Index j = 0; j < y.cols(); ++j) out.col(j) = apply_adjoint(y.col(j));
    return out;
  }
};

// Operator backed by closures; used to stack blocks without new classes.
class FunctionOperator final : public LinearOperator {
 public:
  using Apply = std::function<VectorXd(const VectorXd&)>;
  using BlockApply = std::function<MatrixXd(const MatrixXd&)>;
  FunctionOperator(Index rows, Index cols, Apply forward, Apply adjoint,
                   BlockApply forward_block = nullptr,
                   BlockApply adjoint_block = nullptr)
      : rows_(rows), cols_(cols), forward_(std::move(forward)),
        adjoint_(std::move(adjoint)), forward_block_(std::move(forward_block)),
        adjoint_block_(std::move(adjoint_block)) {}
  Index rows() const override { return rows_; }
  Index cols() const override { return cols_; }
  VectorXd apply(const VectorXd& x) const override { return forward_(x); }
  VectorXd apply_adjoint(const VectorXd& y) const override { return adjoint_(y); }
  MatrixXd apply_block(const MatrixXd& x) const override {
    return forward_block_ ? forward_block_(x) : LinearOperator::apply_block(x);
  }
  MatrixXd apply_adjoint_block(const MatrixXd& y) const override {
    return adjoint_block_ ? adjoint_block_(y) : LinearOperator::apply_adjoint_block(y);
  }

 private:
  Index rows_, cols_;
  Apply forward_, adjoint_;
  BlockApply forward_block_, adjoint_block_;
};

struct RandomizedSolveOptions {
  Index rank = 1;
  Index oversample = 10;
  int powers = 1;
  double rel_cutoff = 1e-8;  // drop singular values below rel_cutoff * sigma_1
  std::uint64_t seed = 0;
};

// Least-squares solve through a randomized truncated pseudoinverse: a
// Gaussian range sketch of rank+oversample probes with the given number of
// power iterations, a small SVD of the projected operator, and inversion of
// the singular values that survive both the rank cap and the relative
// cutoff.  Raises DegeneracyError when nothing survives.
VectorXd randomized_pinv_solve(const LinearOperator& op, const VectorXd& rhs,
                               const RandomizedSolveOptions& opts);

}  // namespace tmm
