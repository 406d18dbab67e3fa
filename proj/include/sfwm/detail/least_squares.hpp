#pragma once

// Thin adapter over Eigen's Levenberg-Marquardt solver. Residual and Jacobian
// callbacks fill preallocated Eigen vectors/matrices.

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <cstddef>
#include <functional>

namespace sfwm::detail {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct LeastSquaresResult {
  Vector x;
  int status = 0;
  long iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;
};

using ResidualFn = std::function<void(const Vector& x, Vector& r)>;
using JacobianFn = std::function<void(const Vector& x, Matrix& j)>;

namespace lm_impl {

struct Functor : Eigen::DenseFunctor<double> {
  Functor(int inputs, int values, const ResidualFn& r, const JacobianFn& j)
      : Eigen::DenseFunctor<double>(inputs, values), residual(r), jacobian(j) {}

  int operator()(const InputType& x, ValueType& fvec) const {
    residual(x, fvec);
    return 0;
  }
  int df(const InputType& x, JacobianType& fjac) const {
    jacobian(x, fjac);
    return 0;
  }

  const ResidualFn& residual;
  const JacobianFn& jacobian;
};

}  // namespace lm_impl

inline LeastSquaresResult solve_least_squares(const ResidualFn& residual,
                                              const JacobianFn& jacobian, Vector x0,
                                              std::size_t n_residuals,
                                              long max_evaluations = 400,
                                              double tolerance = 1e-12) {
  lm_impl::Functor functor(static_cast<int>(x0.size()), static_cast<int>(n_residuals),
                           residual, jacobian);
  Eigen::LevenbergMarquardt<lm_impl::Functor> lm(functor);
  lm.setMaxfev(max_evaluations);
  lm.setXtol(tolerance);
  lm.setFtol(tolerance);
  lm.setGtol(0.0);

  LeastSquaresResult out;
  out.x = std::move(x0);
  const auto status = lm.minimize(out.x);
  out.status = static_cast<int>(status);
  out.iterations = static_cast<long>(lm.iterations());
  using S = Eigen::LevenbergMarquardtSpace::Status;
  out.converged = status != S::ImproperInputParameters &&
                  status != S::TooManyFunctionEvaluation && status != S::UserAsked &&
                  status != S::NotStarted && status != S::Running;
  Vector r(static_cast<Eigen::Index>(n_residuals));
  residual(out.x, r);
  out.residual_norm = r.norm();
  return out;
}

}  // namespace sfwm::detail
