#pragma once

#include <Eigen/Dense>
#include <functional>

namespace blsat::detail {

struct NewtonOptions {
  int max_iter = 5000;
  double tol = 1e-9;       // gradient norm or Newton decrement
  double max_step = 1.0;   // step norm cap, relative to 1 + |x|
  bool use_grad_norm = true;  // false: only the (affine invariant) decrement counts
};

struct NewtonProblem {
  // Must return +inf outside the domain.
  std::function<double(const Eigen::VectorXd&)> value;
  // Gradient and Hessian at a point inside the domain.
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)> derivs;
  // Optional: return true to stop early (caps, divergence).
  std::function<bool(const Eigen::VectorXd&, double)> stop;
};

struct NewtonOutcome {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_norm = 0.0;
  double decrement = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stopped = false;
};

// Damped Newton with Levenberg shift and Armijo backtracking. Minimizes.
NewtonOutcome newton_minimize(const NewtonProblem& prob, Eigen::VectorXd x0, const NewtonOptions& opt);

// Central differences of a gradient, symmetrized.
Eigen::MatrixXd fd_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                           const Eigen::VectorXd& x, double rel_step);

// Central-difference gradient of a scalar function.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double step);

int resolve_threads(int requested);

// Runs task(i) for i in [0, count) on up to `threads` workers.
void run_indexed(int count, int threads, const std::function<void(int)>& task);

}  // namespace blsat::detail

namespace blsat::detail {

struct BfgsOutcome {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

BfgsOutcome bfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                          const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad, Eigen::VectorXd x,
                          int max_iter, double tol);

}  // namespace blsat::detail
