#include "newton.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

namespace blsat::detail {

namespace {

// Solves (H + tau I) d = -g with the smallest tau that keeps the shifted
// matrix positive definite.
Eigen::VectorXd levenberg_direction(const Eigen::MatrixXd& h, const Eigen::VectorXd& g) {
  const int n = static_cast<int>(g.size());
  const double scale = std::max(h.cwiseAbs().maxCoeff(), 1e-300);
  // A small floor keeps steps along exactly flat directions bounded.
  double tau = 1e-12 * scale;
  for (int attempt = 0; attempt < 40; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(h + tau * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd d = llt.solve(-g);
      if (d.allFinite() && g.dot(d) < 0.0) return d;
    }
    tau *= 10.0;
  }
  return -g;
}

}  // namespace

NewtonOutcome newton_minimize(const NewtonProblem& prob, Eigen::VectorXd x, const NewtonOptions& opt) {
  NewtonOutcome out;
  double f = prob.value(x);
  if (!std::isfinite(f)) {
    out.x = x;
    out.value = f;
    return out;
  }
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  for (int it = 0; it < opt.max_iter; ++it) {
    out.iterations = it;
    prob.derivs(x, g, h);
    const Eigen::VectorXd d = levenberg_direction(h, g);
    out.grad_norm = g.norm();
    out.decrement = std::sqrt(std::max(0.0, -g.dot(d)));
    if ((opt.use_grad_norm && out.grad_norm <= opt.tol) || out.decrement <= opt.tol) {
      out.converged = true;
      break;
    }
    if (prob.stop && prob.stop(x, f)) {
      out.stopped = true;
      break;
    }
    Eigen::VectorXd step = d;
    const double cap = opt.max_step * (1.0 + x.norm());
    if (step.norm() > cap) step *= cap / step.norm();
    const double slope = g.dot(step);
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 80; ++ls) {
      const Eigen::VectorXd trial = x + alpha * step;
      const double ft = prob.value(trial);
      if (std::isfinite(ft) && ft < f && ft <= f + 1e-4 * alpha * slope) {
        moved = trial != x;
        x = trial;
        f = ft;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      // No representable decrease. Half the squared decrement predicts the
      // remaining gain; accept when that is below the roundoff of f.
      const double floor = 10.0 * std::sqrt(std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f)));
      out.converged = out.decrement <= std::max(opt.tol, floor);
      break;
    }
  }
  out.x = x;
  out.value = f;
  return out;
}

Eigen::MatrixXd fd_hessian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                           const Eigen::VectorXd& x, double rel_step) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd xp = x, xm = x;
  for (int j = 0; j < n; ++j) {
    const double e = rel_step * (1.0 + std::abs(x(j)));
    xp(j) = x(j) + e;
    xm(j) = x(j) - e;
    h.col(j) = (grad(xp) - grad(xm)) / (2.0 * e);
    xp(j) = xm(j) = x(j);
  }
  return 0.5 * (h + h.transpose());
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (int j = 0; j < x.size(); ++j) {
    xp(j) = x(j) + step;
    xm(j) = x(j) - step;
    g(j) = (f(xp) - f(xm)) / (2.0 * step);
    xp(j) = xm(j) = x(j);
  }
  return g;
}

BfgsOutcome bfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                          const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad, Eigen::VectorXd x,
                          int max_iter, double tol) {
  const int n = static_cast<int>(x.size());
  BfgsOutcome out;
  double fx = f(x);
  Eigen::VectorXd g = grad(x);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it;
    out.grad_norm = g.norm();
    if (out.grad_norm <= tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd d = -hinv * g;
    if (g.dot(d) >= 0.0) {
      hinv.setIdentity();
      d = -g;
    }
    const double cap = 1.0 + x.norm();
    if (d.norm() > cap) d *= cap / d.norm();
    double alpha = 1.0;
    bool moved = false;
    Eigen::VectorXd xn;
    double fn = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + alpha * d;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * alpha * g.dot(d)) {
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      out.converged = out.grad_norm <= 1e3 * tol;
      break;
    }
    const Eigen::VectorXd gn = grad(xn);
    const Eigen::VectorXd s = xn - x, y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      if (it == 0) hinv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      hinv = v * hinv * v.transpose() + rho * s * s.transpose();
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  out.x = x;
  out.value = fx;
  out.grad_norm = g.norm();
  return out;
}

int resolve_threads(int requested) {
  if (const char* env = std::getenv("BLSAT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void run_indexed(int count, int threads, const std::function<void(int)>& task) {
  const int workers = std::max(1, std::min(count, resolve_threads(threads)));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace blsat::detail
