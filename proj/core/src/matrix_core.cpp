#include "blsat/matrix_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace blsat {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::UnsupportedDatum: return "UnsupportedDatum";
    case ErrorCode::UnsupportedScale: return "UnsupportedScale";
    case ErrorCode::GridTooSmall: return "GridTooSmall";
    case ErrorCode::NotConvex: return "NotConvex";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

SymmetricMatrix::SymmetricMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() < 1 || m.rows() != m.cols())
    throw Error(ErrorCode::InvalidInput, "symmetric matrix must be square with dim >= 1");
  if (!m.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite matrix entry");
  m_ = 0.5 * (m + m.transpose());
}

SymmetricMatrix SymmetricMatrix::identity(int n) {
  return SymmetricMatrix(Eigen::MatrixXd::Identity(n, n));
}

SymmetricMatrix SymmetricMatrix::zero(int n) { return SymmetricMatrix(Eigen::MatrixXd::Zero(n, n)); }

SymmetricMatrix SymmetricMatrix::diagonal(const Eigen::VectorXd& d) {
  return SymmetricMatrix(Eigen::MatrixXd(d.asDiagonal()));
}

SymmetricMatrix SymmetricMatrix::scalar(int n, double s) {
  return SymmetricMatrix(s * Eigen::MatrixXd::Identity(n, n));
}

SymmetricMatrix SymmetricMatrix::operator+(const SymmetricMatrix& o) const {
  return SymmetricMatrix(m_ + o.m_);
}
SymmetricMatrix SymmetricMatrix::operator-(const SymmetricMatrix& o) const {
  return SymmetricMatrix(m_ - o.m_);
}
SymmetricMatrix SymmetricMatrix::operator*(double s) const { return SymmetricMatrix(m_ * s); }

SpectralDecomposition sym_eigen(const SymmetricMatrix& sm) {
  const int n = sm.dim();
  if (n < 1) throw Error(ErrorCode::InvalidInput, "empty matrix");
  Eigen::MatrixXd a = sm.mat();
  if (!a.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite matrix entry");
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

  const double total = a.norm();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off == 0.0 || std::sqrt(2.0 * off) <= 1e-17 * total) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });
  SpectralDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (int k = 0; k < n; ++k) {
    out.eigenvalues(k) = a(order[k], order[k]);
    out.eigenvectors.col(k) = v.col(order[k]);
  }
  return out;
}

SymmetricMatrix apply_spectral(const SymmetricMatrix& m, const std::function<double(double)>& f) {
  const auto sd = sym_eigen(m);
  Eigen::VectorXd fl(sd.eigenvalues.size());
  for (int i = 0; i < fl.size(); ++i) fl(i) = f(sd.eigenvalues(i));
  return SymmetricMatrix(sd.eigenvectors * fl.asDiagonal() * sd.eigenvectors.transpose());
}

SymmetricMatrix sqrt_spd(const SymmetricMatrix& m, double tol) {
  const auto sd = sym_eigen(m);
  const double floor = -tol * (1.0 + m.frobenius());
  if (sd.eigenvalues(0) < floor)
    throw Error(ErrorCode::NotPositiveSemidefinite, "sqrt_spd: eigenvalue " + std::to_string(sd.eigenvalues(0)));
  Eigen::VectorXd r = sd.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return SymmetricMatrix(sd.eigenvectors * r.asDiagonal() * sd.eigenvectors.transpose());
}

double log_det_spd(const SymmetricMatrix& m) {
  const auto sd = sym_eigen(m);
  double s = 0.0;
  for (int i = 0; i < sd.eigenvalues.size(); ++i) {
    if (!(sd.eigenvalues(i) > 0.0))
      throw Error(ErrorCode::NotPositiveDefinite, "log_det_spd: eigenvalue " + std::to_string(sd.eigenvalues(i)));
    s += std::log(sd.eigenvalues(i));
  }
  return s;
}

Signature signature(const SymmetricMatrix& m, double tol) {
  const auto sd = sym_eigen(m);
  const double band = tol * m.frobenius();
  Signature sig;
  for (int i = 0; i < sd.eigenvalues.size(); ++i) {
    const double l = sd.eigenvalues(i);
    if (l < -band)
      ++sig.n_neg;
    else if (l > band)
      ++sig.n_pos;
    else
      ++sig.n_zero;
  }
  return sig;
}

namespace {
void require_pd(const SpectralDecomposition& sd, const char* who) {
  if (!(sd.eigenvalues(0) > 0.0))
    throw Error(ErrorCode::NotPositiveDefinite, std::string(who) + ": eigenvalue " + std::to_string(sd.eigenvalues(0)));
}

SymmetricMatrix rebuild(const SpectralDecomposition& sd, const Eigen::VectorXd& d) {
  return SymmetricMatrix(sd.eigenvectors * d.asDiagonal() * sd.eigenvectors.transpose());
}
}  // namespace

SymmetricMatrix inverse_spd(const SymmetricMatrix& m) {
  const auto sd = sym_eigen(m);
  require_pd(sd, "inverse_spd");
  return rebuild(sd, sd.eigenvalues.cwiseInverse());
}

SymmetricMatrix inv_sqrt_spd(const SymmetricMatrix& m) {
  const auto sd = sym_eigen(m);
  require_pd(sd, "inv_sqrt_spd");
  return rebuild(sd, sd.eigenvalues.cwiseSqrt().cwiseInverse());
}

SymmetricMatrix power_spd(const SymmetricMatrix& m, double p) {
  const auto sd = sym_eigen(m);
  require_pd(sd, "power_spd");
  return rebuild(sd, sd.eigenvalues.array().pow(p).matrix());
}

SymmetricMatrix exp_sym(const SymmetricMatrix& s) {
  const auto sd = sym_eigen(s);
  return rebuild(sd, sd.eigenvalues.array().exp().matrix());
}

SymmetricMatrix log_spd(const SymmetricMatrix& m) {
  const auto sd = sym_eigen(m);
  require_pd(sd, "log_spd");
  return rebuild(sd, sd.eigenvalues.array().log().matrix());
}

double min_eigenvalue(const SymmetricMatrix& m) { return sym_eigen(m).eigenvalues(0); }

double max_eigenvalue(const SymmetricMatrix& m) {
  const auto sd = sym_eigen(m);
  return sd.eigenvalues(sd.eigenvalues.size() - 1);
}

SymmetricMatrix block_diagonal(const std::vector<SymmetricMatrix>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += b.dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  int off = 0;
  for (const auto& b : blocks) {
    out.block(off, off, b.dim(), b.dim()) = b.mat();
    off += b.dim();
  }
  return SymmetricMatrix(out);
}

}  // namespace blsat
