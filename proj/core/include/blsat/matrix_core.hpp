#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "blsat/error.hpp"

namespace blsat {

// Dense real symmetric matrix. Entries are symmetrized on construction so
// (i,j) and (j,i) agree bit for bit.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(const Eigen::MatrixXd& m);

  static SymmetricMatrix identity(int n);
  static SymmetricMatrix zero(int n);
  static SymmetricMatrix diagonal(const Eigen::VectorXd& d);
  static SymmetricMatrix scalar(int n, double s);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }
  double frobenius() const { return m_.norm(); }
  double trace() const { return m_.trace(); }

  SymmetricMatrix operator+(const SymmetricMatrix& o) const;
  SymmetricMatrix operator-(const SymmetricMatrix& o) const;
  SymmetricMatrix operator*(double s) const;

 private:
  Eigen::MatrixXd m_;
};

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns, orthonormal
};

struct Signature {
  int n_neg = 0;
  int n_zero = 0;
  int n_pos = 0;
};

inline constexpr double kPsdTol = 1e-10;

// Cyclic Jacobi with a fixed row-by-row pivot order.
SpectralDecomposition sym_eigen(const SymmetricMatrix& m);

SymmetricMatrix sqrt_spd(const SymmetricMatrix& m, double tol = kPsdTol);
double log_det_spd(const SymmetricMatrix& m);
Signature signature(const SymmetricMatrix& m, double tol = kPsdTol);

// V f(diag) V^T on the spectrum.
SymmetricMatrix apply_spectral(const SymmetricMatrix& m, const std::function<double(double)>& f);
SymmetricMatrix inverse_spd(const SymmetricMatrix& m);
SymmetricMatrix inv_sqrt_spd(const SymmetricMatrix& m);
SymmetricMatrix power_spd(const SymmetricMatrix& m, double p);
SymmetricMatrix exp_sym(const SymmetricMatrix& s);
SymmetricMatrix log_spd(const SymmetricMatrix& m);

double min_eigenvalue(const SymmetricMatrix& m);
double max_eigenvalue(const SymmetricMatrix& m);

// Embeds blocks along the diagonal.
SymmetricMatrix block_diagonal(const std::vector<SymmetricMatrix>& blocks);

}  // namespace blsat
