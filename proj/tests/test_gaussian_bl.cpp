#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "blsat/gaussian_bl.hpp"
#include "oracles.hpp"

using namespace blsat;

namespace {

GaussianTuple scalars(std::initializer_list<double> a) {
  std::vector<SymmetricMatrix> b;
  for (double v : a) b.push_back(SymmetricMatrix::scalar(1, v));
  return make_tuple(b);
}

std::vector<Eigen::MatrixXd> mats(const GaussianTuple& t) {
  std::vector<Eigen::MatrixXd> out;
  for (const auto& b : t.blocks) out.push_back(b.mat());
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("data constructors") {
  const auto bs1 = bs_datum(1);
  CHECK(bs1.kernel(0, 1) == 0.5);
  CHECK(bs1.kernel(0, 0) == 0.0);
  CHECK(bs1.exponents == std::vector<double>{1, 1});

  const auto bs2 = bs_datum(2);
  CHECK(bs2.total_dim() == 4);
  const auto sig = signature(bs2.kernel);
  CHECK(sig.n_neg == 2);
  CHECK(sig.n_pos == 2);

  const auto kw21 = kw_datum(2, 1);
  CHECK(kw21.kernel.mat() == bs1.kernel.mat());

  const auto kw31 = kw_datum(3, 1);
  CHECK(kw31.kernel(0, 1) == 0.25);
  CHECK(kw31.kernel(1, 1) == 0.0);

  const auto kw42 = kw_datum(4, 2);
  CHECK(kw42.total_dim() == 8);
  CHECK(kw42.kernel(0, 2) == doctest::Approx(1.0 / 6.0));
  CHECK(kw42.kernel(0, 3) == 0.0);
  CHECK(kw42.kernel(0, 1) == 0.0);
  CHECK(kw42.kw_shaped());

  CHECK_THROWS_AS(kw_datum(1, 1), Error);
  CHECK_THROWS_AS(make_datum({1, 1}, {1.0, -1.0}, SymmetricMatrix::zero(2)), Error);
  CHECK_THROWS_AS(make_datum({1, 2}, {1.0, 1.0}, SymmetricMatrix::zero(2)), Error);
}

TEST_CASE("scaled datum follows c -> (c+p)/p, Q -> Q/p") {
  const auto s = scaled_datum(kw_datum(3, 1), 1.0);
  CHECK(s.exponents == std::vector<double>{2, 2, 2});
  CHECK(s.kernel(0, 1) == 0.25);

  const auto b = scaled_datum(bs_datum(1), 0.1);
  CHECK(b.exponents[0] == doctest::Approx(11.0));
  CHECK(b.kernel(0, 1) == doctest::Approx(5.0));

  // Not idempotent: a second application compounds.
  const auto twice = scaled_datum(s, 1.0);
  CHECK(twice.exponents[0] == 3.0);
  CHECK(code_of([] { scaled_datum(bs_datum(1), 0.0); }) == ErrorCode::InvalidInput);
}

TEST_CASE("assemble_M and feasibility") {
  const auto m = assemble_M(kw_datum(3, 1), identity_tuple(3, 1));
  Eigen::Matrix3d ref;
  ref << 1, -0.5, -0.5, -0.5, 1, -0.5, -0.5, -0.5, 1;
  CHECK((m.mat() - ref).cwiseAbs().maxCoeff() == 0.0);

  const auto mb = assemble_M(bs_datum(1), scalars({3.0, 7.0}));
  CHECK(mb(0, 0) == 3.0);
  CHECK(mb(1, 1) == 7.0);
  CHECK(mb(0, 1) == -1.0);

  const auto z = make_datum({1, 2}, {2.0, 0.5}, SymmetricMatrix::zero(3));
  const auto mz = assemble_M(z, make_tuple({SymmetricMatrix::scalar(1, 3.0), SymmetricMatrix::identity(2)}));
  CHECK(mz(0, 0) == 6.0);
  CHECK(mz(2, 2) == 0.5);
  CHECK(mz(0, 2) == 0.0);

  CHECK(gaussian_feasible(kw_datum(3, 1), identity_tuple(3, 1)));
  CHECK_FALSE(gaussian_feasible(kw_datum(3, 1), scalars({0.9, 0.9, 0.9})));
  for (double a : {0.01, 0.5, 1.0, 3.0, 100.0}) CHECK(gaussian_feasible(bs_datum(1), scalars({a, 1.0 / a})));

  CHECK_THROWS_AS(assemble_M(kw_datum(3, 1), identity_tuple(3, 2)), Error);
}

TEST_CASE("closed-form BL value") {
  CHECK(bl_gaussian_value(bs_datum(1), scalars({std::sqrt(2.0), std::sqrt(2.0)})) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(std::isinf(bl_gaussian_value(bs_datum(1), scalars({1.0, 1.0}))));
  CHECK(code_of([] { bl_gaussian_value(bs_datum(1), scalars({1.0, -1.0})); }) == ErrorCode::InvalidInput);

  // Against the LDLT oracle on random feasible tuples of assorted data.
  std::mt19937_64 rng(4);
  const std::vector<BLDatum> data = {bs_datum(1), bs_datum(2), kw_datum(3, 1), kw_datum(4, 2),
                                     scaled_datum(kw_datum(3, 1), 0.5)};
  for (const auto& d : data) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto t = random_feasible_tuple(d, rng);
      const double ref = oracle::log_bl(d, mats(t));
      CHECK(log_bl_gaussian_value(d, t) == doctest::Approx(ref).epsilon(1e-10));
    }
  }
}

TEST_CASE("BL value invariant under a common rotation") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = kw_datum(3, 2);
    const auto t = random_feasible_tuple(d, rng);
    const auto u = oracle::random_rotation(2, rng);
    std::vector<SymmetricMatrix> rb;
    for (const auto& b : t.blocks) rb.push_back(SymmetricMatrix(u.transpose() * b.mat() * u));
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 3; ++i) big.block(2 * i, 2 * i, 2, 2) = u;
    const auto rd = make_datum(d.dims, d.exponents, SymmetricMatrix(big.transpose() * d.kernel.mat() * big));
    CHECK(log_bl_gaussian_value(rd, make_tuple(rb)) == doctest::Approx(log_bl_gaussian_value(d, t)).epsilon(1e-10));
  }
}

TEST_CASE("feasibility matches finiteness away from the boundary") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ud(0.3, 3.0);
  const auto d = kw_datum(3, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto t = scalars({ud(rng), ud(rng), ud(rng)});
    const auto m = assemble_M(d, t);
    const double lo = min_eigenvalue(m);
    if (std::abs(lo) < 10 * kPsdTol * m.frobenius()) continue;
    CHECK(gaussian_feasible(d, t) == std::isfinite(bl_gaussian_value(d, t)));
  }
}

TEST_CASE("KW objective") {
  CHECK(kw_gaussian_objective(kw_datum(3, 2), identity_tuple(3, 2)) == 0.0);
  CHECK(kw_gaussian_objective(kw_datum(3, 1), scalars({2.0, 0.5, 1.0})) == doctest::Approx(0.0));
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const SymmetricMatrix a(oracle::random_spd(2, rng, 2.0));
    const auto t = make_tuple({a, inverse_spd(a)});
    CHECK(std::abs(kw_gaussian_objective(bs_datum(2), t)) <= 1e-10);
  }
  CHECK(kw_constant_prefactor_log(kw_datum(3, 1)) == doctest::Approx(1.5 * std::log(2 * M_PI)));
}

TEST_CASE("random feasible samples never beat the identity") {
  for (auto [m, n] : std::vector<std::pair<int, int>>{{3, 1}, {4, 2}, {5, 1}}) {
    const auto d = kw_datum(m, n);
    std::mt19937_64 rng(100 + m * 10 + n);
    double worst = -INFINITY;
    for (int s = 0; s < 2000; ++s) {
      const auto t = random_feasible_tuple(d, rng);
      CHECK(gaussian_feasible(d, t));
      worst = std::max(worst, kw_gaussian_objective(d, t));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("KW optimization finds the identity") {
  const auto r = optimize_kw_constant(kw_datum(3, 1), 16, 7);
  CHECK(std::abs(r.best_value) <= 1e-6);
  CHECK(r.converged);
  CHECK(r.residuals.at("identity_distance") <= 1e-4);
  CHECK(r.residuals.at("maximizer_average") <= 1e-5);
  CHECK(r.residuals.at("product_pairwise") <= 1e-5);
  CHECK(r.starts_used == 16);
  CHECK(r.start_values.size() == 16u);

  // Same seed, same answer.
  const auto again = optimize_kw_constant(kw_datum(3, 1), 16, 7);
  CHECK(again.best_value == r.best_value);
  CHECK(again.best_start == r.best_start);

  OptimizerConfig one;
  one.threads = 1;
  const auto serial = optimize_kw_constant(kw_datum(3, 1), 16, 7, one);
  CHECK(serial.best_value == r.best_value);
}

TEST_CASE("KW optimization on the two-factor datum lands on the inverse family") {
  const auto r = optimize_kw_constant(bs_datum(2), 16, 3);
  CHECK(std::abs(r.best_value) <= 1e-6);
  CHECK(r.residuals.at("inverse_family") <= 1e-6);
}

TEST_CASE("KW optimization reports unbounded kernels") {
  // Q negative definite: every scale of A is feasible and the objective grows.
  Eigen::Matrix2d q;
  q << -1, 0, 0, -1;
  const auto d = make_datum({1, 1}, {1, 1}, SymmetricMatrix(q));
  CHECK(code_of([&] { optimize_kw_constant(d, 4, 1); }) == ErrorCode::Unbounded);
}

TEST_CASE("inverse constant on the one-dimensional two-factor datum") {
  const auto inf = optimize_inverse_constant(bs_datum(1), Direction::inf, 8, 1);
  CHECK(inf.best_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(inf.extremum == Extremum::asymptotic);

  const auto sup = optimize_inverse_constant(bs_datum(1), Direction::sup, 8, 1);
  CHECK(std::isinf(sup.best_value));
  CHECK(sup.extremum == Extremum::infinite);
}

TEST_CASE("inverse constant, attained case, agrees with the closed form at the optimum") {
  const auto d = scaled_datum(kw_datum(3, 1), 0.5);
  const auto r = optimize_inverse_constant(d, Direction::inf, 8, 2);
  CHECK(r.extremum == Extremum::attained);
  CHECK(r.converged);
  CHECK(r.best_log_value == doctest::Approx(oracle::log_bl(d, mats(r.argopt))).epsilon(1e-12));
  // Every sampled feasible tuple sits above the reported infimum.
  std::mt19937_64 rng(5);
  for (int s = 0; s < 500; ++s) {
    const auto t = random_feasible_tuple(d, rng);
    CHECK(log_bl_gaussian_value(d, t) >= r.best_log_value - 1e-9);
  }
}

TEST_CASE("stationarity residuals") {
  for (auto [m, n] : std::vector<std::pair<int, int>>{{3, 1}, {4, 2}, {2, 3}}) {
    const auto res = stationarity_residuals(kw_datum(m, n), identity_tuple(m, n));
    for (const auto& [k, v] : res) CHECK_MESSAGE(v <= 1e-14, k);
  }
  const auto r = stationarity_residuals(kw_datum(3, 1), scalars({2.0, 1.0, 1.0}));
  CHECK(r.at("maximizer_average") == doctest::Approx(2.0 / 15.0));

  // A perturbation of size eps moves the residuals by O(eps).
  std::mt19937_64 rng(6);
  for (double eps : {1e-3, 1e-4}) {
    Eigen::Matrix2d e = Eigen::Matrix2d::Random();
    e = 0.5 * (e + e.transpose());
    auto t = identity_tuple(3, 2);
    t.blocks[0] = SymmetricMatrix(Eigen::Matrix2d::Identity() + eps * e);
    const auto res = stationarity_residuals(kw_datum(3, 2), t);
    CHECK(res.at("maximizer_average") <= 10 * eps);
    CHECK(res.at("maximizer_average") >= 0.01 * eps);
  }
  CHECK(code_of([] { stationarity_residuals(scaled_datum(kw_datum(3, 1), 1.0), identity_tuple(3, 1)); }) ==
        ErrorCode::UnsupportedDatum);
}

TEST_CASE("non-degeneracy") {
  auto r = bw_nondegenerate(kw_datum(3, 1));
  CHECK_FALSE(r.nondegenerate);
  CHECK(r.s_minus == 2);
  r = bw_nondegenerate(bs_datum(1));
  CHECK_FALSE(r.nondegenerate);
  CHECK(r.s_minus == 1);
  r = bw_nondegenerate(make_datum({1, 1}, {1, 1}, SymmetricMatrix::zero(2)));
  CHECK(r.nondegenerate);
}

TEST_CASE("linear-algebra checker") {
  std::vector<SymmetricMatrix> x(3, SymmetricMatrix::scalar(4, 1.0 / 3.0));
  auto rep = prop52_check(make_tuple(x));
  CHECK(rep.constraints_ok);
  CHECK(rep.distance == 0.0);
  CHECK(rep.sum_residual <= 1e-15);
  CHECK(rep.power_residual <= 1e-12);

  const double a = 0.3;
  rep = prop52_check(make_tuple({SymmetricMatrix::diagonal(Eigen::Vector2d(a, 1 - a)),
                                 SymmetricMatrix::diagonal(Eigen::Vector2d(1 - a, a))}));
  CHECK(rep.constraints_ok);
  CHECK(rep.distance == doctest::Approx(0.2));
  CHECK(rep.power_residual <= 1e-10);
  CHECK(std::min(rep.alpha, 1 - rep.alpha) == doctest::Approx(a));

  // Breaking the sum constraint is detected.
  rep = prop52_check(make_tuple({SymmetricMatrix::scalar(2, 0.4), SymmetricMatrix::scalar(2, 0.4)}));
  CHECK_FALSE(rep.constraints_ok);
}

TEST_CASE("random search for m >= 3 only ever finds id/m") {
  for (int m : {3, 4}) {
    const auto s = prop52_search(m, 2, 40, 17);
    CHECK(s.trials == 40);
    CHECK(s.successes > 0);
    CHECK(s.max_distance <= 1e-6);
  }
}
