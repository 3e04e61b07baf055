#include <doctest.h>

#include "gradflow/lti_plant.hpp"
#include "gradflow/presets.hpp"
#include "oracles.hpp"

using namespace gradflow;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("hurwitz check reports the spectral margin") {
  auto stable = validate_hurwitz(-Matrix::Identity(2, 2));
  CHECK(stable.stable);
  CHECK(stable.margin == doctest::Approx(-1.0));

  auto rotation = validate_hurwitz(mat2(0, 1, -1, 0));
  CHECK_FALSE(rotation.stable);
  CHECK(std::abs(rotation.margin) < 1e-12);

  CHECK(validate_hurwitz(benchmark_case().plant.a()).stable);
  CHECK_THROWS_AS(validate_hurwitz(Matrix::Zero(2, 3)), Error);
}

TEST_CASE("lyapunov solve on hand-checkable systems") {
  Matrix p = solve_lyapunov(-Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2));
  CHECK(max_abs(p - Matrix::Identity(2, 2)) < 1e-12);

  Matrix a = Vector(vec({-1, -2})).asDiagonal();
  Matrix q = Vector(vec({2, 4})).asDiagonal();
  CHECK(max_abs(solve_lyapunov(a, q) - Matrix::Identity(2, 2)) < 1e-12);
}

TEST_CASE("lyapunov solve error paths") {
  try {
    solve_lyapunov(mat2(0, 1, -1, 0), Matrix::Identity(2, 2));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::no_solution);
  }
  try {
    solve_lyapunov(-Matrix::Identity(2, 2), mat2(1, 2, 0, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precondition);
  }
  try {
    solve_lyapunov(-Matrix::Identity(2, 2), mat2(1, 0, 0, -1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precondition);
  }
  CHECK_THROWS_AS(solve_lyapunov(-Matrix::Identity(2, 2), Matrix::Identity(3, 3)), Error);
}

TEST_CASE("lyapunov residual property over random stable systems") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial % 6;
    const Matrix a = oracle::random_hurwitz(rng, n);
    const Matrix q = oracle::random_spd(rng, n);
    const Matrix p = solve_lyapunov(a, q);
    CHECK(lyapunov_residual(a, p, q) <= 1e-9 * max_abs(q));
    CHECK(max_abs(p - p.transpose()) <= 1e-12);
    CHECK(symmetric_eigenvalues(p)(0) > 0.0);
  }
}

TEST_CASE("benchmark lyapunov solution") {
  const BenchmarkCase bc = benchmark_case();
  const Matrix p = solve_lyapunov(bc.plant.a(), bc.q);
  CHECK(lyapunov_residual(bc.plant.a(), p, bc.q) <= 1e-9 * max_abs(bc.q));
  // The reference matrix solves A P + P Aᵀ = −Q instead.
  const Matrix reference_transposed = solve_lyapunov(bc.plant.a().transpose(), bc.q);
  CHECK(max_abs(reference_transposed - bc.reference_p) < 1e-3);
}

TEST_CASE("steady-state maps") {
  const Matrix eye = Matrix::Identity(2, 2);
  PlantModel simple(-eye, eye, eye, Matrix::Zero(2, 2), Matrix::Zero(2, 2));
  SteadyStateMaps maps(simple);
  CHECK(max_abs(maps.g() - eye) < 1e-14);
  CHECK(max_abs(maps.h()) < 1e-14);

  PlantModel scaled(-2.0 * eye, eye, eye, eye, eye);
  SteadyStateMaps m2 = steady_state_maps(scaled);
  CHECK(max_abs(m2.g() - 0.5 * eye) < 1e-14);
  CHECK(max_abs(m2.h() - 1.5 * eye) < 1e-14);  // D − C A⁻¹ E = I + I/2

  const BenchmarkCase bc = benchmark_case();
  SteadyStateMaps m3(bc.plant);
  const Matrix a_inv = bc.plant.a().inverse();
  CHECK(max_abs(bc.plant.a() * a_inv - Matrix::Identity(4, 4)) < 1e-10);
  CHECK(max_abs(m3.g() + a_inv) < 1e-10);
  CHECK(max_abs(m3.h() - (Matrix::Identity(4, 4) - a_inv)) < 1e-10);

  PlantModel singular(Matrix::Zero(2, 2), eye, eye, eye, eye);
  try {
    SteadyStateMaps bad(singular);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular);
  }
}

TEST_CASE("equilibrium state and steady output consistency") {
  const Matrix eye = Matrix::Identity(2, 2);
  PlantModel simple(-eye, eye, eye, Matrix::Zero(2, 2), Matrix::Zero(2, 2));
  SteadyStateMaps maps(simple);
  CHECK(max_abs(maps.equilibrium_state(Vector::Zero(2), Vector::Zero(2))) == 0.0);
  CHECK(max_abs(maps.equilibrium_state(vec({1, 2}), Vector::Zero(2)) - vec({1, 2})) < 1e-14);

  const BenchmarkCase bc = benchmark_case();
  SteadyStateMaps bm(bc.plant);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const Vector u = oracle::random_vector(rng, 4, 3.0);
    const Vector w = oracle::random_vector(rng, 4, 3.0);
    const Vector x = bm.equilibrium_state(u, w);
    CHECK(bc.plant.rhs(x, u, w).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + x.norm()));
    CHECK((bc.plant.output(x, w) - bm.steady_output(u, w)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("plant evaluation and dimension checks") {
  const Matrix eye = Matrix::Identity(2, 2);
  PlantModel plant(-eye, eye, eye, Matrix::Zero(2, 2), Matrix::Zero(2, 2));
  CHECK(plant.rhs(Vector::Zero(2), Vector::Zero(2), Vector::Zero(2)).norm() == 0.0);
  CHECK(max_abs(plant.rhs(vec({1, 0}), vec({0, 1}), Vector::Zero(2)) - vec({-1, 1})) == 0.0);
  CHECK(plant.output(Vector::Zero(2), Vector::Zero(2)).norm() == 0.0);
  CHECK_THROWS_AS(plant.rhs(Vector::Zero(3), Vector::Zero(2), Vector::Zero(2)), Error);
  CHECK_THROWS_AS(PlantModel(-eye, Matrix::Identity(3, 3), eye, eye, eye), Error);
}

TEST_CASE("constant input converges at the certified rate") {
  const BenchmarkCase bc = benchmark_case();
  const LyapunovCertificate cert = make_lyapunov_certificate(bc.plant.a(), bc.q);
  const double lambda = cert.lambda_min_q / cert.lambda_max_p;
  SteadyStateMaps maps(bc.plant);
  const Vector u = vec({0.5, -0.2, 0.1, 0.3});
  const Vector w = vec({1, -1, 0.5, 0.2});
  const Vector x_eq = maps.equilibrium_state(u, w);
  Vector x = Vector::Zero(4);
  const double h = 1e-3;
  const double horizon = 5.0;
  const Vector forcing = bc.plant.b() * u + bc.plant.e() * w;
  for (int k = 0; k < static_cast<int>(horizon / h); ++k) {
    auto f = [&](const Vector& s) -> Vector { return bc.plant.a() * s + forcing; };
    const Vector k1 = f(x), k2 = f(x + 0.5 * h * k1), k3 = f(x + 0.5 * h * k2), k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  // Worst case over the ellipsoid needs the condition number of P.
  const double kappa = std::sqrt(cert.lambda_max_p / cert.lambda_min_p);
  CHECK((x - x_eq).norm() <= kappa * x_eq.norm() * std::exp(-lambda * horizon / 2.0));
}
