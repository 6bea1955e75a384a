#include <catch2/catch.hpp>

#include <numbers>

#include "qstforge/dynamics.hpp"
#include "qstforge/rng.hpp"

using namespace qstforge;

namespace {

// Fixed-step RK4 integrator for i d psi/dt = H psi; evolution oracle kept
// independent of the eigendecomposition path.
Eigen::VectorXcd rk4_evolve(const Eigen::MatrixXd& h, Eigen::VectorXcd psi, double t, int steps) {
  const Complex mi(0.0, -1.0);
  const double dt = t / steps;
  for (int s = 0; s < steps; ++s) {
    const Eigen::VectorXcd k1 = mi * (h * psi);
    const Eigen::VectorXcd k2 = mi * (h * (psi + 0.5 * dt * k1));
    const Eigen::VectorXcd k3 = mi * (h * (psi + 0.5 * dt * k2));
    const Eigen::VectorXcd k4 = mi * (h * (psi + dt * k3));
    psi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return psi;
}

CouplingConfig random_config(const LatticeSpec& spec, RngStream& rng) {
  CouplingConfig config(spec, CouplingSymmetry::free);
  for (std::size_t b = 0; b < spec.bonds().size(); ++b)
    if (!spec.bonds()[b].fixed) config.set_value(b, rng.uniform(-8.0, -0.3));
  return config;
}

StateVector random_state(std::shared_ptr<const FockBasis> basis, RngStream& rng) {
  Eigen::VectorXcd amp(basis->dim());
  for (int k = 0; k < basis->dim(); ++k) amp(k) = Complex(rng.gaussian(), rng.gaussian());
  amp /= amp.norm();
  return {std::move(basis), std::move(amp)};
}

SubspaceHamiltonian chain6_hamiltonian(const LatticeSpec& spec,
                                       std::shared_ptr<const FockBasis> basis) {
  CouplingConfig config(spec, CouplingSymmetry::free);
  const auto js = standard_protocol(6, -2.0);
  for (std::size_t b = 0; b < spec.bonds().size(); ++b)
    config.set_value(b, js[static_cast<std::size_t>(spec.bonds()[b].a.x) - 1]);
  return build_hamiltonian(spec, config, std::move(basis));
}

}  // namespace

TEST_CASE("evolution basics") {
  auto spec = build_grid(6, 1, false);
  auto basis = build_basis(6, 1);
  auto h = chain6_hamiltonian(spec, basis);
  auto psi0 = basis_state(basis, Occupation::single(0));

  SECTION("t = 0 is the identity") {
    auto psi = evolve(h, psi0, 0.0);
    CHECK((psi.amplitudes - psi0.amplitudes).norm() <= 1e-14);
  }

  SECTION("perfect transfer at tJ = pi/2") {
    CHECK(dimensionless_time(125.0, 2.0) == Approx(0.5 * std::numbers::pi).epsilon(1e-12));
    auto target = basis_state(basis, Occupation::single(5));
    CHECK(transfer_fidelity(h, psi0, target, 125.0) == Approx(1.0).margin(1e-8));
    CHECK(transfer_fidelity(h, psi0, psi0, 0.0) == Approx(1.0).margin(1e-14));
  }

  SECTION("basis mismatch is rejected") {
    auto other = basis_state(build_basis(5, 1), Occupation::single(0));
    CHECK_THROWS_AS(evolve(h, other, 1.0), std::invalid_argument);
  }
}

TEST_CASE("eigendecomposition evolution agrees with an RK4 oracle") {
  RngStream rng(11, "test-dynamics-rk4", 0);
  for (auto [n1, n2] : {std::pair{2, 2}, std::pair{3, 2}}) {
    auto spec = build_grid(n1, n2, true);
    auto basis = build_basis(n1 * n2, 1);
    auto config = random_config(spec, rng);
    auto h = build_hamiltonian(spec, config, basis);
    auto psi0 = random_state(basis, rng);
    const double t = 40.0;
    const auto direct = evolve(h, psi0, t).amplitudes;
    const auto oracle = rk4_evolve(h.matrix(), psi0.amplitudes, t, 40000);
    CHECK((direct - oracle).norm() <= 1e-8);
  }
}

TEST_CASE("unitarity, composition and sign-flip properties") {
  RngStream rng(13, "test-dynamics-props", 0);
  auto spec = build_grid(3, 3, true);
  spec.add_defect({3, 2}, {3, 3}, 0.3);
  auto basis = build_basis(9, 2);

  for (int trial = 0; trial < 5; ++trial) {
    auto config = random_config(spec, rng);
    auto h = build_hamiltonian(spec, config, basis);
    auto psi0 = random_state(basis, rng);
    const double t1 = rng.uniform(0.0, 300.0);
    const double t2 = rng.uniform(0.0, 300.0);

    const auto psi1 = evolve(h, psi0, t1);
    CHECK(psi1.norm() == Approx(1.0).margin(1e-10));

    const auto once = evolve(h, psi0, t1 + t2);
    const auto twice = evolve(h, psi1, t2);
    CHECK((once.amplitudes - twice.amplitudes).norm() <= 1e-10);

    // Global sign flip leaves |<b|U|a>| unchanged for real a, b.
    CouplingConfig flipped = config;
    for (std::size_t bd = 0; bd < spec.bonds().size(); ++bd)
      flipped.set_value(bd, -config.value(bd));
    auto hf = SubspaceHamiltonian(basis, subspace_matrix(spec, flipped, *basis));
    auto a = basis_state(basis, Occupation::pair(0, 1));
    auto b = basis_state(basis, Occupation::pair(7, 8));
    CHECK(transfer_fidelity(h, a, b, t1) == Approx(transfer_fidelity(hf, a, b, t1)).margin(1e-10));
  }
}

TEST_CASE("bell states") {
  auto spec = build_grid(6, 6, false);
  auto basis = build_basis(36, 1);
  auto bell = bell_state(spec, basis, {1, 1}, {2, 1});
  CHECK(bell.amplitudes(0).real() == Approx(1.0 / std::numbers::sqrt2));
  CHECK(bell.amplitudes(1).real() == Approx(-1.0 / std::numbers::sqrt2));
  CHECK(std::abs(bell.amplitudes.dot(bell.amplitudes)) == Approx(1.0).margin(1e-14));
  CHECK_THROWS_AS(bell_state(spec, basis, {1, 1}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(bell_state(spec, build_basis(36, 2), {1, 1}, {2, 1}), std::invalid_argument);

  SECTION("bell transfer is perfect under the ideal product protocol") {
    auto h = build_hamiltonian(spec, product_protocol(spec, -2.0), basis);
    auto target = bell_state(spec, basis, {5, 6}, {6, 6});
    CHECK(transfer_fidelity(h, bell, target, 125.0) == Approx(1.0).margin(1e-8));
  }
}

TEST_CASE("spin trajectories") {
  auto spec = build_grid(3, 3, false);
  auto basis = build_basis(9, 1);

  SECTION("north pole at the start") {
    auto psi0 = basis_state(basis, Occupation::single(0));
    const auto s = spin_trajectory(psi0, spec);
    CHECK(s[2] == Approx(1.0).margin(1e-14));
    CHECK(s[5] == Approx(1.0).margin(1e-14));
    for (int a : {0, 1, 3, 4}) CHECK(s[static_cast<std::size_t>(a)] == Approx(0.0).margin(1e-14));
  }

  SECTION("synchronized flip at tJ = pi/2") {
    auto h = build_hamiltonian(spec, product_protocol(spec, -2.0), basis);
    auto psi0 = basis_state(basis, Occupation::single(0));
    const auto s = spin_trajectory(evolve(h, psi0, 125.0), spec);
    CHECK(s[2] == Approx(-1.0).margin(1e-8));
    CHECK(s[5] == Approx(-1.0).margin(1e-8));
  }

  SECTION("closed form for <S1x> in terms of amplitudes") {
    RngStream rng(17, "test-spin", 0);
    auto psi = random_state(basis, rng);
    const auto s = spin_trajectory(psi, spec);
    Complex acc = 0.0;
    for (int i = 0; i < 6; ++i)
      acc += psi.amplitudes(i) * std::conj(psi.amplitudes(i + 3)) +
             psi.amplitudes(i + 3) * std::conj(psi.amplitudes(i));
    CHECK(s[0] == Approx((acc / std::numbers::sqrt2).real()).margin(1e-12));
  }

  SECTION("spin magnitude bound") {
    RngStream rng(19, "test-spin-mag", 0);
    for (int trial = 0; trial < 20; ++trial) {
      auto psi = random_state(basis, rng);
      const auto s = spin_trajectory(psi, spec);
      const double m1 = std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
      const double m2 = std::sqrt(s[3] * s[3] + s[4] * s[4] + s[5] * s[5]);
      CHECK(m1 <= 1.0 + 1e-9);
      CHECK(m2 <= 1.0 + 1e-9);
    }
  }

  SECTION("two-excitation states are rejected") {
    auto psi = basis_state(build_basis(9, 2), Occupation::pair(0, 1));
    CHECK_THROWS_AS(spin_trajectory(psi, spec), std::invalid_argument);
  }
}

TEST_CASE("plaquette-parametrized cross couplings close the two-spin algebra") {
  // With chain-protocol NN couplings and cross couplings scaled per
  // plaquette as Jx * sqrt(m(N1-m)) * sqrt(m'(N2-m')), the single-excitation
  // block equals 2J(S1x + S2x) + 4Jx S1x S2x exactly.
  const int n1 = 4;
  const int n2 = 3;
  const double j = -2.0;
  const double jx = 0.45;
  auto spec = build_grid(n1, n2, true);
  CouplingConfig config = product_protocol(spec, j, CouplingSymmetry::free);
  for (std::size_t b = 0; b < spec.bonds().size(); ++b) {
    const Bond& bond = spec.bonds()[b];
    if (bond.kind != BondKind::cross) continue;
    const int m = std::min(bond.a.x, bond.b.x);
    const int mp = std::min(bond.a.y, bond.b.y);
    config.set_value(b, jx * std::sqrt(double(m) * (n1 - m)) * std::sqrt(double(mp) * (n2 - mp)));
  }
  auto basis = build_basis(n1 * n2, 1);
  auto h = build_hamiltonian(spec, config, basis);

  auto sx = [](int n) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    const double s = 0.5 * (n - 1);
    for (int k = 0; k + 1 < n; ++k) {
      const double lower = s - (k + 1);
      m(k, k + 1) = m(k + 1, k) = 0.5 * std::sqrt(s * (s + 1) - lower * (lower + 1));
    }
    return m;
  };
  const Eigen::MatrixXd ix = Eigen::MatrixXd::Identity(n1, n1);
  const Eigen::MatrixXd iy = Eigen::MatrixXd::Identity(n2, n2);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(n1 * n2, n1 * n2);
  const double ja = j * mhz_to_rad_ns;
  const double jxa = jx * mhz_to_rad_ns;
  const Eigen::MatrixXd s1 = sx(n2);
  const Eigen::MatrixXd s2 = sx(n1);
  for (int y = 0; y < n2; ++y)
    for (int x = 0; x < n1; ++x)
      for (int yp = 0; yp < n2; ++yp)
        for (int xp = 0; xp < n1; ++xp)
          expected(yp * n1 + xp, y * n1 + x) = 2.0 * ja * (s1(yp, y) * ix(xp, x) +
                                                           iy(yp, y) * s2(xp, x)) +
                                               4.0 * jxa * s1(yp, y) * s2(xp, x);
  CHECK((h.matrix() - expected).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("quantum speed limits") {
  SECTION("stationary state reports infinite times") {
    auto spec = build_grid(3, 1, false);
    auto basis = build_basis(3, 1);
    CouplingConfig config(spec, CouplingSymmetry::free);
    config.set_value(0, -2.0);
    config.set_value(1, -2.0);
    auto h = build_hamiltonian(spec, config, basis);
    StateVector ground{basis, h.eigenvectors().col(0).cast<Complex>()};
    const auto report = qsl_report(h, ground);
    CHECK_FALSE(report.t_de_finite());
    CHECK_FALSE(report.t_e_finite());
  }

  SECTION("two-level Rabi flip saturates the MT bound") {
    auto spec = build_grid(2, 1, false);
    auto basis = build_basis(2, 1);
    CouplingConfig config(spec, CouplingSymmetry::free);
    config.set_value(0, 3.0);  // H = J sigma_x with J = 3 MHz angular
    auto h = build_hamiltonian(spec, config, basis);
    const double j = 3.0 * mhz_to_rad_ns;
    auto psi0 = basis_state(basis, Occupation::single(0));
    const auto report = qsl_report(h, psi0);
    CHECK(report.energy_uncertainty == Approx(j).epsilon(1e-12));
    CHECK(report.t_de_ns == Approx(0.5 * std::numbers::pi / j).epsilon(1e-12));
    CHECK(report.t_e_ns == Approx(0.5 * std::numbers::pi / j).epsilon(1e-12));

    std::vector<double> times;
    for (int k = 0; k <= 50; ++k) times.push_back(report.t_de_ns * k / 50.0);
    for (const auto& sample : qsl_bounds_curve(h, psi0, times)) {
      CHECK(sample.overlap == Approx(std::abs(std::cos(j * sample.t_ns))).margin(1e-9));
      if (j * sample.t_ns < 0.5 * std::numbers::pi)
        CHECK(sample.overlap >= sample.mt_bound - 1e-9);
    }
  }

  SECTION("transfer time beats the MT bound for the 1D protocol") {
    auto spec = build_grid(6, 1, false);
    auto basis = build_basis(6, 1);
    auto h = chain6_hamiltonian(spec, basis);
    auto psi0 = basis_state(basis, Occupation::single(0));
    const auto report = qsl_report(h, psi0);
    REQUIRE(report.t_de_finite());
    CHECK(125.0 >= report.t_de_ns);

    const auto curve = qsl_bounds_curve(h, psi0, {0.0});
    CHECK(curve[0].overlap == Approx(1.0).margin(1e-12));
    CHECK(curve[0].mt_bound == 1.0);
    CHECK(curve[0].ml_bound == 1.0);
  }

  SECTION("overlap never dips below the MT bound before its first zero") {
    RngStream rng(23, "test-qsl-prop", 0);
    auto spec = build_grid(3, 3, true);
    auto basis = build_basis(9, 1);
    auto config = random_config(spec, rng);
    auto h = build_hamiltonian(spec, config, basis);
    auto psi0 = basis_state(basis, Occupation::single(0));
    const auto report = qsl_report(h, psi0);
    std::vector<double> times;
    for (int k = 0; k <= 200; ++k) times.push_back(report.t_de_ns * k / 200.0);
    for (const auto& sample : qsl_bounds_curve(h, psi0, times))
      CHECK(sample.overlap >= sample.mt_bound - 1e-9);
  }
}
