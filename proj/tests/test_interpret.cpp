#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <vector>

#include "fnn/greens.hpp"
#include "fnn/interpret.hpp"
#include "support.hpp"

using namespace fnn;

TEST_SUITE_BEGIN("interpret");

namespace {

MatC sub_block(const MatC& c, const std::vector<Eigen::Index>& idx) {
  const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
  MatC out(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) out(i, j) = c(idx[i], idx[j]);
  return out;
}

int jw_sign(Eigen::Index mask) { return std::popcount(static_cast<std::uint64_t>(mask)) % 2 ? -1 : 1; }

// Exact diagonalization of Σ h_ij c_i† c_j on the 2^n Fock space.
// c_j|b⟩ = (−1)^{#set bits below j}|b∖j⟩ and likewise for c_i†.
VecC fock_ground_state(const MatC& h, double& e0) {
  const Eigen::Index n = h.rows();
  const Eigen::Index dim = Eigen::Index(1) << n;
  MatC hmb = MatC::Zero(dim, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const cxd t = h(i, j);
      if (t == cxd(0.0, 0.0)) continue;
      for (Eigen::Index b = 0; b < dim; ++b) {
        if (((b >> j) & 1) == 0) continue;
        const Eigen::Index b1 = b ^ (Eigen::Index(1) << j);
        if ((b1 >> i) & 1) continue;
        const int sign = jw_sign(b & ((Eigen::Index(1) << j) - 1)) *
                         jw_sign(b1 & ((Eigen::Index(1) << i) - 1));
        hmb(b1 | (Eigen::Index(1) << i), b) += t * static_cast<double>(sign);
      }
    }
  Eigen::SelfAdjointEigenSolver<MatC> es(hmb);
  REQUIRE(es.info() == Eigen::Success);
  e0 = es.eigenvalues()[0];
  return es.eigenvectors().col(0);
}

struct BruteEntropies {
  double von_neumann = 0.0;
  double renyi2 = 0.0;
};

// Entropies of an arbitrary mode subset: relabel so the subset is the prefix,
// re-diagonalize, and trace out the suffix. The prefix partial trace is
// sign-free for a particle-number-conserving state (contributing amplitudes
// pair bras and kets of equal prefix occupation parity).
BruteEntropies fock_subset_entropies(const MatC& h, const std::vector<Eigen::Index>& sub) {
  const Eigen::Index n = h.rows();
  std::vector<Eigen::Index> perm = sub;
  for (Eigen::Index j = 0; j < n; ++j)
    if (std::find(sub.begin(), sub.end(), j) == sub.end()) perm.push_back(j);
  MatC hp(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) hp(i, j) = h(perm[i], perm[j]);

  double e0 = 0.0;
  const VecC psi = fock_ground_state(hp, e0);
  const Eigen::Index k = static_cast<Eigen::Index>(sub.size());
  const Eigen::Index da = Eigen::Index(1) << k;
  const Eigen::Index db = Eigen::Index(1) << (n - k);
  MatC rho = MatC::Zero(da, da);
  for (Eigen::Index a = 0; a < da; ++a)
    for (Eigen::Index ap = 0; ap < da; ++ap)
      for (Eigen::Index b = 0; b < db; ++b)
        rho(a, ap) += psi[a | (b << k)] * std::conj(psi[ap | (b << k)]);

  Eigen::SelfAdjointEigenSolver<MatC> es(rho);
  REQUIRE(es.info() == Eigen::Success);
  BruteEntropies out;
  double purity = 0.0;
  for (Eigen::Index m = 0; m < da; ++m) {
    const double p = es.eigenvalues()[m];
    REQUIRE(p > -1e-12);
    if (p > 1e-14) out.von_neumann -= p * std::log(p);
    purity += p * p;
  }
  out.renyi2 = -std::log(purity);
  return out;
}

}  // namespace

TEST_CASE("correlation matrix convention and projector structure") {
  MatC diag = MatC::Zero(2, 2);
  diag(0, 0) = cxd(-1.0, 0.0);
  diag(1, 1) = cxd(1.0, 0.0);
  const MatC c0 = ground_state_correlation(diag, 0.0);
  CHECK(std::abs(c0(0, 0) - cxd(1.0, 0.0)) < 1e-14);
  CHECK(std::abs(c0(1, 1)) < 1e-14);
  CHECK(std::abs(c0(0, 1)) < 1e-14);

  // ⟨c_i† c_j⟩ is the transposed projector: the complex pair pins the sign
  MatC pair = MatC::Zero(2, 2);
  pair(0, 1) = cxd(0.0, 1.0);
  pair(1, 0) = cxd(0.0, -1.0);
  const MatC c1 = ground_state_correlation(pair, 0.0);
  CHECK(c1(0, 1).real() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c1(0, 1).imag() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(c1(0, 0).real() == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(11);
  const MatC h = test::random_hermitian(8, rng);
  Eigen::SelfAdjointEigenSolver<MatC> es(h);
  const double fermi = 0.2;
  REQUIRE((es.eigenvalues().array() - fermi).abs().minCoeff() > 1e-3);
  const MatC c = ground_state_correlation(h, fermi);
  CHECK((c * c - c).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c - c.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  const double filled = (es.eigenvalues().array() <= fermi).count();
  CHECK(std::abs(c.trace().real() - filled) < 1e-10);

  CHECK_THROWS_AS(ground_state_correlation(MatC::Zero(2, 3), 0.0), shape_error);
  CHECK_THROWS_AS(ground_state_correlation(diag, 1.0), degeneracy_error);
  CHECK_THROWS_AS(ground_state_correlation(diag, 1.0 - 5e-10), degeneracy_error);
}

TEST_CASE("entropy formulas on hand-checkable spectra") {
  MatC half(1, 1), weak(1, 1);
  half(0, 0) = cxd(0.5, 0.0);
  weak(0, 0) = cxd(0.3, 0.0);
  CHECK(entanglement_entropy(half) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const double s03 = -0.3 * std::log(0.3) - 0.7 * std::log(0.7);
  CHECK(entanglement_entropy(weak) == doctest::Approx(s03).epsilon(1e-14));
  CHECK(renyi_entropy(weak, 2.0) == doctest::Approx(-std::log(0.58)).epsilon(1e-14));
  // Rényi order → 1 recovers the von Neumann value
  CHECK(renyi_entropy(weak, 1.0 + 1e-6) == doctest::Approx(s03).epsilon(1e-5));
  CHECK(renyi_entropy(weak, 1.0 - 1e-6) == doctest::Approx(s03).epsilon(1e-5));
  // filled/empty levels carry no entropy (clamped, not thrown)
  MatC full(1, 1);
  full(0, 0) = cxd(1.0, 0.0);
  CHECK(entanglement_entropy(full) < 1e-12);

  CHECK_THROWS_AS(renyi_entropy(weak, 1.0), shape_error);
  CHECK_THROWS_AS(renyi_entropy(weak, 0.0), shape_error);
  CHECK_THROWS_AS(renyi_entropy(weak, -2.0), shape_error);
  MatC bad(1, 1);
  bad(0, 0) = cxd(1.5, 0.0);
  CHECK_THROWS_AS(entanglement_entropy(bad), shape_error);
  CHECK_THROWS_AS(entanglement_entropy(MatC::Zero(1, 2)), shape_error);
}

TEST_CASE("free-fermion entropies match exact diagonalization") {
  std::mt19937_64 rng(3);
  const Eigen::Index n = 6;
  const MatC h = test::random_hermitian(n, rng);
  Eigen::SelfAdjointEigenSolver<MatC> es(h);
  REQUIRE(es.eigenvalues().cwiseAbs().minCoeff() > 0.05);  // unique ground state

  double e0 = 0.0;
  fock_ground_state(h, e0);
  double filled_sum = 0.0;
  for (Eigen::Index m = 0; m < n; ++m)
    if (es.eigenvalues()[m] < 0.0) filled_sum += es.eigenvalues()[m];
  CHECK(e0 == doctest::Approx(filled_sum).epsilon(1e-10));

  const MatC c = ground_state_correlation(h, 0.0);
  const std::vector<Eigen::Index> a{0, 2}, b{1, 4};

  const BruteEntropies sa = fock_subset_entropies(h, a);
  const BruteEntropies sb = fock_subset_entropies(h, b);
  std::vector<Eigen::Index> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  const BruteEntropies sab = fock_subset_entropies(h, ab);

  CHECK(entanglement_entropy(sub_block(c, a)) == doctest::Approx(sa.von_neumann).epsilon(1e-8));
  CHECK(entanglement_entropy(sub_block(c, b)) == doctest::Approx(sb.von_neumann).epsilon(1e-8));
  CHECK(renyi_entropy(sub_block(c, a), 2.0) == doctest::Approx(sa.renyi2).epsilon(1e-8));
  CHECK(renyi_entropy(sub_block(c, ab), 2.0) == doctest::Approx(sab.renyi2).epsilon(1e-8));

  const EntanglementReport mi = mutual_information(c, a, b);
  CHECK(mi.i_ab == doctest::Approx(sa.von_neumann + sb.von_neumann - sab.von_neumann).epsilon(1e-8));
  CHECK(mi.s_a == doctest::Approx(sa.von_neumann).epsilon(1e-8));
  CHECK(mi.s_ab == doctest::Approx(sab.von_neumann).epsilon(1e-8));
}

TEST_CASE("mutual information identities on the pure ground state") {
  std::mt19937_64 rng(17);
  const MatC h = test::random_hermitian(6, rng);
  Eigen::SelfAdjointEigenSolver<MatC> es(h);
  REQUIRE(es.eigenvalues().cwiseAbs().minCoeff() > 1e-3);
  const MatC c = ground_state_correlation(h, 0.0);

  // complementary halves of a pure state: S_A = S_B, S_AB = 0, I = 2 S_A
  const EntanglementReport pure = mutual_information(c, {0, 1, 2}, {3, 4, 5});
  CHECK(std::abs(pure.s_a - pure.s_b) < 1e-10);
  CHECK(pure.s_ab < 1e-10);
  CHECK(pure.i_ab == doctest::Approx(2.0 * pure.s_a).epsilon(1e-10));

  // monotone under enlarging one side (strong subadditivity corollary)
  const EntanglementReport small = mutual_information(c, {0}, {3, 4});
  const EntanglementReport big = mutual_information(c, {0, 1}, {3, 4});
  CHECK(big.i_ab >= small.i_ab - 1e-12);
  CHECK(small.i_ab >= -1e-12);

  CHECK_THROWS_AS(mutual_information(c, {0, 1}, {1, 2}), shape_error);
  CHECK_THROWS_AS(mutual_information(c, {}, {1}), shape_error);
  CHECK_THROWS_AS(mutual_information(c, {0}, {6}), shape_error);
}

TEST_CASE("coupled-system input/output mutual information") {
  ArchitectureSpec spec;
  spec.input_size = 4;
  spec.layer_sizes = {3, 2};
  spec.intra_connectivity.assign(2, IntraConnectivity::full);
  spec.inter_connectivity.assign(2, InterConnectivity::full);
  const FnnParameters params = init_parameters(spec, 21);

  std::mt19937_64 rng(4);
  const InputEncoding enc = InputEncoding::onsite_dense(test::random_hermitian(4, rng));
  const double fermi = 0.1;

  const LayeredSystem sys = assemble(params, enc);
  const MatC h = full_hamiltonian(sys);
  Eigen::SelfAdjointEigenSolver<MatC> es(h);
  REQUIRE((es.eigenvalues().array() - fermi).abs().minCoeff() > 1e-6);
  const MatC c = ground_state_correlation(h, fermi);
  const double direct = mutual_information(c, {0, 1, 2, 3}, {7, 8}).i_ab;

  CHECK(input_output_mi(params, enc, fermi) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(direct > 0.0);
  CHECK_THROWS_AS(input_output_mi(params, InputEncoding::external(VecR::Ones(4)), fermi),
                  shape_error);
}

TEST_CASE("logic flow triangularizes hidden-to-output correlations") {
  ArchitectureSpec spec;
  spec.input_size = 4;
  spec.layer_sizes = {4, 3, 2};
  spec.intra_connectivity.assign(3, IntraConnectivity::full);
  spec.inter_connectivity.assign(3, InterConnectivity::full);
  const FnnParameters params = init_parameters(spec, 6);

  std::mt19937_64 rng(12);
  const InputEncoding enc = InputEncoding::onsite_dense(test::random_hermitian(4, rng));
  const LayeredSystem sys = assemble(params, enc);
  const MatC h = full_hamiltonian(sys);
  Eigen::SelfAdjointEigenSolver<MatC> es(h);
  REQUIRE(es.eigenvalues().cwiseAbs().minCoeff() > 1e-6);
  const MatC c = ground_state_correlation(h, 0.0);
  const SiteLayout layout = layout_of(sys);
  REQUIRE(layout.offsets == std::vector<Eigen::Index>({0, 4, 8, 11, 13}));

  const LogicFlow flow = logic_flow_transform(c, layout);
  const Eigen::Index n = c.rows();
  CHECK((flow.u.adjoint() * flow.u - MatC::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((flow.u.topLeftCorner(4, 4) - MatC::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((flow.u.block(11, 11, 2, 2) - MatC::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((flow.c_prime - flow.u.adjoint() * c * flow.u).cwiseAbs().maxCoeff() < 1e-12);

  // unitary equivalence keeps the occupation spectrum
  Eigen::SelfAdjointEigenSolver<MatC> sc(c), sp(flow.c_prime);
  CHECK((sc.eigenvalues() - sp.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);

  // each hidden block against the output is upper triangular, rows past the
  // output width exactly zero
  for (Eigen::Index l = 1; l <= 2; ++l) {
    const Eigen::Index off = layout.offsets[l];
    const Eigen::Index m = layout.layer_size(l);
    const MatC block = flow.c_prime.block(off, 11, m, 2);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index j = 0; j < 2; ++j)
        if (r > j) CHECK(std::abs(block(r, j)) < 1e-9);
  }

  // a rotated neuron with no output correlation carries no output information
  const double stray = mutual_information(flow.c_prime, {layout.offsets[1] + 3}, {11, 12}).i_ab;
  CHECK(std::abs(stray) < 1e-8);
  // while the leading rotated neuron does
  const double lead = mutual_information(flow.c_prime, {layout.offsets[1]}, {11, 12}).i_ab;
  CHECK(lead > 1e-4);

  CHECK_THROWS_AS(logic_flow_transform(c.topLeftCorner(12, 12), layout), shape_error);
  SiteLayout shallow;
  shallow.offsets = {0, 13};
  CHECK_THROWS_AS(logic_flow_transform(c, shallow), shape_error);
}

TEST_CASE("in-gap spectral probe") {
  MatC h = MatC::Zero(4, 4);
  h(0, 0) = cxd(-2.0, 0.0);
  h(1, 1) = cxd(-0.3, 0.0);
  h(2, 2) = cxd(0.7, 0.0);
  h(3, 3) = cxd(1.5, 0.0);
  const IngapProbe probe = spectral_ingap_probe(h);
  REQUIRE(probe.eigenvalues.size() == 4);
  CHECK(probe.eigenvalues[0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(probe.eigenvalues[3] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(probe.min_abs == doctest::Approx(0.3).epsilon(1e-14));
  CHECK_THROWS_AS(spectral_ingap_probe(MatC::Zero(2, 3)), shape_error);
}

TEST_CASE("generative perturbations keep the coupled matrix singular") {
  ArchitectureSpec spec;
  spec.input_size = 4;  // 2×2 lattice
  spec.layer_sizes = {3, 2};
  spec.intra_connectivity.assign(2, IntraConnectivity::full);
  spec.inter_connectivity.assign(2, InterConnectivity::full);
  FnnParameters params = init_parameters(spec, 30);

  std::mt19937_64 rng(9);
  MatC h_in = test::random_hermitian(4, rng);

  // shift the whole coupled diagonal by an eigenvalue: exactly singular
  {
    const MatC k0 = full_hamiltonian(assemble(params, InputEncoding::onsite_dense(h_in)));
    Eigen::SelfAdjointEigenSolver<MatC> es(k0);
    Eigen::Index nearest = 0;
    es.eigenvalues().cwiseAbs().minCoeff(&nearest);
    const double lambda = es.eigenvalues()[nearest];
    h_in -= lambda * MatC::Identity(4, 4);
    for (MatC& block : params.intra)
      block -= lambda * MatC::Identity(block.rows(), block.cols());
  }

  PerturbationOptions opt;
  opt.count = 3;
  opt.omega = 0.05;
  opt.seed = 13;

  SUBCASE("hermitized, locality-truncated copies") {
    const PerturbationOutcome out = generative_perturbation(h_in, params, 2, opt);
    CHECK(out.sigma_min_before < 1e-10);
    REQUIRE(out.models.size() == 3);
    for (const PerturbedModel& m : out.models) {
      CHECK(m.target >= 0);
      CHECK(m.target < 4);
      CHECK((m.h0 - m.h0.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((m.h0 - h_in).cwiseAbs().maxCoeff() > 1e-6);  // something moved
      // only the input block is touched: the coupled tail is rebuilt from the
      // same parameters
      const MatC rebuilt = full_hamiltonian(assemble(params, InputEncoding::onsite_dense(m.h0)));
      CHECK((m.overall - rebuilt).cwiseAbs().maxCoeff() == 0.0);
      CHECK((m.overall.bottomRightCorner(5, 5) -
             full_hamiltonian(assemble(params, InputEncoding::onsite_dense(h_in)))
                 .bottomRightCorner(5, 5))
                .cwiseAbs()
                .maxCoeff() < 1e-14);
      CHECK(std::isfinite(m.sigma_min_after));
    }
    // determinism: the same seed reproduces targets and blocks exactly
    const PerturbationOutcome again = generative_perturbation(h_in, params, 2, opt);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(again.models[i].target == out.models[i].target);
      CHECK((again.models[i].h0 - out.models[i].h0).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("exact column mode preserves the determinant") {
    PerturbationOptions exact = opt;
    exact.hermitize = false;
    exact.truncate = false;
    const PerturbationOutcome out = generative_perturbation(h_in, params, 2, exact);
    for (const PerturbedModel& m : out.models) {
      CHECK(m.sigma_min_after < 1e-8);
      // only the target column differs from the unperturbed coupled matrix
      const MatC k0 = full_hamiltonian(assemble(params, InputEncoding::onsite_dense(h_in)));
      MatC diff = m.overall - k0;
      diff.col(m.target).setZero();
      CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
      CHECK((m.overall.col(m.target) - k0.col(m.target)).norm() ==
            doctest::Approx(exact.omega).epsilon(1e-12));
    }
  }

  SUBCASE("zero strength is the identity") {
    PerturbationOptions idle = opt;
    idle.omega = 0.0;
    idle.count = 1;
    const PerturbationOutcome out = generative_perturbation(h_in, params, 2, idle);
    CHECK((out.models[0].h0 - h_in).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(out.models[0].sigma_min_after == doctest::Approx(out.sigma_min_before).epsilon(1e-8));
  }

  SUBCASE("preconditions and failure modes") {
    // far from singular: the probe refuses
    MatC shifted = h_in + 5.0 * MatC::Identity(4, 4);
    FnnParameters far = params;
    for (MatC& block : far.intra) block += 5.0 * MatC::Identity(block.rows(), block.cols());
    CHECK_THROWS_AS(generative_perturbation(shifted, far, 2, opt), convergence_error);

    CHECK_THROWS_AS(generative_perturbation(h_in, params, 3, opt), shape_error);
    CHECK_THROWS_AS(generative_perturbation(MatC::Zero(3, 3), params, 2, opt), shape_error);
    PerturbationOptions bad = opt;
    bad.count = 0;
    CHECK_THROWS_AS(generative_perturbation(h_in, params, 2, bad), shape_error);
    bad = opt;
    bad.omega = -0.1;
    CHECK_THROWS_AS(generative_perturbation(h_in, params, 2, bad), shape_error);
    bad = opt;
    bad.radius = -1.0;  // truncation erases every entry
    CHECK_THROWS_AS(generative_perturbation(h_in, params, 2, bad), convergence_error);
  }
}

TEST_SUITE_END();
