#include "fnn/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fnn/greens.hpp"

namespace fnn {

SiteLayout layout_of(const LayeredSystem& system) {
  SiteLayout layout;
  layout.offsets.assign(1, 0);
  for (Eigen::Index m : system.layer_sizes) layout.offsets.push_back(layout.offsets.back() + m);
  return layout;
}

MatC ground_state_correlation(const MatC& h, double fermi_energy) {
  if (h.rows() != h.cols() || h.rows() == 0) throw shape_error("hamiltonian must be square");
  Eigen::SelfAdjointEigenSolver<MatC> es(h);
  if (es.info() != Eigen::Success) throw convergence_error("eigensolver failed");
  const VecR& eps = es.eigenvalues();
  for (Eigen::Index n = 0; n < eps.size(); ++n)
    if (std::abs(eps[n] - fermi_energy) < 1e-9)
      throw degeneracy_error("a level sits on the Fermi energy: filling is ambiguous");
  VecR occ(eps.size());
  for (Eigen::Index n = 0; n < eps.size(); ++n) occ[n] = eps[n] <= fermi_energy ? 1.0 : 0.0;
  const MatC q = es.eigenvectors();
  // C_ij = ⟨c_i† c_j⟩ = [Q Λ̃ Q†]ᵀ_ij
  MatC m = q * occ.asDiagonal() * q.adjoint();
  return m.transpose();
}

namespace {

VecR correlation_spectrum(const MatC& c_sub) {
  if (c_sub.rows() != c_sub.cols() || c_sub.rows() == 0)
    throw shape_error("correlation submatrix must be square");
  Eigen::SelfAdjointEigenSolver<MatC> es(c_sub);
  if (es.info() != Eigen::Success) throw convergence_error("eigensolver failed");
  VecR zeta = es.eigenvalues();
  for (Eigen::Index k = 0; k < zeta.size(); ++k) {
    if (zeta[k] < -1e-10 || zeta[k] > 1.0 + 1e-10)
      throw shape_error("correlation spectrum escapes [0, 1]: not a fermionic C");
    zeta[k] = std::clamp(zeta[k], 1e-14, 1.0 - 1e-14);
  }
  return zeta;
}

}  // namespace

double entanglement_entropy(const MatC& c_sub) {
  const VecR zeta = correlation_spectrum(c_sub);
  double s = 0.0;
  for (Eigen::Index k = 0; k < zeta.size(); ++k)
    s -= zeta[k] * std::log(zeta[k]) + (1.0 - zeta[k]) * std::log(1.0 - zeta[k]);
  return s;
}

double renyi_entropy(const MatC& c_sub, double alpha) {
  if (alpha <= 0.0 || alpha == 1.0) throw shape_error("renyi order must be positive and not 1");
  const VecR zeta = correlation_spectrum(c_sub);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < zeta.size(); ++k)
    acc += std::log(std::pow(zeta[k], alpha) + std::pow(1.0 - zeta[k], alpha));
  return acc / (1.0 - alpha);
}

namespace {

MatC gather(const MatC& c, const std::vector<Eigen::Index>& rows,
            const std::vector<Eigen::Index>& cols) {
  MatC out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c(rows[i], cols[j]);
  return out;
}

}  // namespace

EntanglementReport mutual_information(const MatC& c, const std::vector<Eigen::Index>& a,
                                      const std::vector<Eigen::Index>& b) {
  if (a.empty() || b.empty()) throw shape_error("both subsystems must be non-empty");
  for (Eigen::Index i : a)
    if (i < 0 || i >= c.rows()) throw shape_error("subsystem index out of range");
  for (Eigen::Index i : b) {
    if (i < 0 || i >= c.rows()) throw shape_error("subsystem index out of range");
    if (std::find(a.begin(), a.end(), i) != a.end())
      throw shape_error("subsystems overlap");
  }
  std::vector<Eigen::Index> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  EntanglementReport report;
  report.a = a;
  report.b = b;
  report.s_a = entanglement_entropy(gather(c, a, a));
  report.s_b = entanglement_entropy(gather(c, b, b));
  report.s_ab = entanglement_entropy(gather(c, ab, ab));
  report.i_ab = report.s_a + report.s_b - report.s_ab;
  return report;
}

double input_output_mi(const FnnParameters& params, const InputEncoding& input,
                       double fermi_energy) {
  if (input.variant != InputEncoding::Variant::onsite)
    throw shape_error("input/output mutual information needs an onsite-encoded input");
  const LayeredSystem sys = assemble(params, input);
  const MatC h = full_hamiltonian(sys);
  const MatC c = ground_state_correlation(h, fermi_energy);
  const SiteLayout layout = layout_of(sys);
  std::vector<Eigen::Index> a, b;
  for (Eigen::Index i = layout.offsets[0]; i < layout.offsets[1]; ++i) a.push_back(i);
  const Eigen::Index last = layout.layers() - 1;
  for (Eigen::Index i = layout.offsets[last]; i < layout.offsets[last + 1]; ++i) b.push_back(i);
  return mutual_information(c, a, b).i_ab;
}

LogicFlow logic_flow_transform(const MatC& c, const SiteLayout& layout) {
  const Eigen::Index n = layout.offsets.back();
  if (c.rows() != n || c.cols() != n)
    throw shape_error("correlation matrix does not match the layout");
  if (layout.layers() < 2) throw shape_error("need at least two layers");
  const Eigen::Index last = layout.layers() - 1;
  const Eigen::Index out_off = layout.offsets[last];
  const Eigen::Index out_size = layout.layer_size(last);

  MatC u = MatC::Identity(n, n);
  constexpr double kRankTol = 1e-10;
  for (Eigen::Index l = 1; l < last; ++l) {
    const Eigen::Index off = layout.offsets[l];
    const Eigen::Index m = layout.layer_size(l);
    const MatC block = c.block(off, out_off, m, out_size);
    // Gram–Schmidt over the columns; q_k† column_j = 0 for k > j makes
    // U_l† C_{l,out} upper triangular with rows past the rank exactly zero.
    std::vector<VecC> basis;
    auto add_orthogonal = [&](VecC v) {
      for (const VecC& q : basis) v -= q.dot(v) * q;  // q.dot = q†v
      const double norm = v.norm();
      if (norm < kRankTol) return false;
      basis.push_back(v / norm);
      return true;
    };
    for (Eigen::Index j = 0; j < out_size && static_cast<Eigen::Index>(basis.size()) < m; ++j)
      add_orthogonal(block.col(j));
    for (Eigen::Index j = 0; j < m && static_cast<Eigen::Index>(basis.size()) < m; ++j)
      add_orthogonal(VecC::Unit(m, j));
    for (Eigen::Index k = 0; k < m; ++k) u.block(off, off, m, m).col(k) = basis[k];
  }
  LogicFlow flow;
  flow.c_prime = u.adjoint() * c * u;
  flow.u = std::move(u);
  return flow;
}

IngapProbe spectral_ingap_probe(const MatC& h) {
  if (h.rows() != h.cols() || h.rows() == 0) throw shape_error("hamiltonian must be square");
  Eigen::SelfAdjointEigenSolver<MatC> es(h);
  if (es.info() != Eigen::Success) throw convergence_error("eigensolver failed");
  IngapProbe probe;
  probe.eigenvalues = es.eigenvalues();
  probe.min_abs = probe.eigenvalues.cwiseAbs().minCoeff();
  return probe;
}

namespace {

double min_image_distance(Eigen::Index a, Eigen::Index b, Eigen::Index l) {
  const double ax = static_cast<double>(a % l), ay = static_cast<double>(a / l);
  const double bx = static_cast<double>(b % l), by = static_cast<double>(b / l);
  const double ll = static_cast<double>(l);
  const double dx = std::min(std::abs(ax - bx), ll - std::abs(ax - bx));
  const double dy = std::min(std::abs(ay - by), ll - std::abs(ay - by));
  return std::hypot(dx, dy);
}

double smallest_singular_value(const MatC& k) {
  Eigen::BDCSVD<MatC> svd(k);
  return svd.singularValues().minCoeff();
}

}  // namespace

PerturbationOutcome generative_perturbation(const MatC& h_input, const FnnParameters& params,
                                            Eigen::Index lattice_size,
                                            const PerturbationOptions& options) {
  const Eigen::Index m0 = params.spec.input_size;
  if (h_input.rows() != m0 || h_input.cols() != m0)
    throw shape_error("input block does not match the declared input size");
  if (lattice_size * lattice_size != m0)
    throw shape_error("input is not a square lattice of the given size");
  if (options.count <= 0 || options.omega < 0.0) throw shape_error("bad perturbation options");

  const MatC k0 = full_hamiltonian(assemble(params, InputEncoding::onsite_dense(h_input)));
  const Eigen::Index n = k0.rows();

  PerturbationOutcome outcome;
  outcome.sigma_min_before = smallest_singular_value(k0);
  if (outcome.sigma_min_before >= options.tol)
    throw convergence_error("coupled matrix is not near-singular: nothing in the gap to move");

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, m0 - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int copy = 0; copy < options.count; ++copy) {
    const Eigen::Index target = pick(rng);
    VecC direction = VecC::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == target) continue;
      direction += cxd(gauss(rng), gauss(rng)) * k0.col(j);
    }
    const double raw_norm = direction.norm();
    if (raw_norm < 1e-14) throw convergence_error("degenerate perturbation direction");
    direction /= raw_norm;

    PerturbedModel model;
    model.target = target;
    if (options.truncate) {
      // keep only input-lattice entries within the locality radius of the
      // target column's site (minimum image); hidden-layer entries drop
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r >= m0 || min_image_distance(r, target, lattice_size) > options.radius)
          direction[r] = cxd(0.0, 0.0);
      }
      const double norm = direction.norm();
      if (norm < 1e-14)
        throw convergence_error("perturbation direction vanished inside the locality radius");
      direction /= norm;
    }

    if (options.hermitize) {
      const VecC h_in = direction.head(m0);
      MatC h0 = h_input;
      h0.col(target) += options.omega * h_in;
      h0.row(target) += (options.omega * h_in).adjoint();
      model.h0 = hermitize(h0);
      model.overall = full_hamiltonian(assemble(params, InputEncoding::onsite_dense(model.h0)));
    } else {
      model.overall = k0;
      model.overall.col(target) += options.omega * direction;
      model.h0 = model.overall.topLeftCorner(m0, m0);
    }
    model.sigma_min_after = smallest_singular_value(model.overall);
    outcome.models.push_back(std::move(model));
  }
  return outcome;
}

}  // namespace fnn
