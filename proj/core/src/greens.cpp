#include "fnn/greens.hpp"

#include <Eigen/LU>
#include <cmath>
#include <string>

namespace fnn {

// ---------------------------------------------------------------------------
// EvaluationPoint

EvaluationPoint EvaluationPoint::retarded(double energy, double broadening) {
  EvaluationPoint p;
  p.kind = Kind::retarded;
  p.energy = energy;
  p.broadening = broadening;
  p.validate();
  return p;
}

EvaluationPoint EvaluationPoint::matsubara(double temperature, int n) {
  EvaluationPoint p;
  p.kind = Kind::matsubara;
  p.temperature = temperature;
  p.n_index = n;
  p.validate();
  return p;
}

cxd EvaluationPoint::z() const {
  return kind == Kind::retarded ? cxd(energy, broadening) : cxd(0.0, frequency());
}

void EvaluationPoint::validate() const {
  if (kind == Kind::retarded) {
    if (!(broadening > 0.0)) throw shape_error("retarded point needs broadening > 0");
  } else {
    if (!(temperature > 0.0)) throw shape_error("matsubara point needs temperature > 0");
  }
}

// ---------------------------------------------------------------------------
// RealBlock

RealBlock RealBlock::from_complex(const MatC& a) {
  RealBlock b;
  b.is_diag = false;
  const Eigen::Index m = a.rows(), mp = a.cols();
  b.dense.resize(2 * m, 2 * mp);
  b.dense.topLeftCorner(m, mp) = a.real();
  b.dense.topRightCorner(m, mp) = a.imag();
  b.dense.bottomLeftCorner(m, mp) = -a.imag();
  b.dense.bottomRightCorner(m, mp) = a.real();
  return b;
}

RealBlock RealBlock::from_diag(const VecC& d) {
  RealBlock b;
  b.is_diag = true;
  b.dre = d.real();
  b.dim = d.imag();
  return b;
}

MatR RealBlock::to_dense() const {
  if (!is_diag) return dense;
  const Eigen::Index m = dre.size();
  MatR out = MatR::Zero(2 * m, 2 * m);
  out.topLeftCorner(m, m).diagonal() = dre;
  out.topRightCorner(m, m).diagonal() = dim;
  out.bottomLeftCorner(m, m).diagonal() = -dim;
  out.bottomRightCorner(m, m).diagonal() = dre;
  return out;
}

MatC RealBlock::to_complex() const {
  if (is_diag) {
    const Eigen::Index m = dre.size();
    MatC out = MatC::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) out(i, i) = cxd(dre[i], dim[i]);
    return out;
  }
  const Eigen::Index m = dense.rows() / 2, mp = dense.cols() / 2;
  MatC out(m, mp);
  out.real() = dense.topLeftCorner(m, mp);
  out.imag() = dense.topRightCorner(m, mp);
  return out;
}

MatR RealBlock::mul(const MatR& b) const {
  if (!is_diag) return dense * b;
  const Eigen::Index m = dre.size();
  if (b.rows() != 2 * m) throw shape_error("RealBlock::mul row mismatch");
  MatR out(2 * m, b.cols());
  out.topRows(m) = dre.asDiagonal() * b.topRows(m) + dim.asDiagonal() * b.bottomRows(m);
  out.bottomRows(m) = dre.asDiagonal() * b.bottomRows(m) - dim.asDiagonal() * b.topRows(m);
  return out;
}

MatR RealBlock::tmul(const MatR& b) const {
  if (!is_diag) return dense.transpose() * b;
  const Eigen::Index m = dre.size();
  if (b.rows() != 2 * m) throw shape_error("RealBlock::tmul row mismatch");
  MatR out(2 * m, b.cols());
  out.topRows(m) = dre.asDiagonal() * b.topRows(m) - dim.asDiagonal() * b.bottomRows(m);
  out.bottomRows(m) = dre.asDiagonal() * b.bottomRows(m) + dim.asDiagonal() * b.topRows(m);
  return out;
}

// ---------------------------------------------------------------------------
// LayeredSystem

Eigen::Index LayeredSystem::total_sites() const {
  Eigen::Index n = 0;
  for (auto m : layer_sizes) n += m;
  return n;
}

Eigen::Index LayeredSystem::corner_rows() const {
  return has_surface ? surface_g00.size() : layer_sizes.at(0);
}

MatC LayeredSystem::intra_block(Eigen::Index l) const {
  if (l == 0 && layer0_diagonal) {
    MatC h = MatC::Zero(intra0_diag.size(), intra0_diag.size());
    h.diagonal() = intra0_diag;
    return h;
  }
  return intra.at(static_cast<std::size_t>(l));
}

VecC LayeredSystem::self_energy_at(int n) const {
  if (onsite_self_energy.empty()) return VecC();
  const std::size_t idx = static_cast<std::size_t>(n >= 0 ? n : -n - 1);
  if (idx >= onsite_self_energy.size())
    throw shape_error("matsubara index outside the stored self-energy table");
  return n >= 0 ? onsite_self_energy[idx] : onsite_self_energy[idx].conjugate();
}

void LayeredSystem::validate() const {
  const auto layers = static_cast<Eigen::Index>(layer_sizes.size());
  if (layers == 0) throw shape_error("layered system needs at least one layer");
  for (auto m : layer_sizes)
    if (m <= 0) throw shape_error("layer sizes must be positive");
  if (static_cast<Eigen::Index>(intra.size()) != layers)
    throw shape_error("intra block count must equal the layer count");
  if (static_cast<Eigen::Index>(inter.size()) != layers - 1)
    throw shape_error("inter block count must be layer count - 1");

  for (Eigen::Index l = 0; l < layers; ++l) {
    if (l == 0 && layer0_diagonal) {
      if (intra0_diag.size() != layer_sizes[0])
        throw shape_error("diagonal layer-0 block has the wrong size");
      if (intra0_diag.size() > 0 && intra0_diag.imag().cwiseAbs().maxCoeff() > 1e-12)
        throw shape_error("diagonal layer-0 block must be real (Hermitian)");
      if (intra[0].size() != 0) throw shape_error("dense intra[0] set alongside the diagonal form");
      continue;
    }
    const MatC& h = intra[static_cast<std::size_t>(l)];
    if (h.rows() != layer_sizes[static_cast<std::size_t>(l)] || h.rows() != h.cols())
      throw shape_error("intra block " + std::to_string(l) + " has the wrong shape");
    if (!is_hermitian(h, 1e-12))
      throw shape_error("intra block " + std::to_string(l) + " is not Hermitian");
  }
  for (Eigen::Index l = 0; l + 1 < layers; ++l) {
    const MatC& t = inter[static_cast<std::size_t>(l)];
    if (t.rows() != layer_sizes[static_cast<std::size_t>(l)] ||
        t.cols() != layer_sizes[static_cast<std::size_t>(l + 1)])
      throw shape_error("inter block " + std::to_string(l) + " has the wrong shape");
  }
  if (has_surface) {
    if (surface_g00.size() == 0) throw shape_error("surface attached without Ĝ00 values");
    if (surface_coupling.rows() != surface_g00.size() || surface_coupling.cols() != layer_sizes[0])
      throw shape_error("surface coupling has the wrong shape");
    if (!onsite_self_energy.empty())
      throw shape_error("self-energies and a surface cannot be combined");
  }
  for (const VecC& s : onsite_self_energy)
    if (s.size() != layer_sizes[0])
      throw shape_error("self-energy entries must match the layer-0 size");
}

MatC full_hamiltonian(const LayeredSystem& system) {
  system.validate();
  const Eigen::Index n = system.total_sites();
  MatC h = MatC::Zero(n, n);
  Eigen::Index off = 0;
  for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(system.layer_sizes.size()); ++l) {
    const Eigen::Index m = system.layer_sizes[static_cast<std::size_t>(l)];
    h.block(off, off, m, m) = system.intra_block(l);
    if (l + 1 < static_cast<Eigen::Index>(system.layer_sizes.size())) {
      const MatC& t = system.inter[static_cast<std::size_t>(l)];
      h.block(off, off + m, m, t.cols()) = t;
      h.block(off + m, off, t.cols(), m) = t.adjoint();
    }
    off += m;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Forward recursion

namespace {

MatC invert_checked(const MatC& a, const char* what) {
  Eigen::FullPivLU<MatC> lu(a);
  if (!lu.isInvertible()) throw singular_matrix_error(std::string(what) + ": singular block");
  return lu.inverse();
}

}  // namespace

MatC RecursionCache::diag_block_at(Eigen::Index n) const {
  const MatC& g = diag_blocks.at(static_cast<std::size_t>(n));
  if (g.size() != 0) return g;
  return O.at(static_cast<std::size_t>(n)).to_complex();
}

MatC RecursionCache::corner_block_at(Eigen::Index n) const {
  if (!has_corner) throw cache_error("corner blocks were not retained by this forward pass");
  const MatC& g = corner_blocks.at(static_cast<std::size_t>(n));
  if (g.size() != 0) return g;
  return O.at(static_cast<std::size_t>(n)).to_complex();  // layer 0 of a plain system
}

RecursionCache recursive_forward(const LayeredSystem& system, const EvaluationPoint& point,
                                 bool want_corner) {
  system.validate();
  point.validate();
  const cxd z = point.z();
  const Eigen::Index layers = static_cast<Eigen::Index>(system.layer_sizes.size());

  VecC sigma;  // layer-0 self-energy at this frequency (matsubara only)
  if (point.kind == EvaluationPoint::Kind::matsubara && !system.onsite_self_energy.empty())
    sigma = system.self_energy_at(point.n_index);

  RecursionCache cache;
  cache.point = point;
  cache.layer_sizes = system.layer_sizes;
  cache.has_surface = system.has_surface;
  cache.has_corner = want_corner;
  cache.diag_blocks.resize(static_cast<std::size_t>(layers));
  cache.O.resize(static_cast<std::size_t>(layers));
  cache.T.resize(static_cast<std::size_t>(layers - 1));
  for (Eigen::Index l = 0; l + 1 < layers; ++l)
    cache.T[static_cast<std::size_t>(l)] =
        RealBlock::from_complex(system.inter[static_cast<std::size_t>(l)]).dense;
  if (want_corner) {
    cache.corner_blocks.resize(static_cast<std::size_t>(layers));
    cache.Y.resize(static_cast<std::size_t>(layers));
  }

  // Layer 0: invert z − Ĥ_0 − (surface term) − Σ. A compressed diagonal
  // layer 0 (no surface) inverts elementwise and never materializes M_0².
  const Eigen::Index m0 = system.layer_sizes[0];
  if (system.layer0_diagonal && !system.has_surface) {
    VecC d = (VecC::Constant(m0, z) - system.intra0_diag).eval();
    if (sigma.size() != 0) d -= sigma;
    for (Eigen::Index i = 0; i < m0; ++i) {
      if (d[i] == cxd(0.0, 0.0)) throw singular_matrix_error("diagonal layer 0: singular entry");
      d[i] = cxd(1.0, 0.0) / d[i];
    }
    cache.O[0] = RealBlock::from_diag(d);
  } else {
    MatC a = -system.intra_block(0);
    a.diagonal().array() += z;
    if (sigma.size() != 0) a.diagonal() -= sigma;
    if (system.has_surface)
      a.noalias() -= system.surface_coupling.adjoint() *
                     (system.surface_g00.asDiagonal() * system.surface_coupling);
    MatC g = invert_checked(a, "layer 0");
    cache.diag_blocks[0] = g;
    cache.O[0] = RealBlock::from_complex(g);
  }

  if (system.has_surface) {
    // The backward sweep needs the surface blocks for every head, not just
    // the corner chain.
    cache.surf_O = RealBlock::from_diag(system.surface_g00);
    cache.surf_T = RealBlock::from_complex(system.surface_coupling).dense;
    if (want_corner) {
      cache.surf_prefix = cache.surf_O.mul(cache.surf_T);
      // Ĝ_{surf,0} = Ĝ00 T̂_s Ĝ^(0)_{00}  (O[0] is dense whenever a surface is attached)
      cache.Y[0].is_diag = false;
      cache.Y[0].dense = cache.surf_prefix * cache.O[0].dense;
      cache.corner_blocks[0] = cache.Y[0].to_complex();
    }
  } else if (want_corner) {
    cache.Y[0] = cache.O[0];
    cache.corner_blocks[0] = cache.diag_blocks[0];  // empty in the compressed case
  }

  for (Eigen::Index l = 1; l < layers; ++l) {
    const std::size_t li = static_cast<std::size_t>(l);
    const MatC& t_prev = system.inter[li - 1];
    MatC a = -system.intra[li];
    a.diagonal().array() += z;
    // T̂_{l−1}† Ĝ^(l−1)_{l−1,l−1} T̂_{l−1}, scaling rows instead of forming the
    // M² block when layer l−1 is compressed diagonal.
    if (cache.diag_blocks[li - 1].size() != 0) {
      a.noalias() -= t_prev.adjoint() * (cache.diag_blocks[li - 1] * t_prev);
    } else {
      const RealBlock& o = cache.O[li - 1];
      VecC gdiag(o.dre.size());
      for (Eigen::Index i = 0; i < gdiag.size(); ++i) gdiag[i] = cxd(o.dre[i], o.dim[i]);
      a.noalias() -= t_prev.adjoint() * (gdiag.asDiagonal() * t_prev);
    }
    MatC g = invert_checked(a, "recursion layer");
    cache.diag_blocks[li] = g;
    cache.O[li] = RealBlock::from_complex(g);
    if (want_corner) {
      // Ĝ^(l)_{0,l} = Ĝ^(l−1)_{0,l−1} T̂_{l−1} Ĝ^(l)_{l,l}
      cache.Y[li].is_diag = false;
      cache.Y[li].dense = cache.Y[li - 1].mul(cache.T[li - 1]) * cache.O[li].dense;
      cache.corner_blocks[li] = cache.Y[li].to_complex();
    }
  }
  return cache;
}

// ---------------------------------------------------------------------------
// Brute-force oracle

MatC direct_greens_at(const LayeredSystem& system, cxd z, Eigen::Index oracle_cap) {
  system.validate();
  const Eigen::Index n = system.total_sites();
  if (n > oracle_cap)
    throw shape_error("direct_greens: " + std::to_string(n) + " sites exceeds the oracle cap");
  MatC a = -full_hamiltonian(system);
  a.diagonal().array() += z;
  if (system.has_surface)
    a.topLeftCorner(system.layer_sizes[0], system.layer_sizes[0]).noalias() -=
        system.surface_coupling.adjoint() *
        (system.surface_g00.asDiagonal() * system.surface_coupling);
  return invert_checked(a, "direct greens");
}

MatC direct_greens(const LayeredSystem& system, const EvaluationPoint& point,
                   Eigen::Index oracle_cap) {
  point.validate();
  const Eigen::Index n = system.total_sites();
  if (n > oracle_cap)
    throw shape_error("direct_greens: " + std::to_string(n) + " sites exceeds the oracle cap");
  MatC a = -full_hamiltonian(system);
  a.diagonal().array() += point.z();
  if (point.kind == EvaluationPoint::Kind::matsubara && !system.onsite_self_energy.empty()) {
    const VecC sigma = system.self_energy_at(point.n_index);
    a.topLeftCorner(system.layer_sizes[0], system.layer_sizes[0]).diagonal() -= sigma;
  }
  if (system.has_surface)
    a.topLeftCorner(system.layer_sizes[0], system.layer_sizes[0]).noalias() -=
        system.surface_coupling.adjoint() *
        (system.surface_g00.asDiagonal() * system.surface_coupling);
  return invert_checked(a, "direct greens");
}

// ---------------------------------------------------------------------------
// Output heads

VecR ldos_output(const RecursionCache& cache) {
  if (cache.point.kind != EvaluationPoint::Kind::retarded)
    throw shape_error("ldos_output needs a retarded-point cache");
  const MatC g = cache.diag_block_at(static_cast<Eigen::Index>(cache.layer_sizes.size()) - 1);
  return (-1.0 / kPi) * g.diagonal().imag();
}

double cc_output(const RecursionCache& cache) {
  if (cache.point.kind != EvaluationPoint::Kind::retarded)
    throw shape_error("cc_output needs a retarded-point cache");
  if (cache.last_size() != 1)
    throw shape_error("cc_output needs a single-site output layer");
  const MatC g = cache.corner_block_at(static_cast<Eigen::Index>(cache.layer_sizes.size()) - 1);
  return g.col(0).squaredNorm();
}

double matsubara_ldos(const std::vector<cxd>& diag_values) {
  if (diag_values.empty() || diag_values.size() % 2 != 0)
    throw format_error("matsubara_ldos: grid must pair n with -n-1 (even count)");
  const int n0 = static_cast<int>(diag_values.size() / 2);
  cxd acc(0.0, 0.0);
  for (std::size_t k = 0; k < diag_values.size(); ++k) {
    const int n = static_cast<int>(k) - n0;
    const double sign = (n % 2 != 0) ? -1.0 : 1.0;
    acc += sign * diag_values[k];
  }
  const cxd rho = cxd(0.0, 1.0 / kPi) * acc;
  if (std::abs(rho.imag()) > 1e-10)
    throw format_error("matsubara_ldos: input lacks conjugate symmetry (imaginary density)");
  return rho.real();
}

double matsubara_truncation_error(const std::function<cxd(int)>& g_of_n, int n0) {
  auto rho_at = [&](int half) {
    std::vector<cxd> vals;
    vals.reserve(static_cast<std::size_t>(2 * half));
    for (int n = -half; n < half; ++n) vals.push_back(g_of_n(n));
    return matsubara_ldos(vals);
  };
  return std::abs(rho_at(n0) - rho_at(2 * n0));
}

}  // namespace fnn
