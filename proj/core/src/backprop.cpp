#include "fnn/backprop.hpp"

#include <cmath>
#include <string>

namespace fnn {

MatR realify(const MatC& a) { return RealBlock::from_complex(a).dense; }

MatC unrealify(const MatR& r) {
  const Eigen::Index m = r.rows() / 2, mp = r.cols() / 2;
  MatC out(m, mp);
  out.real() = r.topLeftCorner(m, mp);
  out.imag() = r.topRightCorner(m, mp);
  return out;
}

// ---------------------------------------------------------------------------
// GradientSet

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (d_intra.size() != other.d_intra.size() || d_inter.size() != other.d_inter.size())
    throw shape_error("gradient sets have different layouts");
  for (std::size_t k = 0; k < d_intra.size(); ++k) {
    if (d_intra[k].rows() != other.d_intra[k].rows() ||
        d_intra[k].cols() != other.d_intra[k].cols())
      throw shape_error("gradient intra blocks have different shapes");
    d_intra[k] += other.d_intra[k];
  }
  for (std::size_t k = 0; k < d_inter.size(); ++k) {
    if (d_inter[k].rows() != other.d_inter[k].rows() ||
        d_inter[k].cols() != other.d_inter[k].cols())
      throw shape_error("gradient inter blocks have different shapes");
    d_inter[k] += other.d_inter[k];
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  for (auto& m : d_intra) m *= s;
  for (auto& m : d_inter) m *= s;
  return *this;
}

GradientSet GradientSet::zeros_like(const FnnParameters& params) {
  GradientSet g;
  for (const auto& m : params.intra) g.d_intra.push_back(MatC::Zero(m.rows(), m.cols()));
  for (const auto& m : params.inter) g.d_inter.push_back(MatC::Zero(m.rows(), m.cols()));
  return g;
}

void apply_masks(GradientSet& grads, const FnnParameters& params) {
  if (grads.d_intra.size() != params.intra_masks.size() ||
      grads.d_inter.size() != params.inter_masks.size())
    throw shape_error("gradient layout does not match the parameter masks");
  for (std::size_t k = 0; k < grads.d_intra.size(); ++k)
    for (Eigen::Index i = 0; i < grads.d_intra[k].rows(); ++i)
      for (Eigen::Index j = 0; j < grads.d_intra[k].cols(); ++j)
        if (!params.intra_masks[k](i, j)) grads.d_intra[k](i, j) = cxd(0.0, 0.0);
  for (std::size_t k = 0; k < grads.d_inter.size(); ++k)
    for (Eigen::Index i = 0; i < grads.d_inter[k].rows(); ++i)
      for (Eigen::Index j = 0; j < grads.d_inter[k].cols(); ++j)
        if (!params.inter_masks[k](i, j)) grads.d_inter[k](i, j) = cxd(0.0, 0.0);
}

// ---------------------------------------------------------------------------
// Extraction: realified 2M×2M' gradients → complex per-entry gradients.
// Every complex entry occupies four realified slots; summing both copies
// (this is the convention the head seeds are halved for) gives
// ∂L/∂Re t at (a,b)+(M+a,M'+b) and ∂L/∂Im t at (a,M'+b)−(M+a,b).

namespace {

MatC extract_general(const MatR& g) {
  const Eigen::Index m = g.rows() / 2, mp = g.cols() / 2;
  MatC out(m, mp);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < mp; ++b)
      out(a, b) = cxd(g(a, b) + g(m + a, mp + b), g(a, mp + b) - g(m + a, b));
  return out;
}

// Hermitian blocks: the free coordinates are the diagonal (real) and the
// upper triangle; (b,a) mirrors fold in with conjugated weights. The mirror
// entry of the result holds the conjugate so complex SGD steps stay Hermitian.
MatC extract_hermitian(const MatR& g) {
  const Eigen::Index m = g.rows() / 2;
  MatC out = MatC::Zero(m, m);
  for (Eigen::Index a = 0; a < m; ++a) out(a, a) = cxd(g(a, a) + g(m + a, m + a), 0.0);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b) {
      const double re = g(a, b) + g(m + a, m + b) + g(b, a) + g(m + b, m + a);
      const double im = g(a, m + b) - g(m + a, b) - g(b, m + a) + g(m + b, a);
      out(a, b) = cxd(re, im);
      out(b, a) = std::conj(out(a, b));
    }
  return out;
}

// Reverse sweep shared by every head. The seed is ∂L/∂O^(L) (eps_seed) plus,
// for the conductance head, ∂L/∂Y^(L) (lambda_seed). System-layer gradients
// are extracted into parameter space: without a surface, system layer 0 is
// the input (its intra gradient is skipped entirely, which also avoids the
// large input-sized chain product); with one, system layers are the trainable
// layers 1..L and the surface coupling is parameter inter[0].
GradientSet backward_sweep(const RecursionCache& cache, const MatR& eps_seed,
                           const MatR& lambda_seed, bool cc) {
  const Eigen::Index layers = static_cast<Eigen::Index>(cache.layer_sizes.size());
  const bool surface = cache.has_surface;
  if (cc && !cache.has_corner)
    throw cache_error("conductance gradients need corner blocks (want_corner was false)");

  GradientSet out;
  const Eigen::Index n_params = surface ? layers : layers - 1;
  out.d_intra.resize(static_cast<std::size_t>(n_params));
  out.d_inter.resize(static_cast<std::size_t>(n_params));

  auto param_intra = [&](Eigen::Index sys_layer) -> MatC* {
    const Eigen::Index k = surface ? sys_layer : sys_layer - 1;
    return k >= 0 ? &out.d_intra[static_cast<std::size_t>(k)] : nullptr;
  };
  auto param_inter = [&](Eigen::Index sys_pair) -> MatC& {
    // sys_pair −1 denotes the surface coupling
    const Eigen::Index k = surface ? sys_pair + 1 : sys_pair;
    return out.d_inter[static_cast<std::size_t>(k)];
  };

  MatR eps = eps_seed;    // ∂L/∂O^(s), accumulated
  MatR lambda = lambda_seed;  // ∂L/∂Y^(s) (cc only)

  for (Eigen::Index s = layers - 1; s >= 1; --s) {
    const std::size_t si = static_cast<std::size_t>(s);
    const MatR& t_prev = cache.T[si - 1];
    const RealBlock& o = cache.O[si];
    const RealBlock& o_prev = cache.O[si - 1];

    if (cc) {
      // σ^(s) = (Y^(s−1) T^(s−1))ᵀ Λ^(s): the corner line's explicit O-dependence
      eps.noalias() += cache.Y[si - 1].mul(t_prev).transpose() * lambda;
    }
    // Ξ^(s) = O^(s)ᵀ ε O^(s)ᵀ (O dense for s ≥ 1)
    const MatR xi = o.dense.transpose() * eps * o.dense.transpose();
    if (MatC* d = param_intra(s)) *d = extract_hermitian(xi);

    // ∂L/∂T^(s−1) = O^(s−1)ᵀ T Ξ + O^(s−1) T Ξᵀ (+ Y^(s−1)ᵀ Λ O^(s)ᵀ for cc)
    MatR dt = o_prev.tmul(t_prev * xi) + o_prev.mul(t_prev * xi.transpose());
    MatR lambda_ot;  // Λ^(s) O^(s)ᵀ, reused by the Λ recursion
    if (cc) {
      lambda_ot.noalias() = lambda * o.dense.transpose();
      dt.noalias() += cache.Y[si - 1].tmul(lambda_ot);
    }
    param_inter(s - 1) = extract_general(dt);

    const bool need_prev_eps = (s - 1 >= 1) || surface;
    if (need_prev_eps) {
      // chain^(s−1) = T^(s−1) Ξ^(s) T^(s−1)ᵀ
      eps = t_prev * xi * t_prev.transpose();
    } else {
      eps.resize(0, 0);
    }
    if (cc) lambda = lambda_ot * t_prev.transpose();  // Λ^(s−1)
  }

  if (surface) {
    // System layer 0 is the first trainable layer; the fixed surface behaves
    // like one more recursion step with O' = realify(Ĝ00), T' = surf_T.
    // (When layers == 1 the loop never ran and eps still holds the head seed.)
    const RealBlock& o0 = cache.O[0];
    if (cc) eps.noalias() += cache.surf_prefix.transpose() * lambda;  // σ^(0)
    const MatR xi0 = o0.dense.transpose() * eps * o0.dense.transpose();
    *param_intra(0) = extract_hermitian(xi0);
    MatR dt = cache.surf_O.tmul(cache.surf_T * xi0) + cache.surf_O.mul(cache.surf_T * xi0.transpose());
    if (cc) dt.noalias() += cache.surf_O.tmul(lambda * o0.dense.transpose());
    param_inter(-1) = extract_general(dt);
  } else if (layers == 1) {
    throw shape_error("no trainable layers below the head");
  }
  return out;
}

MatR ldos_seed(const RecursionCache& cache, const VecR& loss_grad, double im_coef) {
  const Eigen::Index m = cache.last_size();
  if (loss_grad.size() != m) throw shape_error("loss gradient size must match the output layer");
  // δL = Σ_m g_m·(im_coef)·δIm G_mm, split half-and-half over the two copies
  MatR eps = MatR::Zero(2 * m, 2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    eps(i, m + i) = 0.5 * im_coef * loss_grad[i];
    eps(m + i, i) = -0.5 * im_coef * loss_grad[i];
  }
  return eps;
}

}  // namespace

GradientSet ldos_gradients(const RecursionCache& cache, const VecR& loss_grad) {
  if (cache.point.kind != EvaluationPoint::Kind::retarded)
    throw shape_error("ldos_gradients needs a retarded-point cache");
  return backward_sweep(cache, ldos_seed(cache, loss_grad, -1.0 / kPi), MatR(), false);
}

GradientSet matsubara_ldos_gradients(const RecursionCache& cache, const VecR& loss_grad) {
  if (cache.point.kind != EvaluationPoint::Kind::matsubara)
    throw shape_error("matsubara_ldos_gradients needs a matsubara-point cache");
  if (cache.point.n_index < 0)
    throw shape_error("fold negative frequencies by conjugation: pass n >= 0");
  const double sign = (cache.point.n_index % 2 != 0) ? -1.0 : 1.0;
  // folded grid: ρ_m = Σ_{n≥0} −(2/π)(−1)^n Im G_mm(iω_n)
  return backward_sweep(cache, ldos_seed(cache, loss_grad, -2.0 * sign / kPi), MatR(), false);
}

GradientSet cc_gradients(const RecursionCache& cache, double loss_grad) {
  if (cache.point.kind != EvaluationPoint::Kind::retarded)
    throw shape_error("cc_gradients needs a retarded-point cache");
  if (cache.last_size() != 1) throw shape_error("cc_gradients needs a single-site output layer");
  if (!cache.has_corner)
    throw cache_error("conductance gradients need corner blocks (want_corner was false)");
  // y = ½‖Y^(L)‖²_F in the full-copy convention ⇒ ∂L/∂Y^(L) = g·Y^(L)
  const MatR lambda = loss_grad * cache.Y.back().to_dense();
  const Eigen::Index m = cache.last_size();
  return backward_sweep(cache, MatR::Zero(2 * m, 2 * m), lambda, true);
}

// ---------------------------------------------------------------------------
// Finite differences

GradientSet finite_difference_grad(const FnnParameters& params,
                                   const std::function<double(const FnnParameters&)>& loss,
                                   double h) {
  FnnParameters p = params;
  GradientSet out = GradientSet::zeros_like(params);

  auto central = [&](cxd& slot) {
    const cxd keep = slot;
    slot = keep + h;
    const double up = loss(p);
    slot = keep - h;
    const double dn = loss(p);
    const double dre = (up - dn) / (2.0 * h);
    slot = keep + cxd(0.0, h);
    const double iup = loss(p);
    slot = keep - cxd(0.0, h);
    const double idn = loss(p);
    slot = keep;
    return cxd(dre, (iup - idn) / (2.0 * h));
  };

  for (std::size_t k = 0; k < p.intra.size(); ++k) {
    const Eigen::Index m = p.intra[k].rows();
    for (Eigen::Index a = 0; a < m; ++a) {
      const cxd keep = p.intra[k](a, a);
      p.intra[k](a, a) = keep + h;
      const double up = loss(p);
      p.intra[k](a, a) = keep - h;
      const double dn = loss(p);
      p.intra[k](a, a) = keep;
      out.d_intra[k](a, a) = cxd((up - dn) / (2.0 * h), 0.0);
    }
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = a + 1; b < m; ++b) {
        if (!p.intra_masks[k](a, b)) continue;
        const cxd keep = p.intra[k](a, b);
        auto set_pair = [&](cxd v) {
          p.intra[k](a, b) = v;
          p.intra[k](b, a) = std::conj(v);
        };
        set_pair(keep + h);
        const double up = loss(p);
        set_pair(keep - h);
        const double dn = loss(p);
        set_pair(keep + cxd(0.0, h));
        const double iup = loss(p);
        set_pair(keep - cxd(0.0, h));
        const double idn = loss(p);
        set_pair(keep);
        out.d_intra[k](a, b) = cxd((up - dn) / (2.0 * h), (iup - idn) / (2.0 * h));
        out.d_intra[k](b, a) = std::conj(out.d_intra[k](a, b));
      }
    for (Eigen::Index i = 0; i < p.inter[k].rows(); ++i)
      for (Eigen::Index j = 0; j < p.inter[k].cols(); ++j) {
        if (!p.inter_masks[k](i, j)) continue;
        out.d_inter[k](i, j) = central(p.inter[k](i, j));
      }
  }
  return out;
}

std::vector<double> flatten_free(const GradientSet& grads, const FnnParameters& params) {
  std::vector<double> flat;
  for (std::size_t k = 0; k < grads.d_inter.size(); ++k)
    for (Eigen::Index i = 0; i < grads.d_inter[k].rows(); ++i)
      for (Eigen::Index j = 0; j < grads.d_inter[k].cols(); ++j)
        if (params.inter_masks[k](i, j)) {
          flat.push_back(grads.d_inter[k](i, j).real());
          flat.push_back(grads.d_inter[k](i, j).imag());
        }
  for (std::size_t k = 0; k < grads.d_intra.size(); ++k) {
    const Eigen::Index m = grads.d_intra[k].rows();
    for (Eigen::Index a = 0; a < m; ++a) flat.push_back(grads.d_intra[k](a, a).real());
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = a + 1; b < m; ++b)
        if (params.intra_masks[k](a, b)) {
          flat.push_back(grads.d_intra[k](a, b).real());
          flat.push_back(grads.d_intra[k](a, b).imag());
        }
  }
  return flat;
}

std::vector<double> gradient_layer_profile(const GradientSet& grads, const FnnParameters& params) {
  std::vector<double> profile;
  for (std::size_t k = 0; k < grads.d_inter.size(); ++k) {
    double acc = 0.0;
    int n = 0;
    for (Eigen::Index i = 0; i < grads.d_inter[k].rows(); ++i)
      for (Eigen::Index j = 0; j < grads.d_inter[k].cols(); ++j)
        if (params.inter_masks[k](i, j)) {
          acc += std::abs(grads.d_inter[k](i, j));
          ++n;
        }
    profile.push_back(n > 0 ? acc / n : 0.0);
  }
  return profile;
}

}  // namespace fnn
