#include "fnn/model.hpp"

#include <cmath>
#include <random>
#include <string>

namespace fnn {

// ---------------------------------------------------------------------------
// Spec validation

void ArchitectureSpec::validate() const {
  if (input_size <= 0) throw shape_error("architecture needs a positive input size");
  if (layer_sizes.empty()) throw shape_error("architecture needs at least one trainable layer");
  for (auto m : layer_sizes)
    if (m <= 0) throw shape_error("layer sizes must be positive");
  const std::size_t depth = layer_sizes.size();
  if (intra_connectivity.size() != depth)
    throw shape_error("intra connectivity list must match the layer count");
  if (inter_connectivity.size() != depth)
    throw shape_error("inter connectivity list must cover every layer pair");
  if (!layer_geometry.empty() && layer_geometry.size() != depth)
    throw shape_error("layer geometry list must be empty or match the layer count");
  if (input_geometry.valid() && input_geometry.count() != input_size)
    throw shape_error("input geometry does not match the input size");
  for (std::size_t l = 0; l < layer_geometry.size(); ++l)
    if (layer_geometry[l].valid() && layer_geometry[l].count() != layer_sizes[l])
      throw shape_error("layer geometry " + std::to_string(l + 1) + " does not match its size");
}

// ---------------------------------------------------------------------------
// Masks

MaskMat intra_mask(const LayerGeometry& geom, Eigen::Index size, IntraConnectivity conn) {
  if (geom.valid() && geom.count() != size) throw shape_error("intra mask: geometry/size mismatch");
  MaskMat mask = MaskMat::Constant(size, size, conn == IntraConnectivity::full);
  mask.diagonal().setConstant(true);  // chemical potentials are always trainable
  if (conn == IntraConnectivity::none || conn == IntraConnectivity::full) return mask;

  const bool nnn = conn == IntraConnectivity::next_nearest;
  for (Eigen::Index a = 0; a < size; ++a) {
    for (Eigen::Index b = 0; b < size; ++b) {
      bool on;
      if (geom.valid()) {
        const Eigen::Index ax = a % geom.width, ay = a / geom.width;
        const Eigen::Index bx = b % geom.width, by = b / geom.width;
        const Eigen::Index dx = std::abs(ax - bx), dy = std::abs(ay - by);
        on = (dx + dy == 1) || (nnn && dx == 1 && dy == 1);
      } else {
        const Eigen::Index d = std::abs(a - b);
        on = (d == 1) || (nnn && d == 2);
      }
      if (on) mask(a, b) = true;
    }
  }
  return mask;
}

namespace {

// 1D window of upstream partners for a downstream coordinate (0-based):
// tree halves exactly; overlapping windows are 4 wide (prev = 2w+2) or
// 3 wide (prev = 2w+1), clipped at the boundary.
std::pair<Eigen::Index, Eigen::Index> window_1d(Eigen::Index x, Eigen::Index prev,
                                                Eigen::Index next, InterConnectivity conn) {
  if (conn == InterConnectivity::tree) {
    if (prev != 2 * next) throw shape_error("tree coupling needs an exact 2:1 size ratio");
    return {2 * x, 2 * x + 1};
  }
  Eigen::Index lo, hi;
  if (prev == 2 * next + 2) {
    lo = 2 * x;
    hi = 2 * x + 3;
  } else if (prev == 2 * next + 1) {
    lo = 2 * x;
    hi = 2 * x + 2;
  } else {
    throw shape_error("overlapping coupling needs prev = 2w+2 or 2w+1 per direction");
  }
  return {std::max<Eigen::Index>(0, lo), std::min(prev - 1, hi)};
}

}  // namespace

MaskMat inter_mask(const LayerGeometry& prev, Eigen::Index prev_size, const LayerGeometry& next,
                   Eigen::Index next_size, InterConnectivity conn) {
  if (conn == InterConnectivity::full) return MaskMat::Constant(prev_size, next_size, true);
  if (!prev.valid() || !next.valid())
    throw shape_error("tree/overlapping couplings need 2D geometries on both layers");
  if (prev.count() != prev_size || next.count() != next_size)
    throw shape_error("inter mask: geometry/size mismatch");

  MaskMat mask = MaskMat::Constant(prev_size, next_size, false);
  for (Eigen::Index y = 0; y < next.height; ++y) {
    const auto wy = window_1d(y, prev.height, next.height, conn);
    for (Eigen::Index x = 0; x < next.width; ++x) {
      const auto wx = window_1d(x, prev.width, next.width, conn);
      const Eigen::Index col = y * next.width + x;
      for (Eigen::Index py = wy.first; py <= wy.second; ++py)
        for (Eigen::Index px = wx.first; px <= wx.second; ++px)
          mask(py * prev.width + px, col) = true;
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Parameters

void FnnParameters::validate() const {
  spec.validate();
  const std::size_t depth = spec.layer_sizes.size();
  if (intra.size() != depth || inter.size() != depth || intra_masks.size() != depth ||
      inter_masks.size() != depth)
    throw shape_error("parameter block counts must match the architecture depth");
  for (std::size_t k = 0; k < depth; ++k) {
    const Eigen::Index m = spec.layer_sizes[k];
    const Eigen::Index mprev = k == 0 ? spec.input_size : spec.layer_sizes[k - 1];
    if (intra[k].rows() != m || intra[k].cols() != m)
      throw shape_error("intra block " + std::to_string(k + 1) + " has the wrong shape");
    if (!is_hermitian(intra[k], 1e-12))
      throw shape_error("intra block " + std::to_string(k + 1) + " is not Hermitian");
    if (inter[k].rows() != mprev || inter[k].cols() != m)
      throw shape_error("inter block " + std::to_string(k) + " has the wrong shape");
    if (intra_masks[k].rows() != m || intra_masks[k].cols() != m ||
        inter_masks[k].rows() != mprev || inter_masks[k].cols() != m)
      throw shape_error("mask shapes must match their blocks");
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        if (!intra_masks[k](i, j) && intra[k](i, j) != cxd(0.0, 0.0))
          throw shape_error("intra entry outside its mask is nonzero");
    for (Eigen::Index i = 0; i < mprev; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        if (!inter_masks[k](i, j) && inter[k](i, j) != cxd(0.0, 0.0))
          throw shape_error("inter entry outside its mask is nonzero");
  }
  if (cc_scale < 0.0) throw shape_error("cc_scale must be nonnegative");
}

namespace {

LayerGeometry geometry_at(const ArchitectureSpec& spec, std::size_t fnn_layer) {
  if (fnn_layer == 0) return spec.input_geometry;
  if (spec.layer_geometry.empty()) return LayerGeometry{};
  return spec.layer_geometry[fnn_layer - 1];
}

Eigen::Index size_at(const ArchitectureSpec& spec, std::size_t fnn_layer) {
  return fnn_layer == 0 ? spec.input_size : spec.layer_sizes[fnn_layer - 1];
}

VecR column_fanin(const MaskMat& mask) {
  VecR fanin(mask.cols());
  for (Eigen::Index j = 0; j < mask.cols(); ++j) {
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < mask.rows(); ++i) n += mask(i, j) ? 1 : 0;
    fanin[j] = static_cast<double>(std::max<Eigen::Index>(1, n));
  }
  return fanin;
}

}  // namespace

FnnParameters init_parameters(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  FnnParameters p;
  p.spec = spec;
  const std::size_t depth = spec.layer_sizes.size();
  p.intra.resize(depth);
  p.inter.resize(depth);
  p.intra_masks.resize(depth);
  p.inter_masks.resize(depth);

  for (std::size_t k = 0; k < depth; ++k) {
    p.inter_masks[k] = inter_mask(geometry_at(spec, k), size_at(spec, k), geometry_at(spec, k + 1),
                                  size_at(spec, k + 1), spec.inter_connectivity[k]);
    p.intra_masks[k] =
        intra_mask(geometry_at(spec, k + 1), size_at(spec, k + 1), spec.intra_connectivity[k]);
  }

  // Deterministic draw order: inter blocks first (row-major over masked
  // entries), then intra blocks (diagonal first, then the masked upper
  // triangle row-major). Scale: std 1/√fan-in of the receiving (column) site.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < depth; ++k) {
    const MaskMat& mask = p.inter_masks[k];
    const VecR fanin = column_fanin(mask);
    MatC t = MatC::Zero(mask.rows(), mask.cols());
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        if (mask(i, j)) {
          const double s = 1.0 / std::sqrt(2.0 * fanin[j]);
          t(i, j) = cxd(s * gauss(rng), s * gauss(rng));
        }
    p.inter[k] = t;
  }
  for (std::size_t k = 0; k < depth; ++k) {
    const MaskMat& mask = p.intra_masks[k];
    const VecR fanin = column_fanin(mask);
    const Eigen::Index m = mask.rows();
    MatC h = MatC::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) h(i, i) = cxd(gauss(rng) / std::sqrt(fanin[i]), 0.0);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i + 1; j < m; ++j)
        if (mask(i, j)) {
          const double s = 1.0 / std::sqrt(2.0 * fanin[j]);
          h(i, j) = cxd(s * gauss(rng), s * gauss(rng));
          h(j, i) = std::conj(h(i, j));
        }
    p.intra[k] = h;
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------------------
// Input encodings

InputEncoding InputEncoding::onsite_diagonal(const VecR& diag) {
  InputEncoding e;
  e.variant = Variant::onsite;
  e.diagonal = true;
  e.onsite_diag = diag;
  e.validate();
  return e;
}

InputEncoding InputEncoding::onsite_dense(const MatC& h0) {
  InputEncoding e;
  e.variant = Variant::onsite;
  e.dense_h0 = h0;
  e.validate();
  return e;
}

InputEncoding InputEncoding::external(const VecR& x) {
  InputEncoding e;
  e.variant = Variant::external_ldos;
  e.ldos_values = x;
  e.validate();
  return e;
}

InputEncoding InputEncoding::interacting(const MatC& h0, double u) {
  InputEncoding e;
  e.variant = Variant::interacting;
  e.dense_h0 = h0;
  e.interaction_u = u;
  e.validate();
  return e;
}

Eigen::Index InputEncoding::input_size() const {
  switch (variant) {
    case Variant::onsite:
      return diagonal ? onsite_diag.size() : dense_h0.rows();
    case Variant::external_ldos:
      return ldos_values.size();
    case Variant::interacting:
      return dense_h0.rows();
  }
  return 0;
}

void InputEncoding::validate() const {
  switch (variant) {
    case Variant::onsite:
      if (diagonal) {
        if (onsite_diag.size() == 0) throw shape_error("empty diagonal input");
      } else if (!is_hermitian(dense_h0, 1e-12) || dense_h0.rows() == 0) {
        throw shape_error("onsite input must be a nonempty Hermitian matrix");
      }
      break;
    case Variant::external_ldos:
      if (ldos_values.size() == 0) throw shape_error("empty intensity input");
      if (ldos_values.minCoeff() < 0.0)
        throw shape_error("intensity inputs must be nonnegative");
      break;
    case Variant::interacting:
      if (!is_hermitian(dense_h0, 1e-12) || dense_h0.rows() == 0)
        throw shape_error("interacting input must be a nonempty Hermitian matrix");
      break;
  }
}

// ---------------------------------------------------------------------------
// Assembly

LayeredSystem assemble(const FnnParameters& params, const InputEncoding& input,
                       const std::vector<VecC>* self_energy) {
  input.validate();
  if (input.input_size() != params.spec.input_size)
    throw shape_error("input size does not match the architecture");
  if (self_energy && input.variant != InputEncoding::Variant::interacting)
    throw shape_error("self-energies require the interacting encoding");

  LayeredSystem sys;
  if (input.variant == InputEncoding::Variant::external_ldos) {
    sys.layer_sizes = params.spec.layer_sizes;
    sys.intra = params.intra;
    sys.inter.assign(params.inter.begin() + 1, params.inter.end());
    sys.has_surface = true;
    sys.surface_g00 = (cxd(0.0, -kPi) * input.ldos_values.cast<cxd>()).eval();
    sys.surface_coupling = params.inter[0];
    return sys;
  }

  sys.layer_sizes.reserve(params.spec.layer_sizes.size() + 1);
  sys.layer_sizes.push_back(params.spec.input_size);
  for (auto m : params.spec.layer_sizes) sys.layer_sizes.push_back(m);
  sys.intra.resize(params.intra.size() + 1);
  if (input.variant == InputEncoding::Variant::onsite && input.diagonal) {
    sys.layer0_diagonal = true;
    sys.intra0_diag = input.onsite_diag.cast<cxd>();
  } else {
    sys.intra[0] = input.dense_h0;
  }
  for (std::size_t k = 0; k < params.intra.size(); ++k) sys.intra[k + 1] = params.intra[k];
  sys.inter = params.inter;
  if (self_energy) sys.onsite_self_energy = *self_energy;
  return sys;
}

}  // namespace fnn
