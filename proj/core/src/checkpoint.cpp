#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fnn/model.hpp"

namespace fnn {

namespace {

constexpr char kMagic[4] = {'F', 'N', 'N', '1'};
constexpr std::uint8_t kVersion = 1;

// Explicit little-endian byte I/O keeps the format host-independent.
void put_bytes(std::ostream& os, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::ostream& os, double v) { put_bytes(os, std::bit_cast<std::uint64_t>(v), 8); }

std::uint64_t get_bytes(std::istream& is, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) {
    const int c = is.get();
    if (c == EOF) throw format_error("checkpoint: unexpected end of file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}
double get_f64(std::istream& is) { return std::bit_cast<double>(get_bytes(is, 8)); }

void put_matrix(std::ostream& os, const MatC& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      put_f64(os, m(i, j).real());
      put_f64(os, m(i, j).imag());
    }
}

MatC get_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  MatC m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double re = get_f64(is);
      const double im = get_f64(is);
      m(i, j) = cxd(re, im);
    }
  return m;
}

void put_mask(std::ostream& os, const MaskMat& m) {
  std::uint8_t byte = 0;
  int used = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j)) byte |= static_cast<std::uint8_t>(1u << used);
      if (++used == 8) {
        os.put(static_cast<char>(byte));
        byte = 0;
        used = 0;
      }
    }
  if (used > 0) os.put(static_cast<char>(byte));
}

MaskMat get_mask(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  MaskMat m(rows, cols);
  std::uint8_t byte = 0;
  int used = 8;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (used == 8) {
        byte = static_cast<std::uint8_t>(get_bytes(is, 1));
        used = 0;
      }
      m(i, j) = (byte >> used) & 1u;
      ++used;
    }
  return m;
}

}  // namespace

void save_checkpoint(const FnnParameters& params, const std::string& path) {
  params.validate();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw format_error("checkpoint: cannot open " + tmp + " for writing");
    os.write(kMagic, 4);
    os.put(static_cast<char>(kVersion));
    put_bytes(os, params.spec.layer_sizes.size(), 4);
    put_bytes(os, static_cast<std::uint64_t>(params.spec.input_size), 8);
    for (auto m : params.spec.layer_sizes) put_bytes(os, static_cast<std::uint64_t>(m), 8);
    put_f64(os, params.cc_scale);
    for (const auto& m : params.intra) put_matrix(os, m);
    for (const auto& m : params.inter) put_matrix(os, m);
    for (const auto& m : params.intra_masks) put_mask(os, m);
    for (const auto& m : params.inter_masks) put_mask(os, m);
    if (!os) throw format_error("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

FnnParameters load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw format_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::string(magic, 4) != std::string(kMagic, 4))
    throw format_error("checkpoint: bad magic");
  const auto version = get_bytes(is, 1);
  if (version != kVersion) throw format_error("checkpoint: unsupported version");

  FnnParameters p;
  const auto depth = static_cast<std::size_t>(get_bytes(is, 4));
  if (depth == 0 || depth > 4096) throw format_error("checkpoint: implausible depth");
  p.spec.input_size = static_cast<Eigen::Index>(get_bytes(is, 8));
  for (std::size_t k = 0; k < depth; ++k)
    p.spec.layer_sizes.push_back(static_cast<Eigen::Index>(get_bytes(is, 8)));
  // Connectivity tags are not serialized; the stored masks stay authoritative.
  p.spec.intra_connectivity.assign(depth, IntraConnectivity::full);
  p.spec.inter_connectivity.assign(depth, InterConnectivity::full);
  p.cc_scale = get_f64(is);

  for (std::size_t k = 0; k < depth; ++k)
    p.intra.push_back(get_matrix(is, p.spec.layer_sizes[k], p.spec.layer_sizes[k]));
  for (std::size_t k = 0; k < depth; ++k) {
    const Eigen::Index prev = k == 0 ? p.spec.input_size : p.spec.layer_sizes[k - 1];
    p.inter.push_back(get_matrix(is, prev, p.spec.layer_sizes[k]));
  }
  for (std::size_t k = 0; k < depth; ++k)
    p.intra_masks.push_back(get_mask(is, p.spec.layer_sizes[k], p.spec.layer_sizes[k]));
  for (std::size_t k = 0; k < depth; ++k) {
    const Eigen::Index prev = k == 0 ? p.spec.input_size : p.spec.layer_sizes[k - 1];
    p.inter_masks.push_back(get_mask(is, prev, p.spec.layer_sizes[k]));
  }
  is.peek();
  if (!is.eof()) throw format_error("checkpoint: trailing bytes");
  p.validate();
  return p;
}

}  // namespace fnn
