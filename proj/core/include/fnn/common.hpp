#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace fnn {

using cxd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using MaskMat = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kPi = 3.14159265358979323846;

// -------- error taxonomy --------------------------------------------------

struct singular_matrix_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct convergence_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct degeneracy_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Asked for data a forward pass was told not to retain.
struct cache_error : std::logic_error {
  using std::logic_error::logic_error;
};

// -------- small helpers ----------------------------------------------------

inline bool is_hermitian(const MatC& a, double tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

// Forces exact Hermiticity: keeps the upper triangle, mirrors it down,
// and drops imaginary parts on the diagonal.
inline MatC hermitize(const MatC& a) {
  MatC h = 0.5 * (a + a.adjoint());
  for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, i) = cxd(h(i, i).real(), 0.0);
  return h;
}

}  // namespace fnn
