#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>
#include <utility>

#include "fockwit/fock.hpp"
#include "fockwit/matrix_json.hpp"
#include "fockwit/rng.hpp"

namespace fockwit {

// ---------------------------------------------------------------------------
// JointDistribution

/// Nonnegative normalized table p(k, s): the joint probability a
/// classical-classical state stores over a pair of local basis labels.
class JointDistribution {
 public:
  explicit JointDistribution(Eigen::MatrixXd p) : p_(std::move(p)) {
    if (p_.rows() < 1 || p_.cols() < 1)
      throw std::invalid_argument("JointDistribution: empty table");
    if (p_.minCoeff() < 0.0)
      throw std::invalid_argument("JointDistribution: negative entry");
    if (std::abs(p_.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("JointDistribution: entries must sum to 1");
  }

  static JointDistribution delta(int k, int s, int rows, int cols) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(rows, cols);
    p(k, s) = 1.0;
    return JointDistribution(std::move(p));
  }

  static JointDistribution uniform_diagonal(int n) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) p(i, i) = 1.0 / n;
    return JointDistribution(std::move(p));
  }

  /// Independent product table f (x) g.
  static JointDistribution product(const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
    return JointDistribution(f * g.transpose());
  }

  const Eigen::MatrixXd& p() const { return p_; }
  int rows() const { return static_cast<int>(p_.rows()); }
  int cols() const { return static_cast<int>(p_.cols()); }

  static JointDistribution from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("p"))
      throw std::invalid_argument("JointDistribution: expected {\"p\": [[...]]}");
    const auto& rows = j.at("p");
    if (!rows.is_array() || rows.empty())
      throw std::invalid_argument("JointDistribution: p must be a nonempty 2d array");
    const std::size_t cols = rows[0].size();
    Eigen::MatrixXd p(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].is_array() || rows[i].size() != cols)
        throw std::invalid_argument("JointDistribution: ragged rows");
      for (std::size_t k = 0; k < cols; ++k)
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            rows[i][k].get<double>();
    }
    return JointDistribution(std::move(p));
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < p_.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index k = 0; k < p_.cols(); ++k) row.push_back(p_(i, k));
      rows.push_back(std::move(row));
    }
    return {{"p", std::move(rows)}};
  }

 private:
  Eigen::MatrixXd p_;
};

// ---------------------------------------------------------------------------
// LocalBasis

/// Orthonormal single-mode basis; columns are the basis kets.
class LocalBasis {
 public:
  explicit LocalBasis(Matrix u) : u_(std::move(u)) {
    if (u_.rows() != u_.cols() || u_.rows() < 2)
      throw std::invalid_argument("LocalBasis: need a square matrix, dim >= 2");
    const Matrix gram = u_.adjoint() * u_;
    if ((gram - Matrix::Identity(u_.rows(), u_.cols())).cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("LocalBasis: columns are not orthonormal");
  }

  static LocalBasis fock(int d) { return LocalBasis(Matrix::Identity(d, d)); }

  /// Haar-random unitary via QR of a complex Ginibre matrix.
  static LocalBasis random(int d, Rng& rng) {
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g(i, j) = Complex(rng.normal(), rng.normal());
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j) {
      const Complex rjj = r(j, j);
      const double mag = std::abs(rjj);
      if (mag > 0) q.col(j) *= rjj / mag;
    }
    return LocalBasis(std::move(q));
  }

  const Matrix& u() const { return u_; }
  int dim() const { return static_cast<int>(u_.rows()); }
  Vector ket(int k) const { return u_.col(k); }

  /// Shared matrix schema (see matrix_json.hpp).
  static LocalBasis from_json(const nlohmann::json& j) {
    return LocalBasis(matrix_from_json(j));
  }
  nlohmann::json to_json() const { return matrix_to_json(u_); }

 private:
  Matrix u_;
};

// ---------------------------------------------------------------------------
// Constructions

/// rho = sum_{ks} p(k,s) |theta_k><theta_k| (x) |eta_s><eta_s|.
/// The table may cover only the leading labels of larger bases.
inline DensityMatrix cc_state(const JointDistribution& f, const LocalBasis& basis_a,
                              const LocalBasis& basis_b) {
  const int da = basis_a.dim(), db = basis_b.dim();
  if (f.rows() > da || f.cols() > db)
    throw std::invalid_argument("cc_state: table larger than the bases");
  Matrix rho = Matrix::Zero(da * db, da * db);
  for (int k = 0; k < f.rows(); ++k) {
    // collapse the row: M_k = sum_s p(k,s) |eta_s><eta_s|
    Matrix mk = Matrix::Zero(db, db);
    bool any = false;
    for (int s = 0; s < f.cols(); ++s) {
      const double w = f.p()(k, s);
      if (w == 0.0) continue;
      const Vector eta = basis_b.ket(s);
      mk += w * (eta * eta.adjoint());
      any = true;
    }
    if (!any) continue;
    const Vector theta = basis_a.ket(k);
    rho += kron(Matrix(theta * theta.adjoint()), mk);
  }
  return DensityMatrix(std::move(rho), ModeDims::two(da, db), 0.0);
}

/// Number-correlated family sum_n p_n |n><n| (x) |n><n|: classical-classical
/// by construction, yet with exactly zero photon-number-difference variance.
inline DensityMatrix number_correlated(const Eigen::VectorXd& p, const ModeDims& dims) {
  if (!dims.two_mode())
    throw std::invalid_argument("number_correlated: dims must be two-mode");
  const int da = dims.dim(Mode::a), db = dims.dim(Mode::b);
  if (p.size() < 1 || p.size() > std::min(da, db))
    throw std::invalid_argument("number_correlated: support exceeds the cutoffs");
  if (p.minCoeff() < 0.0 || std::abs(p.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("number_correlated: invalid distribution");
  Matrix rho = Matrix::Zero(da * db, da * db);
  for (Eigen::Index n = 0; n < p.size(); ++n) {
    const Eigen::Index idx = n * db + n;
    rho(idx, idx) = p(n);
  }
  return DensityMatrix(std::move(rho), dims, 0.0);
}

/// Truncated geometric weights p_n ~ ratio^n over n < levels, renormalized.
inline Eigen::VectorXd geometric_distribution(double ratio, int levels) {
  if (!(ratio >= 0.0) || ratio >= 1.0)
    throw std::invalid_argument("geometric_distribution: ratio must be in [0, 1)");
  if (levels < 1) throw std::invalid_argument("geometric_distribution: need levels >= 1");
  Eigen::VectorXd p(levels);
  double t = 1.0;
  for (int n = 0; n < levels; ++n) {
    p(n) = t;
    t *= ratio;
  }
  return p / p.sum();
}

// ---------------------------------------------------------------------------
// Structural verification

struct CcCheck {
  bool is_cc = false;
  double residual = 0.0;  // Frobenius norm of the off-diagonal mass
};

/// Rotates rho into the candidate product basis and measures how far it is
/// from diagonal there. Verifies a GIVEN basis pair only; no search.
inline CcCheck is_cc_in_bases(const DensityMatrix& rho, const LocalBasis& basis_a,
                              const LocalBasis& basis_b, double tol = 1e-10) {
  if (!rho.dims().two_mode())
    throw std::invalid_argument("is_cc_in_bases: state must be two-mode");
  if (basis_a.dim() != rho.dims().dim(Mode::a) ||
      basis_b.dim() != rho.dims().dim(Mode::b))
    throw std::invalid_argument("is_cc_in_bases: basis dims do not match the state");
  const Matrix w = kron(basis_a.u(), basis_b.u());
  Matrix rotated = w.adjoint() * rho.mat() * w;
  rotated.diagonal().setZero();
  const double residual = rotated.norm();
  return {residual <= tol, residual};
}

}  // namespace fockwit
