#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fockwit/fock.hpp"
#include "fockwit/phase_space.hpp"

namespace fockwit {

// ---------------------------------------------------------------------------
// Povm

/// Finite single-mode POVM: positive elements summing to the identity.
class Povm {
 public:
  explicit Povm(std::vector<Operator> elements) : elements_(std::move(elements)) {
    if (elements_.empty()) throw std::invalid_argument("Povm: no elements");
    const ModeDims dims = elements_.front().dims();
    if (!dims.single_mode()) throw std::invalid_argument("Povm: elements must be single-mode");
    Matrix sum = Matrix::Zero(dims.total(), dims.total());
    for (const Operator& e : elements_) {
      detail::require_same_dims(e.dims(), dims, "Povm");
      if (detail::hermiticity_residual(e.mat()) > 1e-10)
        throw std::invalid_argument("Povm: element not Hermitian");
      Eigen::SelfAdjointEigenSolver<Matrix> es(
          Matrix(0.5 * (e.mat() + e.mat().adjoint())), Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument("Povm: element not positive semidefinite");
      sum += e.mat();
    }
    if ((sum - Matrix::Identity(dims.total(), dims.total())).cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument("Povm: elements do not sum to the identity");
  }

  /// {|0><0|, I - |0><0|}: vacuum click vs everything else.
  static Povm vacuum_split(int d) {
    const Vector v = vacuum_ket(d).amps();
    Matrix p0 = v * v.adjoint();
    std::vector<Operator> els;
    els.emplace_back(p0, ModeDims::single(d), true);
    els.emplace_back(Matrix::Identity(d, d) - p0, ModeDims::single(d), true);
    return Povm(std::move(els));
  }

  static Povm from_json(const nlohmann::json& elements, const ModeDims& dims);

  const std::vector<Operator>& elements() const { return elements_; }
  std::size_t size() const { return elements_.size(); }
  const ModeDims& dims() const { return elements_.front().dims(); }

 private:
  std::vector<Operator> elements_;
};

// ---------------------------------------------------------------------------
// WitnessReport

enum class Verdict { classical_consistent, nonclassical, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::classical_consistent: return "classical-consistent";
    case Verdict::nonclassical: return "nonclassical";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct WitnessReport {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::map<std::string, double> diagnostics;

  nlohmann::json to_json() const {
    return {{"name", name},
            {"value", value},
            {"threshold", threshold},
            {"verdict", to_string(verdict)},
            {"diagnostics", diagnostics}};
  }
};

/// Exact constructions keep the tight default band; Monte-Carlo inputs widen
/// it by three reported standard errors.
struct WitnessTolerances {
  double base_tol = 1e-10;
  double mc_standard_error = 0.0;
  double band() const { return base_tol + 3.0 * mc_standard_error; }
};

// ---------------------------------------------------------------------------
// Variance witness
//
// Any state with a positive well-behaved P-function obeys
//   Var(n_a - n_b) >= <n_a + n_b>,
// with equality exactly when P has no dispersion in |alpha|^2 - |beta|^2.
// A negative gap therefore certifies a state outside that family.

inline WitnessReport variance_witness(const DensityMatrix& rho,
                                      const WitnessTolerances& tol = {}) {
  if (!rho.dims().two_mode())
    throw std::invalid_argument("variance_witness: state must be two-mode");
  const double var = variance(rho, number_difference(rho.dims()));
  const double mean_total = expectation(rho, total_number(rho.dims())).real();
  const double value = var - mean_total;
  const double band = tol.band();

  WitnessReport report;
  report.name = "variance_witness";
  report.value = value;
  report.threshold = 0.0;
  if (value < -band)
    report.verdict = Verdict::nonclassical;
  else if (tol.mc_standard_error > 0.0 && value <= band)
    report.verdict = Verdict::inconclusive;
  else
    report.verdict = Verdict::classical_consistent;
  report.diagnostics = {{"variance", var},
                        {"mean_total_number", mean_total},
                        {"trace_deficit", rho.trace_deficit()},
                        {"mc_standard_error", tol.mc_standard_error},
                        {"band", band}};
  return report;
}

/// Delta-method standard error of the variance-witness value when the state
/// is a Monte-Carlo average of coherent projectors over these samples.
inline double variance_witness_mc_se(std::span<const PhasePoint> samples) {
  const auto n = static_cast<double>(samples.size());
  if (samples.size() < 2) return 0.0;
  // per-sample coherent moments: x = <n_a - n_b>, y = <(n_a - n_b)^2>,
  // t = <n_a + n_b>; the witness estimate is mean(y) - mean(x)^2 - mean(t)
  double mx = 0.0;
  for (const PhasePoint& pt : samples) mx += std::norm(pt.alpha) - std::norm(pt.beta);
  mx /= n;
  double ss = 0.0, sm = 0.0;
  for (const PhasePoint& pt : samples) {
    const double na = std::norm(pt.alpha), nb = std::norm(pt.beta);
    const double x = na - nb;
    const double y = (na + nb) + x * x;
    const double t = na + nb;
    const double z = y - t - 2.0 * mx * x;  // linearized influence
    sm += z;
    ss += z * z;
  }
  sm /= n;
  const double var_z = std::max(0.0, ss / n - sm * sm);
  return std::sqrt(var_z / n);
}

/// Delta-method standard error of Var(n_a - n_b) itself (no mean-occupation
/// subtraction) for a Monte-Carlo average of coherent projectors.
inline double variance_od_mc_se(std::span<const PhasePoint> samples) {
  const auto n = static_cast<double>(samples.size());
  if (samples.size() < 2) return 0.0;
  double mx = 0.0;
  for (const PhasePoint& pt : samples) mx += std::norm(pt.alpha) - std::norm(pt.beta);
  mx /= n;
  double sm = 0.0, ss = 0.0;
  for (const PhasePoint& pt : samples) {
    const double na = std::norm(pt.alpha), nb = std::norm(pt.beta);
    const double x = na - nb;
    const double y = (na + nb) + x * x;
    const double z = y - 2.0 * mx * x;
    sm += z;
    ss += z * z;
  }
  sm /= n;
  const double var_z = std::max(0.0, ss / n - sm * sm);
  return std::sqrt(var_z / n);
}

/// Delta-method standard error of Mandel Q for a Monte-Carlo average of
/// coherent projectors, for the marginal on the given mode.
inline double mandel_q_mc_se(std::span<const PhasePoint> samples, Mode mode) {
  const auto n = static_cast<double>(samples.size());
  if (samples.size() < 2) return 0.0;
  // per-sample coherent number moments m1 = |z|^2, m2 = |z|^4 + |z|^2;
  // Q = M2/M1 - M1 - 1, linearized around the sample means
  double mm1 = 0.0, mm2 = 0.0;
  for (const PhasePoint& pt : samples) {
    const double a = std::norm(mode == Mode::a ? pt.alpha : pt.beta);
    mm1 += a;
    mm2 += a * a + a;
  }
  mm1 /= n;
  mm2 /= n;
  if (mm1 < 1e-12) return 0.0;
  double sm = 0.0, ss = 0.0;
  for (const PhasePoint& pt : samples) {
    const double a = std::norm(mode == Mode::a ? pt.alpha : pt.beta);
    const double m1 = a, m2 = a * a + a;
    const double z = m2 / mm1 - m1 * (mm2 / (mm1 * mm1) + 1.0);
    sm += z;
    ss += z * z;
  }
  sm /= n;
  const double var_z = std::max(0.0, ss / n - sm * sm);
  return std::sqrt(var_z / n);
}

// ---------------------------------------------------------------------------
// Conditioning

namespace detail {

/// Unnormalized conditioned state of mode a: Tr_B[rho (I (x) element)].
inline Matrix conditioned_on_b(const DensityMatrix& rho, const Matrix& element) {
  const int da = rho.dims().dim(Mode::a), db = rho.dims().dim(Mode::b);
  if (element.rows() != db || element.cols() != db)
    throw std::invalid_argument("conditioning: element dims do not match mode b");
  return contract_mode_b(rho.mat(), da, db, element);
}

}  // namespace detail

/// Normalized state of mode a after measuring `element` on mode b, plus the
/// outcome probability.
inline std::pair<DensityMatrix, double> conditional_state(const DensityMatrix& rho,
                                                          const Operator& element) {
  if (!rho.dims().two_mode())
    throw std::invalid_argument("conditional_state: state must be two-mode");
  if (!element.dims().single_mode())
    throw std::invalid_argument("conditional_state: element must be single-mode");
  Eigen::SelfAdjointEigenSolver<Matrix> es(
      Matrix(0.5 * (element.mat() + element.mat().adjoint())), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("conditional_state: element not positive semidefinite");
  const Matrix cond = detail::conditioned_on_b(rho, element.mat());
  const double p = cond.trace().real();
  if (p < 1e-14)
    throw std::domain_error("conditional_state: conditioning impossible (probability ~ 0)");
  Matrix normalized = (0.5 / p) * (cond + cond.adjoint());  // exact Hermitian projection
  return {DensityMatrix(std::move(normalized),
                        ModeDims::single(rho.dims().dim(Mode::a)), 0.0),
          p};
}

// ---------------------------------------------------------------------------
// Commutator witness
//
// Conditioned states of one half of a classical-classical state are all
// diagonal in the same local basis, so they commute pairwise.  A nonzero
// commutator between the unconditioned marginal and the vacuum-conditioned
// state certifies the state is not CC and carries discord on mode a.

inline WitnessReport cc_commutator_witness(const DensityMatrix& rho,
                                           const WitnessTolerances& tol = {}) {
  if (!rho.dims().two_mode())
    throw std::invalid_argument("cc_commutator_witness: state must be two-mode");
  const int da = rho.dims().dim(Mode::a), db = rho.dims().dim(Mode::b);
  const Matrix rho_a = detail::ptrace_keep_a(rho.mat(), da, db);
  const Vector v = vacuum_ket(db).amps();
  const Matrix rho_0 = detail::conditioned_on_b(rho, Matrix(v * v.adjoint()));
  const Matrix k = rho_a * rho_0 - rho_0 * rho_a;
  const double value = k.norm();
  const Complex vacuum_element = k(0, 0);  // <0|[rho_A, rho_0]|0>

  WitnessReport report;
  report.name = "cc_commutator_witness";
  report.value = value;
  report.threshold = tol.band();
  if (value > report.threshold)
    report.verdict = Verdict::nonclassical;
  else if (tol.mc_standard_error > 0.0 && value > tol.base_tol)
    report.verdict = Verdict::inconclusive;
  else
    report.verdict = Verdict::classical_consistent;
  report.diagnostics = {{"vacuum_element_re", vacuum_element.real()},
                        {"vacuum_element_im", vacuum_element.imag()},
                        {"conditioning_probability", rho_0.trace().real()},
                        {"trace_deficit", rho.trace_deficit()}};
  return report;
}

/// Pairwise Frobenius norms of commutators between the unnormalized
/// conditioned states for every pair of POVM elements on mode b.
/// Normalization cancels in the zero/nonzero question and avoids dividing
/// by small outcome probabilities.
inline Eigen::MatrixXd commutator_matrix(const DensityMatrix& rho, const Povm& povm) {
  if (!rho.dims().two_mode())
    throw std::invalid_argument("commutator_matrix: state must be two-mode");
  if (povm.dims().dim(Mode::a) != rho.dims().dim(Mode::b))
    throw std::invalid_argument("commutator_matrix: POVM dims do not match mode b");
  std::vector<Matrix> conditioned;
  conditioned.reserve(povm.size());
  for (const Operator& e : povm.elements())
    conditioned.push_back(detail::conditioned_on_b(rho, e.mat()));
  const auto m = static_cast<Eigen::Index>(povm.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const auto ii = static_cast<std::size_t>(i);
      const auto jj = static_cast<std::size_t>(j);
      const double nrm =
          (conditioned[ii] * conditioned[jj] - conditioned[jj] * conditioned[ii]).norm();
      out(i, j) = out(j, i) = nrm;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Nowhere-dense perturbation
//
// Mixing any state with a displaced single excitation drags it out of the
// P-classical set for every mixing weight: the P-function of |1><1| is
// negative and singular, and displacement only moves the singularity.

inline DensityMatrix nowhere_dense_perturbation(const DensityMatrix& rho_bar,
                                                Complex alpha_bar, double eps) {
  if (!rho_bar.dims().single_mode())
    throw std::invalid_argument("nowhere_dense_perturbation: state must be single-mode");
  if (!(eps > 0.0) || !(eps < 1.0))
    throw std::domain_error("nowhere_dense_perturbation: eps must be in (0, 1)");
  const int d = rho_bar.dims().dim(Mode::a);
  const Operator disp = displacement_operator(alpha_bar, d);
  const Vector one = fock_ket(1, d).amps();
  const Matrix excited = disp.mat() * (one * one.adjoint()) * disp.mat().adjoint();
  Matrix mixed = (1.0 - eps) * rho_bar.mat() + eps * excited;
  return DensityMatrix(std::move(mixed), rho_bar.dims(),
                       (1.0 - eps) * rho_bar.trace_deficit());
}

/// Two-mode variant: perturb mode a, leave the mode-b marginal untouched.
/// The perturbed state's mode-a marginal is exactly the single-mode
/// construction applied to Tr_b[rho].
inline DensityMatrix nowhere_dense_perturbation_mode_a(const DensityMatrix& rho,
                                                       Complex alpha_bar, double eps) {
  if (!rho.dims().two_mode())
    throw std::invalid_argument("nowhere_dense_perturbation_mode_a: state must be two-mode");
  if (!(eps > 0.0) || !(eps < 1.0))
    throw std::domain_error("nowhere_dense_perturbation_mode_a: eps must be in (0, 1)");
  const int da = rho.dims().dim(Mode::a), db = rho.dims().dim(Mode::b);
  const DensityMatrix rho_b = partial_trace(rho, Mode::b);
  const Operator disp = displacement_operator(alpha_bar, da);
  const Vector one = fock_ket(1, da).amps();
  const Matrix excited = disp.mat() * (one * one.adjoint()) * disp.mat().adjoint();
  Matrix mixed = (1.0 - eps) * rho.mat() + eps * kron(excited, rho_b.mat());
  const double deficit =
      (1.0 - eps) * rho.trace_deficit() + eps * rho_b.trace_deficit();
  return DensityMatrix(std::move(mixed), ModeDims::two(da, db), deficit);
}

// ---------------------------------------------------------------------------
// Mandel Q

/// Q = (Var(n) - <n>)/<n>.  Nonnegative for every single-mode state with a
/// positive P-function; sub-Poissonian statistics certify non-P-classicality.
/// Undefined on states with no excitation.
inline std::optional<double> mandel_q(const DensityMatrix& rho) {
  if (!rho.dims().single_mode())
    throw std::invalid_argument("mandel_q: state must be single-mode");
  const int d = rho.dims().dim(Mode::a);
  double n1 = 0.0, n2 = 0.0;
  for (int n = 0; n < d; ++n) {
    const double pn = rho.mat()(n, n).real();
    n1 += pn * n;
    n2 += pn * static_cast<double>(n) * n;
  }
  if (n1 < 1e-14) return std::nullopt;
  return (n2 - n1 * n1 - n1) / n1;
}

/// Mandel Q in the frame displaced by -alpha_bar: detects the negative,
/// singular P-mass a perturbation plants at alpha_bar, which plain Q misses
/// whenever the carrier state is noisy enough.
inline std::optional<double> mandel_q_displaced(const DensityMatrix& rho,
                                                Complex alpha_bar) {
  const Operator disp = displacement_operator(alpha_bar, rho.dims().dim(Mode::a));
  return mandel_q(DensityMatrix(disp.mat().adjoint() * rho.mat() * disp.mat(),
                                rho.dims(), rho.trace_deficit()));
}

// ---------------------------------------------------------------------------

inline Povm Povm::from_json(const nlohmann::json& elements, const ModeDims& dims) {
  if (!elements.is_array() || elements.empty())
    throw std::invalid_argument("Povm: expected a nonempty array of matrices");
  std::vector<Operator> ops;
  ops.reserve(elements.size());
  for (const auto& e : elements) {
    Matrix m(dims.total(), dims.total());
    // shared matrix schema; declared Hermitian because POVM elements must be
    if (!e.is_object() || !e.contains("rows"))
      throw std::invalid_argument("Povm: elements must use the matrix schema");
    const auto rows = e.at("rows").get<Eigen::Index>();
    const auto cols = e.at("cols").get<Eigen::Index>();
    const auto& data = e.at("data");
    if (rows != dims.total() || cols != dims.total() ||
        data.size() != static_cast<std::size_t>(rows * cols))
      throw std::invalid_argument("Povm: element shape mismatch");
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j, ++k)
        m(i, j) = Complex(data[k][0].get<double>(), data[k][1].get<double>());
    ops.emplace_back(std::move(m), dims, true);
  }
  return Povm(std::move(ops));
}

}  // namespace fockwit
