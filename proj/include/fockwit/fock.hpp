#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace fockwit {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Mode selector for bipartite operations. Mode a is the left (slow) Kronecker
/// factor, mode b the right one: two-mode index = ia * dim_b + ib.
enum class Mode { a = 0, b = 1 };

// ---------------------------------------------------------------------------
// Warnings
//
// Non-fatal numerical conditions (truncation deficits, cutoff edge effects)
// are reported through a process-wide handler. Default: stderr.

using WarningHandler = void (*)(const std::string&);

namespace detail {
inline void default_warning_handler(const std::string& msg) {
  std::fprintf(stderr, "fockwit: warning: %s\n", msg.c_str());
}
inline std::atomic<WarningHandler>& warning_handler() {
  static std::atomic<WarningHandler> h{&default_warning_handler};
  return h;
}
}  // namespace detail

inline WarningHandler set_warning_handler(WarningHandler h) {
  return detail::warning_handler().exchange(h ? h : &detail::default_warning_handler);
}

inline void warn(const std::string& msg) { detail::warning_handler().load()(msg); }

// ---------------------------------------------------------------------------
// ModeDims

/// Fock truncation levels per mode; one or two modes, every cutoff >= 2.
class ModeDims {
 public:
  explicit ModeDims(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > 2)
      throw std::invalid_argument("ModeDims: need 1 or 2 modes");
    for (int d : dims_)
      if (d < 2) throw std::invalid_argument("ModeDims: every cutoff must be >= 2");
  }
  ModeDims(std::initializer_list<int> dims) : ModeDims(std::vector<int>(dims)) {}

  static ModeDims single(int d) { return ModeDims({d}); }
  static ModeDims two(int da, int db) { return ModeDims({da, db}); }

  int num_modes() const { return static_cast<int>(dims_.size()); }
  bool single_mode() const { return dims_.size() == 1; }
  bool two_mode() const { return dims_.size() == 2; }

  int dim(Mode m) const {
    const auto i = static_cast<std::size_t>(m);
    if (i >= dims_.size()) throw std::invalid_argument("ModeDims: invalid mode index");
    return dims_[i];
  }
  int dim(int mode) const {
    if (mode < 0 || mode >= num_modes())
      throw std::invalid_argument("ModeDims: invalid mode index");
    return dims_[static_cast<std::size_t>(mode)];
  }

  int total() const {
    int t = 1;
    for (int d : dims_) t *= d;
    return t;
  }

  const std::vector<int>& dims() const { return dims_; }

  friend bool operator==(const ModeDims& x, const ModeDims& y) {
    return x.dims_ == y.dims_;
  }

 private:
  std::vector<int> dims_;
};

namespace detail {

inline void require_same_dims(const ModeDims& x, const ModeDims& y, const char* what) {
  if (!(x == y)) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

inline void require_finite(Complex alpha, const char* what) {
  if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag()))
    throw std::invalid_argument(std::string(what) + ": non-finite amplitude");
}

/// Relative max-entry deviation from Hermitian symmetry.
inline double hermiticity_residual(const Matrix& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() / scale;
}

inline bool is_exactly_diagonal(const Matrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != Complex(0.0, 0.0)) return false;
  return true;
}

}  // namespace detail

/// Kronecker product, mode a as the left factor.
inline Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

inline Vector kron(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

// ---------------------------------------------------------------------------
// Ket

/// State vector over a truncated Fock space. Truncated coherent kets are not
/// renormalized, so the norm may fall below 1; it must never exceed it.
class Ket {
 public:
  Ket(Vector amps, ModeDims dims) : amps_(std::move(amps)), dims_(std::move(dims)) {
    if (amps_.size() != dims_.total())
      throw std::invalid_argument("Ket: amplitude length does not match dims");
    if (amps_.norm() > 1.0 + kNormTol)
      throw std::invalid_argument("Ket: norm exceeds 1");
  }

  const Vector& amps() const { return amps_; }
  const ModeDims& dims() const { return dims_; }
  double norm() const { return amps_.norm(); }
  double squared_norm() const { return amps_.squaredNorm(); }

  static constexpr double kNormTol = 1e-8;

 private:
  Vector amps_;
  ModeDims dims_;
};

inline Complex inner(const Ket& x, const Ket& y) {
  detail::require_same_dims(x.dims(), y.dims(), "inner");
  return x.amps().dot(y.amps());  // Eigen's dot conjugates the left argument
}

// ---------------------------------------------------------------------------
// DensityMatrix

/// Hermitian, unit-trace (up to recorded truncation deficit) state carrier.
/// Positivity is validated on demand, never silently enforced.
class DensityMatrix {
 public:
  DensityMatrix(Matrix mat, ModeDims dims, double trace_deficit = 0.0)
      : mat_(std::move(mat)), dims_(std::move(dims)), trace_deficit_(trace_deficit) {
    if (mat_.rows() != dims_.total() || mat_.cols() != dims_.total())
      throw std::invalid_argument("DensityMatrix: matrix shape does not match dims");
    if (detail::hermiticity_residual(mat_) > kHermTol)
      throw std::invalid_argument("DensityMatrix: not Hermitian within tolerance");
    const double tr = mat_.trace().real();
    if (tr < 1.0 - trace_deficit_ - kTraceTol || tr > 1.0 + kTraceTol)
      throw std::invalid_argument("DensityMatrix: trace " + std::to_string(tr) +
                                  " outside [1 - deficit, 1]");
  }

  /// Projector onto a (possibly short) ket; deficit is the missing norm.
  static DensityMatrix from_ket(const Ket& k) {
    const double n2 = k.squared_norm();
    return DensityMatrix(k.amps() * k.amps().adjoint(), k.dims(),
                         std::max(0.0, 1.0 - n2));
  }

  const Matrix& mat() const { return mat_; }
  const ModeDims& dims() const { return dims_; }
  double trace_deficit() const { return trace_deficit_; }
  double trace() const { return mat_.trace().real(); }

  static constexpr double kHermTol = 1e-10;
  static constexpr double kTraceTol = 1e-9;

 private:
  Matrix mat_;
  ModeDims dims_;
  double trace_deficit_;
};

// ---------------------------------------------------------------------------
// Operator

class Operator {
 public:
  Operator(Matrix mat, ModeDims dims, bool hermitian)
      : mat_(std::move(mat)), dims_(std::move(dims)), hermitian_(hermitian) {
    if (mat_.rows() != dims_.total() || mat_.cols() != dims_.total())
      throw std::invalid_argument("Operator: matrix shape does not match dims");
    if (hermitian_ && detail::hermiticity_residual(mat_) > DensityMatrix::kHermTol)
      throw std::invalid_argument("Operator: declared Hermitian but is not");
  }

  const Matrix& mat() const { return mat_; }
  const ModeDims& dims() const { return dims_; }
  bool hermitian() const { return hermitian_; }

  Operator adjoint() const { return Operator(mat_.adjoint(), dims_, hermitian_); }

 private:
  Matrix mat_;
  ModeDims dims_;
  bool hermitian_;
};

// ---------------------------------------------------------------------------
// Single-mode constructions

/// Truncated Glauber coherent state: amps[n] = e^{-|alpha|^2/2} alpha^n/sqrt(n!),
/// not renormalized. The missing Poisson tail shows up as norm < 1.
inline Ket coherent_ket(Complex alpha, int d) {
  detail::require_finite(alpha, "coherent_ket");
  if (d < 2) throw std::invalid_argument("coherent_ket: cutoff must be >= 2");
  Vector amps(d);
  Complex c = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n < d; ++n) {
    amps(n) = c;
    c *= alpha / std::sqrt(static_cast<double>(n + 1));
  }
  return Ket(std::move(amps), ModeDims::single(d));
}

inline Ket fock_ket(int n, int d) {
  if (d < 2) throw std::invalid_argument("fock_ket: cutoff must be >= 2");
  if (n < 0 || n >= d) throw std::invalid_argument("fock_ket: level outside cutoff");
  Vector amps = Vector::Zero(d);
  amps(n) = 1.0;
  return Ket(std::move(amps), ModeDims::single(d));
}

inline Ket vacuum_ket(int d) { return fock_ket(0, d); }

inline Operator annihilation(int d) {
  if (d < 2) throw std::invalid_argument("annihilation: cutoff must be >= 2");
  Matrix m = Matrix::Zero(d, d);
  for (int n = 1; n < d; ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
  return Operator(std::move(m), ModeDims::single(d), false);
}

inline Operator creation(int d) { return annihilation(d).adjoint(); }

inline Operator number_op(int d) {
  if (d < 2) throw std::invalid_argument("number_op: cutoff must be >= 2");
  Matrix m = Matrix::Zero(d, d);
  for (int n = 0; n < d; ++n) m(n, n) = static_cast<double>(n);
  return Operator(std::move(m), ModeDims::single(d), true);
}

inline Operator identity(int d) {
  if (d < 2) throw std::invalid_argument("identity: cutoff must be >= 2");
  return Operator(Matrix::Identity(d, d), ModeDims::single(d), true);
}

inline Operator phase_rotation(double theta, int d) {
  Matrix m = Matrix::Zero(d, d);
  for (int n = 0; n < d; ++n) m(n, n) = std::exp(Complex(0.0, theta * n));
  return Operator(std::move(m), ModeDims::single(d), false);
}

/// Truncated displacement operator D(alpha) = exp(alpha a+ - conj(alpha) a),
/// built by diagonalizing the Hermitian generator, hence exactly unitary.
/// Faithful on the low-Fock subspace; edge rows are truncation artifacts.
inline Operator displacement_operator(Complex alpha, int d) {
  detail::require_finite(alpha, "displacement_operator");
  if (d < 2) throw std::invalid_argument("displacement_operator: cutoff must be >= 2");
  const double aa = std::abs(alpha);
  if (aa * aa + 6.0 * aa > static_cast<double>(d))
    warn("displacement_operator: |alpha| too close to the cutoff (|alpha|^2 + 6|alpha| > d); expect edge effects");
  const Matrix a = annihilation(d).mat();
  // G = alpha a+ - conj(alpha) a is anti-Hermitian; exp(G) = exp(iH), H = -iG.
  Matrix h = Complex(0, -1) * (alpha * a.adjoint() - std::conj(alpha) * a);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Eigen::VectorXd& w = es.eigenvalues();
  Vector phases(d);
  for (int i = 0; i < d; ++i) phases(i) = std::exp(Complex(0.0, w(i)));
  Matrix u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  return Operator(std::move(u), ModeDims::single(d), false);
}

/// Single-mode thermal state with mean occupation nbar; geometric diagonal
/// (1/(1+nbar)) (nbar/(1+nbar))^n, truncated tail recorded as deficit.
inline DensityMatrix thermal_state(double nbar, int d) {
  if (nbar < 0.0) throw std::invalid_argument("thermal_state: nbar must be >= 0");
  if (d < 2) throw std::invalid_argument("thermal_state: cutoff must be >= 2");
  Matrix m = Matrix::Zero(d, d);
  double p = 1.0 / (1.0 + nbar);
  const double r = nbar / (1.0 + nbar);
  double mass = 0.0;
  for (int n = 0; n < d; ++n) {
    m(n, n) = p;
    mass += p;
    p *= r;
  }
  return DensityMatrix(std::move(m), ModeDims::single(d), 1.0 - mass);
}

/// Poisson tail mass P(N >= d) for mean |alpha|^2; drives cutoff selection.
inline double poisson_tail(double lambda, int d) {
  double term = std::exp(-lambda);
  double cdf = 0.0;
  for (int n = 0; n < d; ++n) {
    cdf += term;
    term *= lambda / static_cast<double>(n + 1);
  }
  return std::max(0.0, 1.0 - cdf);
}

/// Smallest cutoff whose Poisson tail for the largest amplitude in play is
/// below tail_tol, plus headroom levels for displacement operators.
inline int suggested_cutoff(double max_abs_alpha, double tail_tol = 1e-8,
                            int headroom = 6) {
  const double lambda = max_abs_alpha * max_abs_alpha;
  int d = 2;
  while (poisson_tail(lambda, d) >= tail_tol) ++d;
  return d + headroom;
}

/// Cutoff for states with geometric-like number tails of mean occupation
/// nbar (thermal states, Gaussian-P marginals): smallest d with
/// (nbar/(1+nbar))^d below tail_tol, plus headroom.
inline int suggested_cutoff_thermal(double nbar, double tail_tol = 1e-7,
                                    int headroom = 4) {
  if (nbar < 0.0) throw std::invalid_argument("suggested_cutoff_thermal: nbar < 0");
  int d = 2;
  if (nbar > 1e-3) {
    const double r = nbar / (1.0 + nbar);
    d = std::max(2, static_cast<int>(std::ceil(std::log(tail_tol) / std::log(r))));
  }
  return std::min(d + headroom, 64);
}

// ---------------------------------------------------------------------------
// Tensor products (both inputs single-mode)

inline Ket tensor(const Ket& x, const Ket& y) {
  if (!x.dims().single_mode() || !y.dims().single_mode())
    throw std::invalid_argument("tensor: both factors must be single-mode");
  return Ket(kron(x.amps(), y.amps()),
             ModeDims::two(x.dims().dim(Mode::a), y.dims().dim(Mode::a)));
}

inline DensityMatrix tensor(const DensityMatrix& x, const DensityMatrix& y) {
  if (!x.dims().single_mode() || !y.dims().single_mode())
    throw std::invalid_argument("tensor: both factors must be single-mode");
  const double deficit = 1.0 - (1.0 - x.trace_deficit()) * (1.0 - y.trace_deficit());
  return DensityMatrix(kron(x.mat(), y.mat()),
                       ModeDims::two(x.dims().dim(Mode::a), y.dims().dim(Mode::a)),
                       deficit);
}

inline Operator tensor(const Operator& x, const Operator& y) {
  if (!x.dims().single_mode() || !y.dims().single_mode())
    throw std::invalid_argument("tensor: both factors must be single-mode");
  return Operator(kron(x.mat(), y.mat()),
                  ModeDims::two(x.dims().dim(Mode::a), y.dims().dim(Mode::a)),
                  x.hermitian() && y.hermitian());
}

/// Photon-number difference n_a - n_b; its variance is bounded from below on
/// any state with a well-behaved positive P-function.
inline Operator number_difference(const ModeDims& dims) {
  if (!dims.two_mode()) throw std::invalid_argument("number_difference: need two modes");
  const int da = dims.dim(Mode::a), db = dims.dim(Mode::b);
  return Operator(kron(number_op(da).mat(), Matrix::Identity(db, db)) -
                      kron(Matrix::Identity(da, da), number_op(db).mat()),
                  dims, true);
}

inline Operator total_number(const ModeDims& dims) {
  if (!dims.two_mode()) throw std::invalid_argument("total_number: need two modes");
  const int da = dims.dim(Mode::a), db = dims.dim(Mode::b);
  return Operator(kron(number_op(da).mat(), Matrix::Identity(db, db)) +
                      kron(Matrix::Identity(da, da), number_op(db).mat()),
                  dims, true);
}

// ---------------------------------------------------------------------------
// Partial trace and conditioning contractions

namespace detail {

/// Tr_B[rho (I (x) m_b)] without forming the Kronecker factor.
inline Matrix contract_mode_b(const Matrix& rho, int da, int db, const Matrix& m_b) {
  Matrix out = Matrix::Zero(da, da);
  for (int a = 0; a < da; ++a)
    for (int ap = 0; ap < da; ++ap) {
      // Tr[block(a, ap) * m_b] with block(b, bp) = rho(a db + b, ap db + bp)
      Complex s = 0.0;
      for (int b = 0; b < db; ++b)
        for (int bp = 0; bp < db; ++bp) s += rho(a * db + b, ap * db + bp) * m_b(bp, b);
      out(a, ap) = s;
    }
  return out;
}

inline Matrix ptrace_keep_a(const Matrix& rho, int da, int db) {
  Matrix out = Matrix::Zero(da, da);
  for (int a = 0; a < da; ++a)
    for (int ap = 0; ap < da; ++ap) {
      Complex s = 0.0;
      for (int b = 0; b < db; ++b) s += rho(a * db + b, ap * db + b);
      out(a, ap) = s;
    }
  return out;
}

inline Matrix ptrace_keep_b(const Matrix& rho, int da, int db) {
  Matrix out = Matrix::Zero(db, db);
  for (int b = 0; b < db; ++b)
    for (int bp = 0; bp < db; ++bp) {
      Complex s = 0.0;
      for (int a = 0; a < da; ++a) s += rho(a * db + b, a * db + bp);
      out(b, bp) = s;
    }
  return out;
}

}  // namespace detail

inline DensityMatrix partial_trace(const DensityMatrix& rho, Mode keep) {
  if (!rho.dims().two_mode())
    throw std::invalid_argument("partial_trace: state must be two-mode");
  if (keep != Mode::a && keep != Mode::b)
    throw std::invalid_argument("partial_trace: invalid mode index");
  const int da = rho.dims().dim(Mode::a), db = rho.dims().dim(Mode::b);
  Matrix red = (keep == Mode::a) ? detail::ptrace_keep_a(rho.mat(), da, db)
                                 : detail::ptrace_keep_b(rho.mat(), da, db);
  return DensityMatrix(std::move(red), ModeDims::single(keep == Mode::a ? da : db),
                       rho.trace_deficit());
}

// ---------------------------------------------------------------------------
// Moments

inline Complex expectation(const DensityMatrix& rho, const Operator& op) {
  detail::require_same_dims(rho.dims(), op.dims(), "expectation");
  // Tr(rho O) = sum_ij rho_ij O_ji
  return (rho.mat().array() * op.mat().transpose().array()).sum();
}

inline double variance(const DensityMatrix& rho, const Operator& op) {
  detail::require_same_dims(rho.dims(), op.dims(), "variance");
  if (!op.hermitian()) throw std::invalid_argument("variance: operator must be Hermitian");
  if (rho.trace_deficit() > 1e-6)
    warn("variance: trace deficit " + std::to_string(rho.trace_deficit()) +
         " exceeds 1e-6; moments may be biased");
  const Matrix& o = op.mat();
  double second;
  if (detail::is_exactly_diagonal(o)) {
    Complex s = 0.0;
    for (Eigen::Index i = 0; i < o.rows(); ++i)
      s += rho.mat()(i, i) * o(i, i) * o(i, i);
    second = s.real();
  } else {
    second = ((rho.mat() * o).array() * o.transpose().array()).sum().real();
  }
  const double first = expectation(rho, op).real();
  return second - first * first;
}

inline Operator commutator(const Operator& x, const Operator& y) {
  detail::require_same_dims(x.dims(), y.dims(), "commutator");
  return Operator(x.mat() * y.mat() - y.mat() * x.mat(), x.dims(), false);
}

inline double frobenius_norm(const Matrix& m) { return m.norm(); }

/// Trace distance (1/2)||x - y||_1 between two Hermitian matrices.
inline double trace_distance(const Matrix& x, const Matrix& y) {
  Matrix diff = x - y;
  diff = Matrix(0.5 * (diff + diff.adjoint()));
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const DensityMatrix& x, const DensityMatrix& y) {
  detail::require_same_dims(x.dims(), y.dims(), "trace_distance");
  return trace_distance(x.mat(), y.mat());
}

// ---------------------------------------------------------------------------
// Application helpers

inline Ket apply(const Operator& op, const Ket& k) {
  detail::require_same_dims(op.dims(), k.dims(), "apply");
  return Ket(op.mat() * k.amps(), k.dims());
}

/// U rho U+ for (approximately) unitary U; trace and deficit are preserved.
inline DensityMatrix sandwich(const Operator& u, const DensityMatrix& rho) {
  detail::require_same_dims(u.dims(), rho.dims(), "sandwich");
  return DensityMatrix(u.mat() * rho.mat() * u.mat().adjoint(), rho.dims(),
                       rho.trace_deficit());
}

// ---------------------------------------------------------------------------
// Validation

struct DensityTolerances {
  double herm_tol = 1e-10;
  double trace_tol = 1e-9;
  double psd_tol = 1e-8;
};

struct DensityDiagnostics {
  double hermiticity_residual = 0.0;
  double trace = 0.0;
  double min_eigenvalue = 0.0;
  double trace_deficit = 0.0;
  bool hermitian_ok = false;
  bool trace_ok = false;
  bool psd_ok = false;
  bool ok() const { return hermitian_ok && trace_ok && psd_ok; }
};

/// Reporting only; never mutates or repairs the state.
inline DensityDiagnostics validate_density(const DensityMatrix& rho,
                                           const DensityTolerances& tol = {}) {
  DensityDiagnostics diag;
  diag.hermiticity_residual = detail::hermiticity_residual(rho.mat());
  diag.trace = rho.trace();
  diag.trace_deficit = rho.trace_deficit();
  Matrix herm = 0.5 * (rho.mat() + rho.mat().adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
  diag.min_eigenvalue = es.eigenvalues().minCoeff();
  diag.hermitian_ok = diag.hermiticity_residual <= tol.herm_tol;
  diag.trace_ok = diag.trace >= 1.0 - diag.trace_deficit - tol.trace_tol &&
                  diag.trace <= 1.0 + tol.trace_tol;
  diag.psd_ok = diag.min_eigenvalue >= -tol.psd_tol;
  return diag;
}

/// Opt-in repair: clip negative eigenvalues to zero and rescale back to the
/// original trace. Sampling noise can push Monte-Carlo states slightly
/// indefinite; this makes the repair explicit instead of silent.
inline DensityMatrix clip_negative_eigenvalues(const DensityMatrix& rho) {
  Matrix herm = 0.5 * (rho.mat() + rho.mat().adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
  Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0);
  const double target = rho.trace();
  const double got = w.sum();
  if (got > 0.0) w *= target / got;
  Matrix repaired =
      es.eigenvectors() * w.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  return DensityMatrix(std::move(repaired), rho.dims(), rho.trace_deficit());
}

}  // namespace fockwit
