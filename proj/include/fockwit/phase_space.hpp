#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "fockwit/fock.hpp"
#include "fockwit/rng.hpp"

namespace fockwit {

/// One phase-space point (alpha, beta) of the two-mode P-function.
struct PhasePoint {
  Complex alpha;
  Complex beta;
};

/// First and second moments of a two-mode P-function over the real
/// coordinates (Re alpha, Im alpha, Re beta, Im beta).  With this
/// convention tr(cov) = E|alpha - alpha0|^2 + E|beta - beta0|^2.
struct PMoments {
  Complex alpha0;
  Complex beta0;
  Eigen::Matrix4d cov;
};

// ---------------------------------------------------------------------------
// Distribution models

/// Gaussian P-function over C^2; covariance is real 4x4 PSD in the
/// (Re alpha, Im alpha, Re beta, Im beta) coordinates.
class GaussianP {
 public:
  GaussianP(Complex mean_alpha, Complex mean_beta, const Eigen::Matrix4d& cov)
      : mean_alpha_(mean_alpha), mean_beta_(mean_beta), cov_(cov) {
    detail::require_finite(mean_alpha, "GaussianP");
    detail::require_finite(mean_beta, "GaussianP");
    if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("GaussianP: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cov_);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw std::invalid_argument("GaussianP: covariance not positive semidefinite");
  }

  /// Two independent thermal modes: isotropic quadrature variance nbar/2 each.
  static GaussianP thermal(double nbar_a, double nbar_b) {
    if (nbar_a < 0.0 || nbar_b < 0.0)
      throw std::invalid_argument("GaussianP::thermal: nbar must be >= 0");
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    cov(0, 0) = cov(1, 1) = 0.5 * nbar_a;
    cov(2, 2) = cov(3, 3) = 0.5 * nbar_b;
    return GaussianP(0.0, 0.0, cov);
  }

  Complex mean_alpha() const { return mean_alpha_; }
  Complex mean_beta() const { return mean_beta_; }
  const Eigen::Matrix4d& cov() const { return cov_; }

 private:
  Complex mean_alpha_;
  Complex mean_beta_;
  Eigen::Matrix4d cov_;
};

/// Finite statistical mixture of two-mode coherent amplitudes.  The atoms are
/// delta peaks, so this sits on the singular boundary of the positive
/// P-function models; it is still an honest mixture of coherent states.
class PointMixtureP {
 public:
  struct Atom {
    double weight;
    Complex alpha;
    Complex beta;
  };

  explicit PointMixtureP(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw std::invalid_argument("PointMixtureP: no atoms");
    double sum = 0.0;
    for (const Atom& at : atoms_) {
      if (!(at.weight > 0.0)) throw std::invalid_argument("PointMixtureP: weights must be > 0");
      detail::require_finite(at.alpha, "PointMixtureP");
      detail::require_finite(at.beta, "PointMixtureP");
      sum += at.weight;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("PointMixtureP: weights must sum to 1");
  }

  static PointMixtureP single(Complex alpha, Complex beta) {
    return PointMixtureP({{1.0, alpha, beta}});
  }

  const std::vector<Atom>& atoms() const { return atoms_; }

  double max_abs_amplitude() const {
    double m = 0.0;
    for (const Atom& at : atoms_)
      m = std::max({m, std::abs(at.alpha), std::abs(at.beta)});
    return m;
  }

 private:
  std::vector<Atom> atoms_;
};

using PDistribution = std::variant<GaussianP, PointMixtureP>;

// ---------------------------------------------------------------------------
// Moments

inline PMoments p_moments(const GaussianP& p) {
  return {p.mean_alpha(), p.mean_beta(), p.cov()};
}

inline PMoments p_moments(const PointMixtureP& p) {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  for (const auto& at : p.atoms())
    mean += at.weight * Eigen::Vector4d(at.alpha.real(), at.alpha.imag(),
                                        at.beta.real(), at.beta.imag());
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  for (const auto& at : p.atoms()) {
    Eigen::Vector4d x(at.alpha.real(), at.alpha.imag(), at.beta.real(), at.beta.imag());
    Eigen::Vector4d c = x - mean;
    cov += at.weight * c * c.transpose();
  }
  return {Complex(mean(0), mean(1)), Complex(mean(2), mean(3)), cov};
}

inline PMoments p_moments(const PDistribution& p) {
  return std::visit([](const auto& d) { return p_moments(d); }, p);
}

/// |alpha0|^2 + |beta0|^2 + tr(cov): the floor under Var(n_a - n_b) for any
/// state synthesized from a positive P-function.
inline double predicted_variance_floor(const PMoments& m) {
  return std::norm(m.alpha0) + std::norm(m.beta0) + m.cov.trace();
}

template <typename P>
double predicted_variance_floor(const P& p) {
  return predicted_variance_floor(p_moments(p));
}

// ---------------------------------------------------------------------------
// Sampling

inline std::vector<PhasePoint> sample(const GaussianP& p, long n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: need at least one draw");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(p.cov());
  const Eigen::Matrix4d root =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const Eigen::Vector4d mean(p.mean_alpha().real(), p.mean_alpha().imag(),
                             p.mean_beta().real(), p.mean_beta().imag());
  Rng rng(seed);
  std::vector<PhasePoint> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    Eigen::Vector4d g;
    for (int k = 0; k < 4; ++k) g(k) = rng.normal();
    const Eigen::Vector4d x = mean + root * g;
    out.push_back({Complex(x(0), x(1)), Complex(x(2), x(3))});
  }
  return out;
}

inline std::vector<PhasePoint> sample(const PointMixtureP& p, long n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: need at least one draw");
  std::vector<double> cum;
  cum.reserve(p.atoms().size());
  double acc = 0.0;
  for (const auto& at : p.atoms()) {
    acc += at.weight;
    cum.push_back(acc);
  }
  cum.back() = 1.0;
  Rng rng(seed);
  std::vector<PhasePoint> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const auto idx = static_cast<std::size_t>(
        std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    const auto& at = p.atoms()[std::min(idx, p.atoms().size() - 1)];
    out.push_back({at.alpha, at.beta});
  }
  return out;
}

inline std::vector<PhasePoint> sample(const PDistribution& p, long n, std::uint64_t seed) {
  return std::visit([&](const auto& d) { return sample(d, n, seed); }, p);
}

// ---------------------------------------------------------------------------
// Synthesis of the density matrix rho = avg over P of |alpha><alpha| (x) |beta><beta|

struct Exact {};

struct MonteCarlo {
  long samples;
  std::uint64_t seed;
  int chunk = 1024;  // reduction block size; fixed order keeps runs bit-stable
};

using SynthesisMethod = std::variant<Exact, MonteCarlo>;

namespace detail {

/// Rank updates for one arithmetic-progression family of chunks
/// (first, first + stride, ...); the in-group order is fixed.
inline void accumulate_chunk_group(const std::vector<PhasePoint>& pts, int da, int db,
                                   int chunk, long first_chunk, long chunk_stride,
                                   Matrix& acc) {
  const auto n = static_cast<long>(pts.size());
  const long n_chunks = (n + chunk - 1) / chunk;
  Matrix block(da * db, chunk);
  for (long c = first_chunk; c < n_chunks; c += chunk_stride) {
    const long begin = c * chunk;
    const long cols = std::min<long>(chunk, n - begin);
    for (long j = 0; j < cols; ++j) {
      const PhasePoint& pt = pts[static_cast<std::size_t>(begin + j)];
      const Ket ka = coherent_ket(pt.alpha, da);
      const Ket kb = coherent_ket(pt.beta, db);
      Eigen::Map<Matrix> col(block.col(j).data(), db, da);
      col = kb.amps() * ka.amps().transpose();  // column-major layout of kron(ka, kb)
    }
    if (cols == chunk)
      acc.selfadjointView<Eigen::Lower>().rankUpdate(block, 1.0);
    else
      acc.selfadjointView<Eigen::Lower>().rankUpdate(block.leftCols(cols), 1.0);
  }
}

/// Mean of coherent projectors over the sample list.  Chunks are split into a
/// fixed number of groups processed concurrently and merged in group order,
/// so the result is bit-identical however many threads actually run.
inline DensityMatrix average_of_projectors(const std::vector<PhasePoint>& pts,
                                           const ModeDims& dims, int chunk) {
  if (chunk < 1) throw std::invalid_argument("synthesize_state: chunk must be >= 1");
  const int da = dims.dim(Mode::a), db = dims.dim(Mode::b);
  const int total = dims.total();
  const auto n = static_cast<long>(pts.size());
  const long n_chunks = (n + chunk - 1) / chunk;

  // the group partition and merge order are part of the arithmetic, so the
  // result does not depend on how many threads actually ran; memory-heavy
  // states (group accumulators of this size would dominate) use one group
  constexpr long kGroups = 4;
  const long groups = total <= 2048 ? std::min<long>(kGroups, n_chunks) : 1;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());

  std::vector<Matrix> partial(static_cast<std::size_t>(std::max<long>(groups, 1)),
                              Matrix::Zero(total, total));
  if (groups > 1 && hw > 1) {
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(groups));
    for (long g = 0; g < groups; ++g)
      workers.emplace_back([&pts, da, db, chunk, g, groups, &partial, &error,
                            &error_mutex] {
        try {
          accumulate_chunk_group(pts, da, db, chunk, g, groups,
                                 partial[static_cast<std::size_t>(g)]);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    for (std::thread& w : workers) w.join();
    if (error) std::rethrow_exception(error);
  } else {
    for (long g = 0; g < groups; ++g)
      accumulate_chunk_group(pts, da, db, chunk, g, groups,
                             partial[static_cast<std::size_t>(g)]);
  }
  Matrix acc = std::move(partial[0]);
  for (long g = 1; g < groups; ++g) acc += partial[static_cast<std::size_t>(g)];

  acc /= static_cast<double>(n);
  Matrix rho = acc.selfadjointView<Eigen::Lower>();
  const double deficit = std::clamp(1.0 - rho.trace().real(), 0.0, 1.0);
  return DensityMatrix(std::move(rho), dims, deficit);
}

}  // namespace detail

inline DensityMatrix synthesize_state(const PointMixtureP& p, const ModeDims& dims,
                                      const SynthesisMethod& method = Exact{}) {
  if (!dims.two_mode())
    throw std::invalid_argument("synthesize_state: dims must be two-mode");
  if (std::holds_alternative<Exact>(method)) {
    const int da = dims.dim(Mode::a), db = dims.dim(Mode::b);
    Matrix acc = Matrix::Zero(dims.total(), dims.total());
    double deficit = 0.0;
    for (const auto& at : p.atoms()) {
      const Ket k = tensor(coherent_ket(at.alpha, da), coherent_ket(at.beta, db));
      acc += at.weight * (k.amps() * k.amps().adjoint());
      deficit += at.weight * (1.0 - k.squared_norm());
    }
    return DensityMatrix(std::move(acc), dims, std::max(0.0, deficit));
  }
  const auto& mc = std::get<MonteCarlo>(method);
  return detail::average_of_projectors(sample(p, mc.samples, mc.seed), dims, mc.chunk);
}

inline DensityMatrix synthesize_state(const GaussianP& p, const ModeDims& dims,
                                      const SynthesisMethod& method) {
  if (!dims.two_mode())
    throw std::invalid_argument("synthesize_state: dims must be two-mode");
  if (std::holds_alternative<Exact>(method))
    throw std::invalid_argument(
        "synthesize_state: exact synthesis requires a point mixture; "
        "GaussianP is Monte Carlo only");
  const auto& mc = std::get<MonteCarlo>(method);
  return detail::average_of_projectors(sample(p, mc.samples, mc.seed), dims, mc.chunk);
}

inline DensityMatrix synthesize_state(const PDistribution& p, const ModeDims& dims,
                                      const SynthesisMethod& method) {
  return std::visit([&](const auto& d) { return synthesize_state(d, dims, method); }, p);
}

/// Single-mode marginal sum_i w_i |amp_i><amp_i| of a point mixture.
inline DensityMatrix synthesize_marginal(const PointMixtureP& p, Mode mode, int d) {
  Matrix acc = Matrix::Zero(d, d);
  double deficit = 0.0;
  for (const auto& at : p.atoms()) {
    const Ket k = coherent_ket(mode == Mode::a ? at.alpha : at.beta, d);
    acc += at.weight * (k.amps() * k.amps().adjoint());
    deficit += at.weight * (1.0 - k.squared_norm());
  }
  return DensityMatrix(std::move(acc), ModeDims::single(d), std::max(0.0, deficit));
}

// ---------------------------------------------------------------------------
// Conditioning in phase space

/// Response of a coherent-diagonal POVM element: g(z) = <z|Pi|z>, in [0, 1].
using PovmResponse = std::function<double(Complex)>;

/// g for an explicit single-mode element, evaluated with truncated kets.
inline PovmResponse povm_response(const Operator& element) {
  if (!element.dims().single_mode())
    throw std::invalid_argument("povm_response: element must be single-mode");
  const int d = element.dims().dim(Mode::a);
  const Matrix m = element.mat();
  return [d, m](Complex z) {
    const Vector amps = coherent_ket(z, d).amps();
    return std::real(amps.dot(m * amps));
  };
}

/// Exact response of the vacuum projector, |<0|z>|^2 = exp(-|z|^2).
inline PovmResponse vacuum_response() {
  return [](Complex z) { return std::exp(-std::norm(z)); };
}

/// Bayes update of a point mixture under a POVM response g on one mode:
/// weights w_i -> w_i g(amp_i) / p with p = sum_i w_i g(amp_i).  The result
/// stays a positive normalized mixture; conditioning cannot create
/// quantumness in phase space.
inline std::pair<PointMixtureP, double> conditional_P(const PointMixtureP& p,
                                                      const PovmResponse& g,
                                                      Mode conditioned) {
  std::vector<PointMixtureP::Atom> atoms;
  atoms.reserve(p.atoms().size());
  double prob = 0.0;
  for (const auto& at : p.atoms()) {
    double gi = g(conditioned == Mode::a ? at.alpha : at.beta);
    if (gi < -1e-12 || gi > 1.0 + 1e-12)
      throw std::domain_error("conditional_P: POVM response outside [0, 1]");
    gi = std::clamp(gi, 0.0, 1.0);
    prob += at.weight * gi;
    if (at.weight * gi > 0.0) atoms.push_back({at.weight * gi, at.alpha, at.beta});
  }
  if (prob < 1e-14)
    throw std::domain_error("conditional_P: conditioning impossible (probability ~ 0)");
  for (auto& at : atoms) at.weight /= prob;
  // renormalize exactly so the constructor's sum check cannot trip on rounding
  double s = 0.0;
  for (const auto& at : atoms) s += at.weight;
  for (auto& at : atoms) at.weight /= s;
  return {PointMixtureP(std::move(atoms)), prob};
}

// ---------------------------------------------------------------------------
// JSON interface
//
//   {"type": "gaussian", "mean": [[re,im],[re,im]], "cov": [[..4x4..]]}
//   {"type": "points", "atoms": [{"w": w, "alpha": [re,im], "beta": [re,im]}]}

namespace detail {
inline Complex complex_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument(std::string(what) + ": expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}
}  // namespace detail

inline nlohmann::json to_json(const GaussianP& p) {
  nlohmann::json cov = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < 4; ++j) row.push_back(p.cov()(i, j));
    cov.push_back(std::move(row));
  }
  return {{"type", "gaussian"},
          {"mean",
           {{p.mean_alpha().real(), p.mean_alpha().imag()},
            {p.mean_beta().real(), p.mean_beta().imag()}}},
          {"cov", std::move(cov)}};
}

inline nlohmann::json to_json(const PointMixtureP& p) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& at : p.atoms())
    atoms.push_back({{"w", at.weight},
                     {"alpha", {at.alpha.real(), at.alpha.imag()}},
                     {"beta", {at.beta.real(), at.beta.imag()}}});
  return {{"type", "points"}, {"atoms", std::move(atoms)}};
}

inline nlohmann::json to_json(const PDistribution& p) {
  return std::visit([](const auto& d) { return to_json(d); }, p);
}

inline PDistribution p_distribution_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type"))
    throw std::invalid_argument("p_distribution_from_json: missing \"type\"");
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian") {
    const auto& mean = j.at("mean");
    if (!mean.is_array() || mean.size() != 2)
      throw std::invalid_argument("p_distribution_from_json: mean must hold two pairs");
    const auto& cov = j.at("cov");
    if (!cov.is_array() || cov.size() != 4)
      throw std::invalid_argument("p_distribution_from_json: cov must be 4x4");
    Eigen::Matrix4d c;
    for (int i = 0; i < 4; ++i) {
      if (!cov[static_cast<std::size_t>(i)].is_array() ||
          cov[static_cast<std::size_t>(i)].size() != 4)
        throw std::invalid_argument("p_distribution_from_json: cov must be 4x4");
      for (int k = 0; k < 4; ++k)
        c(i, k) = cov[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]
                      .get<double>();
    }
    return GaussianP(detail::complex_from_json(mean[0], "mean alpha"),
                     detail::complex_from_json(mean[1], "mean beta"), c);
  }
  if (type == "points") {
    std::vector<PointMixtureP::Atom> atoms;
    for (const auto& a : j.at("atoms"))
      atoms.push_back({a.at("w").get<double>(),
                       detail::complex_from_json(a.at("alpha"), "alpha"),
                       detail::complex_from_json(a.at("beta"), "beta")});
    return PointMixtureP(std::move(atoms));
  }
  throw std::invalid_argument("p_distribution_from_json: unknown type \"" + type + "\"");
}

}  // namespace fockwit
