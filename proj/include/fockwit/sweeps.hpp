#pragma once

// Randomized witness sweeps: soundness (no false positives on either
// classical family) and separation (each family generically trips the other
// family's witness). Draws use per-draw seeds derived from a master seed, so
// any subset of draws is reproducible in isolation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "fockwit/cc_states.hpp"
#include "fockwit/criteria.hpp"
#include "fockwit/fock.hpp"
#include "fockwit/phase_space.hpp"
#include "fockwit/rng.hpp"

namespace fockwit {

namespace detail {

/// Runs fn(0..draws-1) across a small thread pool; fn(i) must touch only its
/// own slot i, so the aggregate is identical however the draws interleave.
/// The first exception thrown by any draw is rethrown to the caller.
template <typename Fn>
void parallel_draws(int draws, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = static_cast<int>(std::min<unsigned>(hw, 8u));
  if (workers <= 1 || draws <= 1) {
    for (int i = 0; i < draws; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      try {
        for (int i = next.fetch_add(1); i < draws && !failed.load();
             i = next.fetch_add(1))
          fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) error = std::current_exception();
      }
    });
  for (std::thread& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace detail

/// Commutator witness over random classical-classical states: every draw
/// must stay at zero.
struct CcSoundnessSweep {
  int draws = 0;
  int violations = 0;
  double max_witness = 0.0;
  double max_matrix_entry = 0.0;
};

inline CcSoundnessSweep cc_soundness_sweep(int draws, std::uint64_t master_seed,
                                           int cutoff = 8, double tol = 1e-10) {
  CcSoundnessSweep out{draws, 0, 0.0, 0.0};
  std::vector<double> witness(static_cast<std::size_t>(draws));
  std::vector<double> entry(static_cast<std::size_t>(draws));
  detail::parallel_draws(draws, [&](int i) {
    Rng rng(Rng::derive(master_seed, static_cast<std::uint64_t>(i)));
    const int ka = 2 + static_cast<int>(rng.uniform() * (cutoff - 1));
    const int ks = 2 + static_cast<int>(rng.uniform() * (cutoff - 1));
    Eigen::MatrixXd raw(ka, ks);
    for (int r = 0; r < ka; ++r)
      for (int c = 0; c < ks; ++c) raw(r, c) = rng.uniform() + 1e-3;
    JointDistribution f(raw / raw.sum());
    LocalBasis ba = LocalBasis::random(cutoff, rng);
    LocalBasis bb = LocalBasis::random(cutoff, rng);
    DensityMatrix rho = cc_state(f, ba, bb);
    witness[static_cast<std::size_t>(i)] = cc_commutator_witness(rho).value;
    entry[static_cast<std::size_t>(i)] =
        commutator_matrix(rho, Povm::vacuum_split(cutoff)).cwiseAbs().maxCoeff();
  });
  for (int i = 0; i < draws; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.max_witness = std::max(out.max_witness, witness[k]);
    out.max_matrix_entry = std::max(out.max_matrix_entry, entry[k]);
    if (witness[k] > tol || entry[k] > tol) ++out.violations;
  }
  return out;
}

/// Variance witness and marginal Mandel Q over random positive-P inputs:
/// values may dip below zero only within sampling and truncation allowances.
struct PSoundnessSweep {
  int draws = 0;
  int violations = 0;
  double min_witness_margin = 0.0;  // min over draws of value + allowance
  double min_q_margin = 0.0;
};

inline PSoundnessSweep p_soundness_sweep(int draws, std::uint64_t master_seed,
                                         long mc_samples = 2000) {
  constexpr double kTruncAllowance = 1e-5;
  PSoundnessSweep out{draws, 0, 1e300, 1e300};
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t seed = Rng::derive(master_seed, static_cast<std::uint64_t>(i));
    Rng rng(seed);
    double witness_allowance = kTruncAllowance;
    double qa_allowance = kTruncAllowance, qb_allowance = kTruncAllowance;
    double value = 0.0;
    double qa = 0.0, qb = 0.0;
    if (i % 2 == 0) {
      // exact synthesis of a random point mixture
      const int natoms = 1 + static_cast<int>(rng.uniform() * 4);
      std::vector<PointMixtureP::Atom> atoms;
      double wsum = 0.0;
      for (int k = 0; k < natoms; ++k) {
        atoms.push_back({rng.uniform() + 0.05,
                         Complex(rng.normal() * 0.5, rng.normal() * 0.5),
                         Complex(rng.normal() * 0.5, rng.normal() * 0.5)});
        wsum += atoms.back().weight;
      }
      for (auto& at : atoms) at.weight /= wsum;
      PointMixtureP p(atoms);
      const int d = suggested_cutoff(p.max_abs_amplitude());
      DensityMatrix rho = synthesize_state(p, ModeDims::two(d, d));
      value = variance_witness(rho).value;
      qa = mandel_q(synthesize_marginal(p, Mode::a, d)).value_or(0.0);
      qb = mandel_q(synthesize_marginal(p, Mode::b, d)).value_or(0.0);
    } else {
      // Monte-Carlo synthesis of a random Gaussian P
      Eigen::Matrix4d g;
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) g(r, c) = rng.normal() * 0.15;
      const Eigen::Matrix4d cov = g * g.transpose();
      const GaussianP p(Complex(rng.normal() * 0.25, rng.normal() * 0.25),
                        Complex(rng.normal() * 0.25, rng.normal() * 0.25), cov);
      const double nbar_a = std::norm(p.mean_alpha()) + cov(0, 0) + cov(1, 1);
      const double nbar_b = std::norm(p.mean_beta()) + cov(2, 2) + cov(3, 3);
      const ModeDims dims = ModeDims::two(suggested_cutoff_thermal(nbar_a),
                                          suggested_cutoff_thermal(nbar_b));
      auto pts = sample(p, mc_samples, seed);
      DensityMatrix rho = detail::average_of_projectors(pts, dims, 512);
      value = variance_witness(rho).value;
      witness_allowance += 3.0 * variance_witness_mc_se(pts);
      qa = mandel_q(partial_trace(rho, Mode::a)).value_or(0.0);
      qb = mandel_q(partial_trace(rho, Mode::b)).value_or(0.0);
      qa_allowance += 3.0 * mandel_q_mc_se(pts, Mode::a);
      qb_allowance += 3.0 * mandel_q_mc_se(pts, Mode::b);
    }
    out.min_witness_margin = std::min(out.min_witness_margin, value + witness_allowance);
    out.min_q_margin =
        std::min({out.min_q_margin, qa + qa_allowance, qb + qb_allowance});
    if (value < -witness_allowance || qa < -qa_allowance || qb < -qb_allowance)
      ++out.violations;
  }
  return out;
}

/// Commutator witness over random multi-atom coherent mixtures: almost every
/// draw must come out strictly positive.
struct PmixSeparationSweep {
  int draws = 0;
  int positive = 0;
  double min_value = 0.0;
};

inline PmixSeparationSweep pmix_separation_sweep(int draws, std::uint64_t master_seed,
                                                 double tol = 1e-10) {
  PmixSeparationSweep out{draws, 0, 1e300};
  std::vector<double> values(static_cast<std::size_t>(draws));
  detail::parallel_draws(draws, [&](int i) {
    Rng rng(Rng::derive(master_seed, static_cast<std::uint64_t>(i)));
    const int natoms = 2 + static_cast<int>(rng.uniform() * 3);
    // atoms spread in the unit-ish disc, separated in both modes so no pair
    // collapses onto a common coherent factor
    std::vector<PointMixtureP::Atom> atoms;
    auto draw_point = [&rng]() {
      return Complex(2.4 * rng.uniform() - 1.2, 2.4 * rng.uniform() - 1.2);
    };
    for (int k = 0; k < natoms; ++k) {
      Complex alpha, beta;
      bool separated = false;
      while (!separated) {
        alpha = draw_point();
        beta = draw_point();
        separated = true;
        for (const auto& at : atoms)
          separated = separated && std::abs(alpha - at.alpha) >= 0.2 &&
                      std::abs(beta - at.beta) >= 0.2;
      }
      atoms.push_back({rng.uniform() + 0.15, alpha, beta});
    }
    double wsum = 0.0;
    for (const auto& at : atoms) wsum += at.weight;
    for (auto& at : atoms) at.weight /= wsum;
    PointMixtureP p(atoms);
    const int d = suggested_cutoff(p.max_abs_amplitude());
    DensityMatrix rho = synthesize_state(p, ModeDims::two(d, d));
    values[static_cast<std::size_t>(i)] = cc_commutator_witness(rho).value;
  });
  for (double value : values) {
    out.min_value = std::min(out.min_value, value);
    if (value > tol) ++out.positive;
  }
  return out;
}

/// Variance witness over random nondegenerate number-correlated states:
/// every draw must be flagged nonclassical.
struct NcSeparationSweep {
  int draws = 0;
  int nonclassical = 0;
  double max_value = -1e300;
};

inline NcSeparationSweep nc_separation_sweep(int draws, std::uint64_t master_seed,
                                             int cutoff = 12) {
  NcSeparationSweep out{draws, 0, -1e300};
  std::vector<double> values(static_cast<std::size_t>(draws));
  std::vector<char> flagged(static_cast<std::size_t>(draws));
  detail::parallel_draws(draws, [&](int i) {
    Rng rng(Rng::derive(master_seed, static_cast<std::uint64_t>(i)));
    const int support = 2 + static_cast<int>(rng.uniform() * std::min(5, cutoff - 1));
    Eigen::VectorXd p(support);
    for (int k = 0; k < support; ++k) p(k) = 0.05 + rng.uniform();
    p /= p.sum();
    DensityMatrix rho = number_correlated(p, ModeDims::two(cutoff, cutoff));
    WitnessReport report = variance_witness(rho);
    values[static_cast<std::size_t>(i)] = report.value;
    flagged[static_cast<std::size_t>(i)] =
        report.verdict == Verdict::nonclassical ? 1 : 0;
  });
  for (int i = 0; i < draws; ++i) {
    out.max_value = std::max(out.max_value, values[static_cast<std::size_t>(i)]);
    if (flagged[static_cast<std::size_t>(i)]) ++out.nonclassical;
  }
  return out;
}

}  // namespace fockwit
