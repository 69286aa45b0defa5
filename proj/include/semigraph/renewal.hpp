#pragma once

// Renewal processes: sojourn laws, epoch sequences T_n = J_1 + ... + J_n, the
// counting process N(t) = max{n : T_n <= t}, and the closed forms used as
// verification oracles for the Poisson case.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <nlohmann/json.hpp>

#include "semigraph/mittag_leffler.hpp"
#include "semigraph/random.hpp"

namespace semigraph {

/// Distribution of the i.i.d. positive sojourn times J_i.
class SojournLaw {
 public:
  enum class Kind { Exponential, MittagLeffler };

  static SojournLaw exponential(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate))
      throw std::invalid_argument("exponential rate must be positive");
    SojournLaw law;
    law.kind_ = Kind::Exponential;
    law.rate_ = rate;
    return law;
  }

  static SojournLaw mittag_leffler(double beta, double scale = 1.0) {
    MLParams p{beta, scale};
    p.validate();
    SojournLaw law;
    law.kind_ = Kind::MittagLeffler;
    law.ml_ = p;
    return law;
  }

  Kind kind() const { return kind_; }
  bool is_exponential() const { return kind_ == Kind::Exponential; }

  double rate() const {
    if (kind_ != Kind::Exponential) throw std::logic_error("rate() needs an exponential law");
    return rate_;
  }
  const MLParams& ml_params() const {
    if (kind_ != Kind::MittagLeffler) throw std::logic_error("ml_params() needs a Mittag-Leffler law");
    return ml_;
  }

  /// Absent when the mean is infinite (Mittag-Leffler with beta < 1).
  std::optional<double> mean() const {
    if (kind_ == Kind::Exponential) return 1.0 / rate_;
    if (ml_.beta == 1.0) return ml_.scale;
    return std::nullopt;
  }

  double sample(Rng& rng) const {
    if (kind_ == Kind::Exponential) return rng.exponential(rate_);
    return ml_sample(ml_, rng);
  }

  /// P(J > t).
  double survival(double t) const {
    if (!(t >= 0.0)) throw std::domain_error("survival needs t >= 0");
    if (kind_ == Kind::Exponential) return std::exp(-rate_ * t);
    return ml_survival(ml_, t);
  }

  /// Density of J; closed form for exponential laws only.
  double density(double t) const {
    if (!(t >= 0.0)) throw std::domain_error("density needs t >= 0");
    if (kind_ == Kind::Exponential) return rate_ * std::exp(-rate_ * t);
    if (ml_.beta == 1.0) return std::exp(-t / ml_.scale) / ml_.scale;
    throw std::logic_error("Mittag-Leffler density is not provided for beta < 1");
  }

  nlohmann::json to_json() const {
    if (kind_ == Kind::Exponential) return {{"law", "exponential"}, {"rate", rate_}};
    return {{"law", "mittag-leffler"}, {"beta", ml_.beta}, {"scale", ml_.scale}};
  }

  /// {"law": "exponential", "rate": r} or {"law": "mittag-leffler", "beta": b, "scale": s}.
  static SojournLaw from_json(const nlohmann::json& j) {
    const auto name = j.at("law").get<std::string>();
    if (name == "exponential") return exponential(j.at("rate").get<double>());
    if (name == "mittag-leffler")
      return mittag_leffler(j.at("beta").get<double>(), j.value("scale", 1.0));
    throw std::invalid_argument("unknown sojourn law '" + name + "'");
  }

 private:
  SojournLaw() = default;

  Kind kind_ = Kind::Exponential;
  double rate_ = 1.0;
  MLParams ml_{};
};

/// Epochs T_1 < T_2 < ... <= horizon of one renewal path.
struct EpochSequence {
  std::vector<double> epochs;
  double horizon = 0.0;

  std::size_t size() const { return epochs.size(); }
};

/// Every epoch up to `horizon`; the next sampled epoch would exceed it.
inline EpochSequence generate_epochs(const SojournLaw& law, double horizon, Rng& rng) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  EpochSequence es{{}, horizon};
  double t = 0.0;
  for (;;) {
    t += law.sample(rng);
    if (t > horizon) break;
    es.epochs.push_back(t);
  }
  return es;
}

/// N(t): number of epochs <= t. Queries past the horizon would be censored.
inline std::size_t count_at(const EpochSequence& es, double t) {
  if (!(t >= 0.0)) throw std::out_of_range("count_at needs t >= 0");
  if (t > es.horizon) throw std::out_of_range("count_at beyond the generation horizon");
  return static_cast<std::size_t>(
      std::upper_bound(es.epochs.begin(), es.epochs.end(), t) - es.epochs.begin());
}

/// P(N(t) = n) = exp(-lambda t) (lambda t)^n / n! for a Poisson process.
inline double poisson_pmf(double lambda, std::size_t n, double t) {
  if (!(lambda > 0.0) || !(t > 0.0)) throw std::invalid_argument("poisson_pmf needs lambda, t > 0");
  const double mu = lambda * t;
  return std::exp(-mu + static_cast<double>(n) * std::log(mu) -
                  std::lgamma(static_cast<double>(n) + 1.0));
}

/// P(T_n <= t) for exponential sojourns: the Erlang(n, lambda) CDF.
inline double erlang_cdf(double lambda, std::size_t n, double t) {
  if (n == 0) throw std::invalid_argument("erlang_cdf needs n >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("erlang_cdf needs lambda > 0");
  if (!(t >= 0.0)) throw std::invalid_argument("erlang_cdf needs t >= 0");
  if (t == 0.0) return 0.0;
  return boost::math::gamma_p(static_cast<double>(n), lambda * t);
}

/// Monte Carlo estimate of H(t) = E N(t) on a grid, with standard errors.
struct RenewalEstimate {
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> std_error;
};

inline void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("time grid is empty");
  if (grid.front() < 0.0) throw std::invalid_argument("time grid must be nonnegative");
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw std::invalid_argument("time grid must be increasing");
}

/// Replication r draws its clock from stream (master_seed, r, Clock), so the
/// estimate is identical for every thread count.
inline RenewalEstimate estimate_renewal_function(const SojournLaw& law,
                                                 const std::vector<double>& grid,
                                                 std::size_t reps, std::uint64_t master_seed,
                                                 unsigned threads = 1) {
  check_grid(grid);
  if (reps == 0) throw std::invalid_argument("reps must be positive");
  const double horizon = std::max(grid.back(), 1e-300);
  const std::size_t k_max = grid.size();
  std::vector<std::uint32_t> counts(reps * k_max);
  parallel_for(reps, threads, [&](std::size_t r) {
    Rng rng = Rng::derive(master_seed, r, StreamTag::Clock);
    const auto es = generate_epochs(law, horizon, rng);
    for (std::size_t k = 0; k < k_max; ++k)
      counts[r * k_max + k] = static_cast<std::uint32_t>(count_at(es, grid[k]));
  });
  RenewalEstimate est{grid, std::vector<double>(k_max, 0.0), std::vector<double>(k_max, 0.0)};
  for (std::size_t k = 0; k < k_max; ++k) {
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const double c = counts[r * k_max + k];
      sum += c;
      sum_sq += c * c;
    }
    const double n = static_cast<double>(reps);
    const double mean = sum / n;
    const double var = reps > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
    est.mean[k] = mean;
    est.std_error[k] = std::sqrt(var / n);
  }
  return est;
}

/// Residuals of H(t) = 1 - Psi(t) + Int_0^t H(t - u) psi(u) du on a uniform
/// grid starting at 0, given grid values of H. H is interpolated linearly
/// between grid points and integrated exactly against the exponential
/// density (product trapezoidal rule), so a linear H is reproduced exactly.
inline std::vector<double> first_renewal_residuals(const SojournLaw& law,
                                                   const std::vector<double>& grid,
                                                   const std::vector<double>& h) {
  if (!law.is_exponential())
    throw std::invalid_argument("renewal-equation check needs an exponential law");
  check_grid(grid);
  if (h.size() != grid.size()) throw std::invalid_argument("H values do not match the grid");
  if (grid.front() != 0.0) throw std::invalid_argument("grid must start at 0");
  const std::size_t n = grid.size();
  const double step = n > 1 ? grid[1] - grid[0] : 1.0;
  for (std::size_t k = 1; k < n; ++k)
    if (std::abs((grid[k] - grid[k - 1]) - step) > 1e-9 * step)
      throw std::invalid_argument("grid must be uniform");

  const double lambda = law.rate();
  // For u in [t_j, t_j + step]: w0_j = Int psi, w1_j = Int (u - t_j)/step psi.
  const double e = std::exp(-lambda * step);
  const double lh = lambda * step;
  const double frac0 = -std::expm1(-lh);
  const double frac1 = lh < 1e-4 ? lh / 2.0 - lh * lh / 3.0
                                 : (frac0 - lh * e) / lh;  // (1 - e^{-lh}(1 + lh)) / lh
  std::vector<double> w0(n), w1(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double decay = std::exp(-lambda * grid[j]);
    w0[j] = decay * frac0;
    w1[j] = decay * frac1;
  }
  std::vector<double> residual(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double conv = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      // H(t_k - u) runs linearly from h[k - j] to h[k - j - 1] across the panel.
      conv += h[k - j] * w0[j] + (h[k - j - 1] - h[k - j]) * w1[j];
    }
    residual[k] = h[k] - (1.0 - law.survival(grid[k]) + conv);
  }
  return residual;
}

/// Max |residual| of the first renewal equation with H replaced by its
/// Monte Carlo estimate. Exponential laws only.
inline double verify_first_renewal_equation(const SojournLaw& law, const std::vector<double>& grid,
                                            std::size_t reps, std::uint64_t master_seed,
                                            unsigned threads = 1) {
  if (!law.is_exponential())
    throw std::invalid_argument("renewal-equation check needs an exponential law");
  const auto est = estimate_renewal_function(law, grid, reps, master_seed, threads);
  const auto residual = first_renewal_residuals(law, grid, est.mean);
  double worst = 0.0;
  for (double r : residual) worst = std::max(worst, std::abs(r));
  return worst;
}

}  // namespace semigraph
