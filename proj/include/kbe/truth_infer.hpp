// Fact verification: Beta-prior latent truths, per-source normal error with a
// scaled inverse chi-squared prior, MAP inference of the truths by gradient
// descent in logit space, cardinality-aware labeling, and closed-form
// posterior source reliability. The conjugate marginal has an exact
// expression, which conjugacy_check validates against direct quadrature.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "kbe/errors.hpp"
#include "kbe/kb.hpp"
#include "kbe/numerics.hpp"
#include "kbe/source_sim.hpp"

namespace kbe {

struct TruthConfig {
  double beta1 = 5.0;  // prior pseudo-count for true
  double beta0 = 5.0;  // prior pseudo-count for false
  double significance = 0.05;  // alpha for the CI variance estimator
  double epsilon = 0.5;        // truth threshold
  bool use_ci_estimator = true;
  bool use_prior_truths = true;
  int refine_rounds = 1;  // re-estimate tau^2 from inferred z and re-run
  int max_iterations = 5000;
  double grad_tolerance = 1e-6;
  double z_clamp = 1e-6;
  double tau2_floor = 1e-6;
  double multi_value_threshold = 0.1;

  void validate() const {
    if (beta1 <= 0.0 || beta0 <= 0.0) throw ConfigError("truth: beta counts must be positive");
    if (!(significance > 0.0 && significance < 1.0)) {
      throw ConfigError("truth: significance must lie in (0, 1)");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("truth: epsilon must lie in (0, 1)");
    if (refine_rounds < 0) throw ConfigError("truth: refine_rounds must be >= 0");
    if (max_iterations < 1) throw ConfigError("truth: max_iterations must be >= 1");
    if (grad_tolerance <= 0.0) throw ConfigError("truth: grad_tolerance must be positive");
    if (!(z_clamp > 0.0 && z_clamp < 0.5)) throw ConfigError("truth: z_clamp must lie in (0, 0.5)");
    if (tau2_floor <= 0.0) throw ConfigError("truth: tau2_floor must be positive");
    if (multi_value_threshold < 0.0 || multi_value_threshold > 1.0) {
      throw ConfigError("truth: multi_value_threshold must lie in [0, 1]");
    }
  }
};

struct SourceStats {
  double nu = 0.0;
  double tau2 = 0.0;
  std::vector<std::pair<Fact, double>> claims;  // F_s with observations
  double reliability = 0.0;
};

struct TruthAssignment {
  std::vector<Fact> facts;  // sorted, unique
  std::vector<double> z;
  std::vector<char> labels;
  std::vector<std::vector<std::string>> sources;  // claiming sources per fact
  std::vector<double> objective_trace;            // accepted objective values
  double objective = 0.0;
  int iterations = 0;
  bool converged = true;

  int index_of(const Fact& f) const {
    auto it = std::lower_bound(facts.begin(), facts.end(), f);
    if (it == facts.end() || !(*it == f)) return -1;
    return static_cast<int>(it - facts.begin());
  }
  double z_of(const Fact& f) const {
    int i = index_of(f);
    if (i < 0) throw DataError("truth assignment: unknown fact '" + f.subject + "|" + f.property + "'");
    return z[static_cast<std::size_t>(i)];
  }
  bool label_of(const Fact& f) const {
    int i = index_of(f);
    if (i < 0) throw DataError("truth assignment: unknown fact '" + f.subject + "|" + f.property + "'");
    return labels[static_cast<std::size_t>(i)] != 0;
  }
  std::vector<Fact> true_facts() const {
    std::vector<Fact> out;
    for (std::size_t i = 0; i < facts.size(); ++i) {
      if (labels[i]) out.push_back(facts[i]);
    }
    return out;
  }
};

namespace detail {

// Indexed view over a claim set (optionally widened by extra claimless facts).
struct ClaimTable {
  std::vector<Fact> facts;           // sorted unique
  std::vector<std::string> sources;  // sorted unique
  std::vector<std::vector<std::pair<int, double>>> by_fact;    // fact -> (source, obs)
  std::vector<std::vector<std::pair<int, double>>> by_source;  // source -> (fact, obs)

  static ClaimTable build(const std::vector<Claim>& claims,
                          const std::vector<Fact>& extra_facts = {}) {
    ClaimTable t;
    std::set<Fact> fact_set(extra_facts.begin(), extra_facts.end());
    std::set<std::string> source_set;
    for (const Claim& c : claims) {
      fact_set.insert(c.fact);
      source_set.insert(c.source);
    }
    t.facts.assign(fact_set.begin(), fact_set.end());
    t.sources.assign(source_set.begin(), source_set.end());
    t.by_fact.assign(t.facts.size(), {});
    t.by_source.assign(t.sources.size(), {});
    std::map<std::string, int> source_idx;
    for (std::size_t s = 0; s < t.sources.size(); ++s) {
      source_idx[t.sources[s]] = static_cast<int>(s);
    }
    for (const Claim& c : claims) {
      auto it = std::lower_bound(t.facts.begin(), t.facts.end(), c.fact);
      int fi = static_cast<int>(it - t.facts.begin());
      int si = source_idx.at(c.source);
      t.by_fact[static_cast<std::size_t>(fi)].emplace_back(si, c.observation);
      t.by_source[static_cast<std::size_t>(si)].emplace_back(fi, c.observation);
    }
    return t;
  }
};

// Beta-prior mode, the starting point for facts nobody claimed.
inline double beta_prior_mode(double beta1, double beta0) {
  double denom = beta1 + beta0 - 2.0;
  if (denom <= 0.0) return 0.5;
  return std::clamp((beta1 - 1.0) / denom, 0.0, 1.0);
}

struct NllTerms {
  std::vector<double> nu;    // per source
  std::vector<double> tau2;  // per source
};

inline NllTerms lookup_stats(const ClaimTable& t, const std::map<std::string, SourceStats>& stats) {
  NllTerms terms;
  terms.nu.reserve(t.sources.size());
  terms.tau2.reserve(t.sources.size());
  for (const std::string& s : t.sources) {
    auto it = stats.find(s);
    if (it == stats.end()) throw ConfigError("infer_truths: no hyperparameters for source '" + s + "'");
    if (it->second.tau2 <= 0.0) throw ConfigError("infer_truths: tau^2 must be positive for '" + s + "'");
    terms.nu.push_back(it->second.nu);
    terms.tau2.push_back(it->second.tau2);
  }
  return terms;
}

// Joint objective over the indexed claim table.
inline double nll_indexed(const ClaimTable& t, const NllTerms& terms, const std::vector<double>& z,
                          double beta1, double beta0) {
  double total = 0.0;
  for (double zf : z) {
    if (beta1 != 1.0) total += (1.0 - beta1) * std::log(zf);
    if (beta0 != 1.0) total += (1.0 - beta0) * std::log(1.0 - zf);
  }
  for (std::size_t s = 0; s < t.sources.size(); ++s) {
    double a = 0.0;
    for (const auto& [fi, obs] : t.by_source[s]) {
      double d = z[static_cast<std::size_t>(fi)] - obs;
      a += d * d;
    }
    double n = static_cast<double>(t.by_source[s].size());
    total += 0.5 * (terms.nu[s] + n) * std::log(0.5 * (terms.nu[s] * terms.tau2[s] + a));
  }
  return total;
}

inline void nll_gradient_indexed(const ClaimTable& t, const NllTerms& terms,
                                 const std::vector<double>& z, double beta1, double beta0,
                                 std::vector<double>& grad) {
  grad.assign(z.size(), 0.0);
  for (std::size_t f = 0; f < z.size(); ++f) {
    if (beta1 != 1.0) grad[f] += (1.0 - beta1) / z[f];
    if (beta0 != 1.0) grad[f] -= (1.0 - beta0) / (1.0 - z[f]);
  }
  for (std::size_t s = 0; s < t.sources.size(); ++s) {
    double a = 0.0;
    for (const auto& [fi, obs] : t.by_source[s]) {
      double d = z[static_cast<std::size_t>(fi)] - obs;
      a += d * d;
    }
    double n = static_cast<double>(t.by_source[s].size());
    double scale = (terms.nu[s] + n) / (terms.nu[s] * terms.tau2[s] + a);
    for (const auto& [fi, obs] : t.by_source[s]) {
      grad[static_cast<std::size_t>(fi)] += scale * (z[static_cast<std::size_t>(fi)] - obs);
    }
  }
}

}  // namespace detail

// Majority voting: mean observation per fact, clamped into (delta, 1-delta).
inline TruthAssignment majority_init(const std::vector<Claim>& claims, double z_clamp = 1e-6) {
  if (claims.empty()) throw DataError("majority_init: empty claim set");
  detail::ClaimTable t = detail::ClaimTable::build(claims);
  TruthAssignment za;
  za.facts = t.facts;
  za.z.resize(t.facts.size());
  za.labels.assign(t.facts.size(), 0);
  za.sources.resize(t.facts.size());
  for (std::size_t f = 0; f < t.facts.size(); ++f) {
    const auto& obs = t.by_fact[f];
    if (obs.empty()) throw DataError("majority_init: fact with no claims");
    double sum = 0.0;
    for (const auto& [si, o] : obs) sum += o;
    za.z[f] = std::clamp(sum / static_cast<double>(obs.size()), z_clamp, 1.0 - z_clamp);
    for (const auto& [si, o] : obs) za.sources[f].push_back(t.sources[static_cast<std::size_t>(si)]);
    std::sort(za.sources[f].begin(), za.sources[f].end());
    za.sources[f].erase(std::unique(za.sources[f].begin(), za.sources[f].end()),
                        za.sources[f].end());
  }
  return za;
}

// Per-source prior observation count and variance. Facts listed
// as prior truths enter the deviation sums with z-hat = 1.0. The CI estimator
// divides the deviation sum by the lower-tail alpha/2 chi-squared quantile,
// i.e. uses the upper bound of the (1-alpha) confidence interval of the
// sample variance, which damps trust in small sources.
inline std::map<std::string, SourceStats> set_hyperparameters(
    const std::vector<Claim>& claims, const TruthAssignment& zhat,
    const std::vector<Fact>& prior_truths, const TruthConfig& cfg) {
  cfg.validate();
  std::set<Fact> priors(prior_truths.begin(), prior_truths.end());
  std::map<std::string, SourceStats> out;
  for (const Claim& c : claims) out[c.source].claims.push_back({c.fact, c.observation});
  for (auto& [id, st] : out) {
    std::sort(st.claims.begin(), st.claims.end(),
              [](const auto& a, const auto& b) {
                if (!(a.first == b.first)) return a.first < b.first;
                return a.second < b.second;
              });
    double n = static_cast<double>(st.claims.size());
    st.nu = n;
    double a = 0.0;
    for (const auto& [fact, obs] : st.claims) {
      double zf = (cfg.use_prior_truths && priors.count(fact)) ? 1.0 : zhat.z_of(fact);
      double d = zf - obs;
      a += d * d;
    }
    if (cfg.use_ci_estimator) {
      // chi_squared_critical is upper-tail; the small quantile is at 1 - alpha/2
      double divisor = chi_squared_critical(1.0 - cfg.significance / 2.0, n);
      st.tau2 = a / divisor;
    } else {
      st.tau2 = a / n;
    }
    st.tau2 = std::max(st.tau2, cfg.tau2_floor);
    st.reliability = (st.nu + n) / (st.nu * st.tau2 + a);
  }
  return out;
}

// Negative log posterior up to an additive constant: beta-prior terms plus
// per-source log-marginal terms.
inline double negative_log_likelihood(const TruthAssignment& za, const std::vector<Claim>& claims,
                                      const std::map<std::string, SourceStats>& stats,
                                      double beta1, double beta0) {
  for (double zf : za.z) {
    if (!(zf > 0.0 && zf < 1.0)) throw DataError("negative_log_likelihood: z outside (0, 1)");
  }
  detail::ClaimTable t = detail::ClaimTable::build(claims, za.facts);
  detail::NllTerms terms = detail::lookup_stats(t, stats);
  std::vector<double> z(t.facts.size());
  for (std::size_t f = 0; f < t.facts.size(); ++f) z[f] = za.z_of(t.facts[f]);
  return detail::nll_indexed(t, terms, z, beta1, beta0);
}

// dNLL/dz, aligned with the assignment's fact order (for gradient checks).
inline std::vector<double> nll_gradient(const TruthAssignment& za, const std::vector<Claim>& claims,
                                        const std::map<std::string, SourceStats>& stats,
                                        double beta1, double beta0) {
  detail::ClaimTable t = detail::ClaimTable::build(claims, za.facts);
  detail::NllTerms terms = detail::lookup_stats(t, stats);
  std::vector<double> z(t.facts.size());
  for (std::size_t f = 0; f < t.facts.size(); ++f) z[f] = za.z_of(t.facts[f]);
  std::vector<double> grad;
  detail::nll_gradient_indexed(t, terms, z, beta1, beta0, grad);
  std::vector<double> out(za.facts.size());
  for (std::size_t f = 0; f < t.facts.size(); ++f) {
    out[static_cast<std::size_t>(za.index_of(t.facts[f]))] = grad[f];
  }
  return out;
}

// MAP inference of latent truths: gradient descent on the objective in
// logit space (z = sigmoid(u)) with Armijo backtracking, starting from
// majority voting (claimless facts start at the beta-prior mode).
inline TruthAssignment infer_truths(const std::vector<Claim>& claims,
                                    const std::map<std::string, SourceStats>& stats,
                                    const TruthConfig& cfg,
                                    const std::vector<Fact>& fact_universe = {}) {
  cfg.validate();
  if (claims.empty() && fact_universe.empty()) throw DataError("infer_truths: nothing to infer");
  detail::ClaimTable t = detail::ClaimTable::build(claims, fact_universe);
  detail::NllTerms terms = detail::lookup_stats(t, stats);

  double delta = cfg.z_clamp;
  double prior_mode = std::clamp(detail::beta_prior_mode(cfg.beta1, cfg.beta0), delta, 1.0 - delta);
  std::size_t n = t.facts.size();
  std::vector<double> u(n);
  for (std::size_t f = 0; f < n; ++f) {
    const auto& obs = t.by_fact[f];
    double z0;
    if (obs.empty()) {
      z0 = prior_mode;
    } else {
      double sum = 0.0;
      for (const auto& [si, o] : obs) sum += o;
      z0 = std::clamp(sum / static_cast<double>(obs.size()), delta, 1.0 - delta);
    }
    u[f] = logit(z0);
  }

  std::vector<double> z(n), grad_z, grad_u(n), z_try(n), u_try(n);
  auto to_z = [&](const std::vector<double>& uv, std::vector<double>& zv) {
    for (std::size_t f = 0; f < n; ++f) zv[f] = sigmoid(uv[f]);
  };

  TruthAssignment za;
  to_z(u, z);
  double f_cur = detail::nll_indexed(t, terms, z, cfg.beta1, cfg.beta0);
  za.objective_trace.push_back(f_cur);

  bool converged = false;
  int iter = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    detail::nll_gradient_indexed(t, terms, z, cfg.beta1, cfg.beta0, grad_z);
    double gnorm2 = 0.0;
    for (std::size_t f = 0; f < n; ++f) {
      grad_u[f] = grad_z[f] * z[f] * (1.0 - z[f]);
      gnorm2 += grad_u[f] * grad_u[f];
    }
    if (std::sqrt(gnorm2) < cfg.grad_tolerance) {
      converged = true;
      break;
    }
    double step = 1.0;
    bool accepted = false;
    while (step >= 1e-20) {
      for (std::size_t f = 0; f < n; ++f) u_try[f] = u[f] - step * grad_u[f];
      to_z(u_try, z_try);
      double f_try = detail::nll_indexed(t, terms, z_try, cfg.beta1, cfg.beta0);
      if (f_try <= f_cur - 1e-4 * step * gnorm2) {
        u.swap(u_try);
        z.swap(z_try);
        f_cur = f_try;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search stalled at numerical precision
    za.objective_trace.push_back(f_cur);
  }

  za.facts = t.facts;
  za.z.resize(n);
  for (std::size_t f = 0; f < n; ++f) za.z[f] = std::clamp(z[f], delta, 1.0 - delta);
  za.labels.assign(n, 0);
  za.sources.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    for (const auto& [si, o] : t.by_fact[f]) {
      za.sources[f].push_back(t.sources[static_cast<std::size_t>(si)]);
    }
    std::sort(za.sources[f].begin(), za.sources[f].end());
    za.sources[f].erase(std::unique(za.sources[f].begin(), za.sources[f].end()),
                        za.sources[f].end());
  }
  za.objective = f_cur;
  za.iterations = iter;
  za.converged = converged;
  return za;
}

// Exact per-source conjugate marginal versus direct quadrature over omega;
// returns the maximum relative discrepancy. Intended for tiny instances.
inline double conjugacy_check(const TruthAssignment& za,
                              const std::map<std::string, SourceStats>& stats) {
  double worst = 0.0;
  for (const auto& [id, st] : stats) {
    double nu = st.nu;
    double tau2 = st.tau2;
    if (nu <= 0.0 || tau2 <= 0.0) throw ConfigError("conjugacy_check: need nu, tau^2 > 0");
    double n = static_cast<double>(st.claims.size());
    double a = 0.0;
    for (const auto& [fact, obs] : st.claims) {
      double d = za.z_of(fact) - obs;
      a += d * d;
    }
    double log_closed = 0.5 * nu * std::log(0.5 * nu * tau2) - std::lgamma(0.5 * nu) -
                        0.5 * n * std::log(2.0 * std::numbers::pi) + std::lgamma(0.5 * (nu + n)) -
                        0.5 * (nu + n) * std::log(0.5 * (nu * tau2 + a));

    // integrate the normal likelihood times the scaled-inv-chi^2 prior over
    // omega = e^t; the log-integrand is concave with its peak at
    // t* = log(2B / (nu + n)), so split there and stop where the tails have
    // decayed past any effect on the quadrature tolerance
    double b = 0.5 * (nu * tau2 + a);
    double log_c = 0.5 * nu * std::log(0.5 * nu * tau2) - std::lgamma(0.5 * nu) -
                   0.5 * n * std::log(2.0 * std::numbers::pi);
    double t_star = std::log(2.0 * b / (nu + n));
    auto log_integrand = [&](double tt) {
      return log_c - 0.5 * (nu + n) * tt - b * std::exp(-tt);
    };
    double peak = log_integrand(t_star);
    auto integrand = [&](double tt) { return std::exp(log_integrand(tt) - peak); };
    double t_lo = t_star - 1.0;
    while (log_integrand(t_lo) - peak > -45.0) t_lo = t_star - 2.0 * (t_star - t_lo);
    double t_hi = t_star + 1.0;
    while (log_integrand(t_hi) - peak > -45.0) t_hi = t_star + 2.0 * (t_hi - t_star);
    double integral = adaptive_simpson(integrand, t_lo, t_star, 5e-11) +
                      adaptive_simpson(integrand, t_star, t_hi, 5e-11);
    double log_quad = peak + std::log(integral);
    worst = std::max(worst, std::fabs(std::expm1(log_quad - log_closed)));
  }
  return worst;
}

enum class Cardinality { Single, Multi };

// Multi iff at least multi_value_threshold of the popular entities using the
// property hold >= 2 distinct values for it; unused properties default multi.
inline Cardinality predict_cardinality(const KnowledgeBase& kb, const std::string& property,
                                       const std::vector<std::string>& popular_entities,
                                       double threshold = 0.1) {
  int users = 0, multi_users = 0;
  for (const std::string& e : popular_entities) {
    std::set<std::string> values;
    for (const Fact* f : kb.facts_of(e)) {
      if (f->property == property) values.insert(f->object.text);
    }
    if (values.empty()) continue;
    ++users;
    if (values.size() >= 2) ++multi_users;
  }
  if (users == 0) return Cardinality::Multi;
  return (static_cast<double>(multi_users) >= threshold * users) ? Cardinality::Multi
                                                                 : Cardinality::Single;
}

// Threshold labeling for multi-valued properties; argmax-with-threshold for
// single-valued ones (ties to the lexicographically smallest value).
inline void label_facts(TruthAssignment& za, const std::map<std::string, Cardinality>& cardinality,
                        double epsilon) {
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t f = 0; f < za.facts.size(); ++f) {
    groups[{za.facts[f].subject, za.facts[f].property}].push_back(f);
  }
  za.labels.assign(za.facts.size(), 0);
  for (const auto& [key, members] : groups) {
    auto card_it = cardinality.find(key.second);
    Cardinality card = card_it == cardinality.end() ? Cardinality::Multi : card_it->second;
    if (card == Cardinality::Multi) {
      for (std::size_t f : members) za.labels[f] = za.z[f] >= epsilon ? 1 : 0;
    } else {
      std::size_t best = members.front();  // members are in sorted-fact order
      for (std::size_t f : members) {
        if (za.z[f] > za.z[best]) best = f;
      }
      if (za.z[best] >= epsilon) za.labels[best] = 1;
    }
  }
}

// Posterior reliability per source at the inferred z.
inline std::map<std::string, double> source_reliability(
    const std::map<std::string, SourceStats>& stats, const TruthAssignment& za) {
  std::map<std::string, double> out;
  for (const auto& [id, st] : stats) {
    double n = static_cast<double>(st.claims.size());
    double a = 0.0;
    for (const auto& [fact, obs] : st.claims) {
      double d = za.z_of(fact) - obs;
      a += d * d;
    }
    out[id] = (st.nu + n) / (st.nu * st.tau2 + a);
  }
  return out;
}

struct VerifyOutcome {
  TruthAssignment assignment;
  std::map<std::string, SourceStats> stats;
  std::map<std::string, double> reliability;
};

// Full verification pass: majority init -> hyperparameters -> MAP inference,
// optional tau^2 refinement rounds, labeling, posterior reliabilities.
inline VerifyOutcome verify_claims(const std::vector<Claim>& claims,
                                   const std::vector<Fact>& prior_truths,
                                   const std::map<std::string, Cardinality>& cardinality,
                                   const TruthConfig& cfg,
                                   const std::vector<Fact>& fact_universe = {}) {
  cfg.validate();
  if (claims.empty()) throw DataError("verify_claims: empty claim set");
  VerifyOutcome out;
  TruthAssignment zhat = majority_init(claims, cfg.z_clamp);
  out.stats = set_hyperparameters(claims, zhat, prior_truths, cfg);
  out.assignment = infer_truths(claims, out.stats, cfg, fact_universe);
  for (int round = 0; round < cfg.refine_rounds; ++round) {
    out.stats = set_hyperparameters(claims, out.assignment, prior_truths, cfg);
    out.assignment = infer_truths(claims, out.stats, cfg, fact_universe);
  }
  label_facts(out.assignment, cardinality, cfg.epsilon);
  out.reliability = source_reliability(out.stats, out.assignment);
  for (auto& [id, st] : out.stats) st.reliability = out.reliability.at(id);
  return out;
}

}  // namespace kbe
