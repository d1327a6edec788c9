#pragma once

// Experiments behind each subcommand, and `run`, which executes one of them
// against a configuration and writes its outputs plus a manifest.
//
// Exit status: 0 all checks passed, 1 some check failed, 2 configuration error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hyperlat/config.hpp"
#include "hyperlat/diophantine.hpp"
#include "hyperlat/hypgeom.hpp"
#include "hyperlat/io.hpp"
#include "hyperlat/latenum.hpp"
#include "hyperlat/quaternion.hpp"
#include "hyperlat/spectral.hpp"
#include "hyperlat/tracesim.hpp"

namespace hyperlat {

inline constexpr const char* kVersion = "0.1.0";

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::vector<std::pair<std::string, std::string>> files;  // name, content
  std::vector<Check> checks;
  json summary = json::object();

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  void check(std::string name, bool ok, std::string detail = {}) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  }
};

struct RunContext {
  int threads = 1;
  std::filesystem::path cache_dir = "cache";
};

namespace detail {

inline std::string fmt(double v) { return io::fmt_double(v); }

inline double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo > 0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

/// Evaluates fn(i) for i < n on up to `threads` workers; results land by index.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, int threads, Fn fn) {
  std::vector<T> out(n);
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::exception_ptr> errs(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
      } catch (...) {
        errs[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errs) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

inline EnumOptions enum_options(const RunConfig& cfg, const RunContext& ctx) {
  EnumOptions o;
  o.congruence_q = cfg.congruence_q;
  o.node_budget = cfg.enumeration.node_budget;
  o.partitions = std::max(1, ctx.threads);
  return o;
}

inline SplitShape algebra_shape(const RunConfig& cfg) {
  std::vector<RhoParam> rhos;
  for (double p : cfg.algebra.places_split) rhos.push_back(RhoParam::from_value(p));
  return make_split_shape(rhos, 1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// enumerate

inline Report experiment_enumerate(const RunConfig& cfg, const RunContext& ctx) {
  Report rep;
  const auto& A = cfg.algebra;
  const auto& E = cfg.enumeration;
  const auto opt = detail::enum_options(cfg, ctx);
  const auto res = enumerate_units(A, E.R1, E.R2, opt);
  rep.files.emplace_back("elements.csv", elements_csv(res.elements, A));

  std::size_t bad = 0;
  for (const auto& e : res.elements) {
    const bool ok = quat_norm(e.q, A) == QuadInt(1) && is_canonical(e.coords) && e.t1 <= E.R1 + kRadiusSlack &&
                    e.t2 <= E.R2 + kRadiusSlack && (!cfg.congruence_q || congruence_test(e.q, *cfg.congruence_q));
    if (!ok) ++bad;
  }
  rep.check("element invariants", bad == 0, std::to_string(bad) + " of " + std::to_string(res.elements.size()) +
                                                " elements violate norm, sign or radius constraints");

  // Growth: every unit with t1 + t2 <= S.
  const auto ball = enumerate_sum_ball(A, E.growth_S, E.growth_slices, opt);
  const auto hs = histogram_from(ball, RadiusStatistic::Sum, E.growth_S, E.growth_bins);
  const auto hm = histogram_from(ball, RadiusStatistic::Max, E.growth_S, E.growth_bins);
  std::ostringstream g;
  g << "edge,count_sum,count_max\n";
  for (std::size_t k = 0; k < hs.edges.size(); ++k) {
    // max(t1, t2) <= m is complete inside the sum ball only while 2m <= S.
    const bool max_complete = 2.0 * hm.edges[k] <= E.growth_S + kRadiusSlack;
    g << detail::fmt(hs.edges[k]) << ',' << hs.cumulative[k] << ','
      << (max_complete ? std::to_string(hm.cumulative[k]) : std::string()) << '\n';
  }
  rep.files.emplace_back("growth.csv", g.str());
  const auto fit = fit_growth_exponent(hs, E.growth_fit_from);
  rep.check("growth exponent in [0.7, 1.3]", fit.slope >= 0.7 && fit.slope <= 1.3,
            "slope " + detail::fmt(fit.slope) + " over " + std::to_string(fit.points) + " bins");

  rep.summary = {{"count", res.elements.size()},
                 {"nodes", res.nodes},
                 {"R1", E.R1},
                 {"R2", E.R2},
                 {"growth", {{"S", E.growth_S}, {"units_in_sum_ball", ball.size()}, {"fit_from", E.growth_fit_from},
                             {"slope", fit.slope}, {"intercept", fit.intercept}}}};
  return rep;
}

// ---------------------------------------------------------------------------
// approx / exponent

inline ApproxIndex load_approx_index(const RunConfig& cfg, const RunContext& ctx) {
  const auto& D = cfg.diophantine;
  auto opt = detail::enum_options(cfg, ctx);
  opt.node_budget = D.node_budget;
  auto els = cached_enumeration(cfg.algebra, D.R1_cover, D.Rmax, opt, ctx.cache_dir);
  return ApproxIndex(std::move(els), D.R1_cover, D.Rmax);
}

inline json point_json(const HypPoint& p) { return json::array({p.x(), p.height}); }

inline Report experiment_approx(const RunConfig& cfg, const RunContext& ctx) {
  Report rep;
  const auto& D = cfg.diophantine;
  const auto index = load_approx_index(cfg, ctx);
  const auto res = approx_search(D.x, D.y, D.eps, D.Rmax, index);
  json out = {{"x", point_json(D.x)}, {"y", point_json(D.y)}, {"eps", D.eps}, {"Rmax", D.Rmax},
              {"found", res.has_value()}};
  if (res) {
    json coords = json::array();
    for (Int v : res->gamma.coords) coords.push_back(to_string(v));
    out["R_found"] = res->R_found;
    out["t1"] = res->gamma.t1;
    out["achieved_d1"] = res->achieved_d1;
    out["coords"] = coords;
    const bool ok = verify_solution(*res, D.x, D.y, D.Rmax, cfg.algebra);
    out["verified"] = ok;
    rep.check("solution satisfies both inequalities", ok);
  }
  rep.files.emplace_back("approx.json", out.dump(2) + "\n");
  rep.summary = out;
  return rep;
}

struct ExponentRun {
  std::vector<ExponentEstimate> estimates;
  std::optional<LineFit> pooled;
  double median_pair_slope = std::nan("");
  double lower_bound_fraction = 0.0;
  std::size_t invalid = 0, non_monotone = 0, flagged = 0;
  double kappa = 0.0;
};

inline ExponentRun exponent_run(const RunConfig& cfg, const ApproxIndex& index, int threads) {
  const auto& D = cfg.diophantine;
  std::mt19937_64 rng(D.seed);
  std::vector<std::pair<HypPoint, HypPoint>> pairs;
  for (int i = 0; i < D.pairs; ++i) {
    const HypPoint x = sample_window(rng, D.window);
    const HypPoint y = sample_window(rng, D.window);
    pairs.emplace_back(x, y);
  }
  ExponentRun run;
  run.estimates = detail::parallel_map<ExponentEstimate>(pairs.size(), threads, [&](std::size_t i) {
    return exponent_estimate(pairs[i].first, pairs[i].second, D.eps_list, D.Rmax, index);
  });
  std::vector<double> slopes;
  for (const auto& e : run.estimates) {
    if (e.fit) slopes.push_back(e.fit->slope);
    if (!is_monotone(e)) ++run.non_monotone;
    for (const auto& p : e.points) {
      if (!p.result) {
        ++run.flagged;
        continue;
      }
      if (!verify_solution(*p.result, e.x, e.y, D.Rmax, cfg.algebra)) ++run.invalid;
    }
  }
  if (!slopes.empty()) {
    std::sort(slopes.begin(), slopes.end());
    const std::size_t n = slopes.size();
    run.median_pair_slope = n % 2 ? slopes[n / 2] : 0.5 * (slopes[n / 2 - 1] + slopes[n / 2]);
  }
  try {
    run.pooled = pooled_exponent(run.estimates);
  } catch (const DomainError&) {
  }
  run.kappa = pigeonhole_exponent(detail::algebra_shape(cfg));
  run.lower_bound_fraction = lower_bound_violation_fraction(run.estimates, run.kappa);
  return run;
}

inline Report experiment_exponent(const RunConfig& cfg, const RunContext& ctx) {
  Report rep;
  const auto& D = cfg.diophantine;
  const auto index = load_approx_index(cfg, ctx);
  const ExponentRun run = exponent_run(cfg, index, ctx.threads);
  rep.files.emplace_back("exponent.csv", exponent_csv(run.estimates));

  std::size_t found = 0, total = 0;
  for (const auto& e : run.estimates) {
    for (const auto& p : e.points) total += 1, found += p.result ? 1 : 0;
  }
  rep.check("every solution satisfies both inequalities", run.invalid == 0,
            std::to_string(run.invalid) + " invalid of " + std::to_string(found));
  rep.check("R_found monotone in eps", run.non_monotone == 0,
            std::to_string(run.non_monotone) + " pairs not monotone");
  const double zeta = run.pooled ? run.pooled->slope : std::nan("");
  rep.check("pooled zeta-hat inside band", run.pooled && zeta >= D.band_lo && zeta <= D.band_hi,
            "zeta-hat " + detail::fmt(zeta) + ", band [" + detail::fmt(D.band_lo) + ", " + detail::fmt(D.band_hi) + "]");
  rep.check("lower-bound violations within limit", run.lower_bound_fraction <= D.lower_bound_fraction,
            "fraction " + detail::fmt(run.lower_bound_fraction) + " of found points below (kappa - 0.5) log(1/eps)");

  json warnings = json::array();
  for (const auto& e : run.estimates) {
    for (const auto& w : e.warnings) warnings.push_back(w);
  }
  rep.summary = {{"pairs", D.pairs},
                 {"eps_list", D.eps_list},
                 {"points", total},
                 {"found", found},
                 {"flagged", run.flagged},
                 {"kappa", run.kappa},
                 {"zeta_hat_pooled", zeta},
                 {"pooled_rms_residual", run.pooled ? run.pooled->rms_residual : std::nan("")},
                 {"zeta_hat_median_pair", run.median_pair_slope},
                 {"lower_bound_fraction", run.lower_bound_fraction},
                 {"coverage", {{"R1", D.R1_cover}, {"R2", D.Rmax}, {"elements", index.elements().size()}}},
                 {"warnings", warnings}};
  rep.files.emplace_back("exponent_summary.json", rep.summary.dump(2) + "\n");
  return rep;
}

// ---------------------------------------------------------------------------
// volumes

inline Report experiment_volumes(const RunConfig& cfg, const RunContext&) {
  Report rep;
  const SplitShape shape = detail::algebra_shape(cfg);
  std::vector<double> Rs;
  for (int i = 1; i <= 40; ++i) Rs.push_back(0.25 * i);
  Rs.push_back(2.0 * std::numbers::ln2);
  std::sort(Rs.begin(), Rs.end());

  std::ostringstream out;
  out << "R,ball_volume_rho_half,ball_volume_rho_one,r_schedule,balance\n";
  std::vector<double> balance;
  double r_at_2ln2 = 0;
  for (double R : Rs) {
    const double r = schedule_r(R, shape);
    const double b = volume_balance(R, shape);
    out << detail::fmt(R) << ',' << detail::fmt(ball_volume(RhoParam::real(), R)) << ','
        << detail::fmt(ball_volume(RhoParam::complex(), R)) << ',' << detail::fmt(r) << ',' << detail::fmt(b) << '\n';
    if (R >= 2.0 && R <= 8.0) balance.push_back(b);
    if (R == 2.0 * std::numbers::ln2) r_at_2ln2 = r;
  }
  rep.files.emplace_back("volumes.csv", out.str());
  const double sp = detail::spread(balance);
  rep.check("volume balance within factor 10 on [2, 8]", sp <= 10.0, "max/min " + detail::fmt(sp));
  rep.check("schedule r(2 ln 2) = 1/2", std::abs(r_at_2ln2 - 0.5) <= 1e-12, detail::fmt(r_at_2ln2));
  rep.summary = {{"d_1k", shape.d_1k}, {"a_k1l", shape.a_k1l}, {"kappa", pigeonhole_exponent(shape)},
                 {"balance_spread", sp}};
  return rep;
}

// ---------------------------------------------------------------------------
// spherical

struct SphericalChecks {
  double trivial_max_dev = 0;       // |phi_{1/2} - 1|
  double iwasawa_max_rel = 0;       // Cartan vs Iwasawa
  double closed_form_max_dev = 0;   // rho = 1 quadrature vs closed form
  double tempered_max_abs = 0;      // sup |phi_{i tau}|
  std::string phi_csv, transform_csv;
};

inline SphericalChecks spherical_run(const RunConfig& cfg, int threads) {
  SphericalChecks out;
  const double dp = cfg.spectral.delta_prime;
  std::vector<double> ts;
  for (int i = 0; i <= 40; ++i) ts.push_back(0.25 * i);
  const std::vector<double> taus = {0.0, 0.5, 1.0, 2.0, 4.0, 8.0};

  std::ostringstream phi;
  phi << "rho,sigma,tau,t,phi_re,phi_im,closed_re,closed_im\n";
  for (RhoParam rho : {RhoParam::real(), RhoParam::complex()}) {
    struct Row {
      double sigma, tau, t;
      cplx v, closed;
    };
    std::vector<std::pair<double, double>> params = {{0.5, 0.0}};
    for (double tau : taus) params.emplace_back(0.0, tau);
    std::vector<std::tuple<double, double, double>> jobs;
    for (auto [s, tau] : params) {
      for (double t : ts) jobs.emplace_back(s, tau, t);
    }
    const auto rows = detail::parallel_map<Row>(jobs.size(), threads, [&](std::size_t i) {
      const auto [s, tau, t] = jobs[i];
      const SphericalParam z{s, tau, rho};
      const cplx v = spherical_phi(z, t);
      const cplx closed = rho.is_real() ? cplx(std::nan(""), std::nan("")) : spherical_phi_rho1_closed(z.z(), t);
      return Row{s, tau, t, v, closed};
    });
    for (const auto& r : rows) {
      phi << rho.value() << ',' << detail::fmt(r.sigma) << ',' << detail::fmt(r.tau) << ',' << detail::fmt(r.t) << ','
          << detail::fmt(r.v.real()) << ',' << detail::fmt(r.v.imag()) << ',' << detail::fmt(r.closed.real()) << ','
          << detail::fmt(r.closed.imag()) << '\n';
      if (r.sigma == 0.5) out.trivial_max_dev = std::max(out.trivial_max_dev, std::abs(r.v - 1.0));
      if (r.sigma == 0.0) out.tempered_max_abs = std::max(out.tempered_max_abs, std::abs(r.v));
      if (!rho.is_real()) out.closed_form_max_dev = std::max(out.closed_form_max_dev, std::abs(r.v - r.closed));
    }
  }
  out.phi_csv = phi.str();

  std::ostringstream tr;
  tr << "r,tau,cartan_re,cartan_im,iwasawa_re,iwasawa_im,rel_diff\n";
  const int npts = cfg.spectral.iwasawa_points;
  for (double r : cfg.spectral.iwasawa_r) {
    const RadialProfile w = omega_profile(RhoParam::real(), r, dp);
    struct Row {
      double tau;
      cplx c, i;
    };
    const auto rows = detail::parallel_map<Row>(static_cast<std::size_t>(npts), threads, [&](std::size_t k) {
      const double tau = (15.0 / r) * static_cast<double>(k) / (npts - 1);
      const SphericalParam z = SphericalParam::tempered(tau, RhoParam::real());
      return Row{tau, transform_cartan(w, z), transform_iwasawa(dp, r, z)};
    });
    for (const auto& row : rows) {
      const double rel = std::abs(row.c - row.i) / std::max(std::abs(row.c), std::abs(row.i));
      out.iwasawa_max_rel = std::max(out.iwasawa_max_rel, rel);
      tr << detail::fmt(r) << ',' << detail::fmt(row.tau) << ',' << detail::fmt(row.c.real()) << ','
         << detail::fmt(row.c.imag()) << ',' << detail::fmt(row.i.real()) << ',' << detail::fmt(row.i.imag()) << ','
         << detail::fmt(rel) << '\n';
    }
  }
  out.transform_csv = tr.str();
  return out;
}

inline Report experiment_spherical(const RunConfig& cfg, const RunContext& ctx) {
  Report rep;
  const auto s = spherical_run(cfg, ctx.threads);
  rep.files.emplace_back("spherical.csv", s.phi_csv);
  rep.files.emplace_back("transforms.csv", s.transform_csv);
  rep.check("phi_{1/2} = 1 to 1e-8", s.trivial_max_dev <= 1e-8, detail::fmt(s.trivial_max_dev));
  rep.check("Cartan and Iwasawa transforms agree to 1e-6", s.iwasawa_max_rel <= 1e-6, detail::fmt(s.iwasawa_max_rel));
  rep.check("rho = 1 quadrature matches closed form to 1e-8", s.closed_form_max_dev <= 1e-8,
            detail::fmt(s.closed_form_max_dev));
  rep.check("|phi| <= 1 on the tempered axis", s.tempered_max_abs <= 1.0 + 1e-12, detail::fmt(s.tempered_max_abs));
  rep.summary = {{"trivial_max_dev", s.trivial_max_dev},
                 {"iwasawa_max_rel", s.iwasawa_max_rel},
                 {"closed_form_max_dev", s.closed_form_max_dev},
                 {"tempered_max_abs", s.tempered_max_abs}};
  return rep;
}

// ---------------------------------------------------------------------------
// decay

struct DecayRow {
  std::string family;
  double rho = 0, sigma = 0, scale_param = 0;
  int N = 0;
  double C = 0;
};

struct MassRow {
  double rho = 0, R = 0, integral = 0, low_ratio = 0, up_ratio = 0;
};

struct DecayRun {
  std::vector<DecayRow> rows;
  std::vector<MassRow> mass;
  std::string curves_csv;
  // (family, rho, N, sigma) -> max/min of C over the scale grid
  std::vector<std::pair<std::string, double>> stability;
  double C_low = 0, C_up = 0, ext_low = 0, ext_up = 0;
};

inline DecayRun decay_run(const RunConfig& cfg, int threads) {
  const auto& S = cfg.spectral;
  const double dp = S.delta_prime;
  DecayRun run;
  std::ostringstream curves;
  curves << "family,rho,sigma,scale_param,tau,abs_transform\n";

  struct Series {
    std::string family;
    RhoParam rho;
    double sigma, scale_param, scale, normalizer;
    std::vector<DecaySample> samples;
  };
  std::vector<Series> series;
  for (RhoParam rho : {RhoParam::real(), RhoParam::complex()}) {
    const double d = 2.0 * rho.value() + 1.0;
    for (double r : S.r_list) series.push_back({"f1", rho, 0.0, r, r, std::pow(r, d / 2.0), {}});
    for (double sg : S.sigma_lines) {
      for (double r : S.r_list) series.push_back({"omega", rho, sg, r, r, 1.0, {}});
    }
    for (double R : S.R_list) series.push_back({"f2", rho, 0.0, R, R, 1.0, {}});
  }
  // One job per (series, tau) pair keeps the workers busy.
  std::vector<std::pair<std::size_t, double>> jobs;
  for (std::size_t i = 0; i < series.size(); ++i) {
    for (double tau : decay_tau_grid(series[i].scale, S.grid)) jobs.emplace_back(i, tau);
  }
  const auto vals = detail::parallel_map<double>(jobs.size(), threads, [&](std::size_t j) {
    const auto& s = series[jobs[j].first];
    const SphericalParam z{s.sigma, jobs[j].second, s.rho};
    if (s.family == "f2") return std::abs(f2_transform(s.scale_param, z, dp));
    const RadialProfile p = s.family == "f1" ? f1_profile(s.rho, s.scale_param, dp) : omega_profile(s.rho, s.scale_param, dp);
    return std::abs(transform_cartan(p, z));
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    auto& s = series[jobs[j].first];
    s.samples.push_back({jobs[j].second, vals[j]});
    curves << s.family << ',' << s.rho.value() << ',' << detail::fmt(s.sigma) << ',' << detail::fmt(s.scale_param) << ','
           << detail::fmt(jobs[j].second) << ',' << detail::fmt(vals[j]) << '\n';
  }
  run.curves_csv = curves.str();

  for (int N : S.N_list) {
    for (const auto& s : series) {
      run.rows.push_back({s.family, s.rho.value(), s.sigma, s.scale_param, N,
                          decay_constant(s.samples, s.scale, N, s.normalizer)});
    }
  }
  // Group by everything except the scale parameter.
  std::vector<std::string> keys;
  std::vector<std::vector<double>> groups;
  for (const auto& row : run.rows) {
    const std::string key = row.family + " rho=" + detail::fmt(row.rho) + " N=" + std::to_string(row.N) +
                            (row.family == "omega" ? " sigma=" + detail::fmt(row.sigma) : "");
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      groups.push_back({row.C});
    } else {
      groups[static_cast<std::size_t>(it - keys.begin())].push_back(row.C);
    }
  }
  for (std::size_t i = 0; i < keys.size(); ++i) run.stability.emplace_back(keys[i], detail::spread(groups[i]));

  // Mass bounds of f_{2,R}: constants fitted on R_list, then checked on the extension.
  for (RhoParam rho : {RhoParam::real(), RhoParam::complex()}) {
    std::vector<double> Rs = S.R_list;
    Rs.insert(Rs.end(), S.mass_R_extension.begin(), S.mass_R_extension.end());
    std::sort(Rs.begin(), Rs.end());
    Rs.erase(std::unique(Rs.begin(), Rs.end()), Rs.end());
    for (double R : Rs) {
      const double I = f2_integral(R, rho, dp);
      const double rr = rho.value();
      run.mass.push_back({rr, R, I, std::exp((1.0 - dp) * rr * R) / I, I / std::exp(rr * R)});
    }
  }
  auto in_fit = [&](double R) { return std::find(S.R_list.begin(), S.R_list.end(), R) != S.R_list.end(); };
  for (const auto& m : run.mass) {
    if (in_fit(m.R)) {
      run.C_low = std::max(run.C_low, m.low_ratio);
      run.C_up = std::max(run.C_up, m.up_ratio);
    }
    run.ext_low = std::max(run.ext_low, m.low_ratio);
    run.ext_up = std::max(run.ext_up, m.up_ratio);
  }
  return run;
}

inline Report experiment_decay(const RunConfig& cfg, const RunContext& ctx) {
  Report rep;
  const auto run = decay_run(cfg, ctx.threads);
  std::ostringstream table;
  table << "family,rho,sigma,scale_param,N,C\n";
  for (const auto& r : run.rows) {
    table << r.family << ',' << detail::fmt(r.rho) << ',' << detail::fmt(r.sigma) << ',' << detail::fmt(r.scale_param)
          << ',' << r.N << ',' << detail::fmt(r.C) << '\n';
  }
  rep.files.emplace_back("decay.csv", table.str());
  rep.files.emplace_back("decay_curves.csv", run.curves_csv);
  std::ostringstream mass;
  mass << "rho,R,f2_integral,low_ratio,up_ratio\n";
  for (const auto& m : run.mass) {
    mass << detail::fmt(m.rho) << ',' << detail::fmt(m.R) << ',' << detail::fmt(m.integral) << ','
         << detail::fmt(m.low_ratio) << ',' << detail::fmt(m.up_ratio) << '\n';
  }
  rep.files.emplace_back("f2_mass.csv", mass.str());

  const double factor = cfg.spectral.stability_factor;
  json stab = json::object();
  for (const auto& [key, sp] : run.stability) {
    rep.check("decay constant stable: " + key, sp <= factor, "max/min " + detail::fmt(sp));
    stab[key] = sp;
  }
  rep.check("f2 mass lower constant uniform", run.ext_low <= 3.0 * run.C_low,
            "C " + detail::fmt(run.C_low) + ", sup over extension " + detail::fmt(run.ext_low));
  rep.check("f2 mass upper constant uniform", run.ext_up <= 3.0 * run.C_up,
            "C' " + detail::fmt(run.C_up) + ", sup over extension " + detail::fmt(run.ext_up));
  rep.summary = {{"stability", stab},
                 {"f2_mass", {{"C", run.C_low}, {"C_prime", run.C_up}, {"sup_low", run.ext_low}, {"sup_up", run.ext_up}}}};
  return rep;
}

// ---------------------------------------------------------------------------
// tracesim

inline Report experiment_tracesim(const RunConfig& cfg, const RunContext&) {
  Report rep;
  const auto& T = cfg.trace;
  SynthOptions so;
  so.T_max = T.T_max;
  so.tempered_T = T.tempered_T;
  so.gap = T.gap;
  const auto spec = synth_spectrum(T.seed, T.dims, so);
  rep.files.emplace_back("spectrum.jsonl", spectrum_jsonl(spec.atoms));

  bool gap_ok = true;
  for (const auto& a : spec.atoms) {
    for (const auto& p : a.params) {
      if (!p.principal && !(p.value > 0 && p.value <= 0.5 - T.gap)) gap_ok = false;
    }
  }
  rep.check("spectral gap respected", gap_ok);
  const std::string violation = density_grid_violation(spec.atoms, T.dims, T.T_max, so.C, so.delta);
  rep.check("density bound on the verification grid", violation.empty(), violation);

  const auto ts = trace_scaling(spec.atoms, T.R_list, T.N, T.dims, T.k);
  rep.files.emplace_back("trace.csv", trace_scaling_csv(ts));
  std::ostringstream parts;
  parts << "R,partition,contribution\n";
  for (const auto& row : ts.rows) {
    for (const auto& [P, v] : row.sum.by_partition) {
      parts << detail::fmt(row.R) << ',' << to_string(P) << ',' << detail::fmt(v) << '\n';
    }
  }
  rep.files.emplace_back("trace_partitions.csv", parts.str());
  rep.check("trace growth exponent within limit", ts.growth_exponent <= T.growth_limit,
            "fitted " + detail::fmt(ts.growth_exponent) + ", limit " + detail::fmt(T.growth_limit));
  rep.check("worst-case partition dominates", ts.worst_case_dominates,
            to_string(worst_case_partition(T.k, T.ell)));

  // One-dimensional bounds of the small-side integrals.
  std::ostringstream oned;
  oned << "d,m,r,ratio\n";
  double worst = 0;
  for (int d : {2, 3}) {
    for (double m : {0.1, 0.25, 0.4}) {
      std::vector<double> ratios;
      for (double r : {0.1, 0.01}) {
        const double q = small_side_integral_ratio(d, m, r, T.N);
        ratios.push_back(q);
        oned << d << ',' << detail::fmt(m) << ',' << detail::fmt(r) << ',' << detail::fmt(q) << '\n';
      }
      worst = std::max(worst, detail::spread(ratios));
    }
  }
  rep.files.emplace_back("integral_bounds.csv", oned.str());
  rep.check("one-dimensional integral bounds uniform within factor 5", worst <= 5.0, "max/min " + detail::fmt(worst));

  json rows = json::array();
  for (const auto& row : ts.rows) rows.push_back({{"R", row.R}, {"r", row.r}, {"trace_sum", row.sum.total}});
  rep.summary = {{"atoms", spec.atoms.size()},
                 {"thinning", spec.thinning},
                 {"growth_exponent", ts.growth_exponent},
                 {"worst_case_dominates", ts.worst_case_dominates},
                 {"rows", rows}};
  rep.files.emplace_back("trace.json", rep.summary.dump(2) + "\n");
  return rep;
}

// ---------------------------------------------------------------------------
// zaremba

struct ZarembaInstance {
  std::size_t dim = 1;
  double lhs = 0, rhs = 0;
};

/// Random atomic phi (some atoms outside the box) and random polynomial f.
inline std::vector<ZarembaInstance> zaremba_instances(std::uint64_t seed, const std::vector<int>& counts) {
  std::mt19937_64 rng(seed);
  std::vector<ZarembaInstance> out;
  for (std::size_t dim = 1; dim <= counts.size(); ++dim) {
    for (int n = 0; n < counts[dim - 1]; ++n) {
      Box box;
      for (std::size_t j = 0; j < dim; ++j) {
        const double lo = -1.0 + uniform01(rng), hi = lo + 0.5 + 1.5 * uniform01(rng);
        box.lo.push_back(lo);
        box.hi.push_back(hi);
      }
      AtomicPhi phi;
      const int atoms = 1 + static_cast<int>(rng() % 8);
      for (int a = 0; a < atoms; ++a) {
        std::vector<double> loc;
        for (std::size_t j = 0; j < dim; ++j) {
          const double w = box.hi[j] - box.lo[j];
          loc.push_back(box.lo[j] - 0.2 * w + 1.4 * w * uniform01(rng));
        }
        phi.loc.push_back(loc);
        phi.mass.push_back(-1.0 + 2.0 * uniform01(rng));
      }
      std::vector<PolyTerm> terms;
      for (int t = 0; t < 3; ++t) {
        PolyTerm term;
        term.coef = -1.0 + 2.0 * uniform01(rng);
        for (std::size_t j = 0; j < dim; ++j) {
          std::vector<double> c;
          for (int p = 0; p < 4; ++p) c.push_back(-1.0 + 2.0 * uniform01(rng));
          term.factors.push_back(c);
        }
        terms.push_back(term);
      }
      const SmoothFn f = polynomial_fn(terms, dim);
      out.push_back({dim, stieltjes_integrate(f, phi, box), zaremba_rhs(f, phi, box)});
    }
  }
  return out;
}

inline Report experiment_zaremba(const RunConfig& cfg, const RunContext&) {
  Report rep;
  const auto& Z = cfg.zaremba;
  const auto inst = zaremba_instances(Z.seed, Z.instances);
  std::ostringstream out;
  out << "dim,lhs,rhs,abs_diff\n";
  double worst = 0;
  for (const auto& i : inst) {
    const double diff = std::abs(i.lhs - i.rhs);
    worst = std::max(worst, diff / std::max(1.0, std::abs(i.lhs)));
    out << i.dim << ',' << detail::fmt(i.lhs) << ',' << detail::fmt(i.rhs) << ',' << detail::fmt(diff) << '\n';
  }
  rep.files.emplace_back("zaremba.csv", out.str());
  rep.check("Zaremba identity", worst <= Z.tolerance, "max deviation " + detail::fmt(worst));
  rep.summary = {{"instances", inst.size()}, {"max_deviation", worst}, {"result", worst <= Z.tolerance ? "PASS" : "FAIL"}};
  return rep;
}

// ---------------------------------------------------------------------------
// Orchestration.

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s = {"enumerate", "approx", "exponent", "volumes",
                                             "spherical", "decay",  "tracesim", "zaremba"};
  return s;
}

inline Report run_experiment(const std::string& sub, const RunConfig& cfg, const RunContext& ctx) {
  if (sub == "enumerate") return experiment_enumerate(cfg, ctx);
  if (sub == "approx") return experiment_approx(cfg, ctx);
  if (sub == "exponent") return experiment_exponent(cfg, ctx);
  if (sub == "volumes") return experiment_volumes(cfg, ctx);
  if (sub == "spherical") return experiment_spherical(cfg, ctx);
  if (sub == "decay") return experiment_decay(cfg, ctx);
  if (sub == "tracesim") return experiment_tracesim(cfg, ctx);
  if (sub == "zaremba") return experiment_zaremba(cfg, ctx);
  throw ConfigError("unknown subcommand '" + sub + "'");
}

struct RunOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<std::filesystem::path> cache_dir;  // default: <out>/cache
};

/// Runs one subcommand and writes `<out>/<subcommand>/...` plus manifest.json.
inline int run(const std::string& sub, const RunOptions& opt, std::ostream& log = std::cerr) {
  RunConfig cfg;
  try {
    ConfigOverrides ov;
    ov.seed = opt.seed;
    ov.node_budget = node_budget_from_env();
    cfg = load_config(opt.config, ov);
    if (std::find(subcommands().begin(), subcommands().end(), sub) == subcommands().end()) {
      throw ConfigError("unknown subcommand '" + sub + "'");
    }
    if (opt.threads < 1) throw ConfigError("--threads must be at least 1");
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return 2;
  }

  RunContext ctx;
  ctx.threads = opt.threads;
  ctx.cache_dir = opt.cache_dir ? *opt.cache_dir : opt.out / "cache";
  const auto dir = opt.out / sub;

  Report rep;
  try {
    rep = run_experiment(sub, cfg, ctx);
  } catch (const ConfigError& e) {
    log << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const EnumerationBudgetExceeded& e) {
    log << sub << ": " << e.what() << " (" << e.partial_elements.size() << " elements found before stopping)\n";
    return 1;
  } catch (const Error& e) {
    log << sub << ": " << e.what() << '\n';
    return 1;
  }

  json files = json::array();
  for (const auto& [name, content] : rep.files) {
    io::write_atomic(dir / name, content);
    files.push_back({{"name", name}, {"fnv1a", io::hex64(io::fnv1a(content))}});
  }
  json checks = json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name}, {"status", c.passed ? "PASS" : "FAIL"}, {"detail", c.detail}});
    log << sub << ": " << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")")
        << '\n';
  }
  const json manifest = {{"subcommand", sub},
                         {"status", rep.passed() ? "PASS" : "FAIL"},
                         {"config_hash", cfg.hash()},
                         {"config", cfg.doc},
                         {"versions", {{"hyperlat", kVersion}, {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                                               std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                                               std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
                         {"checks", checks},
                         {"files", files},
                         {"summary", rep.summary}};
  io::write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return rep.passed() ? 0 : 1;
}

}  // namespace hyperlat
