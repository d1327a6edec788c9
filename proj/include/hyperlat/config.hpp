#pragma once

// Run configuration: a JSON document merged over embedded defaults. Keys not
// present in the defaults are rejected, and every value is type-checked.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyperlat/diophantine.hpp"
#include "hyperlat/error.hpp"
#include "hyperlat/io.hpp"
#include "hyperlat/numberfield.hpp"
#include "hyperlat/quaternion.hpp"

namespace hyperlat {

using json = nlohmann::json;

inline const json& default_config() {
  static const json d = json::parse(R"({
    "field": {"D": 17},
    "algebra": {"u": 3, "v": 5, "places": [0.5, 0.5]},
    "congruence": {"q": null},
    "enumeration": {
      "R1": 4.0, "R2": 4.0, "node_budget": 100000000,
      "growth_S": 14.0, "growth_slices": 8, "growth_bins": 28, "growth_fit_from": 8.0
    },
    "diophantine": {
      "eps_list": [0.5, 0.25, 0.125, 0.0625, 0.03125],
      "window": [-1.0, 1.0, 0.5, 2.0],
      "seed": 20240601,
      "pairs": 20,
      "R1_cover": 3.5,
      "Rmax": 18.0,
      "node_budget": 1000000000,
      "x": [0.0, 1.0],
      "y": [0.5, 1.0],
      "eps": 0.05,
      "band": [1.4, 3.0],
      "lower_bound_fraction": 0.1
    },
    "spectral": {
      "delta_prime": 0.1,
      "grid": 64,
      "r_list": [0.5, 0.1, 0.02],
      "R_list": [2.0, 4.0, 8.0],
      "N_list": [2, 4],
      "sigma_lines": [0.0, 0.25, 0.5],
      "B": 0.5,
      "stability_factor": 3.0,
      "iwasawa_r": [1.0, 0.3, 0.1],
      "iwasawa_points": 20,
      "mass_R_extension": [1.0, 16.0, 32.0, 64.0]
    },
    "trace": {
      "N": 4, "ell": 2, "k": 1, "dims": [2, 2], "seed": 7,
      "R_list": [4.0, 6.0, 8.0, 10.0],
      "T_max": 1000.0, "tempered_T": 20.0, "gap": 0.1,
      "growth_limit": 0.5
    },
    "zaremba": {"seed": 11, "instances": [100, 20, 20], "tolerance": 1e-9}
  })");
  return d;
}

struct RunConfig {
  json doc;  // fully resolved, echoed into manifests
  AlgebraDesc algebra;
  std::optional<Int> congruence_q;

  struct {
    double R1, R2;
    std::uint64_t node_budget;
    double growth_S;
    int growth_slices, growth_bins;
    double growth_fit_from;
  } enumeration{};

  struct {
    std::vector<double> eps_list;
    Window window;
    std::uint64_t seed;
    int pairs;
    double R1_cover, Rmax;
    std::uint64_t node_budget;  // coverage enumeration behind approx / exponent
    HypPoint x, y;
    double eps;
    double band_lo, band_hi;
    double lower_bound_fraction;
  } diophantine{};

  struct {
    double delta_prime;
    int grid;
    std::vector<double> r_list, R_list;
    std::vector<int> N_list;
    std::vector<double> sigma_lines;
    double B;
    double stability_factor;
    std::vector<double> iwasawa_r;
    int iwasawa_points;
    std::vector<double> mass_R_extension;
  } spectral{};

  struct {
    int N, ell, k;
    std::vector<int> dims;
    std::uint64_t seed;
    std::vector<double> R_list;
    double T_max, tempered_T, gap;
    double growth_limit;
  } trace{};

  struct {
    std::uint64_t seed;
    std::vector<int> instances;
    double tolerance;
  } zaremba{};

  std::string hash() const { return io::hex64(io::fnv1a(doc.dump())); }
};

namespace detail {

inline void merge_checked(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config: '" + path + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

template <class T>
T get_as(const json& doc, const std::string& path) {
  const json* node = &doc;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    node = &node->at(part);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!node->is_number()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!node->is_number_integer()) throw ConfigError("");
    }
    return node->get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config: '" + path + "' has the wrong type (" + node->dump() + ")");
  }
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

}  // namespace detail

/// Validates a resolved document and builds the typed view.
inline RunConfig resolve_config(const json& doc) {
  using detail::get_as;
  using detail::require;
  RunConfig c;
  c.doc = doc;

  const auto D = get_as<std::int64_t>(doc, "field.D");
  const FieldDesc F = make_field(D);
  c.algebra = make_algebra(F, get_as<std::int64_t>(doc, "algebra.u"), get_as<std::int64_t>(doc, "algebra.v"),
                           get_as<std::vector<double>>(doc, "algebra.places"));
  if (!doc.at("congruence").at("q").is_null()) {
    const auto q = get_as<std::int64_t>(doc, "congruence.q");
    require(q >= 1, "congruence.q must be a positive integer or null");
    c.congruence_q = static_cast<Int>(q);
  }

  auto& e = c.enumeration;
  e.R1 = get_as<double>(doc, "enumeration.R1");
  e.R2 = get_as<double>(doc, "enumeration.R2");
  e.node_budget = get_as<std::uint64_t>(doc, "enumeration.node_budget");
  e.growth_S = get_as<double>(doc, "enumeration.growth_S");
  e.growth_slices = get_as<int>(doc, "enumeration.growth_slices");
  e.growth_bins = get_as<int>(doc, "enumeration.growth_bins");
  e.growth_fit_from = get_as<double>(doc, "enumeration.growth_fit_from");
  require(e.R1 >= 0 && e.R2 >= 0, "enumeration radii must be >= 0");
  require(e.node_budget > 0, "enumeration.node_budget must be positive");
  require(e.growth_S > 0 && e.growth_slices >= 1 && e.growth_bins >= 2, "bad growth histogram settings");

  auto& d = c.diophantine;
  d.eps_list = get_as<std::vector<double>>(doc, "diophantine.eps_list");
  require(d.eps_list.size() >= 3, "diophantine.eps_list needs at least three values");
  for (std::size_t i = 0; i < d.eps_list.size(); ++i) {
    require(d.eps_list[i] > 0, "diophantine.eps_list values must be positive");
    if (i) require(d.eps_list[i] < d.eps_list[i - 1], "diophantine.eps_list must be decreasing");
  }
  const auto w = get_as<std::vector<double>>(doc, "diophantine.window");
  require(w.size() == 4 && w[0] < w[1] && w[2] > 0 && w[2] < w[3],
          "diophantine.window must be [x_lo, x_hi, y_lo, y_hi] with 0 < y_lo < y_hi");
  d.window = {w[0], w[1], w[2], w[3]};
  d.seed = get_as<std::uint64_t>(doc, "diophantine.seed");
  d.pairs = get_as<int>(doc, "diophantine.pairs");
  require(d.pairs >= 1, "diophantine.pairs must be positive");
  d.R1_cover = get_as<double>(doc, "diophantine.R1_cover");
  d.Rmax = get_as<double>(doc, "diophantine.Rmax");
  d.node_budget = get_as<std::uint64_t>(doc, "diophantine.node_budget");
  require(d.node_budget > 0, "diophantine.node_budget must be positive");
  auto point = [&](const char* key) {
    const auto p = get_as<std::vector<double>>(doc, key);
    require(p.size() == 2 && p[1] > 0, std::string(key) + " must be [re, im] with im > 0");
    return HypPoint::h2(p[0], p[1]);
  };
  d.x = point("diophantine.x");
  d.y = point("diophantine.y");
  d.eps = get_as<double>(doc, "diophantine.eps");
  require(d.eps > 0, "diophantine.eps must be positive");
  const auto band = get_as<std::vector<double>>(doc, "diophantine.band");
  require(band.size() == 2 && band[0] < band[1], "diophantine.band must be [lo, hi]");
  d.band_lo = band[0];
  d.band_hi = band[1];
  d.lower_bound_fraction = get_as<double>(doc, "diophantine.lower_bound_fraction");

  auto& s = c.spectral;
  s.delta_prime = get_as<double>(doc, "spectral.delta_prime");
  require(s.delta_prime > 0 && s.delta_prime < 1, "spectral.delta_prime must lie in (0, 1)");
  s.grid = get_as<int>(doc, "spectral.grid");
  require(s.grid >= 2, "spectral.grid must be at least 2");
  s.r_list = get_as<std::vector<double>>(doc, "spectral.r_list");
  s.R_list = get_as<std::vector<double>>(doc, "spectral.R_list");
  s.N_list = get_as<std::vector<int>>(doc, "spectral.N_list");
  s.sigma_lines = get_as<std::vector<double>>(doc, "spectral.sigma_lines");
  s.B = get_as<double>(doc, "spectral.B");
  s.stability_factor = get_as<double>(doc, "spectral.stability_factor");
  s.iwasawa_r = get_as<std::vector<double>>(doc, "spectral.iwasawa_r");
  s.iwasawa_points = get_as<int>(doc, "spectral.iwasawa_points");
  s.mass_R_extension = get_as<std::vector<double>>(doc, "spectral.mass_R_extension");
  for (double r : s.r_list) require(r > 0 && r < 1, "spectral.r_list values must lie in (0, 1)");
  for (double r : s.iwasawa_r) require(r > 0 && r <= 1, "spectral.iwasawa_r values must lie in (0, 1]");
  for (double R : s.R_list) require(R >= 1, "spectral.R_list values must be >= 1");
  for (double R : s.mass_R_extension) require(R >= 1, "spectral.mass_R_extension values must be >= 1");
  for (double sg : s.sigma_lines) require(std::abs(sg) <= s.B, "spectral.sigma_lines must lie in [-B, B]");

  auto& t = c.trace;
  t.N = get_as<int>(doc, "trace.N");
  t.ell = get_as<int>(doc, "trace.ell");
  t.k = get_as<int>(doc, "trace.k");
  t.dims = get_as<std::vector<int>>(doc, "trace.dims");
  t.seed = get_as<std::uint64_t>(doc, "trace.seed");
  t.R_list = get_as<std::vector<double>>(doc, "trace.R_list");
  t.T_max = get_as<double>(doc, "trace.T_max");
  t.tempered_T = get_as<double>(doc, "trace.tempered_T");
  t.gap = get_as<double>(doc, "trace.gap");
  t.growth_limit = get_as<double>(doc, "trace.growth_limit");
  require(t.N >= 4, "trace.N must be at least 4");
  require(t.ell >= 2 && t.ell <= 3 && t.k >= 1 && t.k < t.ell, "trace needs 1 <= k < ell <= 3");
  require(static_cast<int>(t.dims.size()) == t.ell, "trace.dims must have ell entries");
  for (int dj : t.dims) require(dj == 2 || dj == 3, "trace.dims entries must be 2 or 3");
  require(t.R_list.size() >= 2, "trace.R_list needs at least two radii");
  require(t.gap > 0 && t.gap < 0.5, "trace.gap must lie in (0, 1/2)");

  auto& z = c.zaremba;
  z.seed = get_as<std::uint64_t>(doc, "zaremba.seed");
  z.instances = get_as<std::vector<int>>(doc, "zaremba.instances");
  z.tolerance = get_as<double>(doc, "zaremba.tolerance");
  require(z.instances.size() == 3, "zaremba.instances lists counts for dimensions 1, 2, 3");
  return c;
}

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> node_budget;
};

/// Defaults, then the file (if any), then command-line and environment overrides.
inline RunConfig load_config(const std::optional<std::filesystem::path>& path, const ConfigOverrides& ov = {}) {
  json doc = default_config();
  if (path) {
    json user;
    try {
      user = json::parse(io::read_file(*path));
    } catch (const json::parse_error& e) {
      throw ConfigError("config: " + path->string() + " is not valid JSON: " + e.what());
    } catch (const Error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    detail::merge_checked(doc, user, "");
  }
  if (ov.seed) {
    doc["diophantine"]["seed"] = *ov.seed;
    doc["trace"]["seed"] = *ov.seed;
    doc["zaremba"]["seed"] = *ov.seed;
  }
  if (ov.node_budget) {
    doc["enumeration"]["node_budget"] = *ov.node_budget;
    doc["diophantine"]["node_budget"] = *ov.node_budget;
  }
  try {
    return resolve_config(doc);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

/// HYPERLAT_NODE_BUDGET, if set, as a positive integer.
inline std::optional<std::uint64_t> node_budget_from_env() {
  const char* v = std::getenv("HYPERLAT_NODE_BUDGET");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long n = std::strtoull(v, &end, 10);
  if (*end != '\0' || n == 0) throw ConfigError("HYPERLAT_NODE_BUDGET must be a positive integer, got '" +
                                                std::string(v) + "'");
  return n;
}

}  // namespace hyperlat
