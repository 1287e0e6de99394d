#include "dpoly/cli.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpoly/disorder.hpp"
#include "dpoly/mc.hpp"
#include "dpoly/variance_map.hpp"

#ifndef DPOLY_GIT_REV
#define DPOLY_GIT_REV "unknown"
#endif

namespace dpoly {

namespace {

const std::pair<ExperimentKind, const char*> kExperimentNames[] = {
    {ExperimentKind::LatticeInfo, "lattice-info"},
    {ExperimentKind::Variance, "variance"},
    {ExperimentKind::Schedule, "schedule"},
    {ExperimentKind::Pool, "pool"},
    {ExperimentKind::Clt, "clt"},
    {ExperimentKind::Oracle, "oracle"},
    {ExperimentKind::FreeEnergy, "free-energy"},
    {ExperimentKind::Pc, "pc"},
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::optional<std::int64_t> to_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno == ERANGE || end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> to_uint(const std::string& s) {
  if (s.empty() || s[0] == '-') return std::nullopt;
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno == ERANGE || end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> to_real(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ComputeError("cannot open output file " + path);
  f << data;
  f.flush();
  if (!f.good()) throw ComputeError("short write to " + path);
}

}  // namespace

std::string experiment_name(ExperimentKind kind) {
  for (const auto& [k, name] : kExperimentNames) {
    if (k == kind) return name;
  }
  return "?";
}

int ExperimentConfig::s_or_default() const {
  if (s) return *s;
  switch (kind) {
    case ExperimentKind::Pool:
    case ExperimentKind::Clt:
    case ExperimentKind::FreeEnergy:
      return b;
    default:
      return 2;
  }
}

std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> kv;
  std::vector<std::string> bad;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      bad.push_back("config line " + std::to_string(lineno) + ": expected key = value, got '" +
                    t + "'");
      continue;
    }
    kv.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  if (!bad.empty()) {
    std::string msg;
    for (std::size_t i = 0; i < bad.size(); ++i) msg += (i ? "\n" : "") + bad[i];
    throw ValidationError(msg);
  }
  return kv;
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "experiment = " << experiment_name(c.kind) << "\n";
  o << "b = " << c.b << "\n";
  if (c.s) o << "s = " << *c.s << "\n";
  if (c.n) o << "n = " << *c.n << "\n";
  if (c.m) o << "m = " << *c.m << "\n";
  if (c.eps) o << "eps = " << fmt17(*c.eps) << "\n";
  if (c.tau) o << "tau = " << fmt17(*c.tau) << "\n";
  if (c.disorder) o << "disorder = " << *c.disorder << "\n";
  if (c.beta) o << "beta = " << fmt17(*c.beta) << "\n";
  if (!c.n_list.empty()) {
    o << "n-list = ";
    for (std::size_t i = 0; i < c.n_list.size(); ++i) o << (i ? "," : "") << c.n_list[i];
    o << "\n";
  }
  o << "pool = " << c.pool << "\n";
  o << "seed = " << c.seed << "\n";
  o << "cap = " << c.cap << "\n";
  o << "trials = " << c.trials << "\n";
  o << "threads = " << c.threads << "\n";
  if (c.out) o << "out = " << *c.out << "\n";
  if (c.report) o << "report = " << *c.report << "\n";
  return o.str();
}

ExperimentConfig validate_config(const std::vector<std::pair<std::string, std::string>>& kv) {
  static const std::set<std::string> known = {
      "experiment", "b",      "s",    "n",    "m",      "eps",     "tau",
      "disorder",   "beta",   "n-list", "pool", "seed",   "cap",     "trials",
      "threads",    "out",    "report", "schedule"};
  std::vector<std::string> errors;
  std::map<std::string, std::string> folded;
  for (const auto& [key, value] : kv) {
    if (!known.count(key)) {
      errors.push_back(key + ": unknown configuration key");
      continue;
    }
    if (key == "schedule") {
      // combined form m=<int>,eps=<real>, order free
      std::map<std::string, std::string> parts;
      bool ok = true;
      std::istringstream ps(value);
      std::string part;
      while (std::getline(ps, part, ',')) {
        std::size_t eq = part.find('=');
        if (eq == std::string::npos) {
          ok = false;
          break;
        }
        std::string pk = trim(part.substr(0, eq));
        if (pk != "m" && pk != "eps") {
          ok = false;
          break;
        }
        parts[pk] = trim(part.substr(eq + 1));
      }
      if (!ok || parts.size() != 2) {
        errors.push_back("schedule: expected m=<int>,eps=<real>, got '" + value + "'");
        continue;
      }
      folded["m"] = parts["m"];
      folded["eps"] = parts["eps"];
      continue;
    }
    folded[key] = value;
  }

  ExperimentConfig c;
  bool have_kind = false;

  auto get = [&](const char* key) -> std::optional<std::string> {
    auto it = folded.find(key);
    if (it == folded.end()) return std::nullopt;
    return it->second;
  };
  auto int_field = [&](const char* key, std::int64_t lo, std::int64_t hi)
      -> std::optional<std::int64_t> {
    auto raw = get(key);
    if (!raw) return std::nullopt;
    auto v = to_int(*raw);
    if (!v || *v < lo || *v > hi) {
      errors.push_back(std::string(key) + ": expected integer in [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "], got '" + *raw + "'");
      return std::nullopt;
    }
    return v;
  };
  auto real_field = [&](const char* key, double lo, double hi) -> std::optional<double> {
    auto raw = get(key);
    if (!raw) return std::nullopt;
    auto v = to_real(*raw);
    if (!v || *v < lo || *v > hi) {
      errors.push_back(std::string(key) + ": expected real in [" + fmt17(lo) + ", " + fmt17(hi) +
                       "], got '" + *raw + "'");
      return std::nullopt;
    }
    return v;
  };

  if (auto raw = get("experiment")) {
    bool found = false;
    for (const auto& [k, name] : kExperimentNames) {
      if (*raw == name) {
        c.kind = k;
        found = true;
        break;
      }
    }
    if (found) {
      have_kind = true;
    } else {
      errors.push_back("experiment: unknown experiment '" + *raw +
                       "' (expected lattice-info, variance, schedule, pool, clt, oracle, "
                       "free-energy, or pc)");
    }
  } else {
    errors.push_back("experiment: required (pass a subcommand or set experiment = ...)");
  }

  if (auto v = int_field("b", 2, 1000000)) c.b = static_cast<int>(*v);
  if (auto v = int_field("s", 2, 1000000)) c.s = static_cast<int>(*v);
  if (auto v = int_field("n", 0, 1000000000)) c.n = *v;
  if (auto v = int_field("m", 1, 64)) c.m = static_cast<int>(*v);
  if (auto v = real_field("eps", 0.0, 1e6)) c.eps = *v;
  if (auto v = real_field("tau", -1e6, 1e6)) c.tau = *v;
  if (auto v = real_field("beta", -1e6, 1e6)) c.beta = *v;
  if (auto v = int_field("pool", 10, 1000000000)) c.pool = *v;
  if (auto v = int_field("cap", 1, 1000000000000)) c.cap = *v;
  if (auto v = int_field("trials", 1, 1000000000)) c.trials = *v;
  if (auto v = int_field("threads", 0, 4096)) c.threads = static_cast<int>(*v);
  if (auto raw = get("seed")) {
    auto v = to_uint(*raw);
    if (!v) {
      errors.push_back("seed: expected unsigned 64-bit integer, got '" + *raw + "'");
    } else {
      c.seed = *v;
    }
  }
  if (auto raw = get("n-list")) {
    std::istringstream ps(*raw);
    std::string part;
    bool ok = true;
    while (std::getline(ps, part, ',')) {
      auto v = to_int(trim(part));
      if (!v || *v < 1 || *v > 1000000000) {
        ok = false;
        break;
      }
      c.n_list.push_back(*v);
    }
    if (!ok || c.n_list.empty()) {
      errors.push_back("n-list: expected comma-separated integers in [1, 1000000000], got '" +
                       *raw + "'");
      c.n_list.clear();
    }
  }
  std::optional<DisorderModel> model;
  if (auto raw = get("disorder")) {
    try {
      model = DisorderModel::parse(*raw);
      c.disorder = *raw;
    } catch (const ValidationError& e) {
      errors.push_back(e.what());
    }
  }
  if (auto raw = get("out")) {
    if (raw->empty()) {
      errors.push_back("out: empty path");
    } else {
      c.out = *raw;
    }
  }
  if (auto raw = get("report")) {
    if (raw->empty()) {
      errors.push_back("report: empty path");
    } else {
      c.report = *raw;
    }
  }

  if (have_kind) {
    auto require = [&](bool present, const char* key) {
      if (!present) {
        errors.push_back(std::string(key) + ": required for experiment " +
                         experiment_name(c.kind));
      }
    };
    auto require_square = [&] {
      if (c.s && *c.s != c.b) {
        errors.push_back("s: this experiment runs the b-branch recursion and needs s = b, got s = " +
                         std::to_string(*c.s) + " with b = " + std::to_string(c.b));
      }
    };
    switch (c.kind) {
      case ExperimentKind::LatticeInfo:
        require(c.n.has_value(), "n");
        if (c.n && *c.n > 1000000) errors.push_back("n: at most 1000000 for lattice-info");
        break;
      case ExperimentKind::Variance:
        require(c.disorder.has_value(), "disorder");
        require(c.m.has_value(), "m");
        require(c.eps.has_value(), "eps");
        require(!c.n_list.empty(), "n-list");
        break;
      case ExperimentKind::Schedule:
        require(c.m.has_value(), "m");
        require(c.eps.has_value(), "eps");
        require(!c.n_list.empty(), "n-list");
        break;
      case ExperimentKind::Pool:
        require(c.disorder.has_value(), "disorder");
        require(c.n.has_value(), "n");
        require_square();
        if (c.beta && (c.m || c.eps)) {
          errors.push_back("beta: fixed beta and a beta-schedule are mutually exclusive");
        } else if (!c.beta && !(c.m && c.eps)) {
          errors.push_back("beta: pool needs either beta or a schedule (m and eps)");
        }
        break;
      case ExperimentKind::Clt:
        require(c.disorder.has_value(), "disorder");
        require(c.m.has_value(), "m");
        require(c.eps.has_value(), "eps");
        require(c.n.has_value(), "n");
        require_square();
        if (c.n && *c.n < 1) errors.push_back("n: at least 1 for clt");
        if (c.beta) errors.push_back("beta: clt takes its temperature from the schedule");
        if (c.eps) {
          double e = eta(c.b);
          if (*c.eps > e && std::fabs(*c.eps - e) > 1e-12 * std::max(1.0, e)) {
            errors.push_back("eps: no Gaussian limit above the critical value " + fmt17(e) +
                             " for b = " + std::to_string(c.b));
          }
        }
        break;
      case ExperimentKind::Oracle:
        require(c.disorder.has_value(), "disorder");
        require(c.beta.has_value(), "beta");
        require(c.n.has_value(), "n");
        if (c.n && *c.n > 1000000) errors.push_back("n: at most 1000000 for oracle");
        break;
      case ExperimentKind::FreeEnergy:
        require(c.disorder.has_value(), "disorder");
        require(c.beta.has_value(), "beta");
        require(!c.n_list.empty(), "n-list");
        require_square();
        break;
      case ExperimentKind::Pc:
        break;
    }
  }

  if (!errors.empty()) {
    std::string msg;
    for (std::size_t i = 0; i < errors.size(); ++i) msg += (i ? "\n" : "") + errors[i];
    throw ValidationError(msg);
  }

  if (!c.tau) c.tau = model ? third_moment(*model) : 0.0;
  return c;
}

std::string report_json(const RunReport& rep, const ExperimentConfig& c) {
  nlohmann::json j;
  j["version"] = rep.version;
  j["duration_s"] = rep.duration_s;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : parse_kv_text(serialize_config(c))) cfg[k] = v;
  j["config"] = cfg;
  j["digests"] = rep.digests;
  j["summary"] = nlohmann::json::parse(rep.summary_json);
  return j.dump();
}

namespace {

double rel_diff(double a, double b) {
  double scale = std::max(std::fabs(a), std::fabs(b));
  if (scale == 0.0) return 0.0;
  return std::fabs(a - b) / scale;
}

struct RunOutput {
  std::string primary;
  std::string stream_extra;  // clt only: stats object for the stream
  nlohmann::json summary = nlohmann::json::object();
  std::string failure;  // nonempty: emit primary, then raise ComputeError
};

RunOutput run_lattice_info(const ExperimentConfig& c) {
  LatticeParams p{c.b, c.s_or_default(), static_cast<int>(*c.n)};
  RunOutput r;
  double lg = log10_path_count(p);
  r.primary = "{\"edges\": \"" + edge_count(p).str() + "\", \"paths\": \"" + path_count(p).str() +
              "\", \"log10_paths\": " + fmt17(lg) +
              ", \"expected_shared_edges\": " + fmt17(expected_shared_edges(p)) + "}\n";
  r.summary["log10_paths"] = fmt17(lg);
  return r;
}

RunOutput run_variance(const ExperimentConfig& c) {
  DisorderModel model = DisorderModel::parse(*c.disorder);
  ScalingSchedule sched{c.b, *c.m, *c.eps, *c.tau};
  int m_star = *c.m;
  double pred = std::numeric_limits<double>::infinity();
  try {
    LimitPrediction lp = predicted_limit(sched);
    m_star = lp.m_star;
    pred = lp.variance;
  } catch (const ValidationError&) {
    // supercritical eps: the variance has no finite limit, report inf
  }
  RunOutput r;
  std::ostringstream csv;
  csv << "n,beta,rho_n,ell_m_n,scaled_variance,predicted_limit\n";
  double last_scaled = 0.0;
  for (std::int64_t n : c.n_list) {
    double beta = beta_schedule(sched, n);
    double x0 = rho0(model, beta);
    MapIterate it = iterate_map_final(MapParams{c.b}, x0, n);
    double lm = ell_m(static_cast<double>(n), m_star);
    last_scaled = lm * it.value;
    csv << n << "," << fmt17(beta) << "," << fmt17(it.value) << "," << fmt17(lm) << ","
        << fmt17(last_scaled) << "," << fmt17(pred) << "\n";
  }
  r.primary = csv.str();
  r.summary["rows"] = std::to_string(c.n_list.size());
  r.summary["last_scaled_variance"] = fmt17(last_scaled);
  r.summary["predicted_limit"] = fmt17(pred);
  return r;
}

RunOutput run_schedule(const ExperimentConfig& c) {
  ScalingSchedule sched{c.b, *c.m, *c.eps, *c.tau};
  RunOutput r;
  std::ostringstream csv;
  csv << "n,beta\n";
  double last = 0.0;
  for (std::int64_t n : c.n_list) {
    last = beta_schedule(sched, n);
    csv << n << "," << fmt17(last) << "\n";
  }
  r.primary = csv.str();
  r.summary["rows"] = std::to_string(c.n_list.size());
  r.summary["last_beta"] = fmt17(last);
  return r;
}

RunOutput run_pool(const ExperimentConfig& c) {
  DisorderModel model = DisorderModel::parse(*c.disorder);
  double beta = c.beta ? *c.beta : beta_schedule(ScalingSchedule{c.b, *c.m, *c.eps, *c.tau}, *c.n);
  std::array<double, 3> cm = w0_central_moments(model, beta);
  std::vector<double> se = pool_variance_se(MapParams{c.b}, cm[0], cm[1], cm[2], *c.n, c.pool);
  SamplePool pool = init_pool(model, beta, c.pool, RngSpec{c.seed, 0, 0}, c.b, c.s_or_default(),
                              c.threads);
  RunOutput r;
  std::ostringstream csv;
  csv << "k,mean,variance,rho4_over_rho2sq,se_variance\n";
  double last_var = 0.0;
  for (std::int64_t k = 0;; ++k) {
    PoolSummary ps = pool_summary(pool);
    double ratio = ps.m2 > 0.0 ? ps.m4 / (ps.m2 * ps.m2) : 0.0;
    last_var = ps.variance;
    csv << k << "," << fmt17(ps.mean) << "," << fmt17(ps.variance) << "," << fmt17(ratio) << ","
        << fmt17(se.at(static_cast<std::size_t>(k))) << "\n";
    if (k == *c.n) break;
    pool = advance_pool(pool, RngSpec{c.seed, 0, 0}, c.threads);
  }
  r.primary = csv.str();
  r.summary["levels"] = std::to_string(*c.n + 1);
  r.summary["last_variance"] = fmt17(last_var);
  return r;
}

RunOutput run_clt(const ExperimentConfig& c) {
  DisorderModel model = DisorderModel::parse(*c.disorder);
  ScalingSchedule sched{c.b, *c.m, *c.eps, *c.tau};
  double beta = beta_schedule(sched, *c.n);
  LimitPrediction lp = predicted_limit(sched);
  double scale = std::sqrt(ell_m(static_cast<double>(*c.n), lp.m_star));
  SamplePool pool = init_pool(model, beta, c.pool, RngSpec{c.seed, 0, 0}, c.b, c.s_or_default(),
                              c.threads);
  for (std::int64_t k = 0; k < *c.n; ++k) pool = advance_pool(pool, RngSpec{c.seed, 0, 0}, c.threads);
  FluctuationStats st = fluct_stats(pool, scale);
  RunOutput r;
  std::ostringstream samples;
  for (double w : pool.values) samples << fmt17(scale * (w - 1.0)) << "\n";
  r.primary = samples.str();
  std::ostringstream stats;
  stats << "{\"count\": " << st.count << ", \"mean\": " << fmt17(st.mean)
        << ", \"variance\": " << fmt17(st.variance) << ", \"skewness\": " << fmt17(st.skewness)
        << ", \"excess_kurtosis\": " << fmt17(st.excess_kurtosis)
        << ", \"se_mean\": " << fmt17(st.se_mean) << ", \"se_variance\": " << fmt17(st.se_variance)
        << ", \"se_skewness\": " << fmt17(st.se_skewness)
        << ", \"se_excess_kurtosis\": " << fmt17(st.se_excess_kurtosis)
        << ", \"ks_statistic_vs_normal\": " << fmt17(st.ks_statistic_vs_normal)
        << ", \"n\": " << *c.n << ", \"beta\": " << fmt17(beta) << ", \"scale\": " << fmt17(scale)
        << ", \"scale_exponent\": " << lp.m_star
        << ", \"predicted_variance\": " << fmt17(lp.variance) << "}\n";
  r.stream_extra = stats.str();
  r.summary["ks_statistic_vs_normal"] = fmt17(st.ks_statistic_vs_normal);
  r.summary["variance"] = fmt17(st.variance);
  return r;
}

RunOutput run_oracle(const ExperimentConfig& c) {
  LatticeParams p{c.b, c.s_or_default(), static_cast<int>(*c.n)};
  DisorderModel model = DisorderModel::parse(*c.disorder);
  BigInt edges = edge_count(p);
  if (edges > BigInt(10000000)) {
    throw ComputeError("oracle: lattice has " + edges.str() + " edges, over the 10^7 limit");
  }
  std::vector<double> omega(edges.convert_to<std::size_t>());
  double max_w = 0.0, max_z = 0.0;
  for (std::int64_t t = 0; t < c.trials; ++t) {
    std::mt19937_64 eng = substream(RngSpec{c.seed, 0, static_cast<std::uint64_t>(t)});
    for (double& o : omega) o = sample(model, eng);
    PartitionValue pe = enumeration_partition(p, model, *c.beta, omega, c.cap);
    PartitionValue pr = recursive_partition(p, model, *c.beta, omega);
    max_w = std::max(max_w, rel_diff(pe.W, pr.W));
    max_z = std::max(max_z, rel_diff(pe.Z, pr.Z));
  }
  RunOutput r;
  r.primary = "{\"b\": " + std::to_string(p.b) + ", \"s\": " + std::to_string(p.s) +
              ", \"n\": " + std::to_string(p.n) + ", \"beta\": " + fmt17(*c.beta) +
              ", \"trials\": " + std::to_string(c.trials) + ", \"max_rel_diff_w\": " +
              fmt17(max_w) + ", \"max_rel_diff_z\": " + fmt17(max_z) + "}\n";
  r.summary["trials"] = std::to_string(c.trials);
  r.summary["max_rel_diff_w"] = fmt17(max_w);
  if (max_w > 1e-10) {
    r.failure = "oracle: enumeration and recursion disagree, max relative difference " +
                fmt17(max_w);
  }
  return r;
}

RunOutput run_free_energy(const ExperimentConfig& c) {
  DisorderModel model = DisorderModel::parse(*c.disorder);
  std::int64_t max_n = *std::max_element(c.n_list.begin(), c.n_list.end());
  std::set<std::int64_t> want(c.n_list.begin(), c.n_list.end());
  SamplePool pool = init_pool(model, *c.beta, c.pool, RngSpec{c.seed, 0, 0}, c.b, c.b, c.threads);
  std::map<std::int64_t, FreeEnergyGap> gaps;
  for (std::int64_t k = 1; k <= max_n; ++k) {
    pool = advance_pool(pool, RngSpec{c.seed, 0, 0}, c.threads);
    if (want.count(k)) gaps[k] = gap_from_pool(pool, model);
  }
  RunOutput r;
  std::ostringstream csv;
  csv << "n,lambda,p_hat,gap,se\n";
  double last_gap = 0.0;
  for (std::int64_t n : c.n_list) {
    const FreeEnergyGap& g = gaps.at(n);
    last_gap = g.gap;
    csv << n << "," << fmt17(g.lambda) << "," << fmt17(g.p_hat) << "," << fmt17(g.gap) << ","
        << fmt17(g.se) << "\n";
  }
  r.primary = csv.str();
  r.summary["rows"] = std::to_string(c.n_list.size());
  r.summary["last_gap"] = fmt17(last_gap);
  return r;
}

RunOutput run_pc(const ExperimentConfig& c) {
  double pc = percolation_pc(c.b, c.s_or_default());
  RunOutput r;
  r.primary = "{\"pc\": " + fmt17(pc) + "}\n";
  r.summary["pc"] = fmt17(pc);
  return r;
}

}  // namespace

RunReport run(const ExperimentConfig& c, std::ostream& out) {
  auto t0 = std::chrono::steady_clock::now();
  RunOutput ro;
  switch (c.kind) {
    case ExperimentKind::LatticeInfo: ro = run_lattice_info(c); break;
    case ExperimentKind::Variance: ro = run_variance(c); break;
    case ExperimentKind::Schedule: ro = run_schedule(c); break;
    case ExperimentKind::Pool: ro = run_pool(c); break;
    case ExperimentKind::Clt: ro = run_clt(c); break;
    case ExperimentKind::Oracle: ro = run_oracle(c); break;
    case ExperimentKind::FreeEnergy: ro = run_free_energy(c); break;
    case ExperimentKind::Pc: ro = run_pc(c); break;
  }
  RunReport rep;
  rep.version = DPOLY_GIT_REV;
  if (c.kind == ExperimentKind::Clt) {
    // samples go to a file, the stats object to the stream
    std::string path = c.out ? *c.out : std::string("clt_samples.txt");
    write_file(path, ro.primary);
    rep.digests[path] = hex64(fnv1a64(ro.primary));
    out << ro.stream_extra;
    rep.digests["stdout"] = hex64(fnv1a64(ro.stream_extra));
  } else if (c.out) {
    write_file(*c.out, ro.primary);
    rep.digests[*c.out] = hex64(fnv1a64(ro.primary));
  } else {
    out << ro.primary;
    rep.digests["stdout"] = hex64(fnv1a64(ro.primary));
  }
  rep.summary_json = ro.summary.dump();
  rep.duration_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!ro.failure.empty()) throw ComputeError(ro.failure);
  return rep;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hierarchical diamond-lattice directed-polymer experiments", "dpoly"};
  app.require_subcommand(0, 1);
  app.footer(
      "Configuration sources, lowest to highest precedence: --config file, DP_* environment\n"
      "variables, command-line flags.  Config keys: experiment, b, s, n, m, eps, tau,\n"
      "disorder, beta, n-list, pool, seed, cap, trials, threads, out, report.  Environment\n"
      "names spell '-' as '_' (DP_SEED, DP_N_LIST).\n"
      "\n"
      "Experiments and their flags:\n"
      "  lattice info   --b --s --n\n"
      "  variance       --b --disorder --schedule m=<int>,eps=<real> --m --eps --tau --n-list\n"
      "  schedule       --b --m --eps --tau --disorder --n-list\n"
      "  pool           --b --s --disorder --beta or --beta-schedule --m --eps --tau --n\n"
      "                 --pool --seed\n"
      "  clt            --b --s --disorder --beta-schedule m=<int>,eps=<real> --m --eps --tau\n"
      "                 --n --pool --seed --out\n"
      "  oracle         --b --s --n --disorder --beta --trials --seed --cap\n"
      "  free-energy    --b --disorder --beta --n-list --pool --seed\n"
      "  pc             --b --s\n"
      "Common flags: --config --threads --out --report");

  struct Slot {
    std::string key;
    std::string value;
    CLI::Option* opt = nullptr;
  };
  std::deque<Slot> slots;
  auto stage = [&slots](CLI::App* cmd, const std::string& flag, const std::string& key,
                        const std::string& help) {
    slots.push_back({key, "", nullptr});
    Slot& s = slots.back();
    s.opt = cmd->add_option(flag, s.value, help);
  };
  std::string config_path;
  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file of key = value lines");
    stage(cmd, "--threads", "threads", "worker threads, 0 for hardware count");
    stage(cmd, "--out", "out", "write primary output to this file");
    stage(cmd, "--report", "report", "also write the run report JSON to this file");
  };
  common(&app);

  CLI::App* lat = app.add_subcommand("lattice", "graph counts and overlap statistics");
  lat->require_subcommand(1);
  CLI::App* lat_info = lat->add_subcommand("info", "edge and path counts as JSON");
  stage(lat_info, "--b", "b", "branches per edge replacement");
  stage(lat_info, "--s", "s", "segments per branch");
  stage(lat_info, "--n", "n", "recursion depth");
  common(lat_info);

  CLI::App* variance = app.add_subcommand(
      "variance", "deterministic variance recursion along a temperature schedule");
  stage(variance, "--b", "b", "branches per edge replacement");
  stage(variance, "--disorder", "disorder", "gaussian, rademacher, or twopoint:p=<real>");
  stage(variance, "--schedule", "schedule", "combined schedule spec m=<int>,eps=<real>");
  stage(variance, "--m", "m", "nesting depth of the schedule");
  stage(variance, "--eps", "eps", "schedule offset");
  stage(variance, "--tau", "tau", "skew correction, defaults to the disorder's third moment");
  stage(variance, "--n-list", "n-list", "comma-separated depths");
  common(variance);

  CLI::App* schedule = app.add_subcommand("schedule", "inverse-temperature schedule values");
  stage(schedule, "--b", "b", "branches per edge replacement");
  stage(schedule, "--m", "m", "nesting depth of the schedule");
  stage(schedule, "--eps", "eps", "schedule offset");
  stage(schedule, "--tau", "tau", "skew correction");
  stage(schedule, "--disorder", "disorder", "optional, sets the default tau");
  stage(schedule, "--n-list", "n-list", "comma-separated depths");
  common(schedule);

  CLI::App* pool = app.add_subcommand("pool", "population run with per-level moments");
  stage(pool, "--b", "b", "branches per edge replacement");
  stage(pool, "--s", "s", "segments per branch, must equal b");
  stage(pool, "--disorder", "disorder", "gaussian, rademacher, or twopoint:p=<real>");
  stage(pool, "--beta", "beta", "fixed inverse temperature");
  stage(pool, "--beta-schedule", "schedule", "schedule spec m=<int>,eps=<real> evaluated at n");
  stage(pool, "--m", "m", "nesting depth of the schedule");
  stage(pool, "--eps", "eps", "schedule offset");
  stage(pool, "--tau", "tau", "skew correction");
  stage(pool, "--n", "n", "number of levels to advance");
  stage(pool, "--pool", "pool", "population size");
  stage(pool, "--seed", "seed", "random seed");
  common(pool);

  CLI::App* clt = app.add_subcommand("clt", "scaled fluctuation samples and shape statistics");
  stage(clt, "--b", "b", "branches per edge replacement");
  stage(clt, "--s", "s", "segments per branch, must equal b");
  stage(clt, "--disorder", "disorder", "gaussian, rademacher, or twopoint:p=<real>");
  stage(clt, "--beta-schedule", "schedule", "schedule spec m=<int>,eps=<real> evaluated at n");
  stage(clt, "--m", "m", "nesting depth of the schedule");
  stage(clt, "--eps", "eps", "schedule offset");
  stage(clt, "--tau", "tau", "skew correction");
  stage(clt, "--n", "n", "depth at which samples are drawn");
  stage(clt, "--pool", "pool", "population size");
  stage(clt, "--seed", "seed", "random seed");
  common(clt);

  CLI::App* oracle = app.add_subcommand(
      "oracle", "cross-check path enumeration against the recursive evaluation");
  stage(oracle, "--b", "b", "branches per edge replacement");
  stage(oracle, "--s", "s", "segments per branch");
  stage(oracle, "--n", "n", "recursion depth");
  stage(oracle, "--disorder", "disorder", "gaussian, rademacher, or twopoint:p=<real>");
  stage(oracle, "--beta", "beta", "inverse temperature");
  stage(oracle, "--trials", "trials", "random edge assignments to test");
  stage(oracle, "--seed", "seed", "random seed");
  stage(oracle, "--cap", "cap", "path enumeration cap");
  common(oracle);

  CLI::App* fe = app.add_subcommand("free-energy", "quenched vs annealed free-energy gap");
  stage(fe, "--b", "b", "branches per edge replacement, s = b");
  stage(fe, "--disorder", "disorder", "gaussian, rademacher, or twopoint:p=<real>");
  stage(fe, "--beta", "beta", "inverse temperature");
  stage(fe, "--n-list", "n-list", "comma-separated depths");
  stage(fe, "--pool", "pool", "population size");
  stage(fe, "--seed", "seed", "random seed");
  common(fe);

  CLI::App* pc = app.add_subcommand("pc", "critical percolation probability of the lattice");
  stage(pc, "--b", "b", "branches per edge replacement");
  stage(pc, "--s", "s", "segments per branch");
  common(pc);

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("dpoly");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 1;
  }

  try {
    std::vector<std::pair<std::string, std::string>> kv;
    if (!config_path.empty()) {
      std::ifstream f(config_path, std::ios::binary);
      if (!f) throw ValidationError("config: cannot read " + config_path);
      std::ostringstream ss;
      ss << f.rdbuf();
      for (auto& p : parse_kv_text(ss.str())) kv.push_back(std::move(p));
    }
    static const char* env_keys[] = {"experiment", "b",      "s",      "n",       "m",
                                     "eps",        "tau",    "disorder", "beta",  "n-list",
                                     "pool",       "seed",   "cap",    "trials",  "threads",
                                     "out",        "report", "schedule"};
    for (const char* key : env_keys) {
      std::string env = "DP_";
      for (const char* p = key; *p; ++p) {
        env += *p == '-' ? '_' : static_cast<char>(std::toupper(*p));
      }
      if (const char* val = std::getenv(env.c_str())) kv.emplace_back(key, val);
    }
    for (const Slot& s : slots) {
      if (s.opt->count() > 0) kv.emplace_back(s.key, s.value);
    }
    if (lat_info->parsed()) {
      kv.emplace_back("experiment", "lattice-info");
    } else {
      for (CLI::App* sub : {variance, schedule, pool, clt, oracle, fe, pc}) {
        if (sub->parsed()) kv.emplace_back("experiment", sub->get_name());
      }
    }

    ExperimentConfig cfg = validate_config(kv);
    RunReport rep = run(cfg, out);
    std::string rj = report_json(rep, cfg);
    err << rj << "\n";
    if (cfg.report) write_file(*cfg.report, rj + "\n");
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const ComputeError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dpoly
