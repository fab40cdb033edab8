// SPDX-License-Identifier: Apache-2.0
#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <fmt/format.h>

#include "ringmaster/error.hpp"

namespace ringmaster::cli {
namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::InvalidInput, where + ": " + what);
}

const Json& object_at(const Json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) bad(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) bad(where, "unknown key '" + key + "'");
  }
  return j;
}

std::string path_of(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

double get_number(const Json& j, const std::string& where, const std::string& key, double def) {
  if (!j.contains(key)) return def;
  const Json& v = j.at(key);
  if (!v.is_number()) bad(path_of(where, key), "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(path_of(where, key), "expected a finite number");
  return x;
}

std::int64_t as_int(const Json& v, const std::string& where) {
  if (!v.is_number_integer()) bad(where, "expected an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
    bad(where, "integer out of range");
  }
  return v.get<std::int64_t>();
}

std::int64_t get_int(const Json& j, const std::string& where, const std::string& key, std::int64_t def) {
  return j.contains(key) ? as_int(j.at(key), path_of(where, key)) : def;
}

bool get_bool(const Json& j, const std::string& where, const std::string& key, bool def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_boolean()) bad(path_of(where, key), "expected true or false");
  return j.at(key).get<bool>();
}

std::string get_string(const Json& j, const std::string& where, const std::string& key, std::string def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_string()) bad(path_of(where, key), "expected a string");
  return j.at(key).get<std::string>();
}

template <class E>
E lookup(const std::vector<std::pair<std::string, E>>& table, const std::string& name, const std::string& where) {
  for (const auto& [k, v] : table) {
    if (k == name) return v;
  }
  std::string options;
  for (const auto& [k, v] : table) options += (options.empty() ? "" : ", ") + k;
  bad(where, "unknown value '" + name + "' (expected one of: " + options + ")");
}

template <class E>
std::string name_of(const std::vector<std::pair<std::string, E>>& table, E value) {
  for (const auto& [k, v] : table) {
    if (v == value) return k;
  }
  throw Error(ErrorKind::Unreachable, "unnamed enum value");
}

const std::vector<std::pair<std::string, MethodKind>> kMethods{
    {"ringmaster_fixed", MethodKind::RingmasterFixed},
    {"ringmaster_agnostic", MethodKind::RingmasterAgnostic},
    {"synchronous", MethodKind::Synchronous},
    {"rennala", MethodKind::Rennala},
    {"delay_adaptive", MethodKind::DelayAdaptive}};

const std::vector<std::pair<std::string, NormKind>> kNorms{
    {"euclidean", NormKind::Euclidean}, {"max_abs", NormKind::MaxAbs}, {"spectral", NormKind::Spectral}};

const std::vector<std::pair<std::string, ProfileKind>> kProfiles{{"similar", ProfileKind::Similar},
                                                                 {"sublinear", ProfileKind::Sublinear},
                                                                 {"linear", ProfileKind::Linear},
                                                                 {"gpu_table", ProfileKind::GpuTable},
                                                                 {"explicit", ProfileKind::Explicit}};

const std::vector<std::pair<std::string, NsCoefficients>> kNsCoefficients{{"tuned", NsCoefficients::Tuned},
                                                                          {"muon", NsCoefficients::Muon}};

template <class T, class F>
std::vector<T> scalar_or_list(const Json& j, const std::string& where, const std::string& key, std::vector<T> def,
                              F convert) {
  if (!j.contains(key)) return def;
  const Json& v = j.at(key);
  const std::string at = path_of(where, key);
  std::vector<T> out;
  if (v.is_array()) {
    if (v.empty()) bad(at, "grid must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(convert(v[i], at + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(convert(v, at));
  }
  return out;
}

double as_positive(const Json& v, const std::string& where) {
  if (!v.is_number()) bad(where, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x <= 0.0) bad(where, "expected a positive number");
  return x;
}

std::int64_t as_positive_int(const Json& v, const std::string& where) {
  const std::int64_t x = as_int(v, where);
  if (x < 1) bad(where, "expected an integer >= 1");
  return x;
}

void parse_problem(const Json& j, ExperimentConfig& cfg) {
  const std::string where = "problem";
  if (!j.is_object()) bad(where, "expected an object");
  const std::string kind = get_string(j, where, "kind", "quadratic");
  if (kind == "quadratic") {
    object_at(j, where, {"kind", "d", "noise_std"});
    QuadraticSpec s;
    const std::int64_t d = get_int(j, where, "d", static_cast<std::int64_t>(s.d));
    if (d < 1) bad(where + ".d", "must be >= 1");
    s.d = static_cast<std::size_t>(d);
    s.noise_std = get_number(j, where, "noise_std", s.noise_std);
    if (s.noise_std < 0.0) bad(where + ".noise_std", "must be >= 0");
    cfg.problem = s;
  } else if (kind == "matrix_toy") {
    object_at(j, where, {"kind", "rows", "cols", "noise_std", "target_seed"});
    MatrixToySpec s;
    const std::int64_t rows = get_int(j, where, "rows", static_cast<std::int64_t>(s.rows));
    const std::int64_t cols = get_int(j, where, "cols", static_cast<std::int64_t>(s.cols));
    if (rows < 1 || cols < 1) bad(where, "rows and cols must be >= 1");
    s.rows = static_cast<std::size_t>(rows);
    s.cols = static_cast<std::size_t>(cols);
    s.noise_std = get_number(j, where, "noise_std", s.noise_std);
    if (s.noise_std < 0.0) bad(where + ".noise_std", "must be >= 0");
    const std::int64_t ts = get_int(j, where, "target_seed", static_cast<std::int64_t>(s.target_seed));
    if (ts < 0) bad(where + ".target_seed", "must be >= 0");
    s.target_seed = static_cast<std::uint64_t>(ts);
    cfg.problem = s;
  } else {
    bad(where + ".kind", "unknown value '" + kind + "' (expected one of: quadratic, matrix_toy)");
  }
}

MomentumRule parse_momentum(const Json& j) {
  const std::string where = "method.momentum";
  if (!j.is_object()) bad(where, "expected an object");
  const std::string kind = get_string(j, where, "kind", "muon_ema");
  if (kind == "muon_ema") {
    object_at(j, where, {"kind", "beta", "nesterov"});
    MuonEma m;
    m.beta = get_number(j, where, "beta", m.beta);
    m.nesterov = get_bool(j, where, "nesterov", m.nesterov);
    if (m.beta < 0.0 || m.beta >= 1.0) bad(where + ".beta", "must lie in [0, 1)");
    return m;
  }
  if (kind == "averaging") {
    object_at(j, where, {"kind", "alpha", "alpha_init"});
    TheoryAveraging t;
    if (j.contains("alpha")) {
      const Json& a = j.at("alpha");
      if (a.is_string()) {
        if (a.get<std::string>() != "agnostic") bad(where + ".alpha", "expected a number or \"agnostic\"");
        t.alpha = AgnosticAlpha{};
      } else {
        const double v = as_positive(a, where + ".alpha");
        if (v > 1.0) bad(where + ".alpha", "must lie in (0, 1]");
        t.alpha = FixedAlpha{v};
      }
    }
    t.alpha_init = get_number(j, where, "alpha_init", t.alpha_init);
    if (t.alpha_init <= 0.0 || t.alpha_init > 1.0) bad(where + ".alpha_init", "must lie in (0, 1]");
    return t;
  }
  bad(where + ".kind", "unknown value '" + kind + "' (expected one of: muon_ema, averaging)");
}

void parse_norm(const Json& j, ExperimentConfig& cfg) {
  const std::string where = "method.norm";
  object_at(j, where, {"kind", "backend", "ns_iterations", "ns_coefficients"});
  cfg.norm = lookup(kNorms, get_string(j, where, "kind", "euclidean"), where + ".kind");
  const std::string backend = get_string(j, where, "backend", "exact");
  if (backend == "exact") {
    if (j.contains("ns_iterations") || j.contains("ns_coefficients")) {
      bad(where, "ns_iterations and ns_coefficients need backend \"newton_schulz\"");
    }
    cfg.spectral = ExactSvd{};
  } else if (backend == "newton_schulz") {
    NewtonSchulz ns;
    const std::int64_t iters = get_int(j, where, "ns_iterations", ns.iterations);
    if (iters < 1 || iters > 100) bad(where + ".ns_iterations", "must lie in [1, 100]");
    ns.iterations = static_cast<int>(iters);
    ns.coefficients = lookup(kNsCoefficients, get_string(j, where, "ns_coefficients", "tuned"),
                             where + ".ns_coefficients");
    cfg.spectral = ns;
  } else {
    bad(where + ".backend", "unknown value '" + backend + "' (expected one of: exact, newton_schulz)");
  }
}

void parse_method(const Json& j, ExperimentConfig& cfg) {
  const std::string where = "method";
  object_at(j, where, {"kind", "eta", "R", "B", "agnostic_variant", "L1", "momentum", "norm"});
  cfg.method = lookup(kMethods, get_string(j, where, "kind", "ringmaster_fixed"), where + ".kind");
  cfg.eta = scalar_or_list<double>(j, where, "eta", cfg.eta, as_positive);
  cfg.R = scalar_or_list<std::int64_t>(j, where, "R", cfg.R, as_positive_int);
  cfg.B = scalar_or_list<std::int64_t>(j, where, "B", cfg.B, as_positive_int);
  if (cfg.R.size() > 1 && cfg.method != MethodKind::RingmasterFixed) {
    bad(where + ".R", "a threshold grid only applies to ringmaster_fixed");
  }
  if (cfg.B.size() > 1 && cfg.method != MethodKind::Rennala) bad(where + ".B", "a batch grid only applies to rennala");

  const std::string variant = get_string(j, where, "agnostic_variant", "l1_zero");
  if (variant == "l1_zero") {
    cfg.agnostic_variant = L1Zero{};
  } else if (variant == "l1_unknown_positive") {
    cfg.agnostic_variant = L1UnknownPositive{};
  } else if (variant == "l1_known") {
    if (!j.contains("L1")) bad(where + ".L1", "required by agnostic_variant \"l1_known\"");
    cfg.agnostic_variant = L1Known{as_positive(j.at("L1"), where + ".L1")};
  } else {
    bad(where + ".agnostic_variant",
        "unknown value '" + variant + "' (expected one of: l1_zero, l1_unknown_positive, l1_known)");
  }
  if (j.contains("L1") && variant != "l1_known") bad(where + ".L1", "only used with agnostic_variant \"l1_known\"");
  if (j.contains("momentum")) cfg.momentum = parse_momentum(j.at("momentum"));
  if (j.contains("norm")) parse_norm(j.at("norm"), cfg);
}

void parse_profile(const Json& j, ExperimentConfig& cfg) {
  const std::string where = "profile";
  object_at(j, where, {"kind", "n", "base_scale", "noise_frac", "times"});
  WorkerProfile& p = cfg.profile;
  p.kind = lookup(kProfiles, get_string(j, where, "kind", "similar"), where + ".kind");
  p.noise_frac = get_number(j, where, "noise_frac", p.noise_frac);
  if (p.noise_frac < 0.0) bad(where + ".noise_frac", "must be >= 0");
  if (p.kind == ProfileKind::Explicit) {
    if (!j.contains("times")) bad(where + ".times", "required by kind \"explicit\"");
    if (j.contains("n") || j.contains("base_scale")) bad(where, "n and base_scale do not apply to explicit times");
    p.explicit_times = scalar_or_list<double>(j, where, "times", {}, as_positive);
    p.n = p.explicit_times.size();
    p.base_scale = 1.0;
  } else {
    if (j.contains("times")) bad(where + ".times", "only used with kind \"explicit\"");
    const std::int64_t n = get_int(j, where, "n", static_cast<std::int64_t>(p.n));
    if (n < 1) bad(where + ".n", "must be >= 1");
    p.n = static_cast<std::size_t>(n);
    p.base_scale = get_number(j, where, "base_scale", p.base_scale);
    if (p.base_scale <= 0.0) bad(where + ".base_scale", "must be positive");
    p.explicit_times.clear();
  }
}

void parse_stop(const Json& j, ExperimentConfig& cfg) {
  const std::string where = "stop";
  object_at(j, where, {"horizon_s", "max_K"});
  const bool h = j.contains("horizon_s");
  const bool k = j.contains("max_K");
  if (h == k) bad(where, "give exactly one of horizon_s and max_K");
  if (h) {
    cfg.stop = Horizon{as_positive(j.at("horizon_s"), where + ".horizon_s")};
  } else {
    cfg.stop = MaxUpdates{as_positive_int(j.at("max_K"), where + ".max_K")};
  }
}

RateFunctions parse_rates(const Json& j) {
  const std::string where = "bounds.rates";
  if (!j.is_array() || j.empty()) bad(where, "expected a non-empty list of workers");
  RateFunctions rf;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].empty()) bad(at, "expected a non-empty list of [time, rate] pairs");
    std::vector<RateBreakpoint> bp;
    for (const Json& pair : j[i]) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
        bad(at, "expected [time, rate] pairs");
      }
      bp.push_back({pair[0].get<double>(), pair[1].get<double>()});
    }
    rf.workers.push_back(std::move(bp));
  }
  try {
    validate(rf);
  } catch (const Error& e) {
    bad(where, e.what());
  }
  return rf;
}

void parse_bounds(const Json& j, ExperimentConfig& cfg) {
  const std::string where = "bounds";
  object_at(j, where, {"constants", "K", "eps", "R", "eta_scale", "rates"});
  BoundsConfig& b = cfg.bounds;
  if (j.contains("constants")) {
    const Json& c = object_at(j.at("constants"), where + ".constants", {"delta0", "L0", "L1", "sigma", "rho"});
    ProblemConstants pc;
    const std::string at = where + ".constants";
    pc.delta0 = get_number(c, at, "delta0", pc.delta0);
    pc.L0 = get_number(c, at, "L0", pc.L0);
    pc.L1 = get_number(c, at, "L1", pc.L1);
    pc.sigma = get_number(c, at, "sigma", pc.sigma);
    pc.rho = get_number(c, at, "rho", pc.rho);
    try {
      pc.validate();
    } catch (const Error& e) {
      bad(at, e.what());
    }
    b.constants = pc;
  }
  if (j.contains("K") && j.contains("eps")) bad(where, "give at most one of K and eps");
  if (j.contains("K")) b.K = as_positive_int(j.at("K"), where + ".K");
  if (j.contains("eps")) b.eps = as_positive(j.at("eps"), where + ".eps");
  if (j.contains("R")) b.R = as_positive_int(j.at("R"), where + ".R");
  if (j.contains("eta_scale")) b.eta_scale = as_positive(j.at("eta_scale"), where + ".eta_scale");
  if (j.contains("rates")) b.rates = parse_rates(j.at("rates"));
}

Json momentum_json(const MomentumRule& rule) {
  if (const auto* ema = std::get_if<MuonEma>(&rule)) {
    return Json{{"kind", "muon_ema"}, {"beta", ema->beta}, {"nesterov", ema->nesterov}};
  }
  const auto& t = std::get<TheoryAveraging>(rule);
  Json j{{"kind", "averaging"}, {"alpha_init", t.alpha_init}};
  if (const auto* f = std::get_if<FixedAlpha>(&t.alpha)) {
    j["alpha"] = f->alpha;
  } else {
    j["alpha"] = "agnostic";
  }
  return j;
}

Json norm_json(const ExperimentConfig& cfg) {
  Json j{{"kind", name_of(kNorms, cfg.norm)}};
  if (const auto* ns = std::get_if<NewtonSchulz>(&cfg.spectral)) {
    j["backend"] = "newton_schulz";
    j["ns_iterations"] = ns->iterations;
    j["ns_coefficients"] = name_of(kNsCoefficients, ns->coefficients);
  } else {
    j["backend"] = "exact";
  }
  return j;
}

std::string fmt_double(double x) { return fmt::format("{:.17g}", x); }

double final_loss_of(const RunResult& r, const Objective& problem, const NormSpec& norm) {
  return measure(problem, r.final_state.x, norm).loss;
}

struct PreparedRun {
  std::unique_ptr<Objective> problem;
  MethodConfig method;
};

PreparedRun prepare(const ExperimentConfig& cfg, double eta, std::int64_t R, std::int64_t B) {
  PreparedRun p;
  p.problem = make_objective(cfg);
  p.method = make_method(cfg, p.problem->layout(), eta, R, B);
  return p;
}

void write_run_files(const ExperimentConfig& cfg, const std::filesystem::path& dir, const std::string& stem,
                     const RunResult& result, const PreparedRun& p) {
  write_atomic(dir / (stem + ".csv"), trace_csv(result.rows));
  write_atomic(dir / (stem + ".summary.json"), summary_json(cfg, result, *p.problem, p.method.norm).dump(2) + "\n");
}

void report_error(std::ostream& err, const std::exception& e) { err << "error: " << e.what() << "\n"; }

ProblemConstants derived_constants(const ExperimentConfig& cfg) {
  const auto problem = make_objective(cfg);
  const NormSpec norm = NormSpec::uniform(cfg.norm, problem->layout(), cfg.spectral);
  if (const auto* q = std::get_if<QuadraticSpec>(&cfg.problem)) return QuadraticObjective(*q).constants(norm);
  const auto& m = std::get<MatrixToySpec>(cfg.problem);
  ProblemConstants c;
  c.delta0 = problem->value(problem->initial_point());
  c.L0 = 1.0;
  c.sigma = std::sqrt(static_cast<double>(m.rows * m.cols)) * m.noise_std;
  c.rho = norm_equiv_rho(norm, problem->layout());
  return c;
}

}  // namespace

ExperimentConfig parse_config(const Json& j) {
  object_at(j, "config", {"name", "problem", "method", "profile", "stop", "seed", "output_dir", "bounds"});
  ExperimentConfig cfg;
  cfg.name = get_string(j, "", "name", cfg.name);
  if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) {
    bad("name", "must be a non-empty file stem without path separators");
  }
  if (j.contains("problem")) parse_problem(j.at("problem"), cfg);
  if (j.contains("method")) parse_method(j.at("method"), cfg);
  if (j.contains("profile")) parse_profile(j.at("profile"), cfg);
  if (j.contains("stop")) parse_stop(j.at("stop"), cfg);
  if (j.contains("seed")) {
    const std::int64_t s = as_int(j.at("seed"), "seed");
    if (s < 0) bad("seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(s);
  }
  cfg.output_dir = get_string(j, "", "output_dir", cfg.output_dir);
  if (j.contains("bounds")) parse_bounds(j.at("bounds"), cfg);
  if (cfg.norm == NormKind::Spectral && std::holds_alternative<QuadraticSpec>(cfg.problem)) {
    bad("method.norm.kind", "the spectral norm needs a matrix problem");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::InvalidInput, path.string() + ": " + e.what());
  }
  return parse_config(j);
}

Json to_json(const ExperimentConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  if (const auto* q = std::get_if<QuadraticSpec>(&cfg.problem)) {
    j["problem"] = Json{{"kind", "quadratic"}, {"d", q->d}, {"noise_std", q->noise_std}};
  } else {
    const auto& m = std::get<MatrixToySpec>(cfg.problem);
    j["problem"] = Json{{"kind", "matrix_toy"},
                        {"rows", m.rows},
                        {"cols", m.cols},
                        {"noise_std", m.noise_std},
                        {"target_seed", m.target_seed}};
  }
  Json method{{"kind", name_of(kMethods, cfg.method)},
              {"eta", cfg.eta},
              {"R", cfg.R},
              {"B", cfg.B},
              {"momentum", momentum_json(cfg.momentum)},
              {"norm", norm_json(cfg)}};
  if (std::holds_alternative<L1Zero>(cfg.agnostic_variant)) {
    method["agnostic_variant"] = "l1_zero";
  } else if (std::holds_alternative<L1UnknownPositive>(cfg.agnostic_variant)) {
    method["agnostic_variant"] = "l1_unknown_positive";
  } else {
    method["agnostic_variant"] = "l1_known";
    method["L1"] = std::get<L1Known>(cfg.agnostic_variant).L1;
  }
  j["method"] = method;
  Json profile{{"kind", name_of(kProfiles, cfg.profile.kind)}, {"noise_frac", cfg.profile.noise_frac}};
  if (cfg.profile.kind == ProfileKind::Explicit) {
    profile["times"] = cfg.profile.explicit_times;
  } else {
    profile["n"] = cfg.profile.n;
    profile["base_scale"] = cfg.profile.base_scale;
  }
  j["profile"] = profile;
  if (const auto* h = std::get_if<Horizon>(&cfg.stop)) {
    j["stop"] = Json{{"horizon_s", h->seconds}};
  } else {
    j["stop"] = Json{{"max_K", std::get<MaxUpdates>(cfg.stop).K}};
  }
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  Json bounds = Json::object();
  if (const auto& c = cfg.bounds.constants) {
    bounds["constants"] = Json{{"delta0", c->delta0}, {"L0", c->L0}, {"L1", c->L1}, {"sigma", c->sigma}, {"rho", c->rho}};
  }
  if (cfg.bounds.K) bounds["K"] = *cfg.bounds.K;
  if (cfg.bounds.eps) bounds["eps"] = *cfg.bounds.eps;
  if (cfg.bounds.R) bounds["R"] = *cfg.bounds.R;
  bounds["eta_scale"] = cfg.bounds.eta_scale;
  if (const auto& rf = cfg.bounds.rates) {
    Json workers = Json::array();
    for (const auto& bp : rf->workers) {
      Json w = Json::array();
      for (const auto& p : bp) w.push_back(Json::array({p.time, p.rate}));
      workers.push_back(w);
    }
    bounds["rates"] = workers;
  }
  j["bounds"] = bounds;
  return j;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return to_json(a) == to_json(b); }

std::unique_ptr<Objective> make_objective(const ExperimentConfig& cfg) {
  if (const auto* q = std::get_if<QuadraticSpec>(&cfg.problem)) return std::make_unique<QuadraticObjective>(*q);
  return std::make_unique<MatrixToyObjective>(std::get<MatrixToySpec>(cfg.problem));
}

MethodConfig make_method(const ExperimentConfig& cfg, const BlockLayout& layout, double eta, std::int64_t R,
                         std::int64_t B) {
  MethodConfig m;
  m.kind = cfg.method;
  m.momentum = cfg.momentum;
  m.norm = NormSpec::uniform(cfg.norm, layout, cfg.spectral);
  m.eta = eta;
  m.threshold = R;
  m.batch = B;
  m.agnostic_variant = cfg.agnostic_variant;
  return m;
}

std::string trace_csv(std::span<const TraceRow> rows) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("{:.17g},{},{},{},{},{},{:.17g},{:.17g},{}\n", r.sim_time_s, r.event_index, r.worker,
                       r.delay, r.accepted ? 1 : 0, r.iteration, r.loss, r.grad_dual_norm, r.rejected_total);
  }
  return out;
}

Json summary_json(const ExperimentConfig& cfg, const RunResult& result, const Objective& problem,
                  const NormSpec& norm) {
  const Measurement start = measure(problem, problem.initial_point(), norm);
  double min_grad = start.grad_dual_norm;
  std::int64_t accepted = 0;
  for (const auto& r : result.rows) {
    min_grad = std::min(min_grad, r.grad_dual_norm);
    accepted += r.accepted ? 1 : 0;
  }
  Json j;
  j["config"] = to_json(cfg);
  j["method"] = std::string(to_string(cfg.method));
  j["initial_loss"] = start.loss;
  j["final_loss"] = final_loss_of(result, problem, norm);
  j["min_grad_dual_norm"] = min_grad;
  j["arrivals"] = result.stats.arrivals;
  j["accepted"] = accepted;
  j["rejected"] = result.stats.rejected;
  j["updates"] = result.stats.updates;
  j["sim_time_s"] = result.stats.end_time;
  return j;
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::InvalidInput, "cannot move output into " + path.string());
  }
}

std::filesystem::path resolve_output_dir(const std::optional<std::string>& flag, const ExperimentConfig& cfg) {
  if (flag && !flag->empty()) return *flag;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  if (const char* env = std::getenv("RINGMASTER_OUT_DIR"); env && *env) return env;
  return ".";
}

int cmd_run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.eta.size() != 1 || cfg.R.size() != 1 || cfg.B.size() != 1) {
      throw Error(ErrorKind::InvalidInput, "run takes a single eta, R and B; use the grid command for sweeps");
    }
    const PreparedRun p = prepare(cfg, cfg.eta[0], cfg.R[0], cfg.B[0]);
    const RunResult result = run(*p.problem, p.method, cfg.profile, cfg.stop, cfg.seed);
    std::filesystem::create_directories(out_dir);
    write_run_files(cfg, out_dir, cfg.name, result, p);
    out << fmt::format("{}: {} arrivals, {} updates, {} rejected, final loss {:.6g}, sim time {:.6g} s\n",
                       (out_dir / (cfg.name + ".csv")).string(), result.stats.arrivals, result.stats.updates,
                       result.stats.rejected, final_loss_of(result, *p.problem, p.method.norm),
                       result.stats.end_time);
    return 0;
  } catch (const std::exception& e) {
    report_error(err, e);
    return 1;
  }
}

int cmd_grid(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err,
             std::vector<GridCell>* cells_out) {
  std::vector<GridCell> cells;
  for (double eta : cfg.eta) {
    for (std::int64_t R : cfg.R) {
      for (std::int64_t B : cfg.B) {
        GridCell c;
        c.index = cells.size();
        c.eta = eta;
        c.R = R;
        c.B = B;
        c.trace = fmt::format("{}_cell{}", cfg.name, c.index);
        cells.push_back(c);
      }
    }
  }
  try {
    std::filesystem::create_directories(out_dir);
  } catch (const std::exception& e) {
    report_error(err, e);
    return 1;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      GridCell& c = cells[i];
      try {
        const PreparedRun p = prepare(cfg, c.eta, c.R, c.B);
        const RunResult result = run(*p.problem, p.method, cfg.profile, cfg.stop, cfg.seed);
        ExperimentConfig cell_cfg = cfg;
        cell_cfg.eta = {c.eta};
        cell_cfg.R = {c.R};
        cell_cfg.B = {c.B};
        cell_cfg.name = c.trace;
        write_run_files(cell_cfg, out_dir, c.trace, result, p);
        c.final_loss = final_loss_of(result, *p.problem, p.method.norm);
        c.updates = result.stats.updates;
        c.rejected = result.stats.rejected;
        c.ok = std::isfinite(c.final_loss);
        if (!c.ok) c.error = "final loss is not finite";
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  const std::size_t threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(cells.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  std::vector<GridCell> sorted = cells;
  std::stable_sort(sorted.begin(), sorted.end(), [](const GridCell& a, const GridCell& b) {
    if (a.ok != b.ok) return a.ok;
    return a.ok && a.final_loss < b.final_loss;
  });

  std::string table = "rank,best,eta,R,B,final_loss,updates,rejected,status,trace\n";
  out << fmt::format("{:>4} {:>4} {:>12} {:>5} {:>5} {:>24} {:>9} {:>9}  {}\n", "rank", "best", "eta", "R", "B",
                     "final_loss", "updates", "rejected", "trace");
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    const GridCell& c = sorted[r];
    const bool best = r == 0 && c.ok;
    table += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", r + 1, best ? 1 : 0, fmt_double(c.eta), c.R, c.B,
                         c.ok ? fmt_double(c.final_loss) : "", c.updates, c.rejected, c.ok ? "ok" : "failed",
                         c.trace);
    out << fmt::format("{:>4} {:>4} {:>12.6g} {:>5} {:>5} {:>24} {:>9} {:>9}  {}\n", r + 1, best ? "*" : "", c.eta,
                       c.R, c.B, c.ok ? fmt_double(c.final_loss) : "FAILED", c.updates, c.rejected, c.trace);
  }
  int code = 0;
  try {
    write_atomic(out_dir / (cfg.name + ".grid.csv"), table);
  } catch (const std::exception& e) {
    report_error(err, e);
    code = 1;
  }
  for (const auto& c : cells) {
    if (!c.ok) {
      err << fmt::format("failed cell {} (eta={}, R={}, B={}): {}\n", c.index, fmt_double(c.eta), c.R, c.B, c.error);
      code = 1;
    }
  }
  if (cells_out) *cells_out = std::move(cells);
  return code;
}

int cmd_bounds(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const BoundsConfig& b = cfg.bounds;
    const ProblemConstants c = b.constants ? *b.constants : derived_constants(cfg);
    c.validate();
    const FixedTimes ft = make_fixed_times(base_times(cfg.profile));
    const RateFunctions rf = b.rates ? *b.rates : constant_rates(ft.taus);

    std::int64_t K = b.K.value_or(1000);
    if (b.eps) {
      const double k = std::ceil(iteration_complexity_fixed(c, *b.eps));
      if (!std::isfinite(k) || k > 1e15) throw Error(ErrorKind::DegenerateProblem, "iteration estimate too large");
      K = std::max<std::int64_t>(1, static_cast<std::int64_t>(k));
    }
    const FixedSchedule s = fixed_schedule(c, K);
    const std::int64_t R = b.R.value_or(s.R);

    auto row = [&](std::string_view label, const std::string& value) { out << fmt::format("{:<44}{}\n", label, value); };
    auto num = [](double x) { return fmt::format("{:.12g}", x); };

    row("constants.delta0", num(c.delta0));
    row("constants.L0", num(c.L0));
    row("constants.L1", num(c.L1));
    row("constants.sigma", num(c.sigma));
    row("constants.rho", num(c.rho));
    if (b.eps) {
      row("eps", num(*b.eps));
      row("iterations.fixed_estimate", num(iteration_complexity_fixed(c, *b.eps)));
    }
    row("K", std::to_string(K));
    row("fixed_schedule.alpha", num(s.alpha));
    row("fixed_schedule.R", std::to_string(s.R));
    row("fixed_schedule.eta", num(s.eta));

    const EnvelopeValue psi = psi_envelope(c, b.eta_scale, cfg.agnostic_variant);
    row("agnostic.eta_scale", num(b.eta_scale));
    row("agnostic.psi", psi.overflow ? std::string("overflow") : num(psi.value));
    if (b.eps && !psi.overflow) row("iterations.agnostic_estimate", num(iteration_complexity_agnostic(psi.value, *b.eps)));

    std::string taus;
    for (double t : ft.taus) taus += (taus.empty() ? "" : " ") + num(t);
    row("times.tau", taus);
    std::string hs;
    for (double h : harmonic_prefix(ft)) hs += (hs.empty() ? "" : " ") + num(h);
    row("times.H_m", hs);
    row(fmt::format("time.t_fixed(R={})", R), num(t_fixed(R, ft)));
    row(fmt::format("time.total_fixed(K={},R={})", K, R), num(total_time_fixed(K, R, ft)));
    row(fmt::format("time.sqrt_bound(K={})", K), num(sqrt_time_bound(K, ft)));
    row(fmt::format("universal.fixed_recursion(K={},R={})", K, R), num(recursion_fixed_universal(K, R, rf)));
    row(fmt::format("universal.sqrt_recursion(K={})", K), num(recursion_sqrt_universal(K, rf)));
    return 0;
  } catch (const std::exception& e) {
    report_error(err, e);
    return 1;
  }
}

}  // namespace ringmaster::cli
