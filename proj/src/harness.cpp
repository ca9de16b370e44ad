#include "gnsq/harness.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "gnsq/diagnostics.hpp"
#include "gnsq/rng.hpp"

namespace gnsq {

using nlohmann::json;

namespace {

[[noreturn]] void bad_key(const std::string& where, const std::string& key,
                          const std::string& what) {
  throw Error(ErrorCode::ConfigError, "config key '" + where + key + "' " + what);
}

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw Error(ErrorCode::ConfigError, "config key '" + where_ + "' must be an object");
  }

  template <class T>
  void opt(const char* key, T& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      dst = j_.at(key).get<T>();
    } catch (const json::exception&) {
      bad_key(where_, key, "has the wrong type");
    }
  }

  template <class T>
  void opt(const char* key, std::optional<T>& dst) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      dst = j_.at(key).get<T>();
    } catch (const json::exception&) {
      bad_key(where_, key, "has the wrong type");
    }
  }

  template <class E>
  void choice(const char* key, E& dst, const std::vector<std::pair<std::string, E>>& table) {
    std::string s;
    opt(key, s);
    if (s.empty()) return;
    for (const auto& [name, v] : table)
      if (name == s) {
        dst = v;
        return;
      }
    bad_key(where_, key, "has unknown value '" + s + "'");
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) bad_key(where_, k, "is not recognized");
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_stop(Reader& r, StopRule& s) {
  if (const json* j = r.sub("stop")) {
    Reader q(*j, r.where() + "stop.");
    q.opt("f1_tol", s.f1_tol);
    q.opt("prox_grad_tol", s.prox_grad_tol);
    q.opt("step_tol", s.step_tol);
    q.finish();
  }
}

DetSolverConfig parse_det(Reader& r) {
  DetSolverConfig c;
  r.choice<StepRule>("step_rule", c.step_rule,
                     {{"exact", StepRule::ExactProx}, {"scaled", StepRule::Scaled},
                      {"inexact", StepRule::Inexact}});
  r.choice<TauRule>("tau_rule", c.tau_rule,
                    {{"f1hat", TauRule::F1Hat}, {"adaptive", TauRule::Adaptive},
                     {"fixed", TauRule::Fixed}});
  r.opt("tau_fixed", c.tau_fixed);
  r.opt("L_init", c.L_init);
  r.opt("L_known", c.L_known);
  r.opt("eta", c.eta);
  r.choice<EpsRule>("eps_rule", c.eps_rule,
                    {{"const", EpsRule::Const},
                     {"proportional_decrease", EpsRule::ProportionalDecrease},
                     {"zero", EpsRule::Zero}});
  r.opt("eps", c.eps);
  r.opt("max_outer", c.max_outer);
  read_stop(r, c.stop);
  r.opt("stall_limit", c.stall_limit);
  r.opt("record_wall_time", c.record_wall_time);
  r.opt("inner_max_iter", c.inner_max_iter);
  return c;
}

StochSolverConfig parse_stoch(Reader& r) {
  StochSolverConfig c;
  r.opt("b", c.b);
  r.opt("b_tilde", c.b_tilde);
  r.opt("independent_tilde", c.independent_tilde);
  r.choice<StochStepRule>("step_rule", c.step_rule,
                          {{"scaled", StochStepRule::Rule15},
                           {"two_batch", StochStepRule::Rule16},
                           {"inexact", StochStepRule::Rule17},
                           {"rule15", StochStepRule::Rule15},
                           {"rule16", StochStepRule::Rule16},
                           {"rule17", StochStepRule::Rule17}});
  r.choice<EtaPolicy>("eta_policy", c.eta_policy,
                      {{"const", EtaPolicy::Const}, {"optimal", EtaPolicy::Lemma17Opt},
                       {"envelope", EtaPolicy::Theorem18}, {"lemma17", EtaPolicy::Lemma17Opt},
                       {"theorem18", EtaPolicy::Theorem18}});
  r.opt("eta", c.eta);
  r.opt("gamma", c.gamma);
  r.opt("gamma_tilde", c.gamma_tilde);
  r.opt("L_floor", c.L_floor);
  r.opt("L_known", c.L_known);
  r.opt("tauL_tilde", c.tauL_tilde);
  r.choice<EpsPolicy>("eps_policy", c.eps_policy,
                      {{"eps_over_g1", EpsPolicy::EpsOverG1},
                       {"grad_proportional", EpsPolicy::GradProportional},
                       {"pl_proportional", EpsPolicy::PLProportional}});
  r.opt("eps", c.eps);
  r.opt("delta", c.delta);
  r.choice<LPolicy>("l_policy", c.l_policy,
                    {{"bisection", LPolicy::Bisection}, {"known", LPolicy::Known}});
  r.opt("l_init", c.l_init);
  r.opt("max_outer", c.max_outer);
  read_stop(r, c.stop);
  r.opt("stall_limit", c.stall_limit);
  r.opt("record_wall_time", c.record_wall_time);
  r.opt("inner_max_iter", c.inner_max_iter);
  if (const json* j = r.sub("constants")) {
    try {
      c.constants = constants_from_json(*j);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, r.where() + "constants: " + e.what());
    }
  }
  return c;
}

const char* kConstantNames[] = {"L_Fhat", "M_G", "M_F", "P_g1", "P_f1", "l_F", "mu", "sigma_tilde"};

std::optional<double> ProblemConstants::*const kConstantFields[] = {
    &ProblemConstants::L_Fhat, &ProblemConstants::M_G, &ProblemConstants::M_F,
    &ProblemConstants::P_g1,   &ProblemConstants::P_f1, &ProblemConstants::l_F,
    &ProblemConstants::mu,     &ProblemConstants::sigma_tilde};

json num(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? json("inf") : v < 0 ? json("-inf") : json("nan");
}

double from_num(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

}  // namespace

json to_json(const ProblemConstants& c) {
  json j = json::object();
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& v = c.*kConstantFields[i];
    if (v) j[kConstantNames[i]] = num(*v);
  }
  json prov = json::object();
  for (std::size_t i = 0; i < 8; ++i)
    if (c.*kConstantFields[i]) prov[kConstantNames[i]] = c.is_user(kConstantNames[i]) ? "USER" : "ESTIMATED";
  j["provenance"] = prov;
  if (c.sigma_undefined) j["sigma_undefined"] = true;
  return j;
}

ProblemConstants constants_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "constants must be an object");
  ProblemConstants c;
  for (const auto& [k, v] : j.items()) {
    if (k == "provenance" || k == "sigma_undefined" || k == "l_g2" || k == "l_f2" ||
        k == "problem" || k == "m" || k == "n")
      continue;  // derived or descriptive fields of an estimate report
    bool found = false;
    for (std::size_t i = 0; i < 8; ++i)
      if (k == kConstantNames[i]) {
        if (!v.is_number()) throw Error(ErrorCode::ConfigError, "constant '" + k + "' must be a number");
        const double d = v.get<double>();
        if (!(d >= 0.0)) throw Error(ErrorCode::ConfigError, "constant '" + k + "' must be >= 0");
        c.*kConstantFields[i] = d;
        c.user_fields.insert(k);
        found = true;
      }
    if (!found) throw Error(ErrorCode::ConfigError, "constant '" + k + "' is not recognized");
  }
  return c;
}

RunConfig parse_run_config(const json& j) {
  Reader r(j, "");
  int schema = 0;
  r.opt("schema", schema);
  if (!j.contains("schema")) bad_key("", "schema", "is missing");
  if (schema != 1) bad_key("", "schema", "must be 1");
  RunConfig c;
  const json* prob = r.sub("problem");
  if (!prob) bad_key("", "problem", "is missing");
  if (!prob->is_object()) bad_key("", "problem", "must be an object");
  c.problem = *prob;
  r.opt("output", c.output);
  r.opt("seeds", c.seeds);
  if (c.seeds.empty()) bad_key("", "seeds", "must be non-empty");
  r.opt("report_every", c.report_every);
  r.opt("x0_jitter", c.x0_jitter);
  const json* sol = r.sub("solver");
  if (!sol) bad_key("", "solver", "is missing");
  Reader s(*sol, "solver.");
  s.opt("scheme", c.scheme);
  if (c.scheme == "scheme1" || c.scheme == "scheme2") {
    c.det = parse_det(s);
  } else {
    c.stoch = parse_stoch(s);
    if (c.scheme == "scheme3") c.stoch->scheme = StochScheme::S3;
    else if (c.scheme == "scheme4") c.stoch->scheme = StochScheme::S4;
    else if (c.scheme == "scheme5") c.stoch->scheme = StochScheme::S5;
    else if (c.scheme == "scheme6") c.stoch->scheme = StochScheme::S6;
    else if (c.scheme == "interpolation") {
      c.stoch->scheme = StochScheme::S4;
      c.stoch->eta_policy = EtaPolicy::Theorem18;
    } else bad_key("solver.", "scheme", "has unknown value '" + c.scheme + "'");
  }
  s.finish();
  r.finish();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, "config " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const TraceRecord& r) {
  return json{{"k", r.k},
              {"f1hat", num(r.f1hat)},
              {"g1hat_batch", num(r.g1hat_batch)},
              {"step_norm", num(r.step_norm)},
              {"prox_grad_norm", num(r.prox_grad_norm)},
              {"L_k", num(r.L_k)},
              {"tau_k", num(r.tau_k)},
              {"eta_k", num(r.eta_k)},
              {"n_L_probes", r.n_L_probes},
              {"batch_indices", r.batch_indices},
              {"event", event_name(r.event)},
              {"wall_ns", r.wall_ns}};
}

TraceRecord trace_record_from_json(const json& j) {
  TraceRecord r;
  try {
    r.k = j.at("k").get<std::size_t>();
    r.f1hat = from_num(j.at("f1hat"));
    r.g1hat_batch = from_num(j.at("g1hat_batch"));
    r.step_norm = from_num(j.at("step_norm"));
    r.prox_grad_norm = from_num(j.at("prox_grad_norm"));
    r.L_k = from_num(j.at("L_k"));
    r.tau_k = from_num(j.at("tau_k"));
    r.eta_k = from_num(j.at("eta_k"));
    r.n_L_probes = j.at("n_L_probes").get<int>();
    r.batch_indices = j.at("batch_indices").get<std::vector<std::size_t>>();
    r.event = parse_event(j.at("event").get<std::string>());
    r.wall_ns = j.at("wall_ns").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad trace record: ") + e.what());
  }
  return r;
}

std::string serialize_record(const TraceRecord& r) { return to_json(r).dump(); }

TraceRecord parse_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad trace line: ") + e.what());
  }
  return trace_record_from_json(j);
}

Vec start_point(const GeneratedProblem& g, const RunConfig& cfg, std::uint64_t seed) {
  Vec x0 = g.x0;
  if (cfg.x0_jitter > 0.0) {
    Rng rng(seed ^ 0x5bd1e995ULL);
    x0 += rng.in_ball(x0.size(), cfg.x0_jitter);
  }
  return x0;
}

RunState run_one(const GeneratedProblem& g, const RunConfig& cfg, std::uint64_t seed) {
  const Vec x0 = start_point(g, cfg, seed);
  if (cfg.det) {
    DetSolverConfig c = *cfg.det;
    c.estimator_seed = seed;
    return cfg.scheme == "scheme2" ? scheme2_run(g.problem, c, x0) : scheme1_run(g.problem, c, x0);
  }
  StochSolverConfig c = *cfg.stoch;
  c.seed = seed;
  c.estimator_seed = seed;
  return stochastic_run(g.problem, c, x0);
}

std::vector<SeedResult> run_seeds(const GeneratedProblem& g, const RunConfig& cfg) {
  std::vector<SeedResult> out(cfg.seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    pool.emplace_back([&, i] {
      SeedResult& r = out[i];
      r.seed = cfg.seeds[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        r.state = run_one(g, cfg, r.seed);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
      r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

namespace {

std::size_t batch_of(const RunConfig& cfg, std::size_t m) {
  if (cfg.det) return m;
  return cfg.stoch->b;
}

}  // namespace

int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = load_run_config(config_path);
    const GeneratedProblem g = generate_problem(cfg.problem);
    const auto results = run_seeds(g, cfg);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output);
    bool all_ok = true, any_error = false;
    std::ofstream csv(fs::path(cfg.output) / "summary.csv");
    if (!csv) throw Error(ErrorCode::ConfigError, "cannot write to output " + cfg.output);
    csv << "seed,scheme,status,iterations,final_f1hat,total_L_probes,wall_s\n";
    csv << std::setprecision(17);
    for (const auto& r : results) {
      if (!r.error.empty()) {
        err << "seed " << r.seed << ": " << r.error << "\n";
        any_error = true;
        continue;
      }
      std::ofstream tr(fs::path(cfg.output) / ("trace_seed" + std::to_string(r.seed) + ".jsonl"));
      for (const auto& rec : r.state.trace) tr << serialize_record(rec) << "\n";
      if (cfg.report_every > 0)
        for (const auto& rec : r.state.trace)
          if (rec.k % static_cast<std::size_t>(cfg.report_every) == 0)
            err << "seed " << r.seed << " k=" << rec.k << " f1hat=" << rec.f1hat << "\n";
      const double f1 = r.state.last_f1;
      csv << r.seed << "," << cfg.scheme << "," << termination_name(r.state.status) << ","
          << r.state.k << "," << f1 << "," << r.state.total_probes() << "," << r.wall_s << "\n";
      out << "seed " << r.seed << ": " << termination_name(r.state.status) << " after "
          << r.state.k << " iterations, f1hat=" << f1 << "\n";
      if (!r.state.message.empty()) err << "seed " << r.seed << ": " << r.state.message << "\n";
      all_ok = all_ok && r.state.converged();
    }
    if (any_error) return 1;
    return all_ok ? 0 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& csv_path,
                std::ostream& out, std::ostream& err) {
  try {
    const RunConfig ca = load_run_config(a);
    const RunConfig cb = load_run_config(b);
    if (ca.problem != cb.problem || ca.seeds != cb.seeds || ca.x0_jitter != cb.x0_jitter)
      throw Error(ErrorCode::MismatchedProblem, "configs differ in problem, seeds or x0_jitter");
    const GeneratedProblem g = generate_problem(ca.problem);
    const auto ra = run_seeds(g, ca);
    const auto rb = run_seeds(g, cb);
    const std::size_t m = g.problem.m();
    std::ostringstream table;
    table << std::setprecision(17);
    table << "seed,iters_a,iters_b,f1hat_a,f1hat_b,oracle_a,oracle_b,status_a,status_b\n";
    for (std::size_t i = 0; i < ra.size(); ++i) {
      for (const auto* r : {&ra[i], &rb[i]})
        if (!r->error.empty()) throw Error(ErrorCode::ConfigError, "seed " + std::to_string(r->seed) + ": " + r->error);
      const auto& sa = ra[i].state;
      const auto& sb = rb[i].state;
      table << ra[i].seed << "," << sa.k << "," << sb.k << "," << sa.last_f1 << ","
            << sb.last_f1 << "," << batch_of(ca, m) * sa.k << "," << batch_of(cb, m) * sb.k
            << "," << termination_name(sa.status) << "," << termination_name(sb.status) << "\n";
    }
    out << table.str();
    if (!csv_path.empty()) {
      std::ofstream f(csv_path);
      if (!f) throw Error(ErrorCode::ConfigError, "cannot write " + csv_path);
      f << table.str();
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

json plan_budget(int formula, const json& constants, const json& params) {
  BudgetInputs bi;
  bi.c = constants_from_json(constants);
  Reader r(params, "");
  r.opt("eps", bi.eps);
  r.opt("E_g2_0", bi.E_g2_0);
  r.opt("r", bi.r);
  r.opt("eta", bi.eta);
  r.opt("gamma", bi.gamma);
  r.opt("L", bi.L);
  r.opt("m", bi.m);
  r.opt("n", bi.n);
  r.opt("r1", bi.r1);
  r.opt("r2", bi.r2);
  r.opt("r3", bi.r3);
  r.opt("tau_tilde", bi.tau_tilde);
  r.opt("tau_tilde_max", bi.tau_tilde_max);
  r.opt("tauL", bi.tauL);
  r.finish();
  Budget b;
  switch (formula) {
    case 21: b = budget_sublinear_stochastic(bi); break;
    case 25: b = budget_linear_stochastic(bi); break;
    case 28: b = budget_scheme4(bi, false); break;
    case 31: b = budget_scheme4(bi, true); break;
    default: throw Error(ErrorCode::DomainError, "formula must be 21, 25, 28 or 31");
  }
  json o{{"formula", formula}, {"k", b.k}, {"b", b.b}};
  if (formula == 28 || formula == 31) o["L"] = b.L;
  return o;
}

json estimate_report(const GeneratedProblem& g, int cloud, double radius, std::uint64_t seed,
                     std::size_t batch) {
  const ProblemConstants c = estimate_constants(g.problem, g.x0, cloud, radius, seed, batch);
  json o = to_json(c);
  o["l_g2"] = c.l_g2();
  o["l_f2"] = c.l_f2();
  o["problem"] = g.problem.name();
  o["m"] = g.problem.m();
  o["n"] = g.problem.n();
  return o;
}

int cmd_plan(int formula, const std::string& constants_path, const json& params,
             std::ostream& out, std::ostream& err) {
  try {
    std::ifstream in(constants_path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open constants " + constants_path);
    json cj;
    in >> cj;
    out << plan_budget(formula, cj, params).dump() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_estimate(const std::string& problem_path, int cloud, double radius,
                 std::uint64_t seed, std::size_t batch, std::ostream& out, std::ostream& err) {
  try {
    const GeneratedProblem g = generate_problem(json{{"path", problem_path}});
    out << estimate_report(g, cloud, radius, seed, batch).dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gnsq
