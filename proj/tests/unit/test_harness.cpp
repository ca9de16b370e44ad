#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "helpers.hpp"
#include "gnsq/diagnostics.hpp"
#include "gnsq/harness.hpp"

using namespace gnsq;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("gnsq_harness_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string write_json(const fs::path& dir, const std::string& file, const json& j) {
  const fs::path p = dir / file;
  std::ofstream(p) << j.dump(2);
  return p.string();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

json base_config(const fs::path& out) {
  return {{"schema", 1},
          {"problem", {{"builtin", "linear"}, {"m", 6}, {"n", 3}, {"seed", 2}}},
          {"solver", {{"scheme", "scheme1"}, {"max_outer", 200}}},
          {"seeds", {0, 1, 2}},
          {"output", out.string()}};
}

}  // namespace

TEST_CASE("generate_problem builtins") {
  const GeneratedProblem lin = generate_problem(
      {{"builtin", "linear"}, {"m", 4}, {"n", 10}, {"cond", 10.0}, {"seed", 1}});
  CHECK(lin.problem.m() == 4);
  CHECK(lin.problem.n() == 10);
  const ProblemConstants c = estimate_constants(lin.problem, lin.x0, 4, 1.0, 0);
  // singular values span [1, 10] before the 1/√m scaling
  CHECK(*c.mu == doctest::Approx(1.0 / 4.0).epsilon(1e-10));
  CHECK(*c.M_F == doctest::Approx(10.0 / 2.0).epsilon(1e-10));

  const GeneratedProblem r = generate_problem({{"builtin", "rosenbrock_system"}, {"n", 2}});
  const Vec x = th::v({0.5, 2.0});
  const Vec F = residual_full(r.problem, x);
  CHECK(F[0] == doctest::Approx(10.0 * (2.0 - 0.25)));
  CHECK(F[1] == doctest::Approx(0.5));
  CHECK(eval_f1hat(r.problem, th::v({1.0, 1.0})) == 0.0);

  const GeneratedProblem d = generate_problem({{"builtin", "duplicated_rows"}, {"m", 6}, {"n", 4}});
  CHECK_FALSE(pl_check(d.problem, {d.x0}, {2}).pass);

  CHECK_THROWS_AS(generate_problem({{"builtin", "nope"}}), Error);
  try {
    generate_problem({{"builtin", "nope"}});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownSpec);
  }
}

TEST_CASE("generate_problem explicit linear data and x0") {
  const GeneratedProblem g = generate_problem(
      {{"kind", "linear"}, {"A", {{1.0, 0.0}, {0.0, 2.0}}}, {"c", {1.0, 4.0}}, {"x0", {3.0, 3.0}}});
  CHECK(g.x0[0] == 3.0);
  CHECK(eval_f1hat(g.problem, th::v({1.0, 2.0})) == 0.0);
  CHECK_THROWS_AS(generate_problem({{"kind", "linear"}, {"A", {{1.0, 0.0}, {1.0}}}, {"c", {1, 2}}}),
                  Error);
}

TEST_CASE("config errors name the offending key") {
  json j = base_config("unused");
  j["solver"]["max_outter"] = 3;
  try {
    parse_run_config(j);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("solver.max_outter") != std::string::npos);
  }
  j = base_config("unused");
  j["solver"]["gamma"] = "big";
  j["solver"]["scheme"] = "scheme3";
  CHECK_THROWS_WITH_AS(parse_run_config(j), doctest::Contains("solver.gamma"), Error);
  j = base_config("unused");
  j.erase("schema");
  CHECK_THROWS_WITH_AS(parse_run_config(j), doctest::Contains("schema"), Error);
  j = base_config("unused");
  j["seeds"] = json::array();
  CHECK_THROWS_AS(parse_run_config(j), Error);
  j = base_config("unused");
  j["solver"]["scheme"] = "scheme9";
  CHECK_THROWS_WITH_AS(parse_run_config(j), doctest::Contains("solver.scheme"), Error);
}

TEST_CASE("config parsing fills the solver") {
  json j = base_config("o");
  j["solver"] = {{"scheme", "scheme4"}, {"b", 2},          {"step_rule", "two_batch"},
                 {"eta_policy", "optimal"}, {"tauL_tilde", 0.5},
                 {"stop", {{"f1_tol", 1e-9}}}, {"constants", {{"L_Fhat", 2.0}}}};
  const RunConfig c = parse_run_config(j);
  REQUIRE(c.stoch);
  CHECK_FALSE(c.det);
  CHECK(c.stoch->scheme == StochScheme::S4);
  CHECK(c.stoch->b == 2);
  CHECK(c.stoch->eta_policy == EtaPolicy::Lemma17Opt);
  CHECK(c.stoch->tauL_tilde == 0.5);
  CHECK(c.stoch->stop.f1_tol == 1e-9);
  CHECK(*c.stoch->constants.L_Fhat == 2.0);
  CHECK(c.seeds.size() == 3);
}

TEST_CASE("trace records round-trip") {
  TraceRecord r;
  r.k = 7;
  r.f1hat = 0.1 + 0.2;
  r.g1hat_batch = 1e-300;
  r.step_norm = 3.0;
  r.prox_grad_norm = std::numeric_limits<double>::infinity();
  r.L_k = 5e-324;
  r.tau_k = 1.0 / 3.0;
  r.eta_k = 0.5;
  r.n_L_probes = 3;
  r.batch_indices = {1, 4, 9};
  r.event = Event::Stall;
  r.wall_ns = 123456789;
  const std::string line = serialize_record(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(parse_record(line) == r);
  for (const char* key : {"k", "f1hat", "g1hat_batch", "step_norm", "prox_grad_norm", "L_k",
                          "tau_k", "eta_k", "n_L_probes", "batch_indices", "event", "wall_ns"})
    CHECK(json::parse(line).contains(key));
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    TraceRecord q;
    q.k = static_cast<std::size_t>(i);
    q.f1hat = std::exp(rng.normal() * 20.0);
    q.step_norm = rng.uniform();
    q.L_k = std::ldexp(rng.uniform(), static_cast<int>(rng.normal() * 100.0));
    q.event = static_cast<Event>(i % 4);
    CHECK(parse_record(serialize_record(q)) == q);
  }
  CHECK_THROWS_AS(parse_record("{not json"), Error);
}

TEST_CASE("run writes traces and a summary, exit 0 on convergence") {
  const fs::path d = scratch("ok");
  const std::string cfg = write_json(d, "c.json", base_config(d / "out"));
  std::ostringstream out, err;
  CHECK(cmd_run(cfg, out, err) == 0);
  const auto rows = lines_of(d / "out" / "summary.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "seed,scheme,status,iterations,final_f1hat,total_L_probes,wall_s");
  for (int s = 0; s < 3; ++s) {
    const auto tr = lines_of(d / "out" / ("trace_seed" + std::to_string(s) + ".jsonl"));
    REQUIRE_FALSE(tr.empty());
    std::size_t prev = 0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const TraceRecord r = parse_record(tr[i]);
      if (i > 0) CHECK(r.k > prev);
      prev = r.k;
      CHECK(std::isfinite(r.f1hat));
    }
  }
}

TEST_CASE("run exit codes for non-convergence and bad configs") {
  const fs::path d = scratch("codes");
  json j = base_config(d / "out");
  j["problem"] = {{"builtin", "rosenbrock_system"}, {"n", 4}};
  j["solver"]["max_outer"] = 1;
  std::ostringstream out, err;
  CHECK(cmd_run(write_json(d, "hard.json", j), out, err) == 2);
  j = base_config(d / "out");
  j["solver"]["bogus"] = 1;
  std::ostringstream out2, err2;
  CHECK(cmd_run(write_json(d, "bad.json", j), out2, err2) == 1);
  CHECK(err2.str().find("solver.bogus") != std::string::npos);
  std::ostringstream out3, err3;
  CHECK(cmd_run((d / "missing.json").string(), out3, err3) == 1);
}

TEST_CASE("interpolation run converges on every seed") {
  const fs::path d = scratch("interp");
  json j = base_config(d / "out");
  j["problem"] = {{"builtin", "overparam_features"}, {"m", 4}, {"n", 10}, {"seed", 0}};
  j["solver"] = {{"scheme", "interpolation"}, {"b", 1}, {"b_tilde", 1},
                 {"max_outer", 100000}, {"stop", {{"f1_tol", 1e-6}}}};
  std::ostringstream out, err;
  CHECK(cmd_run(write_json(d, "c.json", j), out, err) == 0);
}

TEST_CASE("compare pairs runs and rejects mismatched problems") {
  const fs::path d = scratch("cmp");
  json a = base_config(d / "a");
  json b = base_config(d / "b");
  b["solver"] = {{"scheme", "scheme3"}, {"b", 6}, {"max_outer", 200}};
  const std::string pa = write_json(d, "a.json", a);
  const std::string pb = write_json(d, "b.json", b);
  std::ostringstream out, err;
  REQUIRE(cmd_compare(pa, pb, (d / "cmp.csv").string(), out, err) == 0);
  const auto rows = lines_of(d / "cmp.csv");
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::stringstream ss(rows[i]);
    std::vector<std::string> f;
    for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
    REQUIRE(f.size() == 9);
    CHECK(f[1] == f[2]);  // full-batch scheme 3 takes scheme 1's iterations
  }
  std::ostringstream o2, e2;
  REQUIRE(cmd_compare(pa, pa, "", o2, e2) == 0);
  std::ostringstream o3, e3;
  REQUIRE(cmd_compare(pa, pa, "", o3, e3) == 0);
  CHECK(o2.str() == o3.str());
  json c = a;
  c["problem"]["seed"] = 3;
  std::ostringstream o4, e4;
  CHECK(cmd_compare(pa, write_json(d, "c.json", c), "", o4, e4) == 1);
  CHECK(e4.str().find("differ") != std::string::npos);
}

TEST_CASE("repeated runs give identical traces") {
  const fs::path d = scratch("det");
  json j = base_config(d / "out1");
  j["problem"] = {{"builtin", "trig_system"}, {"n", 5}, {"seed", 1}};
  j["solver"] = {{"scheme", "scheme5"}, {"b", 2}, {"max_outer", 60}};
  std::ostringstream o, e;
  cmd_run(write_json(d, "1.json", j), o, e);
  j["output"] = (d / "out2").string();
  cmd_run(write_json(d, "2.json", j), o, e);
  for (int s = 0; s < 3; ++s) {
    const std::string f = "trace_seed" + std::to_string(s) + ".jsonl";
    CHECK(lines_of(d / "out1" / f) == lines_of(d / "out2" / f));
  }
}

TEST_CASE("plan and estimate commands") {
  const fs::path d = scratch("plan");
  json cj = {{"L_Fhat", 1.0}, {"M_G", 1.0}, {"M_F", 1.0}, {"P_g1", 1.0}, {"P_f1", 1.0},
             {"l_F", 1.0}, {"mu", 1.0}, {"sigma_tilde", 0.0}};
  const std::string cp = write_json(d, "c.json", cj);
  std::ostringstream out, err;
  REQUIRE(cmd_plan(21, cp, {{"eps", 1.0}, {"E_g2_0", 1.0}, {"gamma", 1.0}, {"m", 10}}, out,
                   err) == 0);
  const json r = json::parse(out.str());
  CHECK(r.at("k") == 32);
  std::ostringstream o2, e2;
  CHECK(cmd_plan(22, cp, {{"eps", 1.0}}, o2, e2) == 1);
  std::ostringstream o3, e3;
  const std::string pp = write_json(d, "p.json", {{"builtin", "trig_system"}, {"n", 3}});
  REQUIRE(cmd_estimate(pp, 8, 1.0, 0, 0, o3, e3) == 0);
  const json est = json::parse(o3.str());
  const ProblemConstants back = constants_from_json(est);
  CHECK(back.L_Fhat.has_value());
  CHECK(est.at("provenance").at("L_Fhat") == "ESTIMATED");
}
