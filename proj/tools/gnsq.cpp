#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gnsq/checks.hpp"
#include "gnsq/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"gnsq: normalized-squares Gauss-Newton solvers"};
  app.require_subcommand(1);

  std::string cfg_path;
  auto* run = app.add_subcommand("run", "run a config, one trace per seed");
  run->add_option("config", cfg_path, "run config JSON")->required();

  std::string cmp_a, cmp_b, cmp_csv;
  auto* cmp = app.add_subcommand("compare", "paired summary of two configs");
  cmp->add_option("a", cmp_a)->required();
  cmp->add_option("b", cmp_b)->required();
  cmp->add_option("--csv", cmp_csv, "also write the table here");

  std::string suite = "all";
  std::uint64_t seed = 0;
  bool as_json = false, corrupt_kappa = false;
  auto* chk = app.add_subcommand("check", "property and certificate suites");
  chk->add_option("--suite", suite)->check(CLI::IsMember({"lemmas", "certificates", "all"}));
  chk->add_option("--seed", seed);
  chk->add_flag("--json", as_json, "print a JSON array of items");
  chk->add_flag("--corrupt-kappa", corrupt_kappa)->group("");

  int formula = 21;
  std::string consts;
  double eps = 0.0, E = 1.0, r = 0.5, eta = 1.0, gamma = 2.0, L = 1.0;
  double r1 = 1.0 / 3, r2 = 1.0 / 3, r3 = 1.0 / 3, tt = 1.0, ttmax = 1.0, tauL = 0.0;
  std::size_t m = 1, n = 1;
  auto* plan = app.add_subcommand("plan", "iteration and batch budgets");
  plan->add_option("--formula", formula)->check(CLI::IsMember({21, 25, 28, 31}));
  plan->add_option("--constants", consts)->required();
  plan->add_option("--eps", eps)->required();
  plan->add_option("--E", E, "E[g2(x0,B0)]");
  plan->add_option("--r", r);
  plan->add_option("--eta", eta);
  plan->add_option("--gamma", gamma);
  plan->add_option("--L", L);
  plan->add_option("--m", m);
  plan->add_option("--n", n);
  plan->add_option("--r1", r1);
  plan->add_option("--r2", r2);
  plan->add_option("--r3", r3);
  plan->add_option("--tau-tilde", tt);
  plan->add_option("--tau-tilde-max", ttmax);
  auto* tauL_opt = plan->add_option("--tauL", tauL, "fix tau~L instead of minimizing");

  std::string prob_path;
  int cloud = 64;
  double radius = 1.0;
  std::size_t batch = 0;
  auto* est = app.add_subcommand("estimate", "estimate problem constants");
  est->add_option("problem", prob_path)->required();
  est->add_option("--cloud", cloud);
  est->add_option("--radius", radius);
  est->add_option("--seed", seed);
  est->add_option("--batch", batch);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*run) return gnsq::cmd_run(cfg_path, std::cout, std::cerr);
  if (*cmp) return gnsq::cmd_compare(cmp_a, cmp_b, cmp_csv, std::cout, std::cerr);
  if (*plan) {
    nlohmann::json p{{"eps", eps}, {"E_g2_0", E}, {"r", r}, {"eta", eta}, {"gamma", gamma},
                     {"L", L}, {"m", m}, {"n", n}, {"r1", r1}, {"r2", r2}, {"r3", r3},
                     {"tau_tilde", tt}, {"tau_tilde_max", ttmax}};
    if (*tauL_opt) p["tauL"] = tauL;
    return gnsq::cmd_plan(formula, consts, p, std::cout, std::cerr);
  }
  if (*est) return gnsq::cmd_estimate(prob_path, cloud, radius, seed, batch, std::cout, std::cerr);

  const gnsq::Suite s = suite == "lemmas" ? gnsq::Suite::Lemmas
                        : suite == "certificates" ? gnsq::Suite::Certificates
                                                  : gnsq::Suite::All;
  gnsq::CheckHooks hooks;
  if (corrupt_kappa) hooks.kappa = [](double t) { return 10.0 * t; };
  try {
    const auto items = gnsq::run_checks(s, seed, hooks);
    bool ok = true;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& it : items) {
      ok = ok && it.pass;
      if (as_json) {
        nlohmann::json j{{"name", it.name}, {"pass", it.pass}, {"detail", it.detail}};
        if (!it.report.is_null()) j["report"] = it.report;
        arr.push_back(j);
      } else {
        std::cout << (it.pass ? "PASS " : "FAIL ") << it.name << " " << it.detail << "\n";
      }
    }
    if (as_json) std::cout << arr.dump(2) << "\n";
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
