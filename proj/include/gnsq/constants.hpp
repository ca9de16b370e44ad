#pragma once

#include <optional>
#include <set>
#include <string>

#include "gnsq/error.hpp"

namespace gnsq {

// Problem constants of the convergence theory. Absent fields stay empty;
// user_fields lists the ones supplied rather than estimated.
struct ProblemConstants {
  std::optional<double> L_Fhat;
  std::optional<double> M_G;
  std::optional<double> M_F;
  std::optional<double> P_g1;
  std::optional<double> P_f1;
  std::optional<double> l_F;
  std::optional<double> mu;
  std::optional<double> sigma_tilde;
  bool sigma_undefined = false;  // m = 1
  std::set<std::string> user_fields;

  static double need(const std::optional<double>& v, const char* name) {
    if (!v) throw Error(ErrorCode::MissingEstimate, std::string("constant ") + name);
    return *v;
  }
  double l_g2() const {
    const double M = need(M_G, "M_G");
    return 2.0 * (M * M + need(L_Fhat, "L_Fhat") * need(P_g1, "P_g1"));
  }
  double l_f2() const {
    const double M = need(M_F, "M_F");
    return 2.0 * (need(L_Fhat, "L_Fhat") * need(P_f1, "P_f1") + M * M);
  }
  bool is_user(const std::string& f) const { return user_fields.count(f) > 0; }
};

}  // namespace gnsq
