#include "kdvchart/report.hpp"

#include <algorithm>

namespace kdvchart {

std::string to_string(ZeroVerdict v) {
  switch (v) {
    case ZeroVerdict::Zero:
      return "zero";
    case ZeroVerdict::NonZero:
      return "nonzero";
    case ZeroVerdict::Undecided:
      return "undecided";
  }
  return "undecided";
}

Json to_json(const VerificationReport& rep) {
  Json steps = Json::array();
  for (const auto& s : rep.steps)
    steps.push_back({{"label", s.label}, {"lhs", s.lhs}, {"rhs", s.rhs}, {"residual", s.residual}, {"holds", s.holds}});
  return {{"subject", rep.subject},
          {"method", rep.method},
          {"verdict", to_string(rep.verdict)},
          {"residual", rep.residual},
          {"norms", rep.norms},
          {"assumptions", rep.assumptions},
          {"steps", steps},
          {"message", rep.message}};
}

Json to_json(const SymbolicProbe& probe) {
  return {{"probe", probe.probe}, {"verdict", to_string(probe.verdict)}, {"residual", probe.residual}};
}

VerificationReport operator_comparison(const std::string& subject, const std::vector<SymbolicProbe>& probes,
                                       const std::vector<double>& numeric, double tol) {
  VerificationReport rep;
  rep.subject = subject;
  rep.method = numeric.empty() ? "symbolic-probes" : "symbolic-probes+numeric";
  rep.assumptions = {"decay"};
  rep.norms = numeric;
  bool ok = !probes.empty();
  for (const auto& p : probes) {
    rep.steps.push_back({"probe " + p.probe, "", "", p.residual, p.verdict == ZeroVerdict::Zero});
    ok = ok && p.verdict == ZeroVerdict::Zero;
  }
  const double worst = numeric.empty() ? 0.0 : *std::max_element(numeric.begin(), numeric.end());
  ok = ok && worst < tol;
  rep.verdict = ok ? Verdict::Verified : Verdict::Failed;
  rep.residual = ok ? "0" : "";
  rep.message = std::to_string(probes.size()) + " symbolic probes, " + std::to_string(numeric.size()) +
                " numeric probes, worst numeric residual " + std::to_string(worst);
  return rep;
}

}  // namespace kdvchart
