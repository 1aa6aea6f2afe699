#pragma once

#include "kdvchart/chart.hpp"
#include "kdvchart/pseudo_op.hpp"

#include "json.hpp"

namespace kdvchart {

using Json = nlohmann::ordered_json;

Json to_json(const VerificationReport& rep);
Json to_json(const SymbolicProbe& probe);
std::string to_string(ZeroVerdict v);

/// Report for an operator comparison: symbolic verdicts per probe and
/// optional numeric residuals; verified when every probe reduces to zero
/// and every residual is below `tol`.
VerificationReport operator_comparison(const std::string& subject, const std::vector<SymbolicProbe>& probes,
                                       const std::vector<double>& numeric, double tol = 1e-7);

}  // namespace kdvchart
