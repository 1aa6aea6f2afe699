#include "kdvchart/dsl.hpp"
#include "kdvchart/numeric.hpp"
#include "kdvchart/report.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace kdvchart;

namespace {

std::string sci(double v) {
  std::ostringstream out;
  out << std::scientific << std::setprecision(2) << v;
  return out.str();
}

struct Options {
  std::string chart = "charts/kdv-chart.txt";
  std::string out;
  std::string data_dir;
  unsigned seed = 0;
  int jobs = 1;
  // grid and solver
  int n = 256;
  double length = 40;
  double t_end = -1;
  double dt = -1;
  int snapshot_every = -1;
  double tol = -1;
  int pairs = 20;
  double shift = 0;
  // subcommand arguments
  std::string name, second, via, format = "json";
  int count = 3;
  int level = 1;
};

class CliError : public std::runtime_error {
 public:
  CliError(std::string kind, const std::string& message) : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

ChartDocument open_chart(const std::string& path) {
  if (std::filesystem::exists(path)) return load_chart(path);
#ifdef KDVCHART_SOURCE_DIR
  const std::string fallback = std::string(KDVCHART_SOURCE_DIR) + "/" + path;
  if (std::filesystem::exists(fallback)) return load_chart(fallback);
#endif
  throw CliError("io", "cannot open chart " + path);
}

// Default sampled state of each chart field: positive, decayed towards a constant.
GridField default_field(const std::string& field, const SpectralGrid& grid) {
  GridField s2 = (1.0 / grid.x().cosh()).square();
  if (field == "u") return 2 * s2;
  if (field == "v") return 0.8 * s2;
  if (field == "s") return 1 + 0.5 * s2;
  return 1 + 0.3 * s2;
}

void write_csv(const std::string& dir, const std::string& file, const std::vector<double>& times,
               const std::vector<GridField>& snaps, const std::vector<GridField>& xs) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / file);
  if (!out) throw CliError("io", "cannot write " + file + " under " + dir);
  out.precision(17);
  out << "t,x,value\n";
  for (std::size_t i = 0; i < snaps.size(); ++i)
    for (Eigen::Index j = 0; j < snaps[i].size(); ++j) out << times[i] << ',' << xs[i](j) << ',' << snaps[i](j) << '\n';
}

Json envelope(const std::string& command, const Options& opt) {
  return {{"command", command}, {"chart", opt.chart}, {"seed", opt.seed}, {"reports", Json::array()}};
}

Json verify_link_cmd(const ChartDocument& doc, const Options& opt) {
  Json j = envelope("verify-link", opt);
  j["reports"].push_back(to_json(verify_link_symbolic(doc.registry, doc.registry.link(opt.name))));
  return j;
}

Json verify_invariance_cmd(const ChartDocument& doc, const Options& opt) {
  Json j = envelope("verify-invariance", opt);
  const BacklundLink& inv = doc.registry.link(opt.second);
  if (inv.kind != LinkKind::Invariance) throw CliError("usage", opt.second + " is not an invariance");
  j["reports"].push_back(to_json(verify_invariance(doc.registry, doc.registry.equation(opt.name), inv)));
  return j;
}

Json derive_recursion_cmd(const ChartDocument& doc, const Options& opt) {
  const ChartRegistry& reg = doc.registry;
  Json j = envelope("derive-recursion", opt);
  PseudoOp derived = derive_recursion(reg, opt.name, opt.second, reg.link(opt.via));
  const EquationDef& target = reg.equation(opt.second);
  auto probes = symbolic_compare(derived, target.recursion, probe_family(target.field, 5, opt.seed));
  std::vector<double> numeric;
  if (target.field != "phi") {
    SpectralGrid grid(opt.length, opt.n);
    numeric = numeric_compare(derived, target.recursion, target.field, default_field(target.field, grid), grid, 5,
                              opt.seed);
  }
  j["result"] = {{"operator", derived.str()}, {"registered", target.recursion.str()}, {"probes", Json::array()}};
  for (const auto& p : probes) j["result"]["probes"].push_back(to_json(p));
  j["reports"].push_back(
      to_json(operator_comparison("recursion of " + opt.second + " via " + opt.via, probes, numeric)));
  return j;
}

Json hierarchy_cmd(const ChartDocument& doc, const Options& opt) {
  const EquationDef& eq = doc.registry.equation(opt.name);
  if (opt.count < 1) throw CliError("usage", "-n must be at least 1");
  Json j = envelope("hierarchy", opt);
  std::vector<JetExpr> members = hierarchy(eq, opt.count);
  VerificationReport rep;
  rep.subject = eq.name + " hierarchy";
  rep.method = "symbolic-reduction";
  rep.verdict = Verdict::Verified;
  Json list = Json::array();
  for (std::size_t k = 0; k < members.size(); ++k) {
    list.push_back({{"n", k + 1}, {"flow", members[k].str()}});
    if (k + 1 < members.size()) {
      JetExpr next = op_apply(eq.recursion, members[k]);
      ReportStep s{"member " + std::to_string(k + 2) + " = recursion(member " + std::to_string(k + 1) + ")",
                   members[k + 1].str(), next.str(), (members[k + 1] - next).str(), members[k + 1] == next};
      if (!s.holds) rep.verdict = Verdict::Failed;
      rep.steps.push_back(std::move(s));
    }
  }
  if (eq.flow() != members.front()) {
    rep.verdict = Verdict::Failed;
    rep.message = "first member differs from the registered flow";
  }
  rep.residual = rep.ok() ? "0" : "";
  j["result"] = {{"members", list}};
  j["reports"].push_back(to_json(rep));
  return j;
}

Json check_hereditary_cmd(const ChartDocument& doc, const Options& opt) {
  const EquationDef& eq = doc.registry.equation(opt.name);
  if (eq.field == "phi") throw CliError("unsupported", "operator coefficients need the potential itself");
  SpectralGrid grid(opt.length, opt.n);
  const GridField base = default_field(eq.field, grid);
  const double tol = opt.tol > 0 ? opt.tol : 1e-5;
  std::vector<double> defects(static_cast<std::size_t>(opt.pairs));
  auto run = [&](int p) {
    const unsigned s = opt.seed * 7919U + 2U * static_cast<unsigned>(p);
    return hereditary_check(eq.recursion, eq.field, base, random_bumps(grid, s + 1), random_bumps(grid, s + 2), grid);
  };
  for (int start = 0; start < opt.pairs; start += std::max(1, opt.jobs)) {
    std::vector<std::future<double>> batch;
    for (int p = start; p < std::min(opt.pairs, start + std::max(1, opt.jobs)); ++p)
      batch.push_back(std::async(opt.jobs > 1 ? std::launch::async : std::launch::deferred, run, p));
    for (std::size_t k = 0; k < batch.size(); ++k) defects[static_cast<std::size_t>(start) + k] = batch[k].get();
  }
  VerificationReport rep;
  rep.subject = eq.name + " recursion operator";
  rep.method = "numeric-hereditary";
  rep.assumptions = {"decay", "positivity"};
  rep.norms = defects;
  const double worst = defects.empty() ? 0.0 : *std::max_element(defects.begin(), defects.end());
  rep.verdict = !defects.empty() && worst < tol ? Verdict::Verified : Verdict::Failed;
  rep.message = "worst relative defect " + sci(worst) + " over " + std::to_string(opt.pairs) + " pairs";
  Json j = envelope("check-hereditary", opt);
  j["result"] = {{"grid", {{"N", opt.n}, {"L", opt.length}}}, {"base", "default positive field"}};
  j["reports"].push_back(to_json(rep));
  return j;
}

Json transport_reciprocal(const ChartDocument& doc, const BacklundLink& link, const Options& opt) {
  const ChartRegistry& reg = doc.registry;
  const EquationDef& from = reg.equation(link.from);
  const EquationDef& to = reg.equation(link.to);
  SpectralGrid grid(opt.length, opt.n);
  EvolveOptions eo;
  eo.require_positive = true;
  eo.snapshot_every = opt.snapshot_every > 0 ? opt.snapshot_every : 1;
  const double dt = opt.dt > 0 ? opt.dt : 1e-3;
  const double t_end = opt.t_end > 0 ? opt.t_end : 14 * dt * eo.snapshot_every;
  auto traj = evolve(from.flow(), from.field, default_field(from.field, grid), t_end, dt, grid, eo);
  std::vector<GridField> rho, xs;
  std::vector<SpectralGrid> bars;
  VerificationReport rep;
  rep.subject = link.name;
  rep.method = "numeric-transport";
  rep.assumptions = {"decay", "positivity"};
  double roundtrip = 0;
  for (const auto& s : traj.snapshots) {
    auto r = reciprocal_transform(s, grid);
    roundtrip = std::max(roundtrip, r.roundtrip_error);
    rho.push_back(r.rho);
    xs.push_back(r.grid.x());
    bars.push_back(r.grid);
  }
  for (std::size_t i = 2; i + 2 < rho.size(); ++i) {
    const double h = traj.times[i + 1] - traj.times[i];
    GridField rt = (-rho[i + 2] + 8 * rho[i + 1] - 8 * rho[i - 1] + rho[i - 2]) / (12 * h);
    Binding b{{to.field, {rho[i], 0}}};
    rep.norms.push_back((rt - eval_expr(to.flow(), b, bars[i], {false, 1e-10, 1e-8})).abs().maxCoeff());
  }
  const double tol = opt.tol > 0 ? opt.tol : 1e-4;
  const double worst = rep.norms.empty() ? 0.0 : *std::max_element(rep.norms.begin(), rep.norms.end());
  rep.verdict = rep.norms.size() >= 1 && worst < tol ? Verdict::Verified : Verdict::Failed;
  rep.message = "max residual of the " + to.name + " flow " + sci(worst) + " over " +
                std::to_string(rep.norms.size()) + " snapshots; reciprocal round trip " + sci(roundtrip);
  std::vector<GridField> x0(traj.snapshots.size(), grid.x());
  write_csv(opt.data_dir, "transport_" + link.name + "_" + from.field + ".csv", traj.times, traj.snapshots, x0);
  write_csv(opt.data_dir, "transport_" + link.name + "_" + to.field + ".csv", traj.times, rho, xs);
  Json j = envelope("transport", opt);
  j["result"] = {{"scheme", traj.scheme}, {"snapshots", traj.times.size()}, {"dt", dt}, {"t_end", t_end}};
  j["reports"].push_back(to_json(rep));
  return j;
}

Json transport_cmd(const ChartDocument& doc, const Options& opt) {
  const ChartRegistry& reg = doc.registry;
  const BacklundLink& link = reg.link(opt.name);
  if (link.kind == LinkKind::Reciprocal) return transport_reciprocal(doc, link, opt);
  if (link.kind != LinkKind::Differential || !link.rule || link.rule->order != 0)
    throw CliError("unsupported", "transport needs a link solving a field itself (not a derivative or potential)");
  const std::string solved = link.rule->field;
  const std::string free = link.from_field == solved ? link.to_field : link.from_field;
  const EquationDef* es = reg.equation_for_field(solved);
  const EquationDef* ef = reg.equation_for_field(free);
  if (!es || !ef) throw CliError("unsupported", "both fields need an equation");
  SpectralGrid grid(opt.length, opt.n);
  EvolveOptions eo;
  const double dt = opt.dt > 0 ? opt.dt : 2e-3;
  const double t_end = opt.t_end > 0 ? opt.t_end : 1.0;
  eo.snapshot_every = opt.snapshot_every > 0 ? opt.snapshot_every : std::max(1, static_cast<int>(std::lround(t_end / dt / 10)));
  GridField free0 = default_field(free, grid);
  GridField shifted = opt.shift == 0 ? free0 : grid.interpolate(free0, grid.x() - opt.shift);
  GridField solved0 = eval_expr(link.rule->value, Binding{{free, {shifted, 0}}}, grid);
  auto evolve_one = [&](const EquationDef* eq, const GridField& init) {
    EvolveOptions o = eo;
    o.require_positive = init.minCoeff() > 1e-3;
    return evolve(eq->flow(), eq->field, init, t_end, dt, grid, o);
  };
  auto policy = opt.jobs > 1 ? std::launch::async : std::launch::deferred;
  auto tf = std::async(policy, evolve_one, ef, free0);
  auto ts = std::async(policy, evolve_one, es, solved0);
  Trajectory traj_free = tf.get(), traj_solved = ts.get();
  const bool solved_is_from = link.from_field == solved;
  VerificationReport rep = bt_time_preservation(link, solved_is_from ? traj_solved : traj_free,
                                                solved_is_from ? traj_free : traj_solved, grid,
                                                opt.tol > 0 ? opt.tol : 1e-5);
  std::vector<GridField> xs(traj_free.times.size(), grid.x());
  write_csv(opt.data_dir, "transport_" + link.name + "_" + free + ".csv", traj_free.times, traj_free.snapshots, xs);
  write_csv(opt.data_dir, "transport_" + link.name + "_" + solved + ".csv", traj_solved.times, traj_solved.snapshots, xs);
  Json j = envelope("transport", opt);
  j["result"] = {{"scheme", {{free, traj_free.scheme}, {solved, traj_solved.scheme}}},
                 {"snapshots", traj_free.times.size()},
                 {"dt", dt},
                 {"t_end", t_end},
                 {"shift", opt.shift},
                 {"l2_drift", {{free, traj_free.l2_drift.back()}, {solved, traj_solved.l2_drift.back()}}}};
  j["reports"].push_back(to_json(rep));
  return j;
}

Json error_json(const std::string& kind, const std::string& message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

void emit(const std::string& text, const Options& opt) {
  if (opt.out.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(opt.out);
  if (!out) throw CliError("io", "cannot write " + opt.out);
  out << text << '\n';
}

bool all_verified(const Json& j) {
  if (!j.contains("reports") || j["reports"].empty()) return false;
  return std::all_of(j["reports"].begin(), j["reports"].end(),
                     [](const Json& r) { return r["verdict"] == "verified"; });
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"Backlund chart engine for KdV-type equations"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.add_option("--chart", opt.chart, "chart file");
  app.add_option("--out", opt.out, "write the JSON report here instead of stdout");
  app.add_option("--data-dir", opt.data_dir, "directory for CSV snapshots");
  app.add_option("--seed", opt.seed, "seed for randomized probes");
  app.add_option("--jobs", opt.jobs, "worker threads for independent numeric runs")->check(CLI::PositiveNumber);
  auto grid_flags = [&](CLI::App* sub) {
    sub->add_option("--N", opt.n, "grid points (power of two)");
    sub->add_option("--L", opt.length, "domain length");
    sub->add_option("--tol", opt.tol, "verdict tolerance");
  };

  auto* link = app.add_subcommand("verify-link", "prove a link by substitution");
  link->add_option("link", opt.name, "link name")->required();
  auto* inv = app.add_subcommand("verify-invariance", "verify an invariance of an equation");
  inv->add_option("equation", opt.name, "equation name")->required();
  inv->add_option("invariance", opt.second, "invariance name")->required();
  auto* rec = app.add_subcommand("derive-recursion", "conjugate a recursion operator through a link");
  rec->add_option("from", opt.name, "equation carrying the known operator")->required();
  rec->add_option("to", opt.second, "equation receiving the operator")->required();
  rec->add_option("--via", opt.via, "link")->required();
  grid_flags(rec);
  auto* hier = app.add_subcommand("hierarchy", "generate hierarchy members");
  hier->add_option("equation", opt.name, "equation name")->required();
  hier->add_option("-n", opt.count, "number of members");
  auto* her = app.add_subcommand("check-hereditary", "numeric hereditary check of a recursion operator");
  her->add_option("equation", opt.name, "equation name")->required();
  her->add_option("--pairs", opt.pairs, "random (f, g) pairs");
  grid_flags(her);
  auto* tr = app.add_subcommand("transport", "evolve both ends of a link and check the relation in time");
  tr->add_option("link", opt.name, "link name")->required();
  tr->add_option("--t-end", opt.t_end, "final time");
  tr->add_option("--dt", opt.dt, "time step");
  tr->add_option("--snapshot-every", opt.snapshot_every, "steps between snapshots");
  tr->add_option("--shift", opt.shift, "shift the data of the solved field (negative control)");
  grid_flags(tr);
  auto* exp = app.add_subcommand("export-chart", "write the chart as a graph");
  exp->add_option("--format", opt.format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
  exp->add_option("--level", opt.level, "hierarchy level for node labels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cout << error_json("usage", e.what()).dump(2) << '\n';
    return 2;
  }

  try {
    ChartDocument doc = open_chart(opt.chart);
    if (exp->parsed()) {
      emit(export_chart(doc.registry, opt.format == "dot" ? ChartFormat::Dot : ChartFormat::Json, opt.level), opt);
      return 0;
    }
    Json j;
    if (link->parsed()) j = verify_link_cmd(doc, opt);
    if (inv->parsed()) j = verify_invariance_cmd(doc, opt);
    if (rec->parsed()) j = derive_recursion_cmd(doc, opt);
    if (hier->parsed()) j = hierarchy_cmd(doc, opt);
    if (her->parsed()) j = check_hereditary_cmd(doc, opt);
    if (tr->parsed()) j = transport_cmd(doc, opt);
    emit(j.dump(2), opt);
    return all_verified(j) ? 0 : 1;
  } catch (const ParseError& e) {
    Json err = error_json("parse", e.detail());
    err["error"]["line"] = e.line();
    err["error"]["col"] = e.col();
    err["error"]["expected"] = e.expected();
    std::cout << err.dump(2) << '\n';
  } catch (const CliError& e) {
    std::cout << error_json(e.kind(), e.what()).dump(2) << '\n';
  } catch (const NumericError& e) {
    std::cout << error_json("numeric-" + e.kind(), e.what()).dump(2) << '\n';
  } catch (const UnknownName& e) {
    std::cout << error_json("unknown-name", e.what()).dump(2) << '\n';
  } catch (const OperatorOrderOverflow& e) {
    std::cout << error_json("order-overflow", e.what()).dump(2) << '\n';
  } catch (const std::exception& e) {
    std::cout << error_json("internal", e.what()).dump(2) << '\n';
  }
  return 2;
}
