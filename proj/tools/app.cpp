#include "app.hpp"

#include "bicsep/detector.hpp"
#include "bicsep/errors.hpp"
#include "bicsep/kernel.hpp"
#include "bicsep/oracle.hpp"
#include "bicsep/transforms.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace bicsep::app {

namespace {

[[noreturn]] void invalid(const std::string& msg) { raise(ErrorCode::ValidationError, msg); }

const json& params_of(const json& block) {
  static const json empty = json::object();
  auto it = block.find("params");
  if (it == block.end()) return empty;
  if (!it->is_object()) invalid("params must be an object");
  return *it;
}

double number(const json& params, const std::string& key, const std::string& where, std::optional<double> fallback) {
  auto it = params.find(key);
  if (it == params.end()) {
    if (!fallback) invalid(where + "." + key + " is required");
    return *fallback;
  }
  if (!it->is_number()) invalid(where + "." + key + " must be a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) invalid(where + "." + key + " must be finite");
  return v;
}

double positive(const json& params, const std::string& key, const std::string& where, std::optional<double> fallback) {
  const double v = number(params, key, where, fallback);
  if (!(v > 0.0)) invalid(where + "." + key + " must be positive, got " + std::to_string(v));
  return v;
}

std::vector<double> array(const json& params, const std::string& key, const std::string& where) {
  auto it = params.find(key);
  if (it == params.end() || !it->is_array()) invalid(where + "." + key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : *it) {
    if (!x.is_number()) invalid(where + "." + key + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string family_of(const json& block, const std::string& where, const std::set<std::string>& allowed) {
  if (!block.is_object()) invalid(where + " must be an object");
  auto it = block.find("family");
  if (it == block.end() || !it->is_string()) invalid(where + ".family is required");
  const auto f = it->get<std::string>();
  if (!allowed.contains(f)) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    invalid(where + ".family '" + f + "' is not one of: " + list);
  }
  return f;
}

void check_table(const json& params, const std::string& where, const std::string& column, bool nonnegative) {
  const auto r = array(params, "r", where);
  const auto v = array(params, column, where);
  if (r.size() != v.size() || r.size() < 8) invalid(where + ": r and " + column + " need equal length >= 8");
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i] > 0.0) || (i > 0 && !(r[i] > r[i - 1]))) invalid(where + ".r must be positive and increasing");
    if (nonnegative && v[i] < 0.0)
      invalid(where + ": negative " + column + " sample " + std::to_string(v[i]) + " at r=" + std::to_string(r[i]));
  }
}

const std::set<std::string> tolerance_keys{"match", "root", "ceiling", "residual", "positivity", "flags",
                                           "candidate_tail", "scan_tail"};

void validate_local(const json& b) {
  const auto f = family_of(b, "local", {"exponential", "gaussian", "manufactured", "tabulated"});
  const auto& p = params_of(b);
  if (f == "exponential" || f == "gaussian") {
    const double c = number(p, "strength", "local.params", 1.0);
    if (c < 0.0) invalid("local.params.strength must be nonnegative (V >= 0), got " + std::to_string(c));
    positive(p, f == "exponential" ? "rate" : "width", "local.params", 1.0);
  } else if (f == "tabulated") {
    check_table(p, "local.params", "V", true);
  }
}

void validate_source(const json& b) {
  if (!b.is_object()) invalid("source must be an object");
  const std::string f = b.contains("family") ? family_of(b, "source", {"exponential", "algebraic", "tabulated", "none"})
                                             : std::string("none");
  const auto& p = params_of(b);
  if (f == "exponential" || f == "algebraic") {
    const double c = number(p, "amplitude", "source.params", 1.0);
    if (!(c > 0.0)) invalid("source g must be positive: source.params.amplitude = " + std::to_string(c));
    positive(p, f == "exponential" ? "rate" : "power", "source.params", f == "exponential" ? 1.0 : 4.0);
  } else if (f == "tabulated") {
    check_table(p, "source.params", "g", true);
    const auto g = array(p, "g", "source.params");
    if (std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; }))
      invalid("source g must be positive somewhere; all samples are zero");
  }
  if (auto it = b.find("deltas"); it != b.end()) {
    if (!it->is_array()) invalid("source.deltas must be an array");
    for (const auto& d : *it) {
      if (!d.is_object()) invalid("source.deltas entries must be objects");
      const double lam = number(d, "lambda", "source.deltas[]", std::nullopt);
      if (!(lam > 0.0)) invalid("source g must be positive: delta weight lambda = " + std::to_string(lam));
      positive(d, "r0", "source.deltas[]", std::nullopt);
    }
  }
  if (f == "none" && (!b.contains("deltas") || b["deltas"].empty())) invalid("source has neither a family nor deltas");
}

void validate_formfactor(const json& b, bool has_source, bool has_local) {
  const auto f = family_of(b, "formfactor", {"exponential", "tent", "exp-times-poly", "built-from-source", "tabulated"});
  const auto& p = params_of(b);
  if (f == "exponential") {
    number(p, "amplitude", "formfactor.params", 1.0);
    positive(p, "rate", "formfactor.params", 1.0);
  } else if (f == "tent") {
    number(p, "amplitude", "formfactor.params", 1.0);
    positive(p, "radius", "formfactor.params", 1.0);
  } else if (f == "exp-times-poly") {
    positive(p, "rate", "formfactor.params", 1.0);
    number(p, "b", "formfactor.params", 1.0);
    if (auto it = p.find("amplitude"); it != p.end()) {
      if (it->is_string()) {
        if (it->get<std::string>() != "engineered") invalid("formfactor.params.amplitude must be a number or \"engineered\"");
        if (has_local) invalid("an engineered amplitude needs V = 0; drop the local block");
      } else {
        number(p, "amplitude", "formfactor.params", std::nullopt);
      }
    }
    if (p.contains("k0")) positive(p, "k0", "formfactor.params", std::nullopt);
  } else if (f == "built-from-source") {
    if (!has_source) invalid("formfactor family built-from-source needs a source block");
  } else {
    check_table(p, "formfactor.params", "U", false);
  }
}

Numerics parse_numerics(const json& b) {
  Numerics n;
  if (!b.is_object()) invalid("numerics must be an object");
  for (const auto& [key, value] : b.items()) {
    static const std::set<std::string> known{"r_max", "nodes", "k_max", "momenta", "kernel_R", "jitter",
                                             "box_lengths", "box_step", "tolerances"};
    if (!known.contains(key)) invalid("numerics." + key + " is not a known setting");
  }
  n.r_max = positive(b, "r_max", "numerics", n.r_max);
  n.nodes = Index(positive(b, "nodes", "numerics", double(n.nodes)));
  n.k_max = positive(b, "k_max", "numerics", n.k_max);
  n.momenta = Index(positive(b, "momenta", "numerics", double(n.momenta)));
  n.kernel_R = positive(b, "kernel_R", "numerics", n.kernel_R);
  n.jitter = number(b, "jitter", "numerics", 0.0);
  if (n.jitter < 0.0 || n.jitter >= 0.5) invalid("numerics.jitter must lie in [0, 0.5)");
  n.box_step = positive(b, "box_step", "numerics", n.box_step);
  if (b.contains("box_lengths")) {
    n.box_lengths = array(b, "box_lengths", "numerics");
    if (n.box_lengths.empty()) invalid("numerics.box_lengths must not be empty");
    for (double L : n.box_lengths)
      if (!(L > 0.0)) invalid("numerics.box_lengths must be positive");
  }
  if (n.nodes < 50) invalid("numerics.nodes must be at least 50");
  if (auto it = b.find("tolerances"); it != b.end()) {
    if (!it->is_object()) invalid("numerics.tolerances must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!tolerance_keys.contains(key)) invalid("numerics.tolerances." + key + " is not a known tolerance");
      n.tolerances[key] = positive(*it, key, "numerics.tolerances", std::nullopt);
    }
  }
  return n;
}

double tolerance(const std::map<std::string, double>& spec, const std::map<std::string, double>& cli,
                 const std::string& key, double fallback) {
  if (auto it = cli.find(key); it != cli.end()) return it->second;
  if (auto it = spec.find(key); it != spec.end()) return it->second;
  return fallback;
}

RadialGrid make_grid(const Numerics& n, std::uint64_t seed) {
  auto g = RadialGrid::standard(n.r_max, n.nodes);
  if (n.jitter == 0.0) return g;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-n.jitter, n.jitter);
  Eigen::VectorXd x = g.nodes();
  const double step = std::log(x[1] / x[0]);
  for (Index i = 1; i + 1 < x.size(); ++i) x[i] *= std::exp(d(rng) * step);
  return RadialGrid(std::move(x));
}

SampledFunction table_function(const json& p, const std::string& column) {
  const auto r = array(p, "r", "params");
  const auto v = array(p, column, "params");
  Eigen::VectorXd rv = Eigen::Map<const Eigen::VectorXd>(r.data(), Index(r.size()));
  Eigen::VectorXd vv = Eigen::Map<const Eigen::VectorXd>(v.data(), Index(v.size()));
  auto tail = fit_tail(rv, vv);
  return SampledFunction(RadialGrid(std::move(rv)), std::move(vv), tail);
}

LocalPotential make_local(const json& b, const RadialGrid& grid) {
  const auto f = b["family"].get<std::string>();
  const auto& p = params_of(b);
  if (f == "manufactured") return manufactured(grid);
  if (f == "tabulated") return LocalPotential(table_function(p, "V"));
  const double c = number(p, "strength", "", 1.0);
  if (f == "exponential") {
    const double a = number(p, "rate", "", 1.0);
    return LocalPotential(SampledFunction::sample(grid, [=](double r) { return c * std::exp(-a * r); },
                                                  c == 0.0 ? TailModel::compact(0.0) : TailModel::exponential(a)));
  }
  const double w = number(p, "width", "", 1.0);
  return LocalPotential(SampledFunction::sample_fitted(grid, [=](double r) { return c * std::exp(-(r / w) * (r / w)); }));
}

SourceFunction make_source(const json& b, const RadialGrid& grid) {
  SourceFunction s;
  const std::string f = b.contains("family") ? b["family"].get<std::string>() : "none";
  const auto& p = params_of(b);
  if (f == "exponential") {
    const double c = number(p, "amplitude", "", 1.0), a = number(p, "rate", "", 1.0);
    s.smooth = SampledFunction::sample(grid, [=](double t) { return c * std::exp(-a * t); }, TailModel::exponential(a));
  } else if (f == "algebraic") {
    const double c = number(p, "amplitude", "", 1.0), pw = number(p, "power", "", 4.0);
    s.smooth = SampledFunction::sample(grid, [=](double t) { return c * std::pow(1.0 + t, -pw); },
                                       TailModel::algebraic(pw));
  } else if (f == "tabulated") {
    s.smooth = table_function(p, "g");
  }
  if (auto it = b.find("deltas"); it != b.end())
    for (const auto& d : *it) s.deltas.push_back({d["lambda"].get<double>(), d["r0"].get<double>()});
  s.validate();
  return s;
}

json to_json(const std::vector<Condition>& cs) {
  json out = json::array();
  for (const auto& c : cs) out.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return out;
}

json to_json(const Certificate& c) {
  return {{"theorem", c.theorem}, {"passed", c.passed}, {"degenerate", c.degenerate}, {"warning", c.warning},
          {"conditions", to_json(c.conditions)}};
}

json to_json(const FormFactorFlags& f) {
  return {{"positive", f.positive},
          {"decreasing", f.decreasing},
          {"convex", f.convex},
          {"vanishes_at_infinity", f.vanishes_at_infinity},
          {"l1_near_origin", f.l1_near_origin},
          {"l1_at_infinity", f.l1_at_infinity},
          {"rU_l1_at_infinity", f.rU_l1_at_infinity},
          {"r2U_l1_at_infinity", f.r2U_l1_at_infinity}};
}

json to_json(const std::vector<LedgerEntry>& es) {
  json out = json::array();
  for (const auto& e : es)
    out.push_back({{"hypothesis", e.hypothesis},
                   {"conclusion", e.conclusion},
                   {"hypothesis_holds", e.hypothesis_holds},
                   {"measured", e.measured},
                   {"consistent", e.consistent()}});
  return out;
}

json to_json(const SpectralScan& s) {
  json boxes = json::array();
  auto level = [](const BoxLevel& l) {
    return json{{"lambda", l.lambda}, {"participation", l.participation}, {"tail_mass", l.tail_mass},
                {"residual", l.residual}};
  };
  for (const auto& b : s.boxes) {
    json levels = json::array();
    for (const auto& l : b.levels) levels.push_back(level(l));
    boxes.push_back({{"L", b.L}, {"window", b.window}, {"levels", levels},
                     {"candidate", b.candidate ? level(*b.candidate) : json(nullptr)}});
  }
  return {{"k0", s.k0},       {"verdict", to_string(s.verdict)}, {"reason", s.reason},
          {"support_region", s.support_region}, {"boxes", boxes}, {"drift", s.drift},
          {"continuum_shift", s.continuum_shift}};
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd momentum_grid(const Numerics& n, bool include_zero) {
  Eigen::VectorXd k(n.momenta);
  const double lo = include_zero ? 0.0 : n.k_max / double(n.momenta);
  for (Index i = 0; i < n.momenta; ++i) k[i] = lo + (n.k_max - lo) * double(i) / double(n.momenta - 1);
  return k;
}

DetectOptions detect_options(const PotentialSpec& spec, const Request& rq) {
  DetectOptions o;
  o.k_max = spec.numerics.k_max;
  o.match_tol = tolerance(spec.numerics.tolerances, rq.tolerances, "match", o.match_tol);
  o.zeros.root_tol = tolerance(spec.numerics.tolerances, rq.tolerances, "root", o.zeros.root_tol);
  o.ceiling_tol = tolerance(spec.numerics.tolerances, rq.tolerances, "ceiling", o.ceiling_tol);
  return o;
}

LocalPotential local_or_zero(const Problem& p) { return p.local ? *p.local : LocalPotential::zero(p.grid); }

// --- commands ---------------------------------------------------------------

void cmd_transform(const PotentialSpec& spec, const Request& rq, const Problem& p, RunReport& out) {
  const auto& u = p.u.profile();
  auto& res = out.document["results"];
  auto& ver = out.document["verdicts"];
  TransformTable t;
  if (rq.kind == "sine") {
    t = sine_transform(u, momentum_grid(spec.numerics, true));
  } else if (rq.kind == "cosine") {
    auto c = cosine_transform(u, momentum_grid(spec.numerics, true));
    t = std::move(c.table);
    res["convex_decreasing"] = c.convex_decreasing;
    res["min_value"] = c.min_value;
    ver["convex_decreasing"] = c.convex_decreasing;
  } else if (rq.kind == "hankel") {
    t = hankel_transform(u, rq.order, momentum_grid(spec.numerics, false));
  } else if (rq.kind == "weighted") {
    t = weighted_transform(u, local_or_zero(p), momentum_grid(spec.numerics, false));
  } else {
    invalid("transform kind must be sine, cosine, hankel or weighted");
  }
  res["kind"] = rq.kind;
  res["order"] = rq.order;
  ver["kind"] = rq.kind;
  out.series.push_back({"transform", {"k", "value"}, {t.momenta, t.values}});
}

void cmd_solve_local(const PotentialSpec& spec, const Request&, const Problem& p, RunReport& out) {
  const auto v = local_or_zero(p);
  const auto pair = zero_energy_pair(v);
  const Eigen::VectorXd w = pair.wronskian();
  const double wdev = (w.array() - 1.0).abs().maxCoeff();
  const auto ks = momentum_grid(spec.numerics, false);
  const auto jost = jost_modulus(v, ks);
  auto& res = out.document["results"];
  res["A"] = pair.A;
  res["B"] = pair.B;
  res["wronskian_max_deviation"] = wdev;
  res["jost_max_spread"] = jost.spread.maxCoeff();
  out.document["verdicts"]["wronskian_unity"] = wdev < 1e-6;
  out.series.push_back({"zero_energy", {"r", "phi0", "chi0"}, {pair.phi0.grid().nodes(), pair.phi0.values(), pair.chi0.values()}});
  out.series.push_back({"jost", {"k", "F2", "spread"}, {jost.momenta, jost.values, jost.spread}});
}

void cmd_kernel(const PotentialSpec& spec, const Request&, const Problem& p, RunReport& out) {
  auto v = local_or_zero(p);
  KernelOptions ko;
  ko.R = spec.numerics.kernel_R;
  auto& res = out.document["results"];
  std::optional<KernelTable> kt;
  try {
    kt = solve_kernel(v, ko);
    res["regularized_at"] = nullptr;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::IntegrabilityViolation) throw;
    // V too singular at the origin for the kernel iteration; freeze it below 1e-3
    kt = solve_kernel(v.regularized(1e-3), ko);
    res["regularized_at"] = 1e-3;
  }
  const auto d = kernel_diagnostics(*kt);
  const auto f = f_transform(*kt, p.u.profile());
  const auto req = check_requirements(f);
  res["R"] = kt->R();
  res["iterations"] = kt->iterations();
  res["residual"] = kt->residual();
  res["richardson_change"] = kt->richardson_change();
  res["first_moment"] = kt->first_moment();
  res["bound_margin"] = d.bound_margin;
  res["bound_holds"] = d.bound_holds;
  res["nonnegative"] = d.nonnegative;
  res["max_axis_value"] = d.max_axis_value;
  res["diagonal_error"] = d.diagonal_error;
  res["f_profile"] = {{"positive", f.positive},     {"l1_near_origin", f.l1_near_origin},
                      {"decreasing", f.decreasing}, {"vanishing_at_infinity", f.vanishing_at_infinity},
                      {"convex", f.convex},         {"tail_bound", f.tail_bound}};
  res["requirements"] = {{"passed", req.passed}, {"conditions", to_json(req.conditions)}};
  auto& ver = out.document["verdicts"];
  ver["bound_holds"] = d.bound_holds;
  ver["kernel_nonnegative"] = d.nonnegative;
  ver["requirements"] = req.passed;
  out.series.push_back({"f_profile", {"r", "f"}, {f.f.grid().nodes(), f.f.values()}});
}

void cmd_build_u(const PotentialSpec& spec, const Request& rq, const Problem& p, RunReport& out) {
  if (!p.source) invalid("build-u needs a source block");
  const auto v = local_or_zero(p);
  const double tol = tolerance(spec.numerics.tolerances, rq.tolerances, "residual", 1e-6);
  // p.u is already the built profile when the form factor family asks for it
  const FormFactor built = p.u.provenance() == Provenance::built
                               ? p.u
                               : build_from_source(zero_energy_pair(v), *p.source,
                                                   {tolerance(spec.numerics.tolerances, rq.tolerances, "positivity", 1e-9)});
  const auto rep = ode_residual(built, v, *p.source, tol);
  const auto ledger = integrability_ledger(*p.source, built);
  auto& res = out.document["results"];
  res["residual"] = {{"max", rep.max_residual}, {"at", rep.at}, {"checked", rep.checked}, {"passed", rep.passed}};
  res["origin_limit"] = origin_limit(zero_energy_pair(v), *p.source);
  res["U_first_node"] = built.profile().values()[0];
  res["flags"] = to_json(built.flags());
  res["ledger"] = {{"literal", to_json(ledger.literal)}, {"corrected", to_json(ledger.corrected)}};
  auto& ver = out.document["verdicts"];
  ver["residual_passed"] = rep.passed;
  ver["positive"] = built.flags().positive;
  ver["literal_ledger_consistent"] = ledger.literal_consistent();
  ver["corrected_ledger_consistent"] = ledger.corrected_consistent();
  out.series.push_back({"built", {"r", "U"}, {built.profile().grid().nodes(), built.profile().values()}});
}

Certificate theorem_B(const Problem& p, const PotentialSpec& spec, const Request& rq) {
  TheoremBOptions o;
  o.residual_tol = tolerance(spec.numerics.tolerances, rq.tolerances, "residual", o.residual_tol);
  return certify_theorem_B(p.u, local_or_zero(p), o);
}

DetectionReport run_detect(const PotentialSpec& spec, const Request& rq, const Problem& p) {
  const LocalPotential* v = p.local && !p.local->is_zero() ? &*p.local : nullptr;
  return detect(p.u.profile(), v, p.epsilon, detect_options(spec, rq));
}

void cmd_detect(const PotentialSpec& spec, const Request& rq, const Problem& p, RunReport& out) {
  const auto r = run_detect(spec, rq, p);
  const auto& u = p.u.profile();
  const double flag_tol = tolerance(spec.numerics.tolerances, rq.tolerances, "flags", 1e-9);
  const auto cA = certify_theorem_A(u, flag_tol);
  auto& res = out.document["results"];
  json zeros = json::array(), embedded = json::array();
  for (std::size_t i = 0; i < r.zeros.size(); ++i)
    zeros.push_back({{"k", r.zeros[i].k}, {"u_tilde", r.zeros[i].value}, {"double_zero", r.zeros[i].double_zero},
                     {"dispersion", r.zero_dispersion[i]}});
  std::vector<double> ek;
  for (const auto& e : r.embedded) {
    embedded.push_back({{"k", e.k}, {"u_tilde", e.u_tilde}, {"dispersion", e.dispersion}});
    ek.push_back(e.k);
  }
  res["epsilon"] = r.epsilon;
  res["k_ceiling"] = r.k_ceiling;
  res["unit_weight"] = r.unit_weight;
  if (p.amplitude) res["engineered_amplitude"] = *p.amplitude;
  res["zeros"] = zeros;
  res["embedded"] = embedded;
  res["certificates"] = json::array({to_json(cA)});
  auto& ver = out.document["verdicts"];
  ver["embedded_count"] = r.embedded.size();
  ver["embedded_k"] = ek;
  ver["theorem_A"] = cA.passed;
  if (p.local) {
    const auto cB = theorem_B(p, spec, rq);
    res["certificates"].push_back(to_json(cB));
    ver["theorem_B"] = cB.passed;
  }
  const auto ut = r.u_tilde.as_function();
  Eigen::VectorXd uk(r.curve.momenta.size());
  for (Index i = 0; i < uk.size(); ++i) uk[i] = ut(r.curve.momenta[i]);
  out.series.push_back({"momentum", {"k", "U_tilde", "D"}, {r.curve.momenta, uk, r.curve.values}});
  const auto w = tail_function(u);
  const auto om = omega_convolution(signed_split(u));
  Eigen::VectorXd omv(u.size());
  for (Index i = 0; i < u.size(); ++i) omv[i] = om(u.grid()[i]);
  out.series.push_back({"radial", {"r", "U", "W", "omega"}, {u.grid().nodes(), u.values(), w.values(), omv}});
}

void cmd_certify(const PotentialSpec& spec, const Request& rq, const Problem& p, RunReport& out) {
  Certificate c;
  if (rq.theorem == "A")
    c = certify_theorem_A(p.u.profile(), tolerance(spec.numerics.tolerances, rq.tolerances, "flags", 1e-9));
  else if (rq.theorem == "B")
    c = theorem_B(p, spec, rq);
  else
    invalid("theorem must be A or B");
  out.document["results"]["certificate"] = to_json(c);
  out.document["verdicts"]["theorem"] = c.theorem;
  out.document["verdicts"]["passed"] = c.passed;
  out.document["verdicts"]["degenerate"] = c.degenerate;
}

void cmd_oracle(const PotentialSpec& spec, const Request& rq, const Problem& p, RunReport& out) {
  const auto det = run_detect(spec, rq, p);
  std::vector<double> ks;
  if (rq.k0) ks.push_back(*rq.k0);
  else
    for (const auto& z : det.zeros) ks.push_back(z.k);
  ScanOptions so;
  so.lengths = spec.numerics.box_lengths;
  so.h = spec.numerics.box_step;
  so.tail_limit = tolerance(spec.numerics.tolerances, rq.tolerances, "scan_tail", so.tail_limit);
  CandidateOptions co;
  co.tail_limit = tolerance(spec.numerics.tolerances, rq.tolerances, "candidate_tail", co.tail_limit);
  const LocalPotential* v = p.local && !p.local->is_zero() ? &*p.local : nullptr;
  json scans = json::array(), verdicts = json::array();
  bool agree = true, ambiguous = false;
  for (double k0 : ks) {
    const auto s = embedded_scan(v, p.u.profile(), p.epsilon, k0, so);
    bool embedded = false;
    for (const auto& e : det.embedded) embedded = embedded || std::abs(e.k - k0) < 1e-6 * (1.0 + k0);
    const bool confirmed = s.verdict == ScanVerdict::confirmed;
    ambiguous = ambiguous || s.verdict == ScanVerdict::ambiguous;
    const bool agrees = s.verdict != ScanVerdict::ambiguous && embedded == confirmed;
    agree = agree && agrees;
    json entry = to_json(s);
    entry["detector_embedded"] = embedded;
    entry["agreement"] = agrees;
    if (!v) {
      try {
        const auto c = candidate_wavefunction(p.u.profile(), p.epsilon, k0, co);
        entry["candidate_wavefunction"] = {{"tail_mass", c.tail_mass}, {"self_consistency", c.self_consistency},
                                           {"residual", c.residual}};
        if (confirmed)
          out.series.push_back({"candidate_k" + std::to_string(scans.size()), {"r", "psi"},
                                {c.psi.grid().nodes(), c.psi.values()}});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::TailNotDecaying) throw;
        entry["candidate_wavefunction"] = {{"error", e.what()}};
      }
    }
    scans.push_back(entry);
    verdicts.push_back({{"k0", k0}, {"verdict", to_string(s.verdict)}, {"agreement", agrees}});
  }
  out.document["results"]["scans"] = scans;
  out.document["verdicts"]["scans"] = verdicts;
  out.document["verdicts"]["agreement"] = agree;
  if (ambiguous) {
    out.document["verdicts"]["error"] = std::string(to_string(ErrorCode::AmbiguousScan));
    out.exit_code = exit_ambiguous;
  }
}

}  // namespace

PotentialSpec parse_spec(const std::string& text) {
  PotentialSpec s;
  try {
    s.raw = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    raise(ErrorCode::SpecParseError, e.what());
  }
  const auto& j = s.raw;
  if (!j.is_object()) raise(ErrorCode::SpecParseError, "spec must be a structured object at the top level");
  static const std::set<std::string> known{"schema_version", "description", "epsilon", "local",
                                           "formfactor", "source", "numerics"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) invalid("unknown top-level key '" + key + "'");
  if (j.contains("schema_version") && !(j["schema_version"].is_number_integer() && j["schema_version"] == schema_version))
    invalid("schema_version must be " + std::to_string(schema_version));
  if (!j.contains("epsilon") || !j["epsilon"].is_number()) invalid("epsilon is required and must be +1 or -1");
  const double e = j["epsilon"].get<double>();
  if (e != 1.0 && e != -1.0) invalid("epsilon must be +1 or -1, got " + j["epsilon"].dump());
  s.epsilon = int(e);
  if (!j.contains("formfactor")) invalid("exactly one formfactor block is required");
  if (j.contains("local")) {
    validate_local(j["local"]);
    s.local = j["local"];
  }
  if (j.contains("source")) {
    validate_source(j["source"]);
    s.source = j["source"];
  }
  validate_formfactor(j["formfactor"], s.source.has_value(), s.local.has_value());
  s.formfactor = j["formfactor"];
  if (j.contains("numerics")) s.numerics = parse_numerics(j["numerics"]);
  return s;
}

PotentialSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::SpecParseError, "cannot read spec file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

Problem materialize(const PotentialSpec& spec, std::uint64_t seed) {
  auto grid = make_grid(spec.numerics, seed);
  std::optional<LocalPotential> local;
  if (spec.local) local = make_local(*spec.local, grid);
  std::optional<SourceFunction> source;
  if (spec.source) source = make_source(*spec.source, grid);
  const auto& fb = spec.formfactor;
  const auto f = fb["family"].get<std::string>();
  const auto& pm = params_of(fb);
  const double flags_tol = spec.numerics.tolerances.contains("flags") ? spec.numerics.tolerances.at("flags") : 1e-9;
  std::optional<double> design_k0, amplitude;
  auto make = [&]() -> FormFactor {
    if (f == "exponential") {
      const double A = number(pm, "amplitude", "", 1.0), a = number(pm, "rate", "", 1.0);
      return FormFactor(SampledFunction::sample(grid, [=](double r) { return A * std::exp(-a * r); },
                                                TailModel::exponential(a)),
                        flags_tol);
    }
    if (f == "tent") {
      const double A = number(pm, "amplitude", "", 1.0), R = number(pm, "radius", "", 1.0);
      const double site[] = {R};
      const auto g = grid.with_nodes(site);
      SampledFunction::Options o;
      o.breakpoints = {R};
      return FormFactor(
          SampledFunction::sample(g, [=](double r) { return A * std::max(0.0, 1.0 - r / R); }, TailModel::compact(R), o),
          flags_tol);
    }
    if (f == "exp-times-poly") {
      const double a = number(pm, "rate", "", 1.0), b = number(pm, "b", "", 1.0);
      if (pm.contains("k0")) design_k0 = pm["k0"].get<double>();
      else if (2.0 * a * b > a * a) design_k0 = std::sqrt(2.0 * a * b - a * a);
      const auto shape = SampledFunction::sample(grid, [=](double r) { return std::exp(-a * r) * (1.0 - b * r); },
                                                 TailModel::exponential(a));
      double A = 1.0;
      if (pm.contains("amplitude") && pm["amplitude"].is_string()) {
        if (!design_k0) invalid("engineered amplitude needs 2ab > a^2 or an explicit k0");
        const auto amp = solve_engineered_amplitude(spectrum(shape, nullptr), spec.epsilon, *design_k0);
        if (!amp)
          raise(ErrorCode::DomainError, "no real amplitude makes D(k0) vanish for this shape and epsilon");
        A = amp->amplitude;
        amplitude = A;
      } else {
        A = number(pm, "amplitude", "", 1.0);
      }
      return FormFactor(shape.scaled(A), flags_tol);
    }
    if (f == "built-from-source") {
      const auto v = local ? *local : LocalPotential::zero(grid);
      BuildOptions bo;
      if (spec.numerics.tolerances.contains("positivity")) bo.positivity_tol = spec.numerics.tolerances.at("positivity");
      return build_from_source(zero_energy_pair(v), *source, bo);
    }
    return FormFactor(table_function(pm, "U"), flags_tol);
  };
  auto u = make();
  return Problem{grid, std::move(local), std::move(source), std::move(u), spec.epsilon, design_k0, amplitude};
}

json request_to_json(const Request& r) {
  json j{{"command", r.command}, {"seed", r.seed}};
  if (r.command == "transform") {
    j["kind"] = r.kind;
    j["order"] = r.order;
  }
  if (r.command == "certify") j["theorem"] = r.theorem;
  if (r.k0) j["k0"] = *r.k0;
  j["tolerances"] = r.tolerances;
  return j;
}

Request request_from_json(const json& j) {
  Request r;
  try {
    r.command = j.at("command").get<std::string>();
    r.seed = j.value("seed", std::uint64_t{0});
    r.kind = j.value("kind", std::string("sine"));
    r.order = j.value("order", 0.0);
    r.theorem = j.value("theorem", std::string("A"));
    if (j.contains("k0")) r.k0 = j["k0"].get<double>();
    if (j.contains("tolerances")) r.tolerances = j["tolerances"].get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    raise(ErrorCode::SpecParseError, std::string("report request block: ") + e.what());
  }
  return r;
}

RunReport run(const PotentialSpec& spec, const Request& rq) {
  for (const auto& [key, value] : rq.tolerances)
    if (!tolerance_keys.contains(key)) invalid("--tolerance " + key + " is not a known tolerance");
  const auto t0 = std::chrono::steady_clock::now();
  RunReport out;
  out.document = {{"schema_version", schema_version}, {"command", rq.command}, {"request", request_to_json(rq)},
                  {"spec", spec.raw}, {"results", json::object()}, {"verdicts", json::object()}};
  const auto p = materialize(spec, rq.seed);
  if (rq.command == "transform") cmd_transform(spec, rq, p, out);
  else if (rq.command == "solve-local") cmd_solve_local(spec, rq, p, out);
  else if (rq.command == "kernel") cmd_kernel(spec, rq, p, out);
  else if (rq.command == "build-u") cmd_build_u(spec, rq, p, out);
  else if (rq.command == "detect") cmd_detect(spec, rq, p, out);
  else if (rq.command == "certify") cmd_certify(spec, rq, p, out);
  else if (rq.command == "oracle") cmd_oracle(spec, rq, p, out);
  else raise(ErrorCode::InvalidArgument, "unknown command " + rq.command);
  out.document["timing"] = {
      {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  return out;
}

std::string series_csv(const Series& s) {
  std::string out;
  for (std::size_t c = 0; c < s.columns.size(); ++c) out += (c ? "," : "") + s.columns[c];
  out += '\n';
  const Index n = s.data.empty() ? 0 : s.data.front().size();
  char buf[32];
  for (Index i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < s.data.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17e", s.data[c][i]);
      if (c) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_outputs(const RunReport& report, const std::filesystem::path& dir, bool csv) {
  std::filesystem::create_directories(dir);
  json doc = report.document;
  json series = json::object();
  for (const auto& s : report.series) {
    json cols = json::object();
    for (std::size_t c = 0; c < s.columns.size(); ++c) cols[s.columns[c]] = to_vector(s.data[c]);
    series[s.name] = cols;
    if (csv) std::ofstream(dir / (s.name + ".csv")) << series_csv(s);
  }
  doc["series"] = series;
  std::ofstream(dir / "report.json") << doc.dump(2) << '\n';
}

ReplayResult replay(const json& report) {
  if (!report.is_object() || !report.contains("spec") || !report.contains("request") || !report.contains("verdicts"))
    raise(ErrorCode::SpecParseError, "not a run report: spec, request and verdicts are required");
  if (report.value("schema_version", 0) != schema_version)
    raise(ErrorCode::ValidationError, "report schema_version does not match this build");
  const auto spec = parse_spec(report["spec"].dump());
  const auto rerun = run(spec, request_from_json(report["request"]));
  ReplayResult r;
  r.expected = report["verdicts"];
  r.actual = rerun.document["verdicts"];
  r.identical = r.expected == r.actual;
  return r;
}

}  // namespace bicsep::app
