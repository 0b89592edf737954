// tnn: command line front end. Every command prints one JSON document.
//
// exit codes: 0 ok, 1 a check came back failed, 2 bad input, 3 a solver did not converge

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tnn/tnn.hpp"

namespace {

using tnn::Json;

enum Exit { kOk = 0, kFailed = 1, kBadInput = 2, kNoConvergence = 3 };

struct Output {
  bool pretty = false;
  std::string path;

  void emit(const Json& j) const {
    const std::string text = j.dump(pretty ? 2 : -1) + "\n";
    if (path.empty()) {
      std::cout << text;
      return;
    }
    std::ofstream f(path);
    if (!f) throw tnn::ParameterError("cannot write " + path);
    f << text;
  }
};

int verdict_exit(tnn::Verdict v) { return v == tnn::Verdict::Fail ? kFailed : kOk; }

std::vector<std::size_t> ranks_for(const tnn::Shape& shape, const std::string& spec) {
  if (spec.empty()) return std::vector<std::size_t>(shape.size(), 1);
  auto r = tnn::parse_dims(spec);
  if (r.size() == 1) r.assign(shape.size(), r.front());
  if (r.size() != shape.size()) throw tnn::ParameterError("--rank needs one entry per mode");
  return r;
}

// --- norms ------------------------------------------------------------------

struct NormsArgs {
  std::string src;
  std::uint64_t seed = 0;
  double tol = 1e-9;
  int starts = 32;
  bool no_certify = false;
  bool atoms = false;
};

int run_spectral(const NormsArgs& a, const Output& out) {
  const auto t = tnn::resolve_tensor(a.src);
  tnn::SpectralOptions so;
  so.seed = a.seed;
  so.starts = a.starts;
  if (a.no_certify) {
    out.emit(tnn::to_json(tnn::spectral_hopm(t, so)));
    return kOk;
  }
  tnn::CertifyOptions co;
  co.seed = a.seed;
  co.rel_gap = a.tol;
  out.emit(tnn::to_json(tnn::spectral_norm(t, so, co)));
  return kOk;
}

int run_nuclear(const NormsArgs& a, const Output& out) {
  const auto t = tnn::resolve_tensor(a.src);
  tnn::NuclearOptions o;
  o.seed = a.seed;
  o.tol = a.tol;
  out.emit(tnn::to_json(tnn::nuclear_sandwich(t, o), a.atoms));
  return kOk;
}

// --- check ------------------------------------------------------------------

struct CheckArgs {
  std::string dims = "2,2,2";
  std::size_t d = 0;
  std::string I = "1,2";
  std::string rank;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  double alpha = -1.0;
  std::string gallery;
  double t = 0.0;
  std::string part;
  std::string g_file, t_file, z_file;
  double tol = 1e-3;
  std::string selector = "sum:high";
  std::string name;
  int grid = 2000;
  bool all_trials = false;
};

tnn::Shape check_shape(const CheckArgs& a) {
  auto s = tnn::parse_dims(a.dims);
  if (a.d != 0 && a.d != s.size()) throw tnn::ParameterError("--d disagrees with --dims");
  return s;
}

int run_suite(tnn::DecompReport::Mode mode, const CheckArgs& a, const Output& out) {
  tnn::SuiteSpec s;
  s.mode = mode;
  s.shapes = {check_shape(a)};
  s.rank = ranks_for(s.shapes.front(), a.rank);
  s.set = tnn::parse_mode_set(a.I);
  s.trials = a.trials;
  s.seed = a.seed;
  s.alpha = a.alpha;
  if (s.trials == 0) throw tnn::ParameterError("--trials must be positive");
  const auto sum = tnn::run_decomp_suite(s);
  Json j = tnn::to_json(sum);
  if (a.all_trials) {
    Json all = Json::array();
    for (const auto& tr : sum.trials) all.push_back(tnn::to_json(tr.report));
    j["reports"] = all;
  }
  out.emit(j);
  return sum.failed > 0 ? kFailed : kOk;
}

// g = Z + part of the gallery entry, or explicit files
std::pair<tnn::DenseTensor, tnn::DenseTensor> subgrad_inputs(const CheckArgs& a) {
  if (!a.gallery.empty()) {
    const auto g = tnn::gallery(a.gallery, a.t);
    std::string part = a.part.empty() ? (g.X ? "X" : "Z") : a.part;
    if (part == "Z") return {g.Z, g.T};
    if (part == "X" && g.X) return {g.Z + *g.X, g.T};
    if (part == "Y" && g.Y) return {g.Z + *g.Y, g.T};
    throw tnn::ParameterError("gallery entry " + a.gallery + " has no part " + part);
  }
  if (a.g_file.empty() || a.t_file.empty()) throw tnn::ParameterError("need --gallery or both --g and --tensor");
  return {tnn::resolve_tensor(a.g_file), tnn::resolve_tensor(a.t_file)};
}

int run_subgrad(const CheckArgs& a, const Output& out) {
  const auto [g, t] = subgrad_inputs(a);
  tnn::SubgradientOptions o;
  o.tol = a.tol;
  o.seed = a.seed;
  const auto r = tnn::is_subgradient(g, t, o);
  out.emit(tnn::to_json(r));
  return verdict_exit(r.verdict);
}

int run_zmember(const CheckArgs& a, const Output& out) {
  tnn::DenseTensor z, t;
  if (!a.gallery.empty()) {
    const auto g = tnn::gallery(a.gallery, a.t);
    z = g.Z;
    t = g.T;
  } else {
    if (a.z_file.empty() || a.t_file.empty()) throw tnn::ParameterError("need --gallery or both --z and --tensor");
    z = tnn::resolve_tensor(a.z_file);
    t = tnn::resolve_tensor(a.t_file);
  }
  const auto r = tnn::z_membership(z, t, a.tol, a.seed);
  out.emit(tnn::to_json(r));
  return verdict_exit(r.verdict);
}

int run_tau(const CheckArgs& a, const Output& out) {
  const auto shape = check_shape(a);
  const auto sel = a.selector == "sum:high" ? tnn::SubspaceSelector::direct_sum(tnn::sets_by_size(shape.size(), 2, shape.size()))
                                            : tnn::parse_selector(a.selector);
  const auto e = tnn::probe_tau(sel, shape, static_cast<int>(a.trials), a.seed);
  out.emit(tnn::to_json(e));
  return kOk;
}

int run_sphere(const CheckArgs& a, const Output& out) {
  std::vector<std::string> names = a.name.empty() ? tnn::sphere_program_names() : std::vector<std::string>{a.name};
  Json j = Json::array();
  for (const auto& n : names) {
    const auto p = tnn::sphere_program(n);
    const auto s = tnn::solve_sphere_program_full(p, a.grid);
    j.push_back({{"name", n}, {"value", tnn::num(s.value)}, {"angles", s.angles}});
  }
  out.emit(names.size() == 1 ? j.front() : j);
  return kOk;
}

int run_check(const std::string& which, const CheckArgs& a, const Output& out) {
  using M = tnn::DecompReport::Mode;
  if (which == "decomp-spectral") return run_suite(M::Spectral, a, out);
  if (which == "decomp-nuclear") return run_suite(M::Nuclear, a, out);
  if (which == "lower-bound") return run_suite(M::LowerBound, a, out);
  if (which == "weak") return run_suite(M::Weak, a, out);
  if (which == "subgrad") return run_subgrad(a, out);
  if (which == "zmember") return run_zmember(a, out);
  if (which == "tau-probe") return run_tau(a, out);
  if (which == "sphere") return run_sphere(a, out);
  throw tnn::ParameterError("unknown check '" + which + "'");
}

// --- rpca -------------------------------------------------------------------

struct RpcaArgs {
  std::string dims = "12,12,12";
  std::size_t n = 40;
  std::size_t r = 1;
  double rho = 0.02;
  std::size_t m = 0;
  std::string style = "incoherent";
  std::uint64_t seed = 0;
  std::string instance;
  double lambda = 0.0;
  double q = 0.9;
  int trials = 20;
  double sign_rho = -1.0;
  double theta0 = 1.0;
  bool tensors = false;
};

tnn::InstanceConfig instance_config(const RpcaArgs& a, tnn::Shape shape) {
  tnn::InstanceConfig c;
  c.shape = std::move(shape);
  c.r = a.r;
  c.rho = a.rho;
  c.m = a.m;
  c.style = tnn::parse_factor_style(a.style);
  c.seed = a.seed;
  return c;
}

int run_rpca_gen(const RpcaArgs& a, const Output& out) {
  out.emit(tnn::instance_to_json(tnn::generate_instance(instance_config(a, tnn::parse_dims(a.dims)))));
  return kOk;
}

int run_rpca_certify(const RpcaArgs& a, const Output& out) {
  const auto inst = a.instance.empty() ? tnn::generate_instance(instance_config(a, tnn::parse_dims(a.dims)))
                                       : tnn::instance_from_json(tnn::read_json_file(a.instance));
  tnn::CertifyConfig c;
  c.lambda = a.lambda;
  c.seed = a.seed;
  const auto rep = tnn::certify(inst, c);
  Json j = tnn::to_json(rep);
  j["incoherence"] = tnn::to_json(tnn::incoherence_profile(inst.L, a.theta0, inst.rho, 1e-10, a.seed));
  if (a.tensors) {
    j["D1"] = tnn::to_json(rep.D1);
    j["D2"] = tnn::to_json(rep.D2);
    j["Z"] = tnn::to_json(rep.Z);
  }
  out.emit(j);
  return verdict_exit(rep.verdict);
}

int run_rpca_solve2d(const RpcaArgs& a, const Output& out) {
  auto c = instance_config(a, {a.n, a.n});
  c.m = 1;
  const auto inst = tnn::generate_instance(c);
  const tnn::Matrix L = tnn::as_matrix(inst.L);
  const tnn::Matrix M = L + tnn::as_matrix(inst.S);
  const double lambda = a.lambda > 0.0 ? a.lambda : tnn::default_lambda(inst.shape());
  const auto sol = tnn::solve_matrix_rpca(M, lambda);
  const auto opt = tnn::matrix_optimality(M, sol, lambda);
  Json j;
  j["n"] = a.n;
  j["r"] = a.r;
  j["rho"] = a.rho;
  j["seed"] = a.seed;
  j["lambda"] = lambda;
  j["mu"] = sol.mu;
  j["iterations"] = sol.iterations;
  j["support_size"] = inst.support.count();
  j["error_L"] = tnn::num((sol.L - L).norm() / L.norm());
  const tnn::Matrix S = tnn::as_matrix(inst.S);
  j["error_S"] = tnn::num(S.norm() > 0.0 ? (sol.S - S).norm() / S.norm() : sol.S.norm());
  j["optimality"] = {{"feasibility", tnn::num(opt.feasibility)},
                     {"tangent_error", tnn::num(opt.tangent_error)},
                     {"dual_sigma", tnn::num(opt.dual_sigma)},
                     {"sign_error", tnn::num(opt.sign_error)},
                     {"off_support", tnn::num(opt.off_support)}};
  if (a.tensors) {
    j["L_hat"] = tnn::to_json(tnn::from_matrix(sol.L));
    j["S_hat"] = tnn::to_json(tnn::from_matrix(sol.S));
  }
  out.emit(j);
  return kOk;
}

int run_rpca_concentration(const RpcaArgs& a, const Output& out) {
  tnn::DenseTensor l;
  if (!a.instance.empty())
    l = tnn::instance_from_json(tnn::read_json_file(a.instance)).L;
  else
    l = tnn::generate_instance(instance_config(a, tnn::parse_dims(a.dims))).L;
  out.emit(tnn::to_json(tnn::concentration_trial(l, a.q, a.trials, a.seed, a.sign_rho)));
  return kOk;
}

// --- reproduce --------------------------------------------------------------

int run_reproduce(const std::string& only, const Output& out) {
  std::vector<int> ids;
  if (only.empty())
    ids = tnn::criterion_ids();
  else
    for (auto v : tnn::parse_dims(only)) ids.push_back(static_cast<int>(v));
  Json arr = Json::array();
  bool all = true;
  for (int id : ids) {
    const auto r = tnn::run_criterion(id);
    all = all && r.pass;
    if (out.pretty) std::cout << tnn::format_result(r) << std::endl;
    arr.push_back({{"id", r.id}, {"title", r.title}, {"pass", r.pass}, {"detail", r.detail}, {"seconds", r.seconds}});
  }
  if (!out.pretty || !out.path.empty()) {
    Output o = out;
    o.pretty = false;
    o.emit(Json{{"criteria", arr}, {"all_pass", all}});
  }
  return all ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tensor nuclear norm toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // --pretty and --out are accepted after the subcommand too
  Output out;
  app.add_flag("--pretty", out.pretty, "indented output");
  app.add_option("--out", out.path, "write the report here instead of stdout");

  NormsArgs na;
  auto* norms = app.add_subcommand("norms", "spectral or nuclear norm of a tensor");
  norms->require_subcommand(1);
  auto* n_spec = norms->add_subcommand("spectral", "spectral norm with certified bounds");
  auto* n_nuc = norms->add_subcommand("nuclear", "nuclear norm sandwich");
  for (auto* sc : {n_spec, n_nuc}) {
    sc->add_option("source", na.src, "tensor file or gallery:NAME?t=..&part=..")->required();
    sc->add_option("--seed", na.seed);
    sc->add_option("--tol", na.tol, "relative gap target");
  }
  n_spec->add_option("--starts", na.starts);
  n_spec->add_flag("--no-certify", na.no_certify, "multi-start value only");
  n_nuc->add_flag("--atoms", na.atoms, "include the rank-one decomposition");

  CheckArgs ca;
  std::string check_name;
  auto* check = app.add_subcommand("check", "run one of the checks");
  check->add_option("check", check_name,
                    "decomp-spectral | decomp-nuclear | lower-bound | weak | subgrad | zmember | tau-probe | sphere")
      ->required();
  check->add_option("--dims", ca.dims);
  check->add_option("--d", ca.d);
  check->add_option("--I", ca.I, "mode set, 1-based");
  check->add_option("--rank", ca.rank, "per-mode ranks of the family");
  check->add_option("--trials", ca.trials);
  check->add_option("--seed", ca.seed);
  check->add_option("--alpha", ca.alpha, "weak constant, default 2/(d(d-1))");
  check->add_option("--gallery", ca.gallery);
  check->add_option("--t", ca.t);
  check->add_option("--part", ca.part, "Z, X or Y added to Z");
  check->add_option("--g", ca.g_file);
  check->add_option("--tensor", ca.t_file);
  check->add_option("--z", ca.z_file);
  check->add_option("--tol", ca.tol);
  check->add_option("--selector", ca.selector, "basic:1,2 | upperU:1,2 | lowerU:1 | sum:[1,2;1,3] | sum:high");
  check->add_option("--name", ca.name, "sphere program");
  check->add_option("--grid", ca.grid);
  check->add_flag("--all-trials", ca.all_trials);

  RpcaArgs ra;
  auto* rpca = app.add_subcommand("rpca", "robust PCA instances and certificates");
  rpca->require_subcommand(1);
  auto* r_gen = rpca->add_subcommand("gen", "write an instance archive");
  auto* r_cert = rpca->add_subcommand("certify", "dual certificate report");
  auto* r_solve = rpca->add_subcommand("solve2d", "matrix case by ADMM");
  auto* r_conc = rpca->add_subcommand("concentration", "sampled projection norms");
  for (auto* sc : {r_gen, r_cert, r_solve, r_conc}) {
    sc->add_option("--r", ra.r);
    sc->add_option("--rho", ra.rho);
    sc->add_option("--style", ra.style, "gaussian | incoherent");
    sc->add_option("--seed", ra.seed);
  }
  for (auto* sc : {r_gen, r_cert, r_conc}) {
    sc->add_option("--dims", ra.dims);
    sc->add_option("--m", ra.m, "batches, 0 means ceil(2 ln n)");
  }
  for (auto* sc : {r_cert, r_conc}) sc->add_option("--instance", ra.instance, "archive from rpca gen");
  for (auto* sc : {r_cert, r_solve}) {
    sc->add_option("--lambda", ra.lambda);
    sc->add_flag("--tensors", ra.tensors, "include tensors in the report");
  }
  r_cert->add_option("--theta0", ra.theta0);
  r_solve->add_option("--n", ra.n);
  r_conc->add_option("--q", ra.q);
  r_conc->add_option("--trials", ra.trials);
  r_conc->add_option("--sign-rho", ra.sign_rho);

  std::string only;
  auto* repro = app.add_subcommand("reproduce", "run the acceptance experiments");
  repro->add_option("--only", only, "comma separated criterion ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  try {
    if (*n_spec) return run_spectral(na, out);
    if (*n_nuc) return run_nuclear(na, out);
    if (*check) return run_check(check_name, ca, out);
    if (*r_gen) return run_rpca_gen(ra, out);
    if (*r_cert) return run_rpca_certify(ra, out);
    if (*r_solve) return run_rpca_solve2d(ra, out);
    if (*r_conc) return run_rpca_concentration(ra, out);
    if (*repro) return run_reproduce(only, out);
  } catch (const tnn::ConvergenceError& e) {
    std::cerr << "tnn: " << e.what() << " (last residual " << e.best << ")\n";
    return kNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "tnn: " << e.what() << "\n";
    return kBadInput;
  }
  return kBadInput;
}
