#pragma once
// JSON documents: tensor files, gallery URIs, reports and RPCA instance archives.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tnn/decomp.hpp"
#include "tnn/errors.hpp"
#include "tnn/nuclear.hpp"
#include "tnn/rpca.hpp"
#include "tnn/spectral.hpp"
#include "tnn/subdiff.hpp"
#include "tnn/tensor.hpp"

namespace tnn {

using Json = nlohmann::ordered_json;

inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json to_json(const DenseTensor& t) {
  Json j;
  j["shape"] = t.shape();
  std::vector<double> data(t.raw(), t.raw() + t.size());
  j["data"] = data;
  return j;
}

inline DenseTensor tensor_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data"))
    throw ParameterError("tensor document needs 'shape' and 'data'");
  Shape shape;
  std::vector<double> data;
  try {
    shape = j.at("shape").get<Shape>();
    data = j.at("data").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed tensor document: ") + e.what());
  }
  return DenseTensor(shape, data);
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write '" + path + "'");
  out << j.dump() << "\n";
}

inline DenseTensor read_tensor_file(const std::string& path) { return tensor_from_json(read_json_file(path)); }
inline void write_tensor_file(const std::string& path, const DenseTensor& t) { write_json_file(path, to_json(t)); }

inline double parse_real(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParameterError("not a number: '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ParameterError("not a finite number: '" + s + "'");
  return v;
}

inline Shape parse_dims(const std::string& s) {
  Shape out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
      throw ParameterError("bad dimension list '" + s + "'");
    out.push_back(std::stoul(tok));
  }
  if (out.empty()) throw ParameterError("empty dimension list");
  return out;
}

/// gallery:NAME[?t=VALUE][&part=T|Z|X|Y|ZX|ZY|XY]; the default part is X when present, else T.
inline DenseTensor resolve_gallery_uri(const std::string& uri) {
  std::string rest = uri.substr(8);
  std::string name = rest, query;
  if (auto q = rest.find('?'); q != std::string::npos) {
    name = rest.substr(0, q);
    query = rest.substr(q + 1);
  }
  double t = 0.0;
  std::string part;
  std::stringstream ss(query);
  std::string kv;
  while (std::getline(ss, kv, '&')) {
    if (kv.empty()) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParameterError("bad gallery parameter '" + kv + "'");
    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "t")
      t = parse_real(v);
    else if (k == "part")
      part = v;
    else
      throw ParameterError("unknown gallery parameter '" + k + "'");
  }
  const GalleryEntry g = gallery(name, t);
  if (part.empty()) part = g.X ? "X" : "T";
  auto need = [&](const std::optional<DenseTensor>& x, const char* what) -> const DenseTensor& {
    if (!x) throw ParameterError(std::string("gallery entry has no ") + what);
    return *x;
  };
  if (part == "T") return g.T;
  if (part == "Z") return g.Z;
  if (part == "X") return need(g.X, "X");
  if (part == "Y") return need(g.Y, "Y");
  if (part == "ZX") return g.Z + need(g.X, "X");
  if (part == "ZY") return g.Z + need(g.Y, "Y");
  if (part == "XY") return need(g.X, "X") + need(g.Y, "Y");
  throw ParameterError("unknown gallery part '" + part + "'");
}

/// A file path or a gallery: URI.
inline DenseTensor resolve_tensor(const std::string& src) {
  if (src.rfind("gallery:", 0) == 0) return resolve_gallery_uri(src);
  return read_tensor_file(src);
}

// ---------------------------------------------------------------------------
// Reports.

inline Json to_json(const SpectralResult& r) {
  Json j;
  j["value"] = num(r.value);
  j["certified_lower"] = num(r.certified_lower);
  j["certified_upper"] = r.certified_upper ? num(*r.certified_upper) : Json(nullptr);
  j["starts_used"] = r.starts_used;
  j["iterations"] = r.iterations;
  Json m = Json::array();
  for (const auto& x : r.maximizers) m.push_back(std::vector<double>(x.data(), x.data() + x.size()));
  j["maximizers"] = m;
  return j;
}

inline Json to_json(const NuclearSandwich& s, bool with_atoms = false) {
  Json j;
  j["lower"] = num(s.lower);
  j["upper"] = num(s.upper);
  j["gap"] = num(s.gap());
  j["witness_spectral_upper"] = num(s.witness_spectral_upper);
  j["witness_certified"] = s.witness_certified;
  j["pricing_converged"] = s.pricing_converged;
  j["rounds"] = s.rounds;
  j["atoms"] = s.decomposition.atoms.size();
  if (with_atoms) {
    Json a = Json::array();
    for (const auto& at : s.decomposition.atoms) {
      Json e;
      e["weight"] = at.weight;
      Json f = Json::array();
      for (const auto& x : at.factors) f.push_back(std::vector<double>(x.data(), x.data() + x.size()));
      e["factors"] = f;
      a.push_back(e);
    }
    j["decomposition"] = a;
  }
  return j;
}

inline Json to_json(const DecompReport& r) {
  Json j;
  j["mode"] = to_string(r.mode);
  j["verdict"] = to_string(r.verdict);
  j["discrepancy"] = num(r.discrepancy);
  Json v;
  for (const auto& [k, x] : r.values) v[k] = num(x);
  j["values"] = v;
  Json t;
  for (const auto& [k, x] : r.tolerances) t[k] = num(x);
  j["tolerances"] = t;
  return j;
}

inline Json to_json(const SuiteSummary& s) {
  Json j;
  j["trials"] = s.trials.size();
  j["passed"] = s.passed;
  j["failed"] = s.failed;
  j["inconclusive"] = s.inconclusive;
  j["max_discrepancy"] = num(s.max_discrepancy);
  Json fails = Json::array();
  for (const auto& tr : s.trials)
    if (tr.report.verdict != Verdict::Pass) {
      Json e;
      e["index"] = tr.index;
      e["shape"] = tr.shape;
      e["seed"] = tr.seed;
      e["report"] = to_json(tr.report);
      fails.push_back(e);
    }
  j["not_passed"] = fails;
  return j;
}

inline Json to_json(const SubgradientReport& r) {
  Json j;
  j["verdict"] = to_string(r.verdict);
  j["pairing"] = num(r.pairing);
  j["nuclear_lower"] = num(r.nuclear_lower);
  j["nuclear_upper"] = num(r.nuclear_upper);
  j["sigma_lower"] = num(r.sigma_lower);
  j["sigma_upper"] = num(r.sigma_upper);
  j["sigma_certified"] = r.sigma_certified;
  j["pairing_slack"] = num(r.pairing_slack);
  j["sigma_slack"] = num(r.sigma_slack);
  j["tol"] = r.tol;
  return j;
}

inline Json to_json(const ZMembershipReport& r) {
  Json j;
  j["verdict"] = to_string(r.verdict);
  j["residual"] = num(r.residual);
  j["pairing"] = num(r.pairing);
  j["nuclear_lower"] = num(r.nuclear_lower);
  j["nuclear_upper"] = num(r.nuclear_upper);
  j["sigma_lower"] = num(r.sigma_lower);
  j["sigma_upper"] = num(r.sigma_upper);
  return j;
}

inline Json to_json(const TauWitness& w, bool tensors) {
  Json j;
  j["source"] = w.source;
  j["x_sigma"] = num(w.x_sigma);
  j["value_lower"] = num(w.value_lower);
  j["value_upper"] = num(w.value_upper);
  if (tensors) {
    j["T"] = to_json(w.t);
    j["Z"] = to_json(w.z);
    j["X"] = to_json(w.x);
  }
  return j;
}

inline Json to_json(const TauEstimate& e, bool tensors = false) {
  Json j;
  j["selector"] = e.selector.to_string();
  j["d"] = e.d;
  j["dims"] = e.dims;
  j["trials"] = e.trials;
  j["directions"] = e.directions;
  j["feasible_max"] = num(e.feasible_max);
  j["infeasible_min"] = num(e.infeasible_min);
  j["feasible_witness"] = e.feasible_witness ? to_json(*e.feasible_witness, tensors) : Json(nullptr);
  j["infeasible_witness"] = e.infeasible_witness ? to_json(*e.infeasible_witness, tensors) : Json(nullptr);
  j["notes"] = e.notes;
  return j;
}

inline Json to_json(const IncoherenceProfile& p) {
  Json j;
  j["r"] = p.r;
  j["u"] = p.u;
  j["r0"] = p.r0;
  j["u0"] = num(p.u0);
  j["z_inf"] = num(p.z_inf);
  j["theta0"] = p.theta0;
  Json a = Json::array();
  for (const auto& [l, r] : p.assumption) a.push_back({{"lhs", num(l)}, {"rhs", num(r)}, {"slack", num(r - l)}});
  j["assumption"] = a;
  return j;
}

inline Json to_json(const CertificateReport& r) {
  Json j;
  j["verdict"] = to_string(r.verdict);
  j["lambda"] = r.lambda;
  Json c = Json::array();
  for (const auto& x : r.conditions)
    c.push_back({{"name", x.name},
                 {"value", num(x.value)},
                 {"threshold", num(x.threshold)},
                 {"certified", x.certified},
                 {"verdict", to_string(x.verdict)},
                 {"pass", x.verdict == Verdict::Pass}});
  j["conditions"] = c;
  j["neumann_feasible"] = r.neumann_feasible;
  j["delta"] = num(r.delta);
  j["neumann_terms"] = r.neumann_terms;
  j["neumann_tail"] = num(r.neumann_tail);
  j["d1_on_support"] = num(r.d1_on_support);
  j["golfing_residuals"] = r.golf.residual_fro;
  j["golfing_residuals_inf"] = r.golf.residual_inf;
  j["phi"] = r.golf.phi;
  j["z_fallback"] = r.z_fallback;
  return j;
}

inline Json to_json(const ConcentrationSummary& s) {
  Json j;
  j["q"] = s.q;
  j["sign_rho"] = s.sign_rho;
  j["u0"] = num(s.u0);
  j["r"] = s.r;
  j["leak_envelope_eps0"] = num(s.leak_envelope);
  j["sign_shape"] = num(s.sign_shape);
  Json q;
  for (double p : {0.5, 0.9, 1.0}) {
    const std::string k = p == 1.0 ? "max" : "q" + std::to_string(static_cast<int>(p * 100));
    q[k] = {{"deviation", num(s.quantile(&ConcentrationRecord::deviation, p))},
            {"leak", num(s.quantile(&ConcentrationRecord::leak, p))},
            {"sign_sigma", num(s.quantile(&ConcentrationRecord::sign_sigma, p))}};
  }
  j["quantiles"] = q;
  Json recs = Json::array();
  for (const auto& r : s.records)
    recs.push_back({{"deviation", num(r.deviation)},
                    {"leak", num(r.leak)},
                    {"sign_sigma", num(r.sign_sigma)},
                    {"sign_certified", r.sign_certified}});
  j["records"] = recs;
  return j;
}

// ---------------------------------------------------------------------------
// Instance archive.

inline Json instance_to_json(const RpcaInstance& in) {
  Json j;
  j["format"] = "tnn-rpca-instance";
  j["shape"] = in.shape();
  j["r"] = in.r;
  j["rho"] = in.rho;
  j["m"] = in.m();
  j["seed"] = in.seed;
  j["style"] = to_string(in.style);
  j["L"] = to_json(in.L);
  j["S"] = to_json(in.S);
  Json masks = Json::array();
  for (const auto& m : in.batch_masks) masks.push_back(m.offsets());
  j["masks"] = masks;
  return j;
}

inline RpcaInstance instance_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != "tnn-rpca-instance")
    throw ParameterError("not an RPCA instance archive");
  RpcaInstance in;
  try {
    in.L = tensor_from_json(j.at("L"));
    in.S = tensor_from_json(j.at("S"));
    in.rho = j.at("rho").get<double>();
    in.r = j.at("r").get<std::size_t>();
    in.seed = j.at("seed").get<std::uint64_t>();
    in.style = parse_factor_style(j.at("style").get<std::string>());
    for (const auto& m : j.at("masks"))
      in.batch_masks.push_back(EntrySupport::from_offsets(in.L.shape(), m.get<std::vector<std::size_t>>()));
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError(std::string("malformed instance archive: ") + e.what());
  }
  in.L.require_same_shape(in.S);
  if (in.batch_masks.empty()) throw ParameterError("instance archive has no masks");
  in.support = in.batch_masks.front();
  for (std::size_t i = 1; i < in.batch_masks.size(); ++i) in.support = in.support.intersect(in.batch_masks[i]);
  if (!(EntrySupport::nonzeros(in.S) == in.support))
    throw ParameterError("instance archive: support of S differs from the mask intersection");
  in.E = DenseTensor(in.L.shape());
  for (auto o : in.support.offsets()) in.E[o] = in.S[o] > 0 ? 1.0 : -1.0;
  return in;
}

}  // namespace tnn
