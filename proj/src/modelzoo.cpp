#include "ngmpn/modelzoo.hpp"

#include <cmath>

#include "json.hpp"

#include "ngmpn/error.hpp"

namespace ngmpn {
namespace detail {
const std::map<std::string, std::string>& embedded_models();
}

namespace {

using nlohmann::json;

std::map<std::string, ZooEntry> load_zoo() {
  const auto& files = detail::embedded_models();
  auto manifest = json::parse(files.at("manifest.json"));
  std::map<std::string, ZooEntry> zoo;
  for (const auto& j : manifest.at("models")) {
    ZooEntry e;
    e.id = j.at("id").get<std::string>();
    e.file = j.at("file").get<std::string>();
    e.description = j.value("description", "");
    e.source = files.at(e.file);
    e.model = parse_model(e.source);
    if (!j.at("closed_form").is_null()) e.closed_form = parse_expr(j.at("closed_form").get<std::string>());
    for (const auto& [k, v] : j.at("ranges").items()) e.ranges[k] = {v.at(0).get<double>(), v.at(1).get<double>()};
    e.susceptible = j.value("susceptible", "S");
    if (j.contains("twin")) e.twin = j.at("twin").get<std::string>();
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      ZooSweep z;
      const json overrides = s.value("overrides", json::object());
      const json initial = s.value("initial", json::object());
      const json dfe = s.value("dfe", json::object());
      for (const auto& [k, v] : overrides.items()) z.overrides.set(k, v.get<double>());
      for (const auto& [k, v] : initial.items()) z.initial[k] = v.get<double>();
      for (const auto& [k, v] : dfe.items()) z.dfe[k] = v.get<std::string>();
      z.dt = s.value("dt", 0.05);
      z.grid = s.value("grid", std::vector<std::string>{});
      e.sweep = std::move(z);
    }
    zoo.emplace(e.id, std::move(e));
  }
  return zoo;
}

const std::map<std::string, ZooEntry>& zoo() {
  static const std::map<std::string, ZooEntry> z = load_zoo();
  return z;
}

// Perron root of K = F V^-1 for the two-patch model, written out from the
// model equations: a_ij = dE_i/dI_j at the DFE, k_j = I_j per E_j entrant.
double patch_r0(const Bindings& b) {
  auto g = [&](const char* n) { return b.get(n); };
  double S1 = g("Pi1") / g("mu1"), S2 = g("Pi2") / g("mu2");
  double D1 = g("m11") * S1 + g("m21") * S2;
  double D2 = g("m12") * S1 + g("m22") * S2;
  double b1 = g("beta1"), b2 = g("beta2");
  double a11 = b1 * g("m11") * g("p11") * S1 / D1 + b2 * g("m12") * g("p12") * S1 / D2;
  double a12 = b1 * g("m11") * g("p21") * S1 / D1 + b2 * g("m12") * g("p22") * S1 / D2;
  double a21 = b1 * g("m21") * g("p11") * S2 / D1 + b2 * g("m22") * g("p12") * S2 / D2;
  double a22 = b1 * g("m21") * g("p21") * S2 / D1 + b2 * g("m22") * g("p22") * S2 / D2;
  auto k = [&](int i) {
    std::string s = std::to_string(i);
    double mu = b.get("mu" + s), nu = b.get("nu" + s);
    return nu / ((nu + mu) * (b.get("gamma" + s) + b.get("delta" + s) + mu));
  };
  double k1 = k(1), k2 = k(2);
  double t = a11 * k1 + a22 * k2;
  double d = a11 * k1 * a22 * k2 - a12 * k2 * a21 * k1;
  return (t + std::sqrt(std::max(0.0, t * t - 4 * d))) / 2;
}

}  // namespace

const ZooEntry& builtin(const std::string& id) {
  auto it = zoo().find(id);
  if (it == zoo().end()) throw Error("unknown builtin model '" + id + "'");
  return it->second;
}

std::vector<std::string> builtin_ids() {
  std::vector<std::string> ids;
  for (const auto& [k, v] : zoo()) ids.push_back(k);
  return ids;
}

double oracle_r0(const ZooEntry& entry, const Bindings& params) {
  Bindings b = entry.model.params;
  for (const auto& [k, v] : params.values()) b.set(k, v);
  if (!entry.closed_form) return patch_r0(b);
  double n = 0.0;
  for (const auto& p : entry.model.places) n += p.init;
  b.set(std::string(kPopulationSymbol), n);
  return eval(*entry.closed_form, b);
}

SweepConfig sweep_config(const ZooEntry& entry) {
  SweepConfig cfg;
  cfg.susceptible = entry.susceptible;
  if (!entry.sweep) return cfg;
  const auto& s = *entry.sweep;
  cfg.overrides = s.overrides;
  cfg.initial = s.initial;
  cfg.dt = s.dt;
  for (const auto& [place, text] : s.dfe) {
    auto idx = entry.model.place_index(place);
    if (!idx) throw ModelError("sweep pin names unknown place '" + place + "'");
    cfg.pins.push_back({*idx, parse_expr(text)});
  }
  return cfg;
}

}  // namespace ngmpn
