#pragma once

// JSON scenario configuration and regimen files. Every model constant is
// explicit in the emitted form so a config is a complete, auditable record;
// loading rejects unknown keys instead of silently ignoring typos.

#include <mmopt/scenario.hpp>

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <string>

namespace mmopt {

using nlohmann::json;

struct ScenarioConfig {
  ModelParameters params;
  Pharmacodynamics pharma;
  double horizon = 360.0;
  double period = 90.0;
  DoseGrid grid;
  std::vector<Dose> G_vectors;  // one optimization row per entry
  bool tie_weights_to_horizon = false;
  IntegratorSettings integrator;
  SolverSettings solver;
  std::string output_dir = "runs";
};

// the reference weight set, in reporting order
inline std::vector<Dose> reference_G_vectors() {
  return {Dose{1, 1, 1}, Dose{5, 1, 1}, Dose{1, 5, 1},   Dose{1, 1, 5}, Dose{5, 5, 1},
          Dose{5, 1, 5}, Dose{1, 5, 5}, Dose{5, 5, 5},   Dose{1, 5, 0.5}};
}

inline ScenarioConfig default_config() {
  ScenarioConfig cfg;
  cfg.G_vectors = reference_G_vectors();
  return cfg;
}

namespace detail {

inline void expect_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& where) {
  if (!j.is_object()) throw std::runtime_error("config: " + where + " must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw std::runtime_error("config: unknown key \"" + item.key() + "\" in " + where);
  }
}

inline json dose_to_json(const Dose& d) { return json::array({d[0], d[1], d[2]}); }

inline Dose dose_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw std::runtime_error("config: " + where + " must be an array of 3 numbers");
  return Dose{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline json parse_file(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1;
    for (size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + e.what());
  }
}

}  // namespace detail

inline json model_to_json(const ModelParameters& p) {
  json j;
  j["s_M"] = p.s_M;       j["r_M"] = p.r_M;       j["K_M"] = p.K_M;
  j["delta_M"] = p.delta_M;
  j["a_NM"] = p.a_NM;     j["b_NM"] = p.b_NM;     j["a_CM"] = p.a_CM;
  j["b_CM"] = p.b_CM;     j["a_CNM"] = p.a_CNM;
  j["a_MM"] = p.a_MM;     j["b_MM"] = p.b_MM;     j["a_RM"] = p.a_RM;
  j["b_RM"] = p.b_RM;
  j["r_C"] = p.r_C;       j["K_C"] = p.K_C;       j["delta_C"] = p.delta_C;
  j["a_MC"] = p.a_MC;     j["b_MC"] = p.b_MC;     j["a_NC"] = p.a_NC;
  j["b_NC"] = p.b_NC;
  j["s_N"] = p.s_N;       j["r_N"] = p.r_N;       j["K_N"] = p.K_N;
  j["delta_N"] = p.delta_N;
  j["a_CN"] = p.a_CN;     j["b_CN"] = p.b_CN;
  j["r_R"] = p.r_R;       j["K_R"] = p.K_R;       j["delta_R"] = p.delta_R;
  j["a_MR"] = p.a_MR;     j["b_MR"] = p.b_MR;
  j["initial_state"] = {{"M", p.x0[kM]}, {"T_C", p.x0[kTC]}, {"N", p.x0[kN]},
                        {"T_R", p.x0[kTR]}};
  return j;
}

inline void model_from_json(const json& j, ModelParameters& p) {
  detail::expect_keys(j, {"s_M", "r_M", "K_M", "delta_M", "a_NM", "b_NM", "a_CM", "b_CM",
                          "a_CNM", "a_MM", "b_MM", "a_RM", "b_RM", "r_C", "K_C", "delta_C",
                          "a_MC", "b_MC", "a_NC", "b_NC", "s_N", "r_N", "K_N", "delta_N",
                          "a_CN", "b_CN", "r_R", "K_R", "delta_R", "a_MR", "b_MR",
                          "initial_state"},
                      "model");
  p.s_M = j.value("s_M", p.s_M);             p.r_M = j.value("r_M", p.r_M);
  p.K_M = j.value("K_M", p.K_M);             p.delta_M = j.value("delta_M", p.delta_M);
  p.a_NM = j.value("a_NM", p.a_NM);          p.b_NM = j.value("b_NM", p.b_NM);
  p.a_CM = j.value("a_CM", p.a_CM);          p.b_CM = j.value("b_CM", p.b_CM);
  p.a_CNM = j.value("a_CNM", p.a_CNM);
  p.a_MM = j.value("a_MM", p.a_MM);          p.b_MM = j.value("b_MM", p.b_MM);
  p.a_RM = j.value("a_RM", p.a_RM);          p.b_RM = j.value("b_RM", p.b_RM);
  p.r_C = j.value("r_C", p.r_C);             p.K_C = j.value("K_C", p.K_C);
  p.delta_C = j.value("delta_C", p.delta_C);
  p.a_MC = j.value("a_MC", p.a_MC);          p.b_MC = j.value("b_MC", p.b_MC);
  p.a_NC = j.value("a_NC", p.a_NC);          p.b_NC = j.value("b_NC", p.b_NC);
  p.s_N = j.value("s_N", p.s_N);             p.r_N = j.value("r_N", p.r_N);
  p.K_N = j.value("K_N", p.K_N);             p.delta_N = j.value("delta_N", p.delta_N);
  p.a_CN = j.value("a_CN", p.a_CN);          p.b_CN = j.value("b_CN", p.b_CN);
  p.r_R = j.value("r_R", p.r_R);             p.K_R = j.value("K_R", p.K_R);
  p.delta_R = j.value("delta_R", p.delta_R);
  p.a_MR = j.value("a_MR", p.a_MR);          p.b_MR = j.value("b_MR", p.b_MR);
  if (j.contains("initial_state")) {
    const json& s = j.at("initial_state");
    detail::expect_keys(s, {"M", "T_C", "N", "T_R"}, "model.initial_state");
    p.x0[kM] = s.value("M", p.x0[kM]);
    p.x0[kTC] = s.value("T_C", p.x0[kTC]);
    p.x0[kN] = s.value("N", p.x0[kN]);
    p.x0[kTR] = s.value("T_R", p.x0[kTR]);
  }
}

inline json pharma_to_json(const Pharmacodynamics& q) {
  json j;
  j["phi"] = q.phi;
  j["psi"] = q.psi;
  j["u_max"] = detail::dose_to_json(q.u_max);
  return j;
}

inline void pharma_from_json(const json& j, Pharmacodynamics& q) {
  detail::expect_keys(j, {"phi", "psi", "u_max"}, "pharmacodynamics");
  if (j.contains("phi")) {
    if (!j["phi"].is_array() || j["phi"].size() != 14)
      throw std::runtime_error("config: pharmacodynamics.phi must be an array of 14 numbers");
    for (size_t i = 0; i < 14; ++i) q.phi[i] = j["phi"][i].get<double>();
  }
  if (j.contains("psi")) {
    if (!j["psi"].is_array() || j["psi"].size() != 14)
      throw std::runtime_error("config: pharmacodynamics.psi must be an array of 14 numbers");
    for (size_t i = 0; i < 14; ++i) q.psi[i] = j["psi"][i].get<double>();
  }
  if (j.contains("u_max")) q.u_max = detail::dose_from_json(j["u_max"], "pharmacodynamics.u_max");
}

inline json config_to_json(const ScenarioConfig& cfg) {
  json j;
  j["model"] = model_to_json(cfg.params);
  j["pharmacodynamics"] = pharma_to_json(cfg.pharma);
  j["horizon_days"] = cfg.horizon;
  j["period_days"] = cfg.period;
  j["dose_grid"] = {{"u1", cfg.grid.levels[0]}, {"u2", cfg.grid.levels[1]},
                    {"u3", cfg.grid.levels[2]}};
  json gs = json::array();
  for (const Dose& g : cfg.G_vectors) gs.push_back(detail::dose_to_json(g));
  j["G_vectors"] = gs;
  j["tie_weights_to_horizon"] = cfg.tie_weights_to_horizon;
  j["integrator"] = {{"rtol", cfg.integrator.rtol},
                     {"atol", cfg.integrator.atol},
                     {"max_step", cfg.integrator.max_step},
                     {"max_steps_per_segment", cfg.integrator.max_steps_per_segment}};
  j["solver"] = {{"max_iterations", cfg.solver.max_iterations},
                 {"gradient_tol", cfg.solver.gradient_tol},
                 {"armijo_c1", cfg.solver.armijo_c1},
                 {"backtrack_factor", cfg.solver.backtrack_factor},
                 {"max_backtracks", cfg.solver.max_backtracks},
                 {"mesh_days", cfg.solver.mesh_days},
                 {"threads", cfg.solver.threads}};
  j["output_dir"] = cfg.output_dir;
  return j;
}

inline ScenarioConfig config_from_json(const json& j) {
  detail::expect_keys(j, {"model", "pharmacodynamics", "horizon_days", "period_days",
                          "dose_grid", "G_vectors", "tie_weights_to_horizon", "integrator",
                          "solver", "output_dir"},
                      "config");
  ScenarioConfig cfg = default_config();
  if (j.contains("model")) model_from_json(j["model"], cfg.params);
  if (j.contains("pharmacodynamics")) pharma_from_json(j["pharmacodynamics"], cfg.pharma);
  cfg.horizon = j.value("horizon_days", cfg.horizon);
  cfg.period = j.value("period_days", cfg.period);
  if (j.contains("dose_grid")) {
    const json& g = j["dose_grid"];
    detail::expect_keys(g, {"u1", "u2", "u3"}, "dose_grid");
    static const char* names[3] = {"u1", "u2", "u3"};
    for (int i = 0; i < 3; ++i)
      if (g.contains(names[i]))
        cfg.grid.levels[static_cast<size_t>(i)] = g[names[i]].get<std::vector<double>>();
  }
  if (j.contains("G_vectors")) {
    cfg.G_vectors.clear();
    for (const json& g : j["G_vectors"])
      cfg.G_vectors.push_back(detail::dose_from_json(g, "G_vectors entry"));
  }
  cfg.tie_weights_to_horizon = j.value("tie_weights_to_horizon", cfg.tie_weights_to_horizon);
  if (j.contains("integrator")) {
    const json& s = j["integrator"];
    detail::expect_keys(s, {"rtol", "atol", "max_step", "max_steps_per_segment"}, "integrator");
    cfg.integrator.rtol = s.value("rtol", cfg.integrator.rtol);
    cfg.integrator.atol = s.value("atol", cfg.integrator.atol);
    cfg.integrator.max_step = s.value("max_step", cfg.integrator.max_step);
    cfg.integrator.max_steps_per_segment =
        s.value("max_steps_per_segment", cfg.integrator.max_steps_per_segment);
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    detail::expect_keys(s, {"max_iterations", "gradient_tol", "armijo_c1", "backtrack_factor",
                            "max_backtracks", "mesh_days", "threads"},
                        "solver");
    cfg.solver.max_iterations = s.value("max_iterations", cfg.solver.max_iterations);
    cfg.solver.gradient_tol = s.value("gradient_tol", cfg.solver.gradient_tol);
    cfg.solver.armijo_c1 = s.value("armijo_c1", cfg.solver.armijo_c1);
    cfg.solver.backtrack_factor = s.value("backtrack_factor", cfg.solver.backtrack_factor);
    cfg.solver.max_backtracks = s.value("max_backtracks", cfg.solver.max_backtracks);
    cfg.solver.mesh_days = s.value("mesh_days", cfg.solver.mesh_days);
    cfg.solver.threads = s.value("threads", cfg.solver.threads);
  }
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  return cfg;
}

// Config-level data invariants. Use-specific preconditions (period tiling,
// the control mesh) are enforced where the optimizers build their Scenario,
// so a simulation-only config is not held to them.
inline std::vector<std::string> validate_config(const ScenarioConfig& cfg) {
  std::vector<std::string> bad = cfg.params.validate();
  auto more = cfg.pharma.validate();
  bad.insert(bad.end(), more.begin(), more.end());
  more = cfg.grid.validate(cfg.pharma.u_max);
  bad.insert(bad.end(), more.begin(), more.end());
  if (!(cfg.horizon > 0.0)) bad.push_back("horizon_days must be > 0");
  if (!(cfg.period > 0.0)) bad.push_back("period_days must be > 0");
  if (!(cfg.integrator.rtol > 0.0) || !(cfg.integrator.atol > 0.0))
    bad.push_back("integrator tolerances must be > 0");
  for (size_t i = 0; i < cfg.G_vectors.size(); ++i)
    for (int c = 0; c < 3; ++c)
      if (!(cfg.G_vectors[i][c] >= 0.0))
        bad.push_back("G_vectors[" + std::to_string(i) + "] components must be >= 0");
  return bad;
}

inline ScenarioConfig load_config(const std::string& path) {
  ScenarioConfig cfg = config_from_json(detail::parse_file(path));
  const auto bad = validate_config(cfg);
  if (!bad.empty()) {
    std::string msg = path + ": invalid config";
    for (const auto& m : bad) msg += "\n  " + m;
    throw std::runtime_error(msg);
  }
  return cfg;
}

inline Scenario scenario_from_config(const ScenarioConfig& cfg, const Dose& G) {
  Scenario scen;
  scen.params = cfg.params;
  scen.pharma = cfg.pharma;
  scen.horizon = cfg.horizon;
  scen.period = cfg.period;
  scen.grid = cfg.grid;
  scen.integrator = cfg.integrator;
  scen.solver = cfg.solver;
  scen.weights = build_weights(G, cfg.params.x0[kM], cfg.pharma.u_max, cfg.horizon,
                               cfg.tie_weights_to_horizon);
  throw_if_invalid(scen.validate(), "scenario_from_config");
  return scen;
}

// ---------------------------------------------------------------------------
// regimen files

inline json regimen_to_json(const Regimen& r) {
  json j;
  if (const auto* c = std::get_if<ConstantRegimen>(&r)) {
    j["type"] = "constant";
    j["dose"] = detail::dose_to_json(c->u);
  } else if (const auto* pc = std::get_if<PiecewiseConstantRegimen>(&r)) {
    j["type"] = "piecewise_constant";
    j["period_days"] = pc->period;
    json doses = json::array();
    for (const Dose& d : pc->doses) doses.push_back(detail::dose_to_json(d));
    j["doses"] = doses;
  } else {
    const auto& smp = std::get<SampledRegimen>(r);
    j["type"] = "sampled";
    j["times"] = smp.times;
    json doses = json::array();
    for (const Dose& d : smp.doses) doses.push_back(detail::dose_to_json(d));
    j["doses"] = doses;
  }
  return j;
}

inline Regimen regimen_from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("regimen: file must hold a JSON object");
  const std::string type = j.value("type", "");
  if (type == "constant") {
    detail::expect_keys(j, {"type", "dose"}, "regimen");
    return ConstantRegimen{detail::dose_from_json(j.at("dose"), "regimen.dose")};
  }
  if (type == "piecewise_constant") {
    detail::expect_keys(j, {"type", "period_days", "doses"}, "regimen");
    PiecewiseConstantRegimen pc;
    pc.period = j.at("period_days").get<double>();
    for (const json& d : j.at("doses"))
      pc.doses.push_back(detail::dose_from_json(d, "regimen.doses entry"));
    if (!(pc.period > 0.0)) throw std::runtime_error("regimen: period_days must be > 0");
    if (pc.doses.empty()) throw std::runtime_error("regimen: doses must be non-empty");
    return pc;
  }
  if (type == "sampled") {
    detail::expect_keys(j, {"type", "times", "doses"}, "regimen");
    SampledRegimen smp;
    smp.times = j.at("times").get<std::vector<double>>();
    for (const json& d : j.at("doses"))
      smp.doses.push_back(detail::dose_from_json(d, "regimen.doses entry"));
    if (smp.times.size() != smp.doses.size() || smp.times.size() < 2)
      throw std::runtime_error("regimen: times and doses must have equal length >= 2");
    for (size_t i = 1; i < smp.times.size(); ++i)
      if (!(smp.times[i] > smp.times[i - 1]))
        throw std::runtime_error("regimen: times must be strictly increasing");
    return smp;
  }
  throw std::runtime_error(
      "regimen: type must be \"constant\", \"piecewise_constant\" or \"sampled\"");
}

inline Regimen load_regimen(const std::string& path) {
  return regimen_from_json(detail::parse_file(path));
}

}  // namespace mmopt
