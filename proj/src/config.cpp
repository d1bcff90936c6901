#include "ofotune/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "ofotune/errors.hpp"
#include "ofotune/units.hpp"

namespace ofotune {

namespace {

using Handler = std::function<void(const nlohmann::json&)>;

class KeyTable {
 public:
  void number(const std::string& key, double& target) {
    handlers_[key] = [&target, key](const nlohmann::json& v) {
      target = as_number(key, v);
    };
  }

  // Accepts `key` in Pa or `key_bar` in bar.
  void pressure(const std::string& key, double& target) {
    number(key, target);
    handlers_[key + "_bar"] = [&target, key](const nlohmann::json& v) {
      target = bar_to_pa(as_number(key + "_bar", v));
    };
  }

  void custom(const std::string& key, Handler h) { handlers_[key] = std::move(h); }

  void apply(const nlohmann::json& j) const {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key.ends_with("_bar") && j.contains(key.substr(0, key.size() - 4))) {
        throw ConfigError(fmt::format("both {} and {} given", key,
                                      key.substr(0, key.size() - 4)));
      }
      const auto it = handlers_.find(key);
      if (it == handlers_.end()) {
        throw ConfigError(fmt::format("unknown configuration key '{}'", key));
      }
      it->second(value);
    }
  }

  static double as_number(const std::string& key, const nlohmann::json& v) {
    if (!v.is_number()) {
      throw ConfigError(fmt::format("key '{}' must be a number", key));
    }
    return v.get<double>();
  }

 private:
  std::map<std::string, Handler> handlers_;
};

Eigen::MatrixXd as_matrix(const std::string& key, const nlohmann::json& v,
                          Eigen::Index cols_if_empty) {
  if (!v.is_array()) throw ConfigError(fmt::format("'{}' must be an array", key));
  if (v.empty()) return Eigen::MatrixXd(0, cols_if_empty);
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = v[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(fmt::format("'{}' rows must have equal length", key));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      M(r, c) = KeyTable::as_number(key, row[static_cast<std::size_t>(c)]);
    }
  }
  return M;
}

Eigen::VectorXd as_vector(const std::string& key, const nlohmann::json& v) {
  if (!v.is_array()) throw ConfigError(fmt::format("'{}' must be an array", key));
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = KeyTable::as_number(key, v[i]);
  }
  return out;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& M) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    out.push_back(row);
  }
  return out;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("'{}': {}", path.string(), e.what()));
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

CompressorParams params_from_json(const nlohmann::json& j,
                                  const CompressorParams& base) {
  CompressorParams p = base;
  KeyTable t;
  t.number("a01", p.a01);
  t.number("Vs", p.Vs);
  t.number("Vd", p.Vd);
  t.number("A1", p.A1);
  t.number("Lc", p.Lc);
  t.number("J", p.J);
  t.number("delta", p.delta);
  t.number("kin", p.kin);
  t.number("kout", p.kout);
  t.number("Ain", p.Ain);
  t.number("Aout", p.Aout);
  t.pressure("pin", p.pin);
  t.pressure("pout", p.pout);
  t.custom("map_coeffs", [&p](const nlohmann::json& v) {
    const Eigen::VectorXd c = as_vector("map_coeffs", v);
    if (c.size() != 6) throw ConfigError("map_coeffs needs 6 entries");
    for (int i = 0; i < 6; ++i) p.map_coeffs[static_cast<std::size_t>(i)] = c[i];
  });
  t.apply(j);
  p.validate();
  return p;
}

nlohmann::json params_to_json(const CompressorParams& p) {
  nlohmann::json j;
  j["a01"] = p.a01;
  j["Vs"] = p.Vs;
  j["Vd"] = p.Vd;
  j["A1"] = p.A1;
  j["Lc"] = p.Lc;
  j["J"] = p.J;
  j["delta"] = p.delta;
  j["kin"] = p.kin;
  j["kout"] = p.kout;
  j["Ain"] = p.Ain;
  j["Aout"] = p.Aout;
  j["pin"] = p.pin;
  j["pout"] = p.pout;
  j["map_coeffs"] = p.map_coeffs;
  return j;
}

CalibrationTargets targets_from_json(const nlohmann::json& j) {
  CalibrationTargets t;
  KeyTable k;
  k.pressure("ps", t.state.ps);
  k.pressure("pd", t.state.pd);
  k.number("m", t.state.m);
  k.number("omega", t.state.omega);
  k.number("tau", t.tau);
  k.pressure("pin", t.pin);
  k.pressure("pout", t.pout);
  k.number("settling_goal", t.settling_goal);
  k.number("settling_tolerance", t.settling_tolerance);
  k.number("a01", t.a01);
  k.number("Vs", t.Vs);
  k.number("Vd", t.Vd);
  k.number("A1", t.A1);
  k.number("Lc", t.Lc);
  k.number("Ain", t.Ain);
  k.number("Aout", t.Aout);
  k.number("map_slope_m", t.map_slope_m);
  k.number("map_slope_omega", t.map_slope_omega);
  k.number("c4", t.c4);
  k.number("c5", t.c5);
  k.number("c6", t.c6);
  k.number("J_min", t.J_min);
  k.number("J_max", t.J_max);
  for (auto [key, field] : {std::pair{"delta", &t.delta}, std::pair{"kin", &t.kin},
                            std::pair{"kout", &t.kout}}) {
    k.custom(key, [field, key = std::string(key)](const nlohmann::json& v) {
      *field = KeyTable::as_number(key, v);
    });
  }
  k.apply(j);
  return t;
}

void apply_config(const nlohmann::json& j, RunSettings& s) {
  KeyTable k;
  k.number("nu", s.ofo.nu);
  k.number("dt", s.ofo.dt);
  k.number("u_min", s.ofo.u_min);
  k.number("u_max", s.ofo.u_max);
  k.custom("gradient_pressure_unit", [&s](const nlohmann::json& v) {
    if (!v.is_string()) throw ConfigError("gradient_pressure_unit must be a string");
    s.ofo.gradient_unit = parse_pressure_unit(v.get<std::string>());
  });
  k.custom("qp", [&s](const nlohmann::json& v) {
    if (v.is_null()) {
      s.ofo.qp.reset();
      return;
    }
    QpConfig qp;
    KeyTable q;
    q.number("alpha", qp.alpha);
    q.custom("G", [&qp](const nlohmann::json& m) { qp.G = as_matrix("G", m, 1); });
    q.custom("A", [&qp](const nlohmann::json& m) { qp.A = as_matrix("A", m, 1); });
    q.custom("b", [&qp](const nlohmann::json& m) { qp.b = as_vector("b", m); });
    q.custom("C", [&qp](const nlohmann::json& m) { qp.C = as_matrix("C", m, 1); });
    q.custom("d", [&qp](const nlohmann::json& m) { qp.d = as_vector("d", m); });
    q.apply(v);
    s.ofo.qp = qp;
  });
  k.number("t_final", s.sim.t_final);
  k.number("dt_out", s.sim.dt_out);
  k.number("rtol", s.sim.rtol);
  k.number("atol", s.sim.atol);
  k.pressure("ps", s.sim.initial.ps);
  k.pressure("pd", s.sim.initial.pd);
  k.number("m", s.sim.initial.m);
  k.number("omega", s.sim.initial.omega);
  k.number("tau0", s.sim.initial_torque);
  k.number("gamma1", s.metrics.gamma1);
  k.number("deadband", s.metrics.deadband);
  k.apply(j);
  s.metrics.t_final = s.sim.t_final;
  s.ofo.validate();
  s.sim.validate();
  s.metrics.validate();
}

nlohmann::json config_to_json(const RunSettings& s) {
  nlohmann::json j;
  j["nu"] = s.ofo.nu;
  j["dt"] = s.ofo.dt;
  j["u_min"] = s.ofo.u_min;
  j["u_max"] = s.ofo.u_max;
  j["gradient_pressure_unit"] = std::string(to_string(s.ofo.gradient_unit));
  if (s.ofo.qp) {
    j["qp"] = {{"alpha", s.ofo.qp->alpha},
               {"G", matrix_json(s.ofo.qp->G)},
               {"A", matrix_json(s.ofo.qp->A)},
               {"b", vector_json(s.ofo.qp->b)},
               {"C", matrix_json(s.ofo.qp->C)},
               {"d", vector_json(s.ofo.qp->d)}};
  }
  j["t_final"] = s.sim.t_final;
  j["dt_out"] = s.sim.dt_out;
  j["rtol"] = s.sim.rtol;
  j["atol"] = s.sim.atol;
  j["ps"] = s.sim.initial.ps;
  j["pd"] = s.sim.initial.pd;
  j["m"] = s.sim.initial.m;
  j["omega"] = s.sim.initial.omega;
  j["tau0"] = s.sim.initial_torque;
  j["gamma1"] = s.metrics.gamma1;
  j["deadband"] = s.metrics.deadband;
  return j;
}

Setpoint load_setpoint_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::string header;
  std::getline(in, header);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  double scale = 1.0;
  if (header == "t,ysp_bar") {
    scale = kPascalPerBar;
  } else if (header != "t,ysp") {
    throw ConfigError(fmt::format(
        "'{}': expected header 't,ysp' or 't,ysp_bar'", path.string()));
  }
  std::vector<double> t, v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    double a = 0.0, b = 0.0;
    char comma = 0;
    if (!(row >> a >> comma >> b) || comma != ',') {
      throw ConfigError(fmt::format("'{}': malformed row '{}'", path.string(), line));
    }
    t.push_back(a);
    v.push_back(b * scale);
  }
  return setpoint_table(std::move(t), std::move(v));
}

}  // namespace ofotune
