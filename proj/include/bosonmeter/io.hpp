#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bosonmeter/gaussian.hpp"
#include "bosonmeter/mode_ops.hpp"
#include "bosonmeter/observable.hpp"
#include "bosonmeter/qudit_state.hpp"

namespace bosonmeter {

// Observable JSON:
//   {"kind": "ggb"|"px", "d": 3, "n": 2,
//    "terms": [{"string": [...], "coeff": -0.5}, ...]}
// ggb strings are per-mode basis indices; px strings are per-mode [l, m]
// exponent pairs for x^l p^m.
inline nlohmann::json observable_to_json(const Observable& o) {
  nlohmann::json j;
  j["kind"] = o.basis == Basis::ggb ? "ggb" : "px";
  j["n"] = o.n;
  if (o.basis == Basis::ggb) j["d"] = o.d;
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : o.terms) {
    nlohmann::json jt;
    if (o.basis == Basis::ggb) {
      jt["string"] = t.ggb;
    } else {
      nlohmann::json s = nlohmann::json::array();
      for (const auto& e : t.px) s.push_back({e.l, e.m});
      jt["string"] = s;
    }
    jt["coeff"] = t.coeff;
    terms.push_back(jt);
  }
  j["terms"] = terms;
  return j;
}

inline Observable observable_from_json(const nlohmann::json& j) {
  Observable o;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ggb")
    o.basis = Basis::ggb;
  else if (kind == "px")
    o.basis = Basis::px;
  else
    throw std::invalid_argument("observable_from_json: kind must be 'ggb' or 'px'");
  o.n = j.at("n").get<int>();
  o.d = o.basis == Basis::ggb ? j.at("d").get<int>() : 0;
  for (const auto& jt : j.at("terms")) {
    Term t;
    t.coeff = jt.at("coeff").get<double>();
    const auto& s = jt.at("string");
    if (static_cast<int>(s.size()) != o.n) throw std::invalid_argument("observable_from_json: string length != n");
    if (o.basis == Basis::ggb) {
      t.ggb = s.get<std::vector<int>>();
    } else {
      for (const auto& e : s) {
        if (!e.is_array() || e.size() != 2) throw std::invalid_argument("observable_from_json: px entries are [l, m] pairs");
        t.px.push_back(PXExp{e[0].get<int>(), e[1].get<int>()});
      }
    }
    o.terms.push_back(std::move(t));
  }
  validate(o);
  return o;
}

// GaussianState JSON: {"n": 2, "mean": [...2n...], "cov": [[...], ...]}
inline nlohmann::json gaussian_state_to_json(const GaussianState& s) {
  nlohmann::json j;
  j["n"] = s.n;
  j["mean"] = std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size());
  nlohmann::json cov = nlohmann::json::array();
  for (int r = 0; r < s.cov.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < s.cov.cols(); ++c) row.push_back(s.cov(r, c));
    cov.push_back(row);
  }
  j["cov"] = cov;
  return j;
}

inline GaussianState gaussian_state_from_json(const nlohmann::json& j) {
  GaussianState s;
  s.n = j.at("n").get<int>();
  if (s.n < 1) throw std::invalid_argument("gaussian_state_from_json: n must be positive");
  const auto mean = j.at("mean").get<std::vector<double>>();
  if (static_cast<int>(mean.size()) != 2 * s.n) throw std::invalid_argument("gaussian_state_from_json: mean length != 2n");
  s.mean = Eigen::Map<const VectorXd>(mean.data(), mean.size());
  const auto& cov = j.at("cov");
  if (static_cast<int>(cov.size()) != 2 * s.n) throw std::invalid_argument("gaussian_state_from_json: cov must be 2n x 2n");
  s.cov.resize(2 * s.n, 2 * s.n);
  for (int r = 0; r < 2 * s.n; ++r) {
    const auto row = cov[r].get<std::vector<double>>();
    if (static_cast<int>(row.size()) != 2 * s.n) throw std::invalid_argument("gaussian_state_from_json: cov must be 2n x 2n");
    for (int c = 0; c < 2 * s.n; ++c) s.cov(r, c) = row[c];
  }
  return s;
}

// QuditState JSON: {"n": 2, "d": 3, "amp": [[re, im], ...d^n entries...]}
inline nlohmann::json qudit_state_to_json(const QuditState& s) {
  nlohmann::json j;
  j["n"] = s.n;
  j["d"] = s.d;
  nlohmann::json amp = nlohmann::json::array();
  for (Eigen::Index i = 0; i < s.amp.size(); ++i) amp.push_back({s.amp[i].real(), s.amp[i].imag()});
  j["amp"] = amp;
  return j;
}

inline QuditState qudit_state_from_json(const nlohmann::json& j) {
  const int n = j.at("n").get<int>();
  const int d = j.at("d").get<int>();
  QuditState s = make_qudit_state(n, d);
  const auto& amp = j.at("amp");
  if (static_cast<Eigen::Index>(amp.size()) != s.amp.size())
    throw std::invalid_argument("qudit_state_from_json: amp length != d^n");
  for (Eigen::Index i = 0; i < s.amp.size(); ++i) {
    const auto& e = amp[i];
    if (!e.is_array() || e.size() != 2) throw std::invalid_argument("qudit_state_from_json: amp entries are [re, im] pairs");
    s.amp[i] = cxd(e[0].get<double>(), e[1].get<double>());
  }
  const double norm = s.amp.norm();
  if (std::abs(norm - 1.0) > 1e-9) throw std::invalid_argument("qudit_state_from_json: state not normalized");
  return s;
}

// VibrationalConfig JSON:
//   {"frequencies": [...], "couplings": [{"modes": [0, 0, 1], "coefficient": 0.1}, ...],
//    "quadrature": "x_over_sqrt2"|"x"}
inline nlohmann::json vibrational_config_to_json(const VibrationalConfig& cfg) {
  nlohmann::json j;
  j["frequencies"] = cfg.frequencies;
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : cfg.couplings) cs.push_back({{"modes", c.modes}, {"coefficient", c.coefficient}});
  j["couplings"] = cs;
  j["quadrature"] = cfg.quadrature == QuadratureConvention::x_over_sqrt2 ? "x_over_sqrt2" : "x";
  return j;
}

inline VibrationalConfig vibrational_config_from_json(const nlohmann::json& j) {
  VibrationalConfig cfg;
  cfg.frequencies = j.at("frequencies").get<std::vector<double>>();
  if (j.contains("couplings"))
    for (const auto& jc : j.at("couplings")) {
      VibrationalCoupling c;
      c.modes = jc.at("modes").get<std::vector<int>>();
      c.coefficient = jc.at("coefficient").get<double>();
      for (int m : c.modes)
        if (m < 0 || m >= static_cast<int>(cfg.frequencies.size()))
          throw std::invalid_argument("vibrational_config_from_json: coupling mode out of range");
      cfg.couplings.push_back(std::move(c));
    }
  if (j.contains("quadrature")) {
    const std::string q = j.at("quadrature").get<std::string>();
    if (q == "x_over_sqrt2")
      cfg.quadrature = QuadratureConvention::x_over_sqrt2;
    else if (q == "x")
      cfg.quadrature = QuadratureConvention::x_plain;
    else
      throw std::invalid_argument("vibrational_config_from_json: unknown quadrature convention");
  }
  return cfg;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

inline void save_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

// CSV with deterministic %.12g formatting so equal runs emit equal bytes.
inline std::string format_csv_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct CsvWriter {
  std::ostringstream rows;
  explicit CsvWriter(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) rows << ',';
      rows << header[i];
    }
    rows << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) rows << ',';
      rows << cells[i];
    }
    rows << '\n';
  }
  std::string str() const { return rows.str(); }
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << rows.str();
  }
};

}  // namespace bosonmeter
