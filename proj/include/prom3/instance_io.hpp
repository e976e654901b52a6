// prom3: first-order solver library for max-min-max robust optimization.
// Versioned JSON (de)serialization for generated instances: raw arrays plus
// the generator parameters and seed, with a stable content digest.  Floating
// point survives the round trip bit-identically (writer refuses non-finite
// values; the serializer emits shortest-round-trip decimals).
// SPDX-License-Identifier: MIT
#ifndef PROM3_INSTANCE_IO_HPP
#define PROM3_INSTANCE_IO_HPP

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "prom3/generators/lse.hpp"
#include "prom3/generators/newsvendor.hpp"
#include "prom3/generators/qcqp.hpp"

namespace prom3 {

/// Any generated instance, tagged by family.
using InstanceData = std::variant<QcqpInstance, LseInstance, NewsvendorInstance>;

inline constexpr int kInstanceFormatVersion = 1;
inline constexpr const char* kInstanceFormatName = "prom3-instance";

namespace detail {

inline void require_finite_scalar(double v, const std::string& what) {
  if (!std::isfinite(v)) {
    throw ConfigError("instance_io: non-finite value in " + what);
  }
}

inline nlohmann::json vec_to_json(const Vec& v, const std::string& what) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) {
    require_finite_scalar(v[i], what);
    a.push_back(v[i]);
  }
  return a;
}

inline nlohmann::json mat_to_json(const Mat& m, const std::string& what) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    rows.push_back(vec_to_json(m.row(i).transpose(), what));
  }
  return rows;
}

inline Vec vec_from_json(const nlohmann::json& a, const std::string& what) {
  if (!a.is_array()) throw ConfigError("instance_io: " + what + " must be an array");
  Vec v(static_cast<Index>(a.size()));
  Index i = 0;
  for (const auto& x : a) {
    if (!x.is_number()) throw ConfigError("instance_io: " + what + " must be numeric");
    v[i++] = x.get<double>();
  }
  return v;
}

inline Mat mat_from_json(const nlohmann::json& a, Index rows, Index cols,
                         const std::string& what) {
  if (!a.is_array() || static_cast<Index>(a.size()) != rows) {
    throw ConfigError("instance_io: " + what + " must have " + std::to_string(rows) +
                      " rows");
  }
  Mat m(rows, cols);
  Index i = 0;
  for (const auto& row : a) {
    const Vec r = vec_from_json(row, what);
    if (r.size() != cols) {
      throw ConfigError("instance_io: " + what + " row " + std::to_string(i) +
                        " must have " + std::to_string(cols) + " entries");
    }
    m.row(i++) = r.transpose();
  }
  return m;
}

inline Vec sized_vec(const nlohmann::json& a, Index n, const std::string& what) {
  const Vec v = vec_from_json(a, what);
  if (v.size() != n) {
    throw ConfigError("instance_io: " + what + " must have " + std::to_string(n) +
                      " entries");
  }
  return v;
}

inline Index pos_index(const nlohmann::json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 1) {
    throw ConfigError("instance_io: " + what + " must be a positive integer");
  }
  return static_cast<Index>(j.get<long long>());
}

}  // namespace detail

inline nlohmann::json instance_to_json(const QcqpInstance& q) {
  nlohmann::json j;
  j["format"] = kInstanceFormatName;
  j["version"] = kInstanceFormatVersion;
  j["family"] = "qcqp";
  j["params"] = {{"M", q.M}, {"N", q.N}, {"P", q.P}, {"J", q.J}, {"seed", q.seed}};
  nlohmann::json mats = nlohmann::json::array();
  for (const auto& per_m : q.P_mats) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& pm : per_m) row.push_back(detail::mat_to_json(pm, "qcqp.P"));
    mats.push_back(std::move(row));
  }
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& bm : q.b) bs.push_back(detail::vec_to_json(bm, "qcqp.b"));
  for (double cm : q.c) detail::require_finite_scalar(cm, "qcqp.c");
  for (double rm : q.R) detail::require_finite_scalar(rm, "qcqp.R");
  detail::require_finite_scalar(q.t_lo, "qcqp.t_lo");
  detail::require_finite_scalar(q.t_hi, "qcqp.t_hi");
  detail::require_finite_scalar(q.slater_margin, "qcqp.slater_margin");
  j["data"] = {{"P", std::move(mats)}, {"b", std::move(bs)},   {"c", q.c},
               {"R", q.R},             {"t_lo", q.t_lo},       {"t_hi", q.t_hi},
               {"slater_margin", q.slater_margin}};
  return j;
}

inline nlohmann::json instance_to_json(const LseInstance& l) {
  nlohmann::json j;
  j["format"] = kInstanceFormatName;
  j["version"] = kInstanceFormatVersion;
  j["family"] = "lse";
  j["params"] = {{"M", l.M}, {"N", l.N}, {"J", l.J}, {"seed", l.seed}};
  nlohmann::json as = nlohmann::json::array();
  for (const auto& am : l.A) as.push_back(detail::mat_to_json(am, "lse.A"));
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& bm : l.B) bs.push_back(detail::mat_to_json(bm, "lse.B"));
  for (double dm : l.d) detail::require_finite_scalar(dm, "lse.d");
  detail::require_finite_scalar(l.z_lo, "lse.z_lo");
  detail::require_finite_scalar(l.z_hi, "lse.z_hi");
  detail::require_finite_scalar(l.feasibility_margin, "lse.feasibility_margin");
  detail::require_finite_scalar(l.slater_margin, "lse.slater_margin");
  j["data"] = {{"c", detail::vec_to_json(l.c, "lse.c")},
               {"A", std::move(as)},
               {"B", std::move(bs)},
               {"d", l.d},
               {"xhat", detail::vec_to_json(l.xhat, "lse.xhat")},
               {"z_lo", l.z_lo},
               {"z_hi", l.z_hi},
               {"feasibility_margin", l.feasibility_margin},
               {"slater_margin", l.slater_margin}};
  return j;
}

inline nlohmann::json instance_to_json(const NewsvendorInstance& n) {
  nlohmann::json j;
  j["format"] = kInstanceFormatName;
  j["version"] = kInstanceFormatVersion;
  j["family"] = "newsvendor";
  detail::require_finite_scalar(n.kappa, "newsvendor.kappa");
  detail::require_finite_scalar(n.radius, "newsvendor.radius");
  detail::require_finite_scalar(n.L, "newsvendor.L");
  j["params"] = {{"M", n.M},
                 {"N", n.N},
                 {"kappa", n.kappa},
                 {"radius", n.radius},
                 {"seed", n.seed}};
  j["data"] = {{"c", detail::vec_to_json(n.c, "newsvendor.c")},
               {"v", detail::vec_to_json(n.v, "newsvendor.v")},
               {"s", detail::vec_to_json(n.s, "newsvendor.s")},
               {"t", detail::vec_to_json(n.t, "newsvendor.t")},
               {"d", detail::mat_to_json(n.d, "newsvendor.d")},
               {"rho", detail::vec_to_json(n.rho, "newsvendor.rho")},
               {"L", n.L},
               {"x_bar", detail::vec_to_json(n.x_bar, "newsvendor.x_bar")},
               {"tau_bar", detail::vec_to_json(n.tau_bar, "newsvendor.tau_bar")},
               {"slater_margins",
                detail::vec_to_json(n.slater_margins, "newsvendor.slater_margins")}};
  return j;
}

inline nlohmann::json instance_to_json(const InstanceData& inst) {
  return std::visit([](const auto& x) { return instance_to_json(x); }, inst);
}

/// Parses a versioned instance document back into raw instance data.
inline InstanceData instance_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != kInstanceFormatName) {
    throw ConfigError("instance_io: not a prom3 instance document");
  }
  if (j.value("version", -1) != kInstanceFormatVersion) {
    throw ConfigError("instance_io: unsupported format version");
  }
  const std::string family = j.value("family", "");
  const auto& p = j.at("params");
  const auto& d = j.at("data");
  if (family == "qcqp") {
    QcqpInstance q;
    q.M = detail::pos_index(p.at("M"), "qcqp.M");
    q.N = detail::pos_index(p.at("N"), "qcqp.N");
    q.P = detail::pos_index(p.at("P"), "qcqp.P");
    q.J = detail::pos_index(p.at("J"), "qcqp.J");
    q.seed = p.at("seed").get<std::uint64_t>();
    const auto& mats = d.at("P");
    if (!mats.is_array() || static_cast<Index>(mats.size()) != q.M + 1) {
      throw ConfigError("instance_io: qcqp.P must list M + 1 constraint blocks");
    }
    for (const auto& row : mats) {
      if (!row.is_array() || static_cast<Index>(row.size()) != q.J + 1) {
        throw ConfigError("instance_io: qcqp.P blocks must list J + 1 matrices");
      }
      std::vector<Mat> per_m;
      for (const auto& pm : row) {
        per_m.push_back(detail::mat_from_json(pm, q.P, q.N, "qcqp.P"));
      }
      q.P_mats.push_back(std::move(per_m));
    }
    const auto& bs = d.at("b");
    if (!bs.is_array() || static_cast<Index>(bs.size()) != q.M + 1) {
      throw ConfigError("instance_io: qcqp.b must list M + 1 vectors");
    }
    for (const auto& bm : bs) q.b.push_back(detail::sized_vec(bm, q.N, "qcqp.b"));
    q.c = d.at("c").get<std::vector<double>>();
    q.R = d.at("R").get<std::vector<double>>();
    if (static_cast<Index>(q.c.size()) != q.M + 1 ||
        static_cast<Index>(q.R.size()) != q.M + 1) {
      throw ConfigError("instance_io: qcqp.c and qcqp.R must list M + 1 scalars");
    }
    q.t_lo = d.at("t_lo").get<double>();
    q.t_hi = d.at("t_hi").get<double>();
    q.slater_margin = d.at("slater_margin").get<double>();
    return q;
  }
  if (family == "lse") {
    LseInstance l;
    l.M = detail::pos_index(p.at("M"), "lse.M");
    l.N = detail::pos_index(p.at("N"), "lse.N");
    l.J = detail::pos_index(p.at("J"), "lse.J");
    l.seed = p.at("seed").get<std::uint64_t>();
    l.c = detail::sized_vec(d.at("c"), l.N, "lse.c");
    const auto& as = d.at("A");
    const auto& bs = d.at("B");
    if (!as.is_array() || static_cast<Index>(as.size()) != l.M || !bs.is_array() ||
        static_cast<Index>(bs.size()) != l.M) {
      throw ConfigError("instance_io: lse.A and lse.B must list M matrices");
    }
    for (const auto& am : as) l.A.push_back(detail::mat_from_json(am, l.N, l.J, "lse.A"));
    for (const auto& bm : bs) {
      l.B.push_back(detail::mat_from_json(bm, l.J - 1, l.N, "lse.B"));
    }
    l.d = d.at("d").get<std::vector<double>>();
    if (static_cast<Index>(l.d.size()) != l.M) {
      throw ConfigError("instance_io: lse.d must list M scalars");
    }
    l.xhat = detail::sized_vec(d.at("xhat"), l.N, "lse.xhat");
    l.z_lo = d.at("z_lo").get<double>();
    l.z_hi = d.at("z_hi").get<double>();
    l.feasibility_margin = d.at("feasibility_margin").get<double>();
    l.slater_margin = d.at("slater_margin").get<double>();
    return l;
  }
  if (family == "newsvendor") {
    NewsvendorInstance n;
    n.M = detail::pos_index(p.at("M"), "newsvendor.M");
    n.N = detail::pos_index(p.at("N"), "newsvendor.N");
    n.kappa = p.at("kappa").get<double>();
    n.radius = p.at("radius").get<double>();
    n.seed = p.at("seed").get<std::uint64_t>();
    n.c = detail::sized_vec(d.at("c"), n.M, "newsvendor.c");
    n.v = detail::sized_vec(d.at("v"), n.M, "newsvendor.v");
    n.s = detail::sized_vec(d.at("s"), n.M, "newsvendor.s");
    n.t = detail::sized_vec(d.at("t"), n.M, "newsvendor.t");
    n.d = detail::mat_from_json(d.at("d"), n.M, n.N, "newsvendor.d");
    n.rho = detail::sized_vec(d.at("rho"), n.M, "newsvendor.rho");
    n.L = d.at("L").get<double>();
    n.x_bar = detail::sized_vec(d.at("x_bar"), n.M, "newsvendor.x_bar");
    n.tau_bar = detail::sized_vec(d.at("tau_bar"), n.M, "newsvendor.tau_bar");
    n.slater_margins =
        detail::sized_vec(d.at("slater_margins"), n.M, "newsvendor.slater_margins");
    return n;
  }
  throw ConfigError("instance_io: unknown family '" + family + "'");
}

/// Canonical byte serialization (sorted keys, no whitespace) used for digests
/// and byte-identity tests.
inline std::string canonical_bytes(const InstanceData& inst) {
  return instance_to_json(inst).dump();
}

/// FNV-1a 64-bit digest of the canonical bytes, as 16 lowercase hex chars.
inline std::string instance_digest(const InstanceData& inst) {
  const std::string bytes = canonical_bytes(inst);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

inline void save_instance(const InstanceData& inst, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("instance_io: cannot open '" + path + "' for writing");
  os << instance_to_json(inst).dump(2) << '\n';
  if (!os) throw ConfigError("instance_io: write failed for '" + path + "'");
}

inline InstanceData load_instance(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("instance_io: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("instance_io: parse error in '" + path + "': " + e.what());
  }
  try {
    return instance_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("instance_io: malformed instance in '" + path + "': " + e.what());
  }
}

inline std::string family_name(const InstanceData& inst) {
  struct Visitor {
    std::string operator()(const QcqpInstance&) const { return "qcqp"; }
    std::string operator()(const LseInstance&) const { return "lse"; }
    std::string operator()(const NewsvendorInstance&) const { return "newsvendor"; }
  };
  return std::visit(Visitor{}, inst);
}

/// True when the family's native form carries intersection uncertainty sets.
inline bool is_intersection_family(const InstanceData& inst) {
  return std::holds_alternative<NewsvendorInstance>(inst);
}

/// Builds the plain robust program (qcqp, lse); rejects intersection families.
inline ProblemSpec build_problem(const InstanceData& inst) {
  if (const auto* q = std::get_if<QcqpInstance>(&inst)) return qcqp_problem(*q);
  if (const auto* l = std::get_if<LseInstance>(&inst)) return lse_problem(*l);
  throw ConfigError("instance_io: family '" + family_name(inst) +
                    "' is intersection-form; build_intersection instead");
}

/// Builds the intersection-form program (newsvendor only).
inline IntersectionSpec build_intersection(const InstanceData& inst) {
  if (const auto* n = std::get_if<NewsvendorInstance>(&inst)) {
    return newsvendor_problem(*n);
  }
  throw ConfigError("instance_io: family '" + family_name(inst) +
                    "' is a plain robust program; build_problem instead");
}

/// The generator-recorded worst-case Slater margin (most conservative over m).
inline double recorded_slater_margin(const InstanceData& inst) {
  struct Visitor {
    double operator()(const QcqpInstance& q) const { return q.slater_margin; }
    double operator()(const LseInstance& l) const { return l.slater_margin; }
    double operator()(const NewsvendorInstance& n) const {
      return n.slater_margins.maxCoeff();
    }
  };
  return std::visit(Visitor{}, inst);
}

}  // namespace prom3

#endif  // PROM3_INSTANCE_IO_HPP
