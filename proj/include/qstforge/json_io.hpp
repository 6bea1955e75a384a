#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qstforge/anneal.hpp"
#include "qstforge/hamiltonian.hpp"
#include "qstforge/lattice.hpp"

namespace qstforge {

using Json = nlohmann::json;

// Job-spec validation failure; `field` names the offending entry.
struct schema_error : std::invalid_argument {
  schema_error(std::string field_name, const std::string& message)
      : std::invalid_argument(field_name + ": " + message), field(std::move(field_name)) {}

  std::string field;
};

namespace detail {

template <typename T>
T require(const Json& j, const std::string& field) {
  if (!j.contains(field)) throw schema_error(field, "missing required field");
  try {
    return j.at(field).get<T>();
  } catch (const Json::exception&) {
    throw schema_error(field, "wrong type");
  }
}

template <typename T>
T value_or(const Json& j, const std::string& field, T fallback) {
  if (!j.contains(field)) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const Json::exception&) {
    throw schema_error(field, "wrong type");
  }
}

inline Site site_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer())
    throw schema_error(field, "expected a site as [x, y]");
  return Site{j[0].get<int>(), j[1].get<int>()};
}

inline Json site_to_json(Site s) { return Json::array({s.x, s.y}); }

}  // namespace detail

inline Json lattice_to_json(const LatticeSpec& spec) {
  Json defects = Json::array();
  for (const auto& bond : spec.bonds())
    if (bond.fixed)
      defects.push_back({{"a", detail::site_to_json(bond.a)},
                         {"b", detail::site_to_json(bond.b)},
                         {"value_mhz", *bond.fixed}});
  return Json{{"n1", spec.n1()},
              {"n2", spec.n2()},
              {"cross", spec.has_cross()},
              {"defects", defects}};
}

inline LatticeSpec lattice_from_json(const Json& j) {
  LatticeSpec spec = build_grid(detail::require<int>(j, "n1"), detail::require<int>(j, "n2"),
                                detail::value_or<bool>(j, "cross", false));
  if (j.contains("defects")) {
    if (!j.at("defects").is_array()) throw schema_error("defects", "expected an array");
    for (const auto& d : j.at("defects")) {
      const Site a = detail::site_from_json(d.at("a"), "defects.a");
      const Site b = detail::site_from_json(d.at("b"), "defects.b");
      if (!spec.find_bond(a, b)) throw schema_error("defects", "defect references no lattice bond");
      spec.add_defect(a, b, detail::require<double>(d, "value_mhz"));
    }
  }
  return spec;
}

inline Json couplings_to_json(const LatticeSpec& spec, const CouplingConfig& config) {
  Json nn = Json::array();
  Json cross = Json::array();
  for (std::size_t b = 0; b < spec.bonds().size(); ++b) {
    const Bond& bond = spec.bonds()[b];
    Json entry{{"a", detail::site_to_json(bond.a)},
               {"b", detail::site_to_json(bond.b)},
               {"value_mhz", config.value(b)}};
    (bond.kind == BondKind::cross ? cross : nn).push_back(std::move(entry));
  }
  Json out{{"symmetry", config.symmetry() == CouplingSymmetry::inversion ? "inversion" : "free"},
           {"nn", nn}};
  if (!cross.empty()) out["cross_mhz"] = cross;
  return out;
}

inline CouplingConfig couplings_from_json(const LatticeSpec& spec, const Json& j) {
  const std::string sym = detail::value_or<std::string>(j, "symmetry", "free");
  if (sym != "inversion" && sym != "free")
    throw schema_error("symmetry", "expected \"inversion\" or \"free\"");
  CouplingConfig config(spec, sym == "inversion" ? CouplingSymmetry::inversion
                                                 : CouplingSymmetry::free);
  if (j.contains("cross_mhz")) {
    const Json& cross = j.at("cross_mhz");
    if (cross.is_number()) {
      set_cross_couplings(spec, config, cross.get<double>());
    } else if (cross.is_array()) {
      for (const auto& entry : cross) {
        const Site a = detail::site_from_json(entry.at("a"), "cross_mhz.a");
        const Site b = detail::site_from_json(entry.at("b"), "cross_mhz.b");
        const std::size_t idx = spec.bond_index(a, b);
        if (!spec.bonds()[idx].fixed)
          config.set_value(idx, detail::require<double>(entry, "value_mhz"));
      }
    } else {
      throw schema_error("cross_mhz", "expected a number or an array of bond entries");
    }
  }
  std::vector<bool> assigned(spec.bonds().size(), false);
  if (!j.contains("nn")) throw schema_error("nn", "missing required field");
  for (const auto& entry : j.at("nn")) {
    const Site a = detail::site_from_json(entry.at("a"), "nn.a");
    const Site b = detail::site_from_json(entry.at("b"), "nn.b");
    const double v = detail::require<double>(entry, "value_mhz");
    auto idx = spec.find_bond(a, b);
    if (!idx) throw schema_error("nn", "coupling references no lattice bond");
    const Bond& bond = spec.bonds()[*idx];
    if (bond.fixed) {
      if (v != *bond.fixed)
        throw schema_error("nn", "value conflicts with the pinned defect bond");
    } else {
      config.set_value(*idx, v);
    }
    assigned[*idx] = true;
  }
  for (std::size_t b = 0; b < spec.bonds().size(); ++b) {
    const Bond& bond = spec.bonds()[b];
    if (bond.kind != BondKind::cross && !bond.fixed && !assigned[b])
      throw schema_error("nn", "missing coupling value for a lattice bond");
  }
  validate_couplings(spec, config);
  return config;
}

inline Json schedule_to_json(const AnnealSchedule& s) {
  return Json{{"t_high", s.t_high},
              {"t_low", s.t_low},
              {"steps", s.steps},
              {"shape", s.shape == ScheduleShape::geometric ? "geometric" : "linear"},
              {"replicas", s.replicas},
              {"seed", s.seed},
              {"bounds_mhz", Json::array({s.j_min_mhz, s.j_max_mhz})},
              {"move_sigma0_mhz", s.move_sigma0_mhz},
              {"target_accept", s.target_accept}};
}

inline AnnealSchedule schedule_from_json(const Json& j, std::uint64_t default_seed) {
  AnnealSchedule s;
  s.t_high = detail::value_or<double>(j, "t_high", s.t_high);
  s.t_low = detail::value_or<double>(j, "t_low", s.t_low);
  s.steps = detail::value_or<long>(j, "steps", s.steps);
  s.replicas = detail::value_or<int>(j, "replicas", s.replicas);
  s.seed = detail::value_or<std::uint64_t>(j, "seed", default_seed);
  s.move_sigma0_mhz = detail::value_or<double>(j, "move_sigma0_mhz", s.move_sigma0_mhz);
  s.target_accept = detail::value_or<double>(j, "target_accept", s.target_accept);
  const std::string shape = detail::value_or<std::string>(j, "shape", "geometric");
  if (shape == "geometric") {
    s.shape = ScheduleShape::geometric;
  } else if (shape == "linear") {
    s.shape = ScheduleShape::linear;
  } else {
    throw schema_error("schedule.shape", "expected \"geometric\" or \"linear\"");
  }
  if (j.contains("bounds_mhz")) {
    const Json& b = j.at("bounds_mhz");
    if (!b.is_array() || b.size() != 2)
      throw schema_error("schedule.bounds_mhz", "expected [j_min, j_max]");
    s.j_min_mhz = b[0].get<double>();
    s.j_max_mhz = b[1].get<double>();
  }
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw schema_error("schedule", e.what());
  }
  return s;
}

// Atomic file emission: write to a sibling temp file, then rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace qstforge
