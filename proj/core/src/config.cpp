#include "capmat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "capmat/error.hpp"

namespace capmat {

using nlohmann::json;

namespace {

json tomlToJson(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = tomlToJson(v);
    return out;
  }
  if (const auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(tomlToJson(v));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  fail(ErrorKind::ConfigInvalid, "unsupported TOML value type (dates and times are not accepted)");
}

/// Reads keys of one table and rejects keys it was never asked about.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    require(node_.is_object(), ErrorKind::ConfigInvalid, where() + " must be a table");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(node_.contains(key) ? node_.at(key) : empty, qualified(key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    require(v.is_number(), ErrorKind::ConfigInvalid, qualified(key) + " must be a number");
    return v.get<double>();
  }

  long long integer(const std::string& key, long long fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    require(v.is_number_integer() || v.is_number_unsigned(), ErrorKind::ConfigInvalid,
            qualified(key) + " must be an integer");
    return v.get<long long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    require(v.is_boolean(), ErrorKind::ConfigInvalid, qualified(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = node_.at(key);
    require(v.is_string(), ErrorKind::ConfigInvalid, qualified(key) + " must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    if (!has(key)) return out;
    const json& v = node_.at(key);
    require(v.is_array(), ErrorKind::ConfigInvalid, qualified(key) + " must be an array of numbers");
    for (const auto& e : v) {
      require(e.is_number(), ErrorKind::ConfigInvalid, qualified(key) + " must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      require(seen_.count(it.key()) > 0, ErrorKind::ConfigInvalid, "unknown key " + qualified(it.key()));
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "configuration" : path_; }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec3 toVec3(const json& v, const std::string& what) {
  require(v.is_array() && !v.empty() && v.size() <= 3, ErrorKind::ConfigInvalid,
          what + " must be an array of one to three numbers");
  Vec3 out = Vec3::Zero();
  for (std::size_t k = 0; k < v.size(); ++k) {
    require(v[k].is_number(), ErrorKind::ConfigInvalid, what + " must contain numbers");
    out[static_cast<Eigen::Index>(k)] = v[k].get<double>();
  }
  return out;
}

LatticeIndex toIndex(const json& v, const std::string& what) {
  require(v.is_array() && !v.empty() && v.size() <= 3, ErrorKind::ConfigInvalid,
          what + " must be an array of one to three integers");
  LatticeIndex out{0, 0, 0};
  for (std::size_t k = 0; k < v.size(); ++k) {
    require(v[k].is_number_integer(), ErrorKind::ConfigInvalid, what + " must contain integers");
    out[k] = v[k].get<int>();
  }
  return out;
}

void positive(double v, const std::string& what) {
  require(v > 0.0 && std::isfinite(v), ErrorKind::ConfigInvalid, what + " must be positive");
}

ExperimentConfig fromJson(const json& root) {
  ExperimentConfig c;
  Section top(root, "");
  c.seed = static_cast<std::uint64_t>(top.integer("seed", 1));
  c.cacheDir = top.string("cache_dir", "");

  {
    Section g = top.sub("geometry");
    c.lattice = g.string("lattice", c.lattice);
    require(c.lattice == "chain" || c.lattice == "square" || c.lattice == "cubic" || c.lattice == "custom",
            ErrorKind::ConfigInvalid, "geometry.lattice must be chain, square, cubic or custom");
    c.spacing = g.number("spacing", c.spacing);
    positive(c.spacing, "geometry.spacing");
    c.radius = g.number("radius", c.radius);
    positive(c.radius, "geometry.radius");
    if (g.has("generators")) {
      const json& gens = g.raw("generators");
      require(gens.is_array() && !gens.empty() && gens.size() <= 3, ErrorKind::ConfigInvalid,
              "geometry.generators must list one to three vectors");
      for (const auto& v : gens) c.generators.push_back(toVec3(v, "geometry.generators"));
    }
    require((c.lattice == "custom") == !c.generators.empty(), ErrorKind::ConfigInvalid,
            "geometry.generators is required for, and only allowed with, lattice = \"custom\"");
    if (g.has("cell")) {
      const json& cell = g.raw("cell");
      require(cell.is_array() && !cell.empty(), ErrorKind::ConfigInvalid, "geometry.cell must be a non-empty array");
      for (std::size_t k = 0; k < cell.size(); ++k) {
        Section s(cell[k], "geometry.cell[" + std::to_string(k) + "]");
        require(s.has("center"), ErrorKind::ConfigInvalid, s.where() + ".center is required");
        Sphere sp{toVec3(s.raw("center"), s.qualified("center")), s.number("radius", c.radius)};
        positive(sp.radius, s.qualified("radius"));
        s.finish();
        c.cell.push_back(sp);
      }
    }
    {
      Section d = g.sub("dislocation");
      c.dislocation.enabled = d.boolean("enabled", false);
      c.dislocation.cellLength = d.number("cell_length", c.dislocation.cellLength);
      positive(c.dislocation.cellLength, "geometry.dislocation.cell_length");
      if (d.has("offsets")) {
        const auto o = d.numbers("offsets");
        require(o.size() == 2, ErrorKind::ConfigInvalid, "geometry.dislocation.offsets must hold two numbers");
        c.dislocation.offsets = {o[0], o[1]};
      }
      if (d.has("removed")) c.dislocation.removed = d.numbers("removed");
      d.finish();
    }
    g.finish();
  }
  {
    Section b = top.sub("backend");
    const std::string kind = b.string("kind", "multipole");
    if (kind == "multipole" || kind == "sphericalMultipole") {
      c.backend = Backend::multipole(static_cast<int>(b.integer("order", 2)));
    } else if (kind == "panel" || kind == "panelP0") {
      c.backend = Backend::panel(static_cast<int>(b.integer("level", 3)));
    } else {
      fail(ErrorKind::ConfigInvalid, "backend.kind must be multipole or panel");
    }
    if (c.backend.kind == BackendKind::SphericalMultipole) b.has("level");
    else b.has("order");
    b.finish();
    require(c.backend.order >= 0 && c.backend.level >= 0, ErrorKind::ConfigInvalid,
            "backend order and level must be non-negative");
  }
  {
    Section s = top.sub("scheme");
    c.scheme.method = sumMethodFromString(s.string("method", "ewald"));
    c.scheme.tolerance = s.number("tolerance", c.scheme.tolerance);
    positive(c.scheme.tolerance, "scheme.tolerance");
    c.scheme.splitting = s.number("splitting", 0.0);
    c.scheme.spatialCutoff = s.number("spatial_cutoff", 0.0);
    c.scheme.spectralCutoff = s.number("spectral_cutoff", 0.0);
    c.scheme.directCutoff = static_cast<int>(s.integer("direct_cutoff", c.scheme.directCutoff));
    require(c.scheme.splitting >= 0.0 && c.scheme.spatialCutoff >= 0.0 && c.scheme.spectralCutoff >= 0.0 &&
                c.scheme.directCutoff > 0,
            ErrorKind::ConfigInvalid, "scheme cutoffs and splitting must be non-negative");
    s.finish();
  }
  {
    Section q = top.sub("quadrature");
    c.quadraturePoints = static_cast<int>(q.integer("points", 0));
    require(c.quadraturePoints == 0 || (c.quadraturePoints >= 2 && c.quadraturePoints % 2 == 0),
            ErrorKind::ConfigInvalid, "quadrature.points must be an even number >= 2 (or 0 for the default)");
    c.quadratureKind = q.string("kind", c.quadratureKind);
    require(c.quadratureKind == "standard" || c.quadratureKind == "uniform" || c.quadratureKind == "graded",
            ErrorKind::ConfigInvalid, "quadrature.kind must be standard, uniform or graded");
    c.floquet.tolerance = q.number("tolerance", c.floquet.tolerance);
    positive(c.floquet.tolerance, "quadrature.tolerance");
    c.floquet.checkConvergence = q.boolean("check", true);
    c.floquet.extrapolate = q.boolean("extrapolate", true);
    c.bandPoints = static_cast<int>(q.integer("band_points", c.bandPoints));
    require(c.bandPoints >= 2 && c.bandPoints % 2 == 0, ErrorKind::ConfigInvalid,
            "quadrature.band_points must be an even number >= 2");
    q.finish();
  }
  {
    Section t = top.sub("truncation");
    c.r = t.number("r", c.r);
    positive(c.r, "truncation.r");
    c.ladder = t.numbers("ladder");
    for (double r : c.ladder) positive(r, "truncation.ladder entries");
    for (std::size_t k = 1; k < c.ladder.size(); ++k)
      require(c.ladder[k] > c.ladder[k - 1], ErrorKind::ConfigInvalid, "truncation.ladder must be increasing");
    if (t.has("centre")) c.centre = toVec3(t.raw("centre"), "truncation.centre");
    c.truncatedMax = t.number("truncated_max", c.truncatedMax);
    require(c.truncatedMax >= 0.0, ErrorKind::ConfigInvalid, "truncation.truncated_max must be non-negative");
    t.finish();
  }
  {
    Section q = top.sub("quasi");
    if (q.has("alphas")) {
      const json& a = q.raw("alphas");
      require(a.is_array(), ErrorKind::ConfigInvalid, "quasi.alphas must be an array of vectors");
      for (const auto& v : a) c.alphas.push_back(toVec3(v, "quasi.alphas"));
    }
    q.finish();
  }
  {
    Section rs = top.sub("realspace");
    if (rs.has("coefficients")) {
      const json& a = rs.raw("coefficients");
      require(a.is_array(), ErrorKind::ConfigInvalid, "realspace.coefficients must be an array of index triples");
      for (const auto& v : a) c.coefficients.push_back(toIndex(v, "realspace.coefficients"));
    }
    rs.finish();
  }
  {
    Section s = top.sub("spectrum");
    c.source = s.string("source", c.source);
    require(c.source == "finite" || c.source == "truncated", ErrorKind::ConfigInvalid,
            "spectrum.source must be finite or truncated");
    if (s.has("eta")) {
      const json& e = s.raw("eta");
      require(e.is_number(), ErrorKind::ConfigInvalid, "spectrum.eta must be a number");
      c.eta = e.get<double>();
      require(*c.eta > -1.0, ErrorKind::ConfigInvalid, "spectrum.eta must exceed -1");
    }
    if (s.has("defects")) {
      const json& d = s.raw("defects");
      require(d.is_array(), ErrorKind::ConfigInvalid, "spectrum.defects must be an array of tables");
      for (std::size_t k = 0; k < d.size(); ++k) {
        Section e(d[k], "spectrum.defects[" + std::to_string(k) + "]");
        DefectEntryConfig entry;
        if (e.has("cell")) entry.cell = toIndex(e.raw("cell"), e.qualified("cell"));
        entry.resonator = static_cast<int>(e.integer("resonator", 0));
        entry.b = e.number("b", 1.0);
        positive(entry.b, e.qualified("b"));
        e.finish();
        c.defects.push_back(entry);
      }
    }
    c.inGapMargin = s.number("in_gap_margin", c.inGapMargin);
    require(c.inGapMargin >= 0.0, ErrorKind::ConfigInvalid, "spectrum.in_gap_margin must be non-negative");
    c.matchTolerance = s.number("match_tolerance", c.matchTolerance);
    positive(c.matchTolerance, "spectrum.match_tolerance");
    s.finish();
  }
  {
    Section m = top.sub("materials");
    c.contrast = m.number("contrast", c.contrast);
    positive(c.contrast, "materials.contrast");
    c.speed = m.number("speed", c.speed);
    positive(c.speed, "materials.speed");
    m.finish();
  }
  top.finish();
  c.backend.validate();
  return c;
}

json vecJson(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json indexJson(const LatticeIndex& m) { return json::array({m[0], m[1], m[2]}); }

}  // namespace

UnitCell ExperimentConfig::unitCell() const {
  if (!cell.empty()) return UnitCell{cell};
  return UnitCell{{Sphere{Vec3::Zero(), radius}}};
}

Lattice ExperimentConfig::makeLattice() const {
  if (lattice == "chain") return Lattice::chain(spacing);
  if (lattice == "square") return Lattice::square(spacing);
  if (lattice == "cubic") return Lattice::cubic(spacing);
  return Lattice(static_cast<int>(generators.size()), generators);
}

MaterialParams ExperimentConfig::materials() const { return MaterialParams::uniform(unitCell(), contrast, speed); }

DefectSpec ExperimentConfig::defectSpec() const {
  DefectSpec s;
  if (eta) s.set({0, 0, 0}, 0, 1.0 + *eta);
  for (const auto& d : defects) s.set(d.cell, d.resonator, d.b);
  return s;
}

TruncationIndex ExperimentConfig::truncation(const Lattice& lattice, double r) const {
  Vec3 c = Vec3::Zero();
  for (int k = 0; k < lattice.dimension(); ++k) c += centre[k] * lattice.generator(k);
  return latticePoints(lattice, r * lattice.scale(), c);
}

std::vector<double> ExperimentConfig::ladderOr(const std::vector<double>& fallback) const {
  return ladder.empty() ? fallback : ladder;
}

ExperimentConfig parseConfig(const std::string& text, const std::string& format) {
  json root;
  if (format == "json") {
    try {
      root = json::parse(text);
    } catch (const json::exception& e) {
      fail(ErrorKind::ConfigInvalid, std::string("malformed JSON: ") + e.what());
    }
  } else if (format == "toml") {
    try {
      root = tomlToJson(toml::parse(text));
    } catch (const toml::parse_error& e) {
      std::ostringstream os;
      os << "malformed TOML: " << e.description() << " at line " << e.source().begin.line;
      fail(ErrorKind::ConfigInvalid, os.str());
    }
  } else {
    fail(ErrorKind::ConfigInvalid, "unknown configuration format '" + format + "'");
  }
  return fromJson(root);
}

ExperimentConfig loadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::ConfigInvalid, "cannot read configuration file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::string format;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") format = "json";
  else if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml") format = "toml";
  else {
    const auto first = text.find_first_not_of(" \t\r\n");
    format = first != std::string::npos && text[first] == '{' ? "json" : "toml";
  }
  return parseConfig(text, format);
}

std::string configToJson(const ExperimentConfig& c) {
  json g = {{"lattice", c.lattice}, {"spacing", c.spacing}, {"radius", c.radius}};
  if (!c.generators.empty()) {
    g["generators"] = json::array();
    for (const auto& v : c.generators) g["generators"].push_back(vecJson(v));
  }
  json cell = json::array();
  for (const auto& s : c.unitCell().spheres) cell.push_back({{"center", vecJson(s.center)}, {"radius", s.radius}});
  g["cell"] = cell;
  g["dislocation"] = {{"enabled", c.dislocation.enabled},
                      {"cell_length", c.dislocation.cellLength},
                      {"offsets", c.dislocation.offsets},
                      {"removed", c.dislocation.removed}};
  json backend = c.backend.kind == BackendKind::SphericalMultipole
                     ? json{{"kind", "multipole"}, {"order", c.backend.order}}
                     : json{{"kind", "panel"}, {"level", c.backend.level}};
  json scheme = {{"method", toString(c.scheme.method)},        {"tolerance", c.scheme.tolerance},
                 {"splitting", c.scheme.splitting},            {"spatial_cutoff", c.scheme.spatialCutoff},
                 {"spectral_cutoff", c.scheme.spectralCutoff}, {"direct_cutoff", c.scheme.directCutoff}};
  json quad = {{"points", c.quadraturePoints},         {"kind", c.quadratureKind},
               {"tolerance", c.floquet.tolerance},     {"check", c.floquet.checkConvergence},
               {"extrapolate", c.floquet.extrapolate}, {"band_points", c.bandPoints}};
  json trunc = {{"r", c.r}, {"ladder", c.ladder}, {"truncated_max", c.truncatedMax}, {"centre", vecJson(c.centre)}};
  json alphas = json::array();
  for (const auto& a : c.alphas) alphas.push_back(vecJson(a));
  json coeffs = json::array();
  for (const auto& m : c.coefficients) coeffs.push_back(indexJson(m));
  json defects = json::array();
  for (const auto& d : c.defects) defects.push_back({{"cell", indexJson(d.cell)}, {"resonator", d.resonator}, {"b", d.b}});
  json spectrum = {{"source", c.source},
                   {"defects", defects},
                   {"in_gap_margin", c.inGapMargin},
                   {"match_tolerance", c.matchTolerance}};
  if (c.eta) spectrum["eta"] = *c.eta;
  json root = {{"seed", c.seed},
               {"cache_dir", c.cacheDir},
               {"geometry", g},
               {"backend", backend},
               {"scheme", scheme},
               {"quadrature", quad},
               {"truncation", trunc},
               {"quasi", {{"alphas", alphas}}},
               {"realspace", {{"coefficients", coeffs}}},
               {"spectrum", spectrum},
               {"materials", {{"contrast", c.contrast}, {"speed", c.speed}}}};
  return root.dump(2);
}

}  // namespace capmat
