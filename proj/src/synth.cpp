#include "patchqc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/core.h>
#include "json.hpp"

#include "patchqc/core/io.hpp"
#include "patchqc/core/parallel.hpp"
#include "patchqc/core/spatial_index.hpp"
#include "patchqc/error.hpp"

namespace patchqc::synth {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * kPi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * kPi * u2);
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ull));
}

bool Polygon::contains(double x, double y) const {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const auto& a = ring[i];
    const auto& b = ring[j];
    if ((a[1] > y) != (b[1] > y) && x < (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0]) inside = !inside;
  }
  return inside;
}

void SceneSpec::validate() const {
  const auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidSpec, what); };
  if (!(width > 2.0 && height > 2.0)) bad("extent must exceed the 2 m patch size");
  if (!(als_density > 0.0 && dim_density > 0.0)) bad("densities must be > 0");
  if (!(als_noise >= 0.0 && dim_noise >= 0.0)) bad("noise must be >= 0");
  if (!(ortho_cell > 0.0)) bad("ortho_cell must be > 0");
  if (!(tile > 0.0)) bad("tile must be > 0");
  if (bias.kind == BiasKind::Linear && bias.axis != 'x' && bias.axis != 'y') bad("linear bias axis must be x or y");
  if (bias.kind == BiasKind::Quadrant && bias.quadrant != "SW" && bias.quadrant != "SE" && bias.quadrant != "NW" &&
      bias.quadrant != "NE")
    bad("quadrant must be one of SW, SE, NW, NE");
  if (bias.radius < 0.0) bad("radial radius must be >= 0");
  for (const auto& h : holes)
    if (!(h.footprint.width() > 0.0 && h.footprint.height() > 0.0)) bad("hole footprints need positive area");
  for (const auto& s : steps)
    if (!(s.footprint.width() > 0.0 && s.footprint.height() > 0.0)) bad("step footprints need positive area");
  if (random_holes.count > 0 &&
      !(random_holes.min_size > 0.0 && random_holes.max_size >= random_holes.min_size &&
        random_holes.max_size < std::min(width, height)))
    bad("random hole sizes must satisfy 0 < min_size <= max_size < extent");
  for (const auto* list : {&vegetation, &shadows})
    for (const auto& p : *list)
      if (p.ring.size() < 3) bad("polygons need at least 3 vertices");
  for (const auto& c : changes)
    if (!(c.radius > 0.0)) bad("change discs need a positive radius");
  if (!(targets.stddev >= 0.0)) bad("targets.stddev must be >= 0");
}

namespace {

const char* bias_kind_name(BiasKind k) {
  switch (k) {
    case BiasKind::Constant: return "constant";
    case BiasKind::Linear: return "linear";
    case BiasKind::Quadrant: return "quadrant";
    case BiasKind::Radial: return "radial";
  }
  return "constant";
}

void require_keys(const ordered_json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidSpec, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) == allowed.end())
      throw Error(ErrorKind::InvalidSpec, fmt::format("unknown key '{}' in {}", k, where));
  }
}

Box2 box_from(const ordered_json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorKind::InvalidSpec, "footprints are [xmin, ymin, xmax, ymax]");
  return Box2{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

ordered_json box_to(const Box2& b) { return ordered_json::array({b.xmin, b.ymin, b.xmax, b.ymax}); }

Polygon polygon_from(const ordered_json& j) {
  Polygon p;
  for (const auto& v : j) p.ring.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  return p;
}

ordered_json polygon_to(const Polygon& p) {
  ordered_json a = ordered_json::array();
  for (const auto& v : p.ring) a.push_back(ordered_json::array({v[0], v[1]}));
  return a;
}

}  // namespace

SceneSpec spec_from_json(const std::string& text) {
  SceneSpec s;
  try {
    const auto j = ordered_json::parse(text);
    require_keys(j,
                 {"extent", "surface", "als", "dim", "bias", "steps", "holes", "random_holes", "vegetation", "shadows",
                  "changes", "ortho_cell", "targets", "seed", "tile"},
                 "scene spec");
    if (j.contains("extent")) {
      const auto& e = j["extent"];
      require_keys(e, {"x0", "y0", "width", "height"}, "extent");
      s.x0 = e.value("x0", s.x0);
      s.y0 = e.value("y0", s.y0);
      s.width = e.value("width", s.width);
      s.height = e.value("height", s.height);
    }
    if (j.contains("surface")) {
      const auto& e = j["surface"];
      require_keys(e, {"z0", "tilt_x", "tilt_y"}, "surface");
      s.z0 = e.value("z0", s.z0);
      s.tilt_x = e.value("tilt_x", s.tilt_x);
      s.tilt_y = e.value("tilt_y", s.tilt_y);
    }
    if (j.contains("als")) {
      require_keys(j["als"], {"density", "noise"}, "als");
      s.als_density = j["als"].value("density", s.als_density);
      s.als_noise = j["als"].value("noise", s.als_noise);
    }
    if (j.contains("dim")) {
      require_keys(j["dim"], {"density", "noise"}, "dim");
      s.dim_density = j["dim"].value("density", s.dim_density);
      s.dim_noise = j["dim"].value("noise", s.dim_noise);
    }
    if (j.contains("bias")) {
      const auto& b = j["bias"];
      require_keys(b, {"kind", "value", "base", "from", "to", "axis", "quadrant", "center", "radius"}, "bias");
      const std::string kind = b.value("kind", "constant");
      if (kind == "constant") s.bias.kind = BiasKind::Constant;
      else if (kind == "linear") s.bias.kind = BiasKind::Linear;
      else if (kind == "quadrant") s.bias.kind = BiasKind::Quadrant;
      else if (kind == "radial") s.bias.kind = BiasKind::Radial;
      else throw Error(ErrorKind::InvalidSpec, "unknown bias kind '" + kind + "'");
      s.bias.value = b.value("value", 0.0);
      s.bias.base = b.value("base", 0.0);
      s.bias.from = b.value("from", 0.0);
      s.bias.to = b.value("to", 0.0);
      const std::string axis = b.value("axis", "x");
      if (axis.size() != 1) throw Error(ErrorKind::InvalidSpec, "linear bias axis must be x or y");
      s.bias.axis = axis[0];
      s.bias.quadrant = b.value("quadrant", "SW");
      if (b.contains("center")) s.bias.center = {b["center"].at(0).get<double>(), b["center"].at(1).get<double>()};
      else s.bias.center = {s.x0 + 0.5 * s.width, s.y0 + 0.5 * s.height};
      s.bias.radius = b.value("radius", 0.5 * std::hypot(s.width, s.height));
    } else {
      s.bias.center = {s.x0 + 0.5 * s.width, s.y0 + 0.5 * s.height};
      s.bias.radius = 0.5 * std::hypot(s.width, s.height);
    }
    for (const auto& st : j.value("steps", ordered_json::array())) {
      require_keys(st, {"footprint", "height"}, "steps[]");
      s.steps.push_back({box_from(st.at("footprint")), st.value("height", 0.0)});
    }
    for (const auto& h : j.value("holes", ordered_json::array())) {
      require_keys(h, {"footprint", "als", "dim"}, "holes[]");
      s.holes.push_back({box_from(h.at("footprint")), h.value("als", true), h.value("dim", true)});
    }
    if (j.contains("random_holes")) {
      const auto& r = j["random_holes"];
      require_keys(r, {"count", "min_size", "max_size", "als", "dim"}, "random_holes");
      s.random_holes.count = r.value("count", std::size_t{0});
      s.random_holes.min_size = r.value("min_size", 1.0);
      s.random_holes.max_size = r.value("max_size", 3.0);
      s.random_holes.als = r.value("als", true);
      s.random_holes.dim = r.value("dim", true);
    }
    for (const auto& p : j.value("vegetation", ordered_json::array())) s.vegetation.push_back(polygon_from(p));
    for (const auto& p : j.value("shadows", ordered_json::array())) s.shadows.push_back(polygon_from(p));
    for (const auto& c : j.value("changes", ordered_json::array())) {
      require_keys(c, {"center", "radius", "height"}, "changes[]");
      s.changes.push_back({c.at("center").at(0).get<double>(), c.at("center").at(1).get<double>(),
                           c.value("radius", 0.0), c.value("height", 0.0)});
    }
    s.ortho_cell = j.value("ortho_cell", s.ortho_cell);
    if (j.contains("targets")) {
      const auto& t = j["targets"];
      require_keys(t, {"count", "mean", "stddev", "outliers"}, "targets");
      s.targets.count = t.value("count", std::size_t{0});
      s.targets.mean = t.value("mean", s.targets.mean);
      s.targets.stddev = t.value("stddev", s.targets.stddev);
      s.targets.outliers = t.value("outliers", std::vector<double>{});
    }
    s.seed = j.value("seed", s.seed);
    s.tile = j.value("tile", s.tile);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidSpec, std::string("malformed scene spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string to_json(const SceneSpec& s) {
  ordered_json j;
  j["extent"] = {{"x0", s.x0}, {"y0", s.y0}, {"width", s.width}, {"height", s.height}};
  j["surface"] = {{"z0", s.z0}, {"tilt_x", s.tilt_x}, {"tilt_y", s.tilt_y}};
  j["als"] = {{"density", s.als_density}, {"noise", s.als_noise}};
  j["dim"] = {{"density", s.dim_density}, {"noise", s.dim_noise}};
  j["bias"] = {{"kind", bias_kind_name(s.bias.kind)},
               {"value", s.bias.value},
               {"base", s.bias.base},
               {"from", s.bias.from},
               {"to", s.bias.to},
               {"axis", std::string(1, s.bias.axis)},
               {"quadrant", s.bias.quadrant},
               {"center", ordered_json::array({s.bias.center[0], s.bias.center[1]})},
               {"radius", s.bias.radius}};
  j["steps"] = ordered_json::array();
  for (const auto& st : s.steps) j["steps"].push_back({{"footprint", box_to(st.footprint)}, {"height", st.height}});
  j["holes"] = ordered_json::array();
  for (const auto& h : s.holes) j["holes"].push_back({{"footprint", box_to(h.footprint)}, {"als", h.als}, {"dim", h.dim}});
  j["random_holes"] = {{"count", s.random_holes.count},
                       {"min_size", s.random_holes.min_size},
                       {"max_size", s.random_holes.max_size},
                       {"als", s.random_holes.als},
                       {"dim", s.random_holes.dim}};
  j["vegetation"] = ordered_json::array();
  for (const auto& p : s.vegetation) j["vegetation"].push_back(polygon_to(p));
  j["shadows"] = ordered_json::array();
  for (const auto& p : s.shadows) j["shadows"].push_back(polygon_to(p));
  j["changes"] = ordered_json::array();
  for (const auto& c : s.changes)
    j["changes"].push_back({{"center", ordered_json::array({c.x, c.y})}, {"radius", c.radius}, {"height", c.height}});
  j["ortho_cell"] = s.ortho_cell;
  j["targets"] = {{"count", s.targets.count},
                  {"mean", s.targets.mean},
                  {"stddev", s.targets.stddev},
                  {"outliers", s.targets.outliers}};
  j["seed"] = s.seed;
  j["tile"] = s.tile;
  return j.dump(2) + "\n";
}

SceneTruth::SceneTruth(SceneSpec spec) : spec_(std::move(spec)) {}

double SceneTruth::surface(double x, double y) const {
  double z = spec_.z0 + spec_.tilt_x * (x - spec_.x0) + spec_.tilt_y * (y - spec_.y0);
  for (const auto& s : spec_.steps)
    if (s.footprint.contains(x, y)) z += s.height;
  return z;
}

double SceneTruth::bias(double x, double y) const {
  const BiasField& b = spec_.bias;
  switch (b.kind) {
    case BiasKind::Constant: return b.value;
    case BiasKind::Linear: {
      const double t = b.axis == 'x' ? (x - spec_.x0) / spec_.width : (y - spec_.y0) / spec_.height;
      return b.from + (b.to - b.from) * t;
    }
    case BiasKind::Quadrant: {
      const bool east = x >= spec_.x0 + 0.5 * spec_.width;
      const bool north = y >= spec_.y0 + 0.5 * spec_.height;
      const std::string q = std::string(north ? "N" : "S") + (east ? "E" : "W");
      return q == b.quadrant ? b.value : b.base;
    }
    case BiasKind::Radial: {
      if (!(b.radius > 0.0)) return b.base;
      const double r = std::min(1.0, std::hypot(x - b.center[0], y - b.center[1]) / b.radius);
      return b.base + b.value * r * r;
    }
  }
  return 0.0;
}

double SceneTruth::dim_offset(double x, double y) const {
  double v = bias(x, y);
  for (const auto& c : spec_.changes)
    if (std::hypot(x - c.x, y - c.y) <= c.radius) v += c.height;
  return v;
}

bool SceneTruth::in_hole(double x, double y, bool als) const {
  for (const auto& h : spec_.holes)
    if ((als ? h.als : h.dim) && h.footprint.contains(x, y)) return true;
  return false;
}

bool SceneTruth::in_vegetation(double x, double y) const {
  return std::any_of(spec_.vegetation.begin(), spec_.vegetation.end(), [&](const Polygon& p) { return p.contains(x, y); });
}

bool SceneTruth::in_shadow(double x, double y) const {
  return std::any_of(spec_.shadows.begin(), spec_.shadows.end(), [&](const Polygon& p) { return p.contains(x, y); });
}

namespace {

enum : std::uint64_t { kStreamHoles = 0x401e5, kStreamTargets = 0x7a59e7, kStreamPoints = 0x9015 };

SceneSpec expand_random_holes(SceneSpec spec) {
  if (spec.random_holes.count == 0) return spec;
  Rng rng(derive_seed(spec.seed, kStreamHoles));
  for (std::size_t i = 0; i < spec.random_holes.count; ++i) {
    const double side = rng.uniform(spec.random_holes.min_size, spec.random_holes.max_size);
    const double x = rng.uniform(spec.x0, spec.x0 + spec.width - side);
    const double y = rng.uniform(spec.y0, spec.y0 + spec.height - side);
    spec.holes.push_back({Box2{x, y, x + side, y + side}, spec.random_holes.als, spec.random_holes.dim});
  }
  spec.random_holes.count = 0;
  return spec;
}

std::vector<Point3> sample_cloud(const SceneTruth& truth, bool als, unsigned threads) {
  const SceneSpec& s = truth.spec();
  const auto ntx = static_cast<std::size_t>(std::ceil(s.width / s.tile));
  const auto nty = static_cast<std::size_t>(std::ceil(s.height / s.tile));
  const double density = als ? s.als_density : s.dim_density;
  const double noise = als ? s.als_noise : s.dim_noise;
  std::vector<std::vector<Point3>> tiles(ntx * nty);
  parallel_for(tiles.size(), threads, [&](std::size_t t) {
    const std::size_t tx = t % ntx, ty = t / ntx;
    const double xa = s.x0 + static_cast<double>(tx) * s.tile;
    const double ya = s.y0 + static_cast<double>(ty) * s.tile;
    const double xb = std::min(xa + s.tile, s.x0 + s.width);
    const double yb = std::min(ya + s.tile, s.y0 + s.height);
    const auto count = static_cast<std::size_t>(std::llround(density * (xb - xa) * (yb - ya)));
    Rng rng(derive_seed(s.seed, kStreamPoints + (als ? 0 : 1), t));
    auto& out = tiles[t];
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double x = rng.uniform(xa, xb);
      const double y = rng.uniform(ya, yb);
      const double e = rng.normal(0.0, noise);
      if (truth.in_hole(x, y, als)) continue;
      const double z = (als ? truth.surface(x, y) : truth.dim_surface(x, y)) + e;
      out.emplace_back(x, y, z);
    }
  });
  std::vector<Point3> pts;
  for (auto& t : tiles) pts.insert(pts.end(), t.begin(), t.end());
  return pts;
}

Raster paint_ortho(const SceneTruth& truth, unsigned threads) {
  const SceneSpec& s = truth.spec();
  // One meter of margin so patches at the scene edge stay covered.
  const double margin = 1.0;
  const auto w = static_cast<std::size_t>(std::ceil((s.width + 2 * margin) / s.ortho_cell));
  const auto h = static_cast<std::size_t>(std::ceil((s.height + 2 * margin) / s.ortho_cell));
  Raster r(s.x0 - margin, s.y0 + s.height + margin, s.ortho_cell, w, h, 3);
  parallel_for(h, threads, [&](std::size_t row) {
    const double y = r.center_y(row);
    for (std::size_t col = 0; col < w; ++col) {
      const double x = r.center_x(col);
      const auto& c = truth.in_shadow(x, y) ? kShadowColor : truth.in_vegetation(x, y) ? kGrassColor : kGroundColor;
      for (std::size_t b = 0; b < 3; ++b) r.at(b, col, row) = c[b];
    }
  });
  return r;
}

// Targets sit on locally flat, fully sampled ALS ground.
bool good_target_site(const SceneTruth& truth, double x, double y) {
  const SceneSpec& s = truth.spec();
  const double ref = truth.surface(x, y) - s.tilt_x * (x - s.x0) - s.tilt_y * (y - s.y0);
  for (int i = -3; i <= 3; ++i)
    for (int k = -3; k <= 3; ++k) {
      const double px = x + i * 0.9, py = y + k * 0.9;
      if (truth.in_hole(px, py, true)) return false;
      const double level = truth.surface(px, py) - s.tilt_x * (px - s.x0) - s.tilt_y * (py - s.y0);
      if (level != ref) return false;
    }
  return true;
}

std::vector<measures::ReferenceTarget> make_targets(const SceneTruth& truth) {
  const SceneSpec& s = truth.spec();
  std::vector<measures::ReferenceTarget> out;
  const std::size_t total = s.targets.count + s.targets.outliers.size();
  if (total == 0) return out;
  Rng rng(derive_seed(s.seed, kStreamTargets));
  std::vector<double> residuals;
  for (std::size_t i = 0; i < s.targets.count; ++i) residuals.push_back(rng.normal(s.targets.mean, s.targets.stddev));
  residuals.insert(residuals.end(), s.targets.outliers.begin(), s.targets.outliers.end());
  const double inset = 3.0;
  if (!(s.width > 2 * inset && s.height > 2 * inset)) throw Error(ErrorKind::InvalidSpec, "extent too small for targets");
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    std::size_t tries = 0;
    double x = 0, y = 0;
    do {
      if (++tries > 10000) throw Error(ErrorKind::InvalidSpec, "no flat site left for reference targets");
      x = rng.uniform(s.x0 + inset, s.x0 + s.width - inset);
      y = rng.uniform(s.y0 + inset, s.y0 + s.height - inset);
    } while (!good_target_site(truth, x, y));
    measures::ReferenceTarget t;
    t.id = fmt::format("T{:03d}", i + 1);
    t.x = x;
    t.y = y;
    t.z = truth.surface(x, y) - residuals[i];  // residual = plane - target
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec_in, unsigned threads) {
  spec_in.validate();
  Scene scene;
  scene.truth = SceneTruth(expand_random_holes(spec_in));
  scene.als = PointCloud(sample_cloud(scene.truth, true, threads));
  scene.dim = PointCloud(sample_cloud(scene.truth, false, threads));
  scene.ortho = paint_ortho(scene.truth, threads);
  scene.targets = make_targets(scene.truth);
  return scene;
}

std::string targets_csv(std::span<const measures::ReferenceTarget> targets) {
  std::string out = "id,x,y,z\n";
  for (const auto& t : targets)
    out += fmt::format("{},{},{},{}\n", t.id, io::format_double(t.x), io::format_double(t.y), io::format_double(t.z));
  return out;
}

std::vector<measures::ReferenceTarget> read_targets_csv(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line != "id,x,y,z")
    throw Error(ErrorKind::DataError, path.string() + ": target CSV header must be 'id,x,y,z'");
  std::vector<measures::ReferenceTarget> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    measures::ReferenceTarget t;
    if (!(ls >> t.id >> t.x >> t.y >> t.z))
      throw Error(ErrorKind::DataError, fmt::format("{}:{}: expected id,x,y,z", path.string(), line_no));
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<fs::path> write_scene(const fs::path& out_dir, const Scene& scene) {
  std::vector<fs::path> written;
  io::write_xyz(out_dir / "als.xyz", scene.als);
  written.push_back(out_dir / "als.xyz");
  io::write_xyz(out_dir / "dim.xyz", scene.dim);
  written.push_back(out_dir / "dim.xyz");
  io::write_raster(out_dir / "ortho.bin", scene.ortho, "uint8");
  written.push_back(out_dir / "ortho.bin");
  written.push_back(io::sidecar_path(out_dir / "ortho.bin"));

  ordered_json truth;
  truth["spec"] = ordered_json::parse(to_json(scene.truth.spec()));
  truth["als_points"] = scene.als.size();
  truth["dim_points"] = scene.dim.size();
  ordered_json targets = ordered_json::array();
  for (const auto& t : scene.targets)
    targets.push_back({{"id", t.id}, {"true_residual", scene.truth.surface(t.x, t.y) - t.z}});
  truth["targets"] = targets;
  io::write_text(out_dir / "truth.json", truth.dump(2) + "\n");
  written.push_back(out_dir / "truth.json");
  if (!scene.targets.empty()) {
    io::write_text(out_dir / "targets.csv", targets_csv(scene.targets));
    written.push_back(out_dir / "targets.csv");
  }
  return written;
}

Raster idw_dsm(const PointCloud& cloud, double cell, double power, double radius, unsigned threads) {
  if (cloud.empty()) throw Error(ErrorKind::EmptyInput, "IDW needs a non-empty cloud");
  if (!(cell > 0.0)) throw Error(ErrorKind::ConfigError, "DSM cell must be > 0");
  if (!(power > 0.0)) throw Error(ErrorKind::ConfigError, "IDW power must be > 0");
  const auto& bb = cloud.bounds();
  const double xmin = bb.min().x(), ymin = bb.min().y(), xmax = bb.max().x(), ymax = bb.max().y();
  if (!(radius > 0.0)) {
    const double area = std::max((xmax - xmin) * (ymax - ymin), cell * cell);
    radius = 3.0 * std::sqrt(area / static_cast<double>(cloud.size()));
  }
  const double ox = std::floor(xmin / cell) * cell;
  const double oy = std::ceil(ymax / cell) * cell;
  const auto w = static_cast<std::size_t>(std::floor((xmax - ox) / cell)) + 1;
  const auto h = static_cast<std::size_t>(std::floor((oy - ymin) / cell)) + 1;
  Raster dsm(ox, oy, cell, w, h, 1, kDsmNodata, kDsmNodata);
  const SpatialIndex index(cloud.points());
  const auto pts = cloud.points();
  parallel_for(h, threads, [&](std::size_t row) {
    const double y = dsm.center_y(row);
    for (std::size_t col = 0; col < w; ++col) {
      const double x = dsm.center_x(col);
      const auto near = index.radius_query_2d(x, y, radius);
      if (near.empty()) continue;
      double sw = 0.0, swz = 0.0;
      bool exact = false;
      for (std::size_t i : near) {
        const double d = std::hypot(pts[i].x() - x, pts[i].y() - y);
        if (d <= 1e-9) {
          dsm.at(0, col, row) = pts[i].z();
          exact = true;
          break;
        }
        const double wgt = 1.0 / std::pow(d, power);
        sw += wgt;
        swz += wgt * pts[i].z();
      }
      if (!exact) dsm.at(0, col, row) = swz / sw;
    }
  });
  return dsm;
}

namespace {

// z = a + b x + c y by ordinary least squares on centred coordinates.
struct OlsPlane {
  double a = 0.0, b = 0.0, c = 0.0;
  double at(double x, double y) const { return a + b * x + c * y; }
};

OlsPlane ols_fit(std::span<const Point3> pts) {
  double mx = 0, my = 0, mz = 0;
  for (const auto& p : pts) {
    mx += p.x();
    my += p.y();
    mz += p.z();
  }
  const double n = static_cast<double>(pts.size());
  mx /= n;
  my /= n;
  mz /= n;
  double sxx = 0, sxy = 0, syy = 0, sxz = 0, syz = 0;
  for (const auto& p : pts) {
    const double dx = p.x() - mx, dy = p.y() - my, dz = p.z() - mz;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
    sxz += dx * dz;
    syz += dy * dz;
  }
  const double det = sxx * syy - sxy * sxy;
  OlsPlane pl;
  if (det > 0.0) {
    pl.b = (sxz * syy - syz * sxy) / det;
    pl.c = (syz * sxx - sxz * sxy) / det;
  }
  pl.a = mz - pl.b * mx - pl.c * my;
  return pl;
}

}  // namespace

OracleResult oracle_measures(const SceneTruth& truth, std::span<const Box2> patches, std::size_t replicas,
                             std::uint64_t seed) {
  OracleResult r;
  r.m = patches.size();
  if (patches.empty()) return r;
  const SceneSpec& s = truth.spec();

  constexpr int kGrid = 20;
  std::vector<double> offsets;
  double var_sum = 0.0;
  for (const auto& b : patches) {
    double acc = 0.0;
    for (int i = 0; i < kGrid; ++i)
      for (int k = 0; k < kGrid; ++k)
        acc += truth.dim_offset(b.xmin + (i + 0.5) * b.width() / kGrid, b.ymin + (k + 0.5) * b.height() / kGrid);
    offsets.push_back(acc / (kGrid * kGrid));
    const double n_dim = std::max(1.0, s.dim_density * b.area());
    const double n_als = std::max(1.0, s.als_density * b.area());
    var_sum += s.dim_noise * s.dim_noise / n_dim + s.als_noise * s.als_noise / n_als;
  }
  const double m = static_cast<double>(patches.size());
  double mean = 0.0;
  for (double o : offsets) mean += o;
  mean /= m;
  r.m_md = mean;
  r.m_md_tol = 3.0 * std::sqrt(var_sum) / m;
  double spread = 0.0;
  for (double o : offsets) spread += (o - mean) * (o - mean);
  r.std_md = std::sqrt((patches.size() > 1 ? spread / (m - 1.0) : 0.0) + var_sum / m);

  // Direct simulation of the per-patch spread.
  Rng rng(derive_seed(seed, s.seed));
  std::vector<double> var_i;
  std::vector<Point3> als, dim;
  for (const auto& b : patches)
    for (std::size_t rep = 0; rep < replicas; ++rep) {
      const auto n_als = std::max<std::size_t>(3, static_cast<std::size_t>(std::llround(s.als_density * b.area())));
      const auto n_dim = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(s.dim_density * b.area())));
      als.clear();
      dim.clear();
      for (std::size_t i = 0; i < n_als; ++i) {
        const double x = rng.uniform(b.xmin, b.xmax), y = rng.uniform(b.ymin, b.ymax);
        als.emplace_back(x, y, truth.surface(x, y) + rng.normal(0.0, s.als_noise));
      }
      for (std::size_t i = 0; i < n_dim; ++i) {
        const double x = rng.uniform(b.xmin, b.xmax), y = rng.uniform(b.ymin, b.ymax);
        dim.emplace_back(x, y, truth.dim_surface(x, y) + rng.normal(0.0, s.dim_noise));
      }
      const OlsPlane pl = ols_fit(als);
      double mu = 0.0;
      for (const auto& p : dim) mu += p.z() - pl.at(p.x(), p.y());
      mu /= static_cast<double>(dim.size());
      double ss = 0.0;
      for (const auto& p : dim) {
        const double d = p.z() - pl.at(p.x(), p.y()) - mu;
        ss += d * d;
      }
      var_i.push_back(ss / static_cast<double>(dim.size() - 1));
    }
  double mv = 0.0;
  for (double v : var_i) mv += v;
  mv /= static_cast<double>(var_i.size());
  double sv = 0.0;
  for (double v : var_i) sv += (v - mv) * (v - mv);
  const double se_mv = var_i.size() > 1 ? std::sqrt(sv / static_cast<double>(var_i.size() - 1) / static_cast<double>(var_i.size())) : 0.0;
  r.a_std = std::sqrt(mv);
  r.a_std_tol = r.a_std > 0.0 ? 3.0 * se_mv / (2.0 * r.a_std) : 0.0;
  return r;
}

}  // namespace patchqc::synth
