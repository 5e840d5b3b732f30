#include "patchqc/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/core.h>
#include "json.hpp"

#include "patchqc/core/io.hpp"
#include "patchqc/error.hpp"
#include "patchqc/measures.hpp"
#include "patchqc/synth.hpp"

namespace patchqc::pipeline {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::ordered_json;
using patching::Patch;
using patching::PatchStatus;
using patching::RejectReason;

// ---------------------------------------------------------------- config

namespace {

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::ConfigError, fmt::format("{}: {}", key, what));
}

double parse_double(const std::string& key, const std::string& v) {
  double out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) config_error(key, "expected a number, got '" + v + "'");
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t out{};
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size())
    config_error(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  config_error(key, "expected true or false, got '" + v + "'");
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const std::map<std::string, std::map<std::string, Setter>> table = [] {
    std::map<std::string, std::map<std::string, Setter>> t;
    const auto path_setter = [](fs::path PipelineConfig::*member) {
      return Setter([member](PipelineConfig& c, const std::string&, const std::string& v) { c.*member = v; });
    };
    t["pipeline"] = {
        {"schema_version",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
           c.schema_version = static_cast<int>(parse_count(k, v));
         }},
        {"als", path_setter(&PipelineConfig::als)},
        {"dim", path_setter(&PipelineConfig::dim)},
        {"dsm", path_setter(&PipelineConfig::dsm)},
        {"ortho", path_setter(&PipelineConfig::ortho)},
        {"targets", path_setter(&PipelineConfig::targets)},
        {"out_dir", path_setter(&PipelineConfig::out_dir)},
        {"use_labels", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.use_labels = parse_bool(k, v); }},
    };
    t["ground"] = {
        {"cell", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ground.initial_cell = parse_double(k, v); }},
        {"max_angle", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ground.max_angle = parse_double(k, v); }},
        {"max_dist", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ground.max_dist = parse_double(k, v); }},
        {"snap_dist", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ground.snap_dist = parse_double(k, v); }},
        {"iterations", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ground.iterations = parse_count(k, v); }},
    };
    t["segment"] = {
        {"radius", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment.grow_radius = parse_double(k, v); }},
        {"max_dist", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment.max_plane_dist = parse_double(k, v); }},
        {"hough_slope_step", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment.hough_slope_step = parse_double(k, v); }},
        {"hough_max_slope", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment.hough_max_slope = parse_double(k, v); }},
        {"hough_offset_step", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment.hough_offset_step = parse_double(k, v); }},
        {"min_seed_support", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment.min_seed_support = parse_count(k, v); }},
        {"knn", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment.knn = parse_count(k, v); }},
    };
    t["segment_screen"] = {
        {"min_size", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment_screen.min_size = parse_count(k, v); }},
        {"max_linearity", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment_screen.max_linearity = parse_double(k, v); }},
        {"max_slope", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment_screen.max_slope = parse_double(k, v); }},
        {"max_avg_angle", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment_screen.max_avg_angle = parse_double(k, v); }},
        {"max_rpf", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.segment_screen.max_rpf = parse_double(k, v); }},
    };
    t["patching"] = {
        {"cell", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.patching.cell = parse_double(k, v); }},
        {"patch_cells", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.patching.patch_cells = parse_count(k, v); }},
        {"stride", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.patching.stride = parse_count(k, v); }},
        {"min_als_points", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.patching.min_als_points = parse_count(k, v); }},
    };
    t["screen"] = {
        {"min_dim_points",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
           if (v == "auto") c.screen.min_dim_points.reset();
           else c.screen.min_dim_points = parse_count(k, v);
         }},
        {"auto_dim_factor", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.screen.auto_dim_factor = parse_double(k, v); }},
        {"max_abs_mean_dev",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
           if (v == "auto") c.screen.max_abs_mean_dev.reset();
           else c.screen.max_abs_mean_dev = parse_double(k, v);
         }},
        {"mean_dev_quantile", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.screen.mean_dev_quantile = parse_double(k, v); }},
        {"mean_dev_tolerance", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.screen.mean_dev_tolerance = parse_double(k, v); }},
        {"negi_threshold", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.screen.negi_threshold = parse_double(k, v); }},
        {"shadow_method",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
           if (v == "otsu") c.screen.shadow_method = screening::ShadowMethod::Otsu;
           else if (v == "fixed") c.screen.shadow_method = screening::ShadowMethod::Fixed;
           else config_error(k, "expected otsu or fixed, got '" + v + "'");
         }},
        {"shadow_threshold", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.screen.shadow_fixed_threshold = parse_double(k, v); }},
        {"use_shadow", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.screen.use_shadow = parse_bool(k, v); }},
        {"use_vegetation", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.screen.use_vegetation = parse_bool(k, v); }},
    };
    t["measures"] = {
        {"rt_radius", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.rt_radius = parse_double(k, v); }},
    };
    t["report"] = {
        {"hist_bin_mu", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.report.hist_bin_mu = parse_double(k, v); }},
        {"hist_bin_sigma", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.report.hist_bin_sigma = parse_double(k, v); }},
        {"map_mode", [](PipelineConfig& c, const std::string&, const std::string& v) { c.report.map_mode = report::map_mode_from_string(v); }},
    };
    return t;
  }();
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  if (schema_version != kSchemaVersion)
    throw Error(ErrorKind::ConfigError, fmt::format("pipeline.schema_version: expected {}, got {}", kSchemaVersion, schema_version));
  ground.validate();
  segment.validate();
  segment_screen.validate();
  patching.validate();
  screen.validate();
  if (!(rt_radius > 0.0)) throw Error(ErrorKind::ConfigError, "measures.rt_radius must be > 0");
  report.validate();
}

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed config: ") + e.message());
  }
  PipelineConfig c;
  bool have_version = false;
  const auto& table = setters();
  for (const auto& [section, body] : tree) {
    const auto sec = table.find(section);
    if (sec == table.end()) {
      if (body.empty()) throw Error(ErrorKind::ConfigError, fmt::format("key '{}' outside a section", section));
      throw Error(ErrorKind::ConfigError, fmt::format("unknown section [{}]", section));
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const auto set = sec->second.find(key);
      if (set == sec->second.end()) throw Error(ErrorKind::ConfigError, fmt::format("unknown key '{}'", full));
      set->second(c, full, node.get_value<std::string>());
      if (full == "pipeline.schema_version") have_version = true;
    }
  }
  if (!have_version) throw Error(ErrorKind::ConfigError, "pipeline.schema_version is required");
  for (fs::path* p : {&c.als, &c.dim, &c.dsm, &c.ortho, &c.targets, &c.out_dir})
    if (!p->empty() && p->is_relative() && !base_dir.empty()) *p = base_dir / *p;
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  return parse_config(text, path.parent_path());
}

// ---------------------------------------------------------------- patch sets

std::vector<std::int64_t> PatchSet::valid_ids() const {
  std::vector<std::int64_t> ids;
  for (const auto& p : patches)
    if (p.status == PatchStatus::Valid) ids.push_back(p.id);
  return ids;
}

std::string to_json(const PatchSet& set) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["cell"] = set.cell;
  j["patch_size"] = set.patch_size;
  j["screened"] = set.screened;
  if (set.screened) {
    j["thresholds"] = {{"min_dim_points", set.thresholds.min_dim_points},
                       {"max_abs_mean_dev", set.thresholds.max_abs_mean_dev}};
    ordered_json t = ordered_json::object();
    for (const auto& [k, v] : set.tallies) t[k] = v;
    j["tallies"] = t;
  }
  ordered_json arr = ordered_json::array();
  for (const auto& p : set.patches) {
    ordered_json o;
    o["id"] = p.id;
    o["bounds"] = {p.bounds.xmin, p.bounds.ymin, p.bounds.xmax, p.bounds.ymax};
    o["segment_id"] = p.segment_id;
    o["als_count"] = p.als_count;
    o["plane"] = {{"normal", {p.als_plane.normal.x(), p.als_plane.normal.y(), p.als_plane.normal.z()}},
                  {"d", p.als_plane.d},
                  {"rpf", p.als_plane.rpf},
                  {"support", p.als_plane.support}};
    if (set.screened) {
      o["status"] = p.status == PatchStatus::Valid ? "valid" : "rejected";
      o["reason"] = patching::to_string(p.reason);
      o["shaded"] = p.shaded;
      o["vegetation"] = p.vegetation;
    }
    arr.push_back(std::move(o));
  }
  j["patches"] = std::move(arr);
  return j.dump(1) + "\n";
}

PatchSet patch_set_from_json(const std::string& text) {
  PatchSet set;
  try {
    const auto j = ordered_json::parse(text);
    if (j.value("schema_version", 0) != kSchemaVersion) throw Error(ErrorKind::DataError, "unsupported patch file version");
    set.cell = j.at("cell").get<double>();
    set.patch_size = j.at("patch_size").get<double>();
    set.screened = j.value("screened", false);
    if (set.screened) {
      set.thresholds.min_dim_points = j.at("thresholds").at("min_dim_points").get<std::size_t>();
      set.thresholds.max_abs_mean_dev = j.at("thresholds").at("max_abs_mean_dev").get<double>();
      for (const auto& [k, v] : j.at("tallies").items()) set.tallies[k] = v.get<std::size_t>();
    }
    for (const auto& o : j.at("patches")) {
      Patch p;
      p.id = o.at("id").get<std::int64_t>();
      const auto& b = o.at("bounds");
      p.bounds = Box2{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
      p.segment_id = o.at("segment_id").get<std::int32_t>();
      p.als_count = o.at("als_count").get<std::size_t>();
      const auto& pl = o.at("plane");
      p.als_plane.normal = Point3(pl.at("normal").at(0).get<double>(), pl.at("normal").at(1).get<double>(),
                                  pl.at("normal").at(2).get<double>());
      p.als_plane.d = pl.at("d").get<double>();
      p.als_plane.rpf = pl.at("rpf").get<double>();
      p.als_plane.support = pl.at("support").get<std::size_t>();
      if (set.screened) {
        const std::string status = o.at("status").get<std::string>();
        if (status != "valid" && status != "rejected") throw Error(ErrorKind::DataError, "bad patch status '" + status + "'");
        p.status = status == "valid" ? PatchStatus::Valid : PatchStatus::Rejected;
        p.reason = patching::reject_reason_from_string(o.at("reason").get<std::string>());
        p.shaded = o.value("shaded", false);
        p.vegetation = o.value("vegetation", false);
      }
      set.patches.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataError, std::string("malformed patch file: ") + e.what());
  }
  return set;
}

// ---------------------------------------------------------------- stages

measures::DimSource DimData::source() const {
  if (cloud) return &*cloud;
  if (dsm) return &*dsm;
  throw Error(ErrorKind::ConfigError, "no DIM source loaded");
}

DimData load_dim(const fs::path& path) {
  DimData d;
  d.name = path.filename().string();
  if (path.extension() == ".bin") d.dsm = io::read_raster(path);
  else d.cloud = io::read_point_cloud(path);
  return d;
}

PointCloud stage_ground(const PointCloud& als, const PipelineConfig& config) {
  return config.use_labels ? ground::accept_ground_labels(als) : ground::classify_ground(als, config.ground);
}

PointCloud stage_segment(const PointCloud& ground, const PipelineConfig& config, unsigned threads) {
  return segmentation::segment_cloud(ground, config.segment, config.segment_screen, threads);
}

PatchSet stage_patches(const PointCloud& segmented, const PipelineConfig& config, unsigned threads) {
  PatchSet set;
  set.cell = config.patching.cell;
  set.patch_size = config.patching.patch_size();
  set.patches = patching::make_patches(segmented, config.patching, threads);
  for (auto& p : set.patches) p.als_points.clear();
  return set;
}

void stage_screen(PatchSet& set, const DimData& dim, const Raster* ortho, const PipelineConfig& config,
                  unsigned threads) {
  const auto result = measures::evaluate(set.patches, dim.source(), config.screen, ortho, threads);
  for (auto& p : set.patches) p.dim_points.clear();
  set.screened = true;
  set.thresholds = result.screen.thresholds;
  set.tallies = result.screen.tallies;
}

Evaluation stage_evaluate(const PatchSet& set, const DimData& dim, unsigned threads) {
  if (!set.screened) throw Error(ErrorKind::DataError, "patch set has not been screened");
  std::vector<Patch> patches = set.patches;
  const auto ids = set.valid_ids();
  Evaluation ev;
  ev.summary.source = dim.name;
  ev.summary.patch_size = set.patch_size;
  ev.summary.min_dim_points = set.thresholds.min_dim_points;
  ev.summary.max_abs_mean_dev = set.thresholds.max_abs_mean_dev;
  ev.summary.tallies = set.tallies;
  ev.summary.per_patch_csv = "patches_measured.csv";

  const auto result = measures::evaluate_fixed(patches, dim.source(), ids, threads);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Patch& p = patches[i];
    report::PatchRow row;
    row.id = p.id;
    row.x_center = p.bounds.center_x();
    row.y_center = p.bounds.center_y();
    row.n = p.dim_points.size();
    if (result.measures[i]) {
      row.mu = result.measures[i]->mu;
      row.sigma = result.measures[i]->sigma;
    }
    row.status = p.status;
    row.reason = p.reason;
    ev.rows.push_back(row);
  }
  std::sort(ev.rows.begin(), ev.rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  if (result.block) {
    ev.summary.m = result.block->m;
    ev.summary.m_md = result.block->m_md;
    ev.summary.std_md = result.block->std_md;
    ev.summary.a_std = result.block->a_std;
  } else {
    ev.summary.m = ids.size();
    ev.summary.error = fmt::format("{}: {} valid patch(es), at least 2 required", to_string(ErrorKind::TooFewPatches),
                                   ids.size());
  }
  return ev;
}

std::vector<fs::path> write_evaluation(const fs::path& out_dir, const Evaluation& eval,
                                       const report::ExportParams& params) {
  auto written = report::export_report(out_dir, eval.summary, eval.rows, params);
  io::write_text(out_dir / eval.summary.per_patch_csv, report::to_csv(eval.rows));
  written.push_back(out_dir / eval.summary.per_patch_csv);
  return written;
}

namespace {

std::string targets_json(const measures::TargetVerification& v) {
  ordered_json j;
  j["mu_all"] = v.mu_all;
  j["sigma_all"] = v.sigma_all;
  j["mu"] = v.mu;
  j["sigma"] = v.sigma;
  j["accepted"] = v.accepted;
  ordered_json arr = ordered_json::array();
  for (const auto& t : v.targets) {
    ordered_json o = {{"id", t.id}, {"x", t.x}, {"y", t.y}, {"z", t.z}, {"neighbours", t.neighbours}};
    if (t.has_residual) o["residual"] = t.residual;
    o["accepted"] = t.accepted;
    arr.push_back(std::move(o));
  }
  j["targets"] = std::move(arr);
  j["insufficient_neighbours"] = v.insufficient;
  return j.dump(2) + "\n";
}

template <typename F>
auto in_stage(const std::string& stage, const fs::path& out_dir, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    ordered_json err = {{"stage", stage}, {"kind", to_string(e.kind())}, {"message", e.what()}};
    try {
      io::write_text(out_dir / "error.json", err.dump(2) + "\n");
    } catch (...) {
    }
    throw Error(e.kind(), fmt::format("{}: {}", stage, e.what()));
  }
}

}  // namespace

std::string verification_json(const measures::TargetVerification& v) { return targets_json(v); }

void run(const PipelineConfig& config, unsigned threads) {
  config.validate();
  if (config.als.empty()) throw Error(ErrorKind::ConfigError, "pipeline.als: path is required");
  if (config.dim.empty() && config.dsm.empty())
    throw Error(ErrorKind::ConfigError, "pipeline.dim: a DIM point cloud (or pipeline.dsm) is required");
  if ((config.screen.use_shadow || config.screen.use_vegetation) && config.ortho.empty())
    throw Error(ErrorKind::ConfigError, "pipeline.ortho: required while shadow or vegetation screening is enabled");
  for (const auto& [key, p] : {std::pair{"pipeline.als", config.als}, std::pair{"pipeline.dim", config.dim},
                               std::pair{"pipeline.dsm", config.dsm}, std::pair{"pipeline.ortho", config.ortho},
                               std::pair{"pipeline.targets", config.targets}})
    if (!p.empty() && !fs::exists(p))
      throw Error(ErrorKind::ConfigError, fmt::format("{}: file '{}' does not exist", key, p.string()));

  const fs::path& out = config.out_dir;
  fs::create_directories(out);
  fs::remove(out / "error.json");
  std::vector<fs::path> artifacts;

  const PointCloud als = in_stage("load", out, [&] { return io::read_point_cloud(config.als); });
  const PointCloud ground = in_stage("ground", out, [&] { return stage_ground(als, config); });
  io::write_xyz(out / "als_ground.xyz", ground);
  artifacts.push_back(out / "als_ground.xyz");

  const PointCloud segmented = in_stage("segment", out, [&] { return stage_segment(ground, config, threads); });
  io::write_xyz(out / "als_seg.xyz", segmented);
  artifacts.push_back(out / "als_seg.xyz");

  PatchSet set = in_stage("patches", out, [&] { return stage_patches(segmented, config, threads); });
  io::write_text(out / "patches.json", to_json(set));
  artifacts.push_back(out / "patches.json");

  const DimData dim = in_stage("load", out, [&] { return load_dim(config.dim.empty() ? config.dsm : config.dim); });
  std::optional<Raster> ortho;
  if (!config.ortho.empty()) ortho = in_stage("load", out, [&] { return io::read_raster(config.ortho); });
  if (dim.cloud) io::require_same_crs(als, *dim.cloud);

  in_stage("screen", out, [&] { stage_screen(set, dim, ortho ? &*ortho : nullptr, config, threads); });
  io::write_text(out / "patches_valid.json", to_json(set));
  artifacts.push_back(out / "patches_valid.json");

  const Evaluation ev = in_stage("evaluate", out, [&] { return stage_evaluate(set, dim, threads); });
  for (auto& p : in_stage("report", out, [&] { return write_evaluation(out, ev, config.report); })) artifacts.push_back(p);

  if (!config.dim.empty() && !config.dsm.empty()) {
    const DimData dsm = in_stage("load", out, [&] { return load_dim(config.dsm); });
    const Evaluation ev_dsm = in_stage("evaluate", out, [&] { return stage_evaluate(set, dsm, threads); });
    for (auto& p : in_stage("report", out, [&] { return write_evaluation(out / "dsm", ev_dsm, config.report); }))
      artifacts.push_back(p);
  }

  if (!config.targets.empty()) {
    const auto targets = in_stage("verify-targets", out, [&] { return synth::read_targets_csv(config.targets); });
    const auto v = in_stage("verify-targets", out, [&] { return measures::crossverify_targets(targets, als, config.rt_radius); });
    io::write_text(out / "targets.json", targets_json(v));
    artifacts.push_back(out / "targets.json");
  }

  ordered_json manifest;
  manifest["schema_version"] = kSchemaVersion;
  ordered_json list = ordered_json::array();
  std::sort(artifacts.begin(), artifacts.end());
  for (const auto& p : artifacts)
    list.push_back({{"path", fs::relative(p, out).generic_string()}, {"fnv1a64", io::content_hash(io::read_text(p))}});
  manifest["artifacts"] = std::move(list);
  io::write_text(out / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------- compare

Comparison compare(std::vector<RunInput> runs) {
  if (runs.size() < 2) throw Error(ErrorKind::ConfigError, "compare needs at least 2 runs");
  const auto valid_ids = [](const RunInput& r) {
    std::vector<std::int64_t> ids;
    for (const auto& row : r.rows)
      if (row.status == PatchStatus::Valid) ids.push_back(row.id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  Comparison c;
  c.patch_ids = valid_ids(runs.front());
  for (std::size_t k = 1; k < runs.size(); ++k)
    if (valid_ids(runs[k]) != c.patch_ids)
      throw Error(ErrorKind::PatchSetMismatch,
                  fmt::format("runs '{}' and '{}' used different patch ids", runs.front().name, runs[k].name));
  std::vector<std::map<std::int64_t, double>> mu(runs.size());
  for (std::size_t k = 0; k < runs.size(); ++k)
    for (const auto& row : runs[k].rows)
      if (row.status == PatchStatus::Valid) mu[k][row.id] = row.mu;
  for (std::int64_t id : c.patch_ids) {
    PairedDifference d;
    d.id = id;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      d.mu.push_back(mu[k].at(id));
      d.diff.push_back(mu[k].at(id) - mu[0].at(id));
    }
    c.differences.push_back(std::move(d));
  }
  c.runs = std::move(runs);
  return c;
}

std::string comparison_table(const Comparison& c) {
  std::size_t w = 4;
  for (const auto& r : c.runs) w = std::max(w, r.name.size());
  std::string out = fmt::format("{:<{}}  {:>6}  {}\n", "run", w, "m", "M_MD; STD_MD; A_STD");
  for (const auto& r : c.runs) {
    const auto& s = r.summary;
    out += fmt::format("{:<{}}  {:>6}  {}\n", r.name, w, s.m,
                       s.error ? "n/a" : report::format_triplet(s.m_md, s.std_md, s.a_std));
  }
  return out;
}

std::string comparison_csv(const Comparison& c) {
  std::string out = "id";
  for (const auto& r : c.runs) out += ",mu_" + r.name;
  for (std::size_t k = 1; k < c.runs.size(); ++k) out += ",diff_" + c.runs[k].name;
  out += "\n";
  for (const auto& d : c.differences) {
    out += std::to_string(d.id);
    for (double v : d.mu) out += "," + io::format_double(v);
    for (std::size_t k = 1; k < d.diff.size(); ++k) out += "," + io::format_double(d.diff[k]);
    out += "\n";
  }
  return out;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidSpec:
    case ErrorKind::MissingOrtho:
      return 2;
    case ErrorKind::DegenerateGeometry:
    case ErrorKind::EmptyInput:
    case ErrorKind::MissingLabels:
    case ErrorKind::NoSeeds:
    case ErrorKind::DivisionByZero:
    case ErrorKind::NearVerticalPlane:
    case ErrorKind::TooFewPoints:
    case ErrorKind::TooFewPatches:
    case ErrorKind::TooFewValues:
    case ErrorKind::InsufficientNeighbors:
    case ErrorKind::PatchSetMismatch:
    case ErrorKind::DataError:
    case ErrorKind::IoError:
      return 3;
  }
  return 4;
}

}  // namespace patchqc::pipeline
