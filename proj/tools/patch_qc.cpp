// patch-qc: vertical accuracy of DIM point clouds and DSMs against ALS
// using automatically extracted planar ground patches.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/core.h>
#include "CLI11.hpp"
#include "json.hpp"

#include "patchqc/core/io.hpp"
#include "patchqc/error.hpp"
#include "patchqc/measures.hpp"
#include "patchqc/pipeline.hpp"
#include "patchqc/report.hpp"
#include "patchqc/synth.hpp"

namespace fs = std::filesystem;
using namespace patchqc;
using pipeline::PipelineConfig;

namespace {

struct Globals {
  std::string config;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

PipelineConfig base_config(const Globals& g) {
  PipelineConfig c = g.config.empty() ? PipelineConfig{} : pipeline::load_config(g.config);
  if (!g.out_dir.empty()) c.out_dir = g.out_dir;
  return c;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::ConfigError, what);
}

std::optional<Raster> load_ortho(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return io::read_raster(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patch-qc: patch-based quality control of dense matching point clouds and DSMs"};
  app.name("patch-qc");
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Pipeline configuration file (INI)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1u, 256u));
  app.add_option("--out-dir", g.out_dir, "Output directory");

  // ground
  auto* ground = app.add_subcommand("ground", "Classify ALS points into ground / non-ground");
  std::string g_in, g_out;
  std::optional<double> g_cell, g_dist, g_angle;
  bool g_labels = false;
  ground->add_option("--in", g_in, "Input ALS cloud")->required();
  ground->add_option("--out", g_out, "Output XYZ with class column")->required();
  ground->add_option("--cell", g_cell, "Seed cell size, m");
  ground->add_option("--max-dist", g_dist, "Max vertical distance to the TIN facet, m");
  ground->add_option("--max-angle", g_angle, "Max facet angle, degrees");
  ground->add_flag("--use-labels", g_labels, "Trust the class column of the input");

  // segment
  auto* segment = app.add_subcommand("segment", "Planar segmentation of ground points");
  std::string s_in, s_out, s_thresholds;
  std::optional<double> s_radius, s_dist;
  segment->add_option("--in", s_in, "Ground-labelled ALS cloud")->required();
  segment->add_option("--out", s_out, "Output XYZ with segment column")->required();
  segment->add_option("--radius", s_radius, "Surface growing radius, m");
  segment->add_option("--max-dist", s_dist, "Max point-to-plane distance, m");
  segment->add_option("--thresholds", s_thresholds, "Config file whose [segment_screen] section is used");

  // patches
  auto* patches = app.add_subcommand("patches", "Carve square patches from segments");
  std::string p_in, p_out;
  std::optional<double> p_cell;
  std::optional<std::size_t> p_cells, p_stride;
  patches->add_option("--in", p_in, "Segmented ALS cloud")->required();
  patches->add_option("--out", p_out, "patches.json")->required();
  patches->add_option("--cell", p_cell, "Occupancy cell, m");
  patches->add_option("--patch-cells", p_cells, "Patch side in cells");
  patches->add_option("--stride", p_stride, "Scan stride in cells");

  // screen
  auto* screen = app.add_subcommand("screen", "Apply patch screening rules");
  std::string sc_patches, sc_dim, sc_ortho, sc_out;
  screen->add_option("--patches", sc_patches, "patches.json")->required();
  screen->add_option("--dim", sc_dim, "DIM cloud (.xyz/.las) or DSM (.bin)")->required();
  screen->add_option("--ortho", sc_ortho, "RGB orthoimage (.bin)");
  screen->add_option("--out", sc_out, "patches_valid.json")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Quality measures over the valid patches");
  std::string e_patches, e_dim, e_out, e_csv;
  evaluate->add_option("--patches", e_patches, "patches_valid.json")->required();
  evaluate->add_option("--dim", e_dim, "DIM cloud (.xyz/.las) or DSM (.bin)")->required();
  evaluate->add_option("--out", e_out, "report.json")->required();
  evaluate->add_option("--per-patch", e_csv, "Per-patch CSV")->required();

  // report
  auto* rep = app.add_subcommand("report", "Histograms and patch maps");
  std::string r_report, r_csv, r_mode;
  std::optional<double> r_bin;
  rep->add_option("--report", r_report, "report.json")->required();
  rep->add_option("--per-patch", r_csv, "Per-patch CSV")->required();
  rep->add_option("--hist-bin", r_bin, "Bin width of the mean-deviation histogram, m");
  rep->add_option("--map-mode", r_mode, "abs or signed");

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a synthetic ALS/DIM scene");
  std::string y_spec;
  std::uint64_t y_seed = 0;
  syn->add_option("--spec", y_spec, "Scene spec JSON")->required();
  auto* seed_opt = syn->add_option("--seed", y_seed, "Override the spec seed");

  // verify-targets
  auto* vt = app.add_subcommand("verify-targets", "Cross-verify surveyed targets against ALS");
  std::string v_targets, v_als, v_out;
  std::optional<double> v_radius;
  vt->add_option("--targets", v_targets, "Target CSV (id,x,y,z)")->required();
  vt->add_option("--als", v_als, "ALS cloud")->required();
  vt->add_option("--radius", v_radius, "Neighbourhood radius, m");
  vt->add_option("--out", v_out, "targets.json")->required();

  // run
  auto* runc = app.add_subcommand("run", "Run the whole pipeline from one config");

  // compare
  auto* cmp = app.add_subcommand("compare", "Compare evaluations over one patch set");
  std::vector<std::string> c_reports, c_names;
  cmp->add_option("--report", c_reports, "report.json of each run (repeat)")->required();
  cmp->add_option("--name", c_names, "Run names, in --report order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (ground->parsed()) {
      PipelineConfig c = base_config(g);
      if (g_cell) c.ground.initial_cell = *g_cell;
      if (g_dist) c.ground.max_dist = *g_dist;
      if (g_angle) c.ground.max_angle = *g_angle;
      if (g_labels) c.use_labels = true;
      c.validate();
      io::write_xyz(g_out, pipeline::stage_ground(io::read_point_cloud(g_in), c));
    } else if (segment->parsed()) {
      PipelineConfig c = base_config(g);
      if (!s_thresholds.empty()) c.segment_screen = pipeline::load_config(s_thresholds).segment_screen;
      if (s_radius) c.segment.grow_radius = *s_radius;
      if (s_dist) c.segment.max_plane_dist = *s_dist;
      c.validate();
      io::write_xyz(s_out, pipeline::stage_segment(io::read_point_cloud(s_in), c, g.threads));
    } else if (patches->parsed()) {
      PipelineConfig c = base_config(g);
      if (p_cell) c.patching.cell = *p_cell;
      if (p_cells) c.patching.patch_cells = *p_cells;
      if (p_stride) c.patching.stride = *p_stride;
      c.validate();
      io::write_text(p_out, pipeline::to_json(pipeline::stage_patches(io::read_point_cloud(p_in), c, g.threads)));
    } else if (screen->parsed()) {
      PipelineConfig c = base_config(g);
      c.validate();
      if ((c.screen.use_shadow || c.screen.use_vegetation) && sc_ortho.empty())
        throw Error(ErrorKind::MissingOrtho, "--ortho is required while shadow or vegetation screening is enabled");
      auto set = pipeline::patch_set_from_json(io::read_text(sc_patches));
      const auto dim = pipeline::load_dim(sc_dim);
      const auto ortho = load_ortho(sc_ortho);
      pipeline::stage_screen(set, dim, ortho ? &*ortho : nullptr, c, g.threads);
      io::write_text(sc_out, pipeline::to_json(set));
    } else if (evaluate->parsed()) {
      const auto set = pipeline::patch_set_from_json(io::read_text(e_patches));
      auto ev = pipeline::stage_evaluate(set, pipeline::load_dim(e_dim), g.threads);
      const fs::path out(e_out), csv(e_csv);
      ev.summary.per_patch_csv = fs::relative(fs::absolute(csv), fs::absolute(out).parent_path()).generic_string();
      io::write_text(out, report::to_json(ev.summary));
      io::write_text(csv, report::to_csv(ev.rows));
      if (ev.summary.error) std::cerr << ev.summary.error.value() << "\n";
    } else if (rep->parsed()) {
      PipelineConfig c = base_config(g);
      if (r_bin) c.report.hist_bin_mu = *r_bin;
      if (!r_mode.empty()) c.report.map_mode = report::map_mode_from_string(r_mode);
      c.validate();
      require(!g.out_dir.empty(), "--out-dir is required");
      auto summary = report::summary_from_json(io::read_text(r_report));
      const auto rows = report::rows_from_csv(io::read_text(r_csv));
      const fs::path out(g.out_dir);
      summary.per_patch_csv = fs::relative(fs::absolute(r_csv), fs::absolute(out)).generic_string();
      report::export_report(out, summary, rows, c.report);
    } else if (syn->parsed()) {
      require(!g.out_dir.empty(), "--out-dir is required");
      auto spec = synth::spec_from_json(io::read_text(y_spec));
      if (seed_opt->count() > 0) spec.seed = y_seed;
      synth::write_scene(g.out_dir, synth::generate_scene(spec, g.threads));
    } else if (vt->parsed()) {
      PipelineConfig c = base_config(g);
      if (v_radius) c.rt_radius = *v_radius;
      c.validate();
      const auto targets = synth::read_targets_csv(v_targets);
      const auto v = measures::crossverify_targets(targets, io::read_point_cloud(v_als), c.rt_radius);
      io::write_text(v_out, pipeline::verification_json(v));
      fmt::print("mu = {:.4f} m, sigma = {:.4f} m, accepted {} of {}\n", v.mu, v.sigma, v.accepted, v.targets.size());
    } else if (runc->parsed()) {
      require(!g.config.empty(), "--config is required");
      pipeline::run(base_config(g), g.threads);
    } else if (cmp->parsed()) {
      require(c_names.empty() || c_names.size() == c_reports.size(), "--name must be given once per --report");
      std::vector<pipeline::RunInput> runs;
      for (std::size_t k = 0; k < c_reports.size(); ++k) {
        const fs::path rp(c_reports[k]);
        pipeline::RunInput r;
        r.summary = report::summary_from_json(io::read_text(rp));
        r.name = c_names.empty() ? rp.parent_path().filename().string() + "/" + rp.stem().string() : c_names[k];
        r.rows = report::rows_from_csv(io::read_text(rp.parent_path() / r.summary.per_patch_csv));
        runs.push_back(std::move(r));
      }
      const auto cmp_result = pipeline::compare(std::move(runs));
      const std::string table = pipeline::comparison_table(cmp_result);
      fmt::print("{}", table);
      if (!g.out_dir.empty()) {
        io::write_text(fs::path(g.out_dir) / "comparison.txt", table);
        io::write_text(fs::path(g.out_dir) / "paired_differences.csv", pipeline::comparison_csv(cmp_result));
      }
    }
  } catch (const Error& e) {
    nlohmann::ordered_json err = {{"error", to_string(e.kind())}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return pipeline::exit_code(e.kind());
  } catch (const std::exception& e) {
    nlohmann::ordered_json err = {{"error", "Internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 4;
  }
  return 0;
}
