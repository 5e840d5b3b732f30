#include "patchqc/report.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <sstream>

#include <fmt/core.h>
#include "json.hpp"

#include "patchqc/core/io.hpp"
#include "patchqc/core/stats.hpp"
#include "patchqc/error.hpp"

namespace patchqc::report {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using patching::PatchStatus;
using patching::RejectReason;

double Histogram::overlay(double x) const {
  if (!(sigma > 0.0)) return 0.0;
  const double z = (x - mu) / sigma;
  return static_cast<double>(total) * bin_width * std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * kPi));
}

Histogram build_histogram(std::span<const double> values, double bin_width) {
  if (values.size() < 2) throw Error(ErrorKind::TooFewValues, "a histogram needs at least 2 values");
  if (!(bin_width > 0.0)) throw Error(ErrorKind::ConfigError, "histogram bin width must be > 0");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  Histogram h;
  h.bin_width = bin_width;
  const double lo = std::floor(*mn / bin_width) * bin_width;
  const auto index = [&](double v) {
    return static_cast<std::size_t>(std::max(0.0, std::floor((v - lo) / bin_width)));
  };
  const std::size_t bins = index(*mx) + 1;
  h.counts.assign(bins, 0);
  for (double v : values) ++h.counts[std::min(bins - 1, index(v))];
  h.bin_edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) h.bin_edges[k] = lo + static_cast<double>(k) * bin_width;
  h.total = values.size();
  h.mu = stats::mean(values);
  h.sigma = stats::sample_stddev(values);
  h.q01 = stats::quantile(values, 0.01);
  h.q99 = stats::quantile(values, 0.99);
  return h;
}

MapMode map_mode_from_string(const std::string& s) {
  if (s == "abs") return MapMode::Abs;
  if (s == "signed") return MapMode::Signed;
  throw Error(ErrorKind::ConfigError, "map mode must be 'abs' or 'signed', got '" + s + "'");
}

const char* to_string(MapMode mode) { return mode == MapMode::Abs ? "abs" : "signed"; }

namespace {

std::string hex_color(int r, int g, int b) { return fmt::format("#{:02x}{:02x}{:02x}", r, g, b); }

// Blue at 0, red at 1.
std::string ramp_color(double t) {
  const int r = static_cast<int>(std::lround(255.0 * t));
  return hex_color(r, 0, 255 - r);
}

}  // namespace

PatchMap build_patch_map(std::span<const PatchRow> rows, double patch_size, MapMode mode) {
  PatchMap map;
  map.mode = mode;
  std::vector<double> abs_mu;
  for (const auto& r : rows)
    if (r.status == PatchStatus::Valid) abs_mu.push_back(std::abs(r.mu));
  if (!abs_mu.empty()) map.scale_max = stats::quantile(abs_mu, 0.99);

  const double half = 0.5 * patch_size;
  for (const auto& r : rows) {
    if (r.status != PatchStatus::Valid) continue;
    MapEntry e;
    e.id = r.id;
    e.bounds = Box2{r.x_center - half, r.y_center - half, r.x_center + half, r.y_center + half};
    e.value = r.mu;
    if (mode == MapMode::Abs) {
      e.ramp = map.scale_max > 0.0 ? std::min(1.0, std::abs(r.mu) / map.scale_max) : 0.0;
      e.color_class = std::min(9, static_cast<int>(std::floor(e.ramp * 10.0)));
      e.color = ramp_color(e.ramp);
    } else {
      e.ramp = r.mu > 0.0 ? 1.0 : (r.mu < 0.0 ? 0.0 : 0.5);
      e.color_class = r.mu > 0.0 ? 1 : (r.mu < 0.0 ? -1 : 0);
      e.color = e.color_class > 0 ? hex_color(0, 0, 255) : (e.color_class < 0 ? hex_color(255, 0, 0) : hex_color(255, 255, 255));
    }
    map.entries.push_back(std::move(e));
  }
  std::sort(map.entries.begin(), map.entries.end(), [](const MapEntry& a, const MapEntry& b) { return a.id < b.id; });
  return map;
}

std::string to_json(const ReportSummary& s) {
  ordered_json j;
  j["schema_version"] = 1;
  j["source"] = s.source;
  j["m"] = s.m;
  if (s.error) {
    j["error"] = *s.error;
  } else {
    j["M_MD"] = s.m_md;
    j["STD_MD"] = s.std_md;
    j["A_STD"] = s.a_std;
    j["measures"] = format_triplet(s.m_md, s.std_md, s.a_std);
  }
  j["patch_size"] = s.patch_size;
  ordered_json th = ordered_json::object();
  if (s.min_dim_points) th["min_dim_points"] = *s.min_dim_points;
  if (s.max_abs_mean_dev) th["max_abs_mean_dev"] = *s.max_abs_mean_dev;
  j["thresholds"] = th;
  ordered_json tallies = ordered_json::object();
  for (const auto& [k, v] : s.tallies) tallies[k] = v;
  j["rejections"] = tallies;
  j["per_patch_csv"] = s.per_patch_csv;
  return j.dump(2) + "\n";
}

ReportSummary summary_from_json(const std::string& text) {
  ReportSummary s;
  try {
    const auto j = ordered_json::parse(text);
    s.source = j.value("source", "");
    s.m = j.at("m").get<std::size_t>();
    if (j.contains("error")) {
      s.error = j.at("error").get<std::string>();
    } else {
      s.m_md = j.at("M_MD").get<double>();
      s.std_md = j.at("STD_MD").get<double>();
      s.a_std = j.at("A_STD").get<double>();
    }
    s.patch_size = j.at("patch_size").get<double>();
    const auto& th = j.at("thresholds");
    if (th.contains("min_dim_points")) s.min_dim_points = th.at("min_dim_points").get<std::size_t>();
    if (th.contains("max_abs_mean_dev")) s.max_abs_mean_dev = th.at("max_abs_mean_dev").get<double>();
    for (const auto& [k, v] : j.at("rejections").items()) s.tallies[k] = v.get<std::size_t>();
    s.per_patch_csv = j.value("per_patch_csv", "");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataError, std::string("malformed report JSON: ") + e.what());
  }
  return s;
}

std::string format_triplet(double m_md, double std_md, double a_std) {
  return fmt::format("{:.3f}; {:.3f}; {:.3f}", m_md, std_md, a_std);
}

namespace {

constexpr const char* kCsvHeader = "id,x_center,y_center,n_i,mu_i,sigma_i,status,reason";

template <typename T>
T parse_number(std::string_view s, std::size_t line) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw Error(ErrorKind::DataError, fmt::format("per-patch CSV line {}: bad number '{}'", line, s));
  return v;
}

}  // namespace

std::string to_csv(std::span<const PatchRow> rows) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.id, io::format_double(r.x_center), io::format_double(r.y_center),
                       r.n, io::format_double(r.mu), io::format_double(r.sigma),
                       r.status == PatchStatus::Valid ? "valid" : "rejected", patching::to_string(r.reason));
  }
  return out;
}

std::vector<PatchRow> rows_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw Error(ErrorKind::DataError, "per-patch CSV header must be '" + std::string(kCsvHeader) + "'");
  std::vector<PatchRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 8) throw Error(ErrorKind::DataError, fmt::format("per-patch CSV line {}: expected 8 fields", line_no));
    PatchRow r;
    r.id = parse_number<std::int64_t>(f[0], line_no);
    r.x_center = parse_number<double>(f[1], line_no);
    r.y_center = parse_number<double>(f[2], line_no);
    r.n = parse_number<std::size_t>(f[3], line_no);
    r.mu = parse_number<double>(f[4], line_no);
    r.sigma = parse_number<double>(f[5], line_no);
    if (f[6] == "valid") r.status = PatchStatus::Valid;
    else if (f[6] == "rejected") r.status = PatchStatus::Rejected;
    else throw Error(ErrorKind::DataError, fmt::format("per-patch CSV line {}: bad status", line_no));
    r.reason = patching::reject_reason_from_string(f[7]);
    rows.push_back(r);
  }
  return rows;
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_lo,bin_hi,count\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k)
    out += fmt::format("{},{},{}\n", io::format_double(h.bin_edges[k]), io::format_double(h.bin_edges[k + 1]), h.counts[k]);
  return out;
}

std::string histogram_svg(const Histogram& h, const std::string& title) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  const double x0 = std::min(h.bin_edges.front(), h.q01);
  const double x1 = std::max(h.bin_edges.back(), h.q99);
  const double span = x1 > x0 ? x1 - x0 : 1.0;
  double ymax = static_cast<double>(*std::max_element(h.counts.begin(), h.counts.end()));
  if (h.sigma > 0.0) ymax = std::max(ymax, h.overlay(h.mu));
  if (!(ymax > 0.0)) ymax = 1.0;
  const auto sx = [&](double x) { return L + (x - x0) / span * (W - L - R); };
  const auto sy = [&](double y) { return H - B - y / ymax * (H - T - B); };

  std::string s;
  s += fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n",
                   W, H, W, H);
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += fmt::format("<text x=\"{:.1f}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                   W / 2, title);
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    if (h.counts[k] == 0) continue;
    const double xa = sx(h.bin_edges[k]), xb = sx(h.bin_edges[k + 1]);
    const double y = sy(static_cast<double>(h.counts[k]));
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#9bb7d4\" stroke=\"#4a6d8c\" stroke-width=\"0.5\"/>\n",
                     xa, y, std::max(xb - xa, 0.5), H - B - y);
  }
  if (h.sigma > 0.0) {
    s += "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\" points=\"";
    constexpr int kSamples = 200;
    for (int i = 0; i <= kSamples; ++i) {
      const double x = x0 + span * i / kSamples;
      s += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", sx(x), sy(h.overlay(x)));
    }
    s += "\"/>\n";
  } else {
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n",
                     sx(h.mu), sy(0), sy(ymax));
  }
  for (double q : {h.q01, h.q99})
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#555\" stroke-dasharray=\"4 3\"/>\n",
                     sx(q), sy(0), sy(ymax));
  s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", L, H - B, W - R, H - B);
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.3f}</text>\n",
                   sx(h.q01), H - B + 16, h.q01);
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.3f}</text>\n",
                   sx(h.q99), H - B + 16, h.q99);
  s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">mu = {:.4f} m, sigma = {:.4f} m, N = {}</text>\n",
                   W / 2, H - 12, h.mu, h.sigma, h.total);
  s += "</svg>\n";
  return s;
}

std::string patch_map_geojson(const PatchMap& map) {
  ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["mode"] = to_string(map.mode);
  fc["scale_max"] = map.scale_max;
  ordered_json features = ordered_json::array();
  for (const auto& e : map.entries) {
    const Box2& b = e.bounds;
    ordered_json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "Polygon"},
                     {"coordinates",
                      ordered_json::array({ordered_json::array({ordered_json::array({b.xmin, b.ymin}),
                                                                ordered_json::array({b.xmax, b.ymin}),
                                                                ordered_json::array({b.xmax, b.ymax}),
                                                                ordered_json::array({b.xmin, b.ymax}),
                                                                ordered_json::array({b.xmin, b.ymin})})})}};
    f["properties"] = {{"id", e.id}, {"value", e.value}, {"ramp", e.ramp}, {"color_class", e.color_class}, {"color", e.color}};
    features.push_back(std::move(f));
  }
  fc["features"] = std::move(features);
  return fc.dump() + "\n";
}

PatchMap patch_map_from_geojson(const std::string& text) {
  PatchMap map;
  try {
    const auto j = ordered_json::parse(text);
    map.mode = map_mode_from_string(j.value("mode", "abs"));
    map.scale_max = j.value("scale_max", 0.0);
    for (const auto& f : j.at("features")) {
      const auto& ring = f.at("geometry").at("coordinates").at(0);
      MapEntry e;
      double xmin = ring.at(0).at(0).get<double>(), ymin = ring.at(0).at(1).get<double>();
      double xmax = xmin, ymax = ymin;
      for (const auto& c : ring) {
        xmin = std::min(xmin, c.at(0).get<double>());
        xmax = std::max(xmax, c.at(0).get<double>());
        ymin = std::min(ymin, c.at(1).get<double>());
        ymax = std::max(ymax, c.at(1).get<double>());
      }
      e.bounds = Box2{xmin, ymin, xmax, ymax};
      const auto& p = f.at("properties");
      e.id = p.at("id").get<std::int64_t>();
      e.value = p.at("value").get<double>();
      e.ramp = p.at("ramp").get<double>();
      e.color_class = p.at("color_class").get<int>();
      e.color = p.at("color").get<std::string>();
      map.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::DataError, std::string("malformed GeoJSON: ") + e.what());
  }
  return map;
}

std::string patch_map_svg(const PatchMap& map) {
  constexpr double W = 800, M = 20;
  double xmin = 0, ymin = 0, xmax = 1, ymax = 1;
  if (!map.entries.empty()) {
    xmin = ymin = std::numeric_limits<double>::infinity();
    xmax = ymax = -std::numeric_limits<double>::infinity();
    for (const auto& e : map.entries) {
      xmin = std::min(xmin, e.bounds.xmin);
      ymin = std::min(ymin, e.bounds.ymin);
      xmax = std::max(xmax, e.bounds.xmax);
      ymax = std::max(ymax, e.bounds.ymax);
    }
  }
  const double scale = (W - 2 * M) / std::max({xmax - xmin, ymax - ymin, 1e-9});
  const double H = (ymax - ymin) * scale + 2 * M;
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n", W, H,
      W, H);
  s += "<rect width=\"100%\" height=\"100%\" fill=\"#eeeeee\"/>\n";
  for (const auto& e : map.entries) {
    const double x = M + (e.bounds.xmin - xmin) * scale;
    const double y = M + (ymax - e.bounds.ymax) * scale;
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"><title>{}: {:.4f}</title></rect>\n",
                     x, y, e.bounds.width() * scale, e.bounds.height() * scale, e.color, e.id, e.value);
  }
  s += "</svg>\n";
  return s;
}

void ExportParams::validate() const {
  if (!(hist_bin_mu > 0.0)) throw Error(ErrorKind::ConfigError, "report.hist_bin_mu must be > 0");
  if (!(hist_bin_sigma > 0.0)) throw Error(ErrorKind::ConfigError, "report.hist_bin_sigma must be > 0");
}

std::vector<fs::path> export_report(const fs::path& out_dir, const ReportSummary& summary,
                                    std::span<const PatchRow> rows, const ExportParams& params) {
  params.validate();
  std::vector<fs::path> written;
  const auto put = [&](const std::string& name, const std::string& text) {
    io::write_text(out_dir / name, text);
    written.push_back(out_dir / name);
  };
  put("report.json", to_json(summary));
  if (summary.error || summary.m < 2) return written;

  std::vector<double> mu, sigma;
  for (const auto& r : rows)
    if (r.status == PatchStatus::Valid) {
      mu.push_back(r.mu);
      sigma.push_back(r.sigma);
    }
  if (mu.size() < 2) return written;
  const Histogram hm = build_histogram(mu, params.hist_bin_mu);
  const Histogram hs = build_histogram(sigma, params.hist_bin_sigma);
  put("hist_mu.csv", histogram_csv(hm));
  put("hist_mu.svg", histogram_svg(hm, "Mean deviation per patch (m)"));
  put("hist_sigma.csv", histogram_csv(hs));
  put("hist_sigma.svg", histogram_svg(hs, "Standard deviation per patch (m)"));
  const PatchMap map = build_patch_map(rows, summary.patch_size, params.map_mode);
  put("patch_map.geojson", patch_map_geojson(map));
  put("patch_map.svg", patch_map_svg(map));
  return written;
}

}  // namespace patchqc::report
