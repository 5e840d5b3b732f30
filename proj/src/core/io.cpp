#include "patchqc/core/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/core.h>
#include "json.hpp"

#include "patchqc/error.hpp"

namespace patchqc::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, fmt::format("cannot write '{}'", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::IoError, fmt::format("write failed for '{}'", path.string()));
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw Error(ErrorKind::IoError, "number formatting failed");
  return std::string(buf.data(), end);
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool starts_with_key(std::string_view s, std::string_view key, std::string_view& value) {
  if (s.size() < key.size() || s.substr(0, key.size()) != key) return false;
  value = trim(s.substr(key.size()));
  return true;
}

}  // namespace

PointCloud read_xyz(const fs::path& path) {
  const std::string text = read_text(path);
  std::vector<Point3> pts;
  std::vector<PointClass> classes;
  std::vector<std::int32_t> segments;
  std::string crs;
  int columns = -1;
  std::size_t line_no = 0;

  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line = trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string_view body = trim(line.substr(1)), value;
      if (starts_with_key(body, "crs:", value)) {
        crs = std::string(value);
      } else if (starts_with_key(body, "units:", value)) {
        if (value != "m" && value != "meters" && value != "metre" && value != "meter")
          throw Error(ErrorKind::DataError, fmt::format("{}: unsupported units '{}'", path.string(), value));
      }
      continue;
    }
    std::array<double, 5> v{};
    int n = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end && n < 5) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == ',')) ++p;
      if (p >= end) break;
      auto [next, ec] = std::from_chars(p, end, v[n]);
      if (ec != std::errc())
        throw Error(ErrorKind::DataError, fmt::format("{}:{}: malformed number", path.string(), line_no));
      p = next;
      ++n;
    }
    if (n < 3) throw Error(ErrorKind::DataError, fmt::format("{}:{}: expected x y z", path.string(), line_no));
    if (columns < 0) columns = n;
    if (n != columns)
      throw Error(ErrorKind::DataError, fmt::format("{}:{}: inconsistent column count", path.string(), line_no));
    pts.emplace_back(v[0], v[1], v[2]);
    if (n >= 4) classes.push_back(v[3] == 2.0 ? PointClass::Ground : PointClass::NonGround);
    if (n >= 5) segments.push_back(static_cast<std::int32_t>(v[4]));
  }

  std::optional<std::vector<PointClass>> cls;
  std::optional<std::vector<std::int32_t>> seg;
  if (columns >= 4) cls = std::move(classes);
  if (columns >= 5) seg = std::move(segments);
  return PointCloud(std::move(pts), std::move(cls), std::move(seg)).with_crs(crs);
}

void write_xyz(const fs::path& path, const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.size() * 48 + 64);
  if (!cloud.crs().empty()) out += "# crs: " + cloud.crs() + "\n";
  out += "# units: m\n";
  const bool cls = cloud.has_classes();
  const bool seg = cloud.has_segments();
  // A segment column needs a class column in front of it.
  const bool write_cls = cls || seg;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud[i];
    out += format_double(p.x());
    out += ' ';
    out += format_double(p.y());
    out += ' ';
    out += format_double(p.z());
    if (write_cls) {
      const bool ground = cls && cloud.classes()[i] == PointClass::Ground;
      out += ground ? " 2" : " 1";
    }
    if (seg) {
      out += ' ';
      out += std::to_string(cloud.segments()[i]);
    }
    out += '\n';
  }
  write_text(path, out);
}

namespace {

template <typename T>
T get_le(const std::string& buf, std::size_t offset) {
  if (offset + sizeof(T) > buf.size()) throw Error(ErrorKind::DataError, "truncated LAS file");
  T v;
  std::memcpy(&v, buf.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::string& buf, std::size_t offset, T v) {
  std::memcpy(buf.data() + offset, &v, sizeof(T));
}

constexpr std::size_t kLasHeaderSize = 227;
constexpr std::size_t kLasRecordSize = 20;

}  // namespace

PointCloud read_las(const fs::path& path) {
  const std::string buf = read_text(path);
  if (buf.size() < kLasHeaderSize || buf.compare(0, 4, "LASF") != 0)
    throw Error(ErrorKind::DataError, fmt::format("{}: not a LAS file", path.string()));
  const auto major = get_le<std::uint8_t>(buf, 24);
  const auto minor = get_le<std::uint8_t>(buf, 25);
  if (major != 1 || minor > 2)
    throw Error(ErrorKind::DataError, fmt::format("{}: LAS {}.{} unsupported", path.string(), major, minor));
  const auto data_offset = get_le<std::uint32_t>(buf, 96);
  const auto format = get_le<std::uint8_t>(buf, 104);
  const auto record_len = get_le<std::uint16_t>(buf, 105);
  const auto count = get_le<std::uint32_t>(buf, 107);
  if (format != 0 || record_len < kLasRecordSize)
    throw Error(ErrorKind::DataError, fmt::format("{}: only point format 0 is supported", path.string()));
  const double sx = get_le<double>(buf, 131), sy = get_le<double>(buf, 139), sz = get_le<double>(buf, 147);
  const double ox = get_le<double>(buf, 155), oy = get_le<double>(buf, 163), oz = get_le<double>(buf, 171);

  std::vector<Point3> pts;
  std::vector<PointClass> classes;
  pts.reserve(count);
  classes.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = data_offset + static_cast<std::size_t>(i) * record_len;
    const auto x = get_le<std::int32_t>(buf, at);
    const auto y = get_le<std::int32_t>(buf, at + 4);
    const auto z = get_le<std::int32_t>(buf, at + 8);
    const auto c = static_cast<std::uint8_t>(get_le<std::uint8_t>(buf, at + 15) & 0x1f);
    pts.emplace_back(ox + sx * x, oy + sy * y, oz + sz * z);
    classes.push_back(c == 2 ? PointClass::Ground : PointClass::NonGround);
  }
  return PointCloud(std::move(pts), std::move(classes));
}

void write_las(const fs::path& path, const PointCloud& cloud, double scale) {
  std::string buf(kLasHeaderSize + cloud.size() * kLasRecordSize, '\0');
  buf.replace(0, 4, "LASF");
  put_le<std::uint8_t>(buf, 24, 1);
  put_le<std::uint8_t>(buf, 25, 2);
  put_le<std::uint16_t>(buf, 94, static_cast<std::uint16_t>(kLasHeaderSize));
  put_le<std::uint32_t>(buf, 96, static_cast<std::uint32_t>(kLasHeaderSize));
  put_le<std::uint8_t>(buf, 104, 0);
  put_le<std::uint16_t>(buf, 105, static_cast<std::uint16_t>(kLasRecordSize));
  put_le<std::uint32_t>(buf, 107, static_cast<std::uint32_t>(cloud.size()));
  const auto& b = cloud.bounds();
  const Point3 offset = cloud.empty() ? Point3::Zero() : Point3(std::floor(b.min().x()), std::floor(b.min().y()),
                                                                std::floor(b.min().z()));
  for (int a = 0; a < 3; ++a) {
    put_le<double>(buf, 131 + 8 * a, scale);
    put_le<double>(buf, 155 + 8 * a, offset[a]);
  }
  if (!cloud.empty()) {
    for (int a = 0; a < 3; ++a) {
      put_le<double>(buf, 179 + 16 * a, b.max()[a]);
      put_le<double>(buf, 187 + 16 * a, b.min()[a]);
    }
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::size_t at = kLasHeaderSize + i * kLasRecordSize;
    for (int a = 0; a < 3; ++a)
      put_le<std::int32_t>(buf, at + 4 * a, static_cast<std::int32_t>(std::llround((cloud[i][a] - offset[a]) / scale)));
    const bool ground = cloud.has_classes() && cloud.classes()[i] == PointClass::Ground;
    put_le<std::uint8_t>(buf, at + 15, ground ? 2 : 1);
  }
  write_text(path, buf);
}

PointCloud read_point_cloud(const fs::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".las") return read_las(path);
  return read_xyz(path);
}

fs::path sidecar_path(const fs::path& raster_path) {
  fs::path p = raster_path;
  return p.replace_extension(".json");
}

namespace {

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "uint8") return 1;
  if (dtype == "float32") return 4;
  if (dtype == "float64") return 8;
  return 0;
}

}  // namespace

Raster read_raster(const fs::path& path) {
  json meta;
  try {
    meta = json::parse(read_text(sidecar_path(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::DataError, fmt::format("{}: bad raster sidecar: {}", path.string(), e.what()));
  }
  try {
    const double ox = meta.at("origin").at(0).get<double>();
    const double oy = meta.at("origin").at(1).get<double>();
    const double cell = meta.at("cell_size").get<double>();
    const auto width = meta.at("width").get<std::size_t>();
    const auto height = meta.at("height").get<std::size_t>();
    const auto bands = meta.at("bands").get<std::size_t>();
    std::optional<double> nodata;
    if (meta.contains("nodata") && !meta["nodata"].is_null()) nodata = meta["nodata"].get<double>();
    const std::string dtype = meta.value("dtype", "float32");
    if (bands != 1 && bands != 3) throw Error(ErrorKind::DataError, "raster must have 1 or 3 bands");

    Raster raster(ox, oy, cell, width, height, bands, 0.0, nodata);
    const std::string data = read_text(path);
    const std::size_t n = width * height;
    const std::size_t elem = dtype_size(dtype);
    if (elem == 0) throw Error(ErrorKind::DataError, fmt::format("unsupported raster dtype '{}'", dtype));
    if (data.size() != n * bands * elem)
      throw Error(ErrorKind::DataError, fmt::format("{}: size does not match sidecar", path.string()));
    for (std::size_t b = 0; b < bands; ++b) {
      auto& dst = raster.band(b);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = (b * n + i) * elem;
        if (elem == 1) {
          dst[i] = static_cast<unsigned char>(data[at]);
        } else if (elem == 4) {
          float f;
          std::memcpy(&f, data.data() + at, 4);
          dst[i] = f;
        } else {
          std::memcpy(&dst[i], data.data() + at, 8);
        }
      }
    }
    return raster;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::DataError, fmt::format("{}: bad raster sidecar: {}", path.string(), e.what()));
  }
}

void write_raster(const fs::path& path, const Raster& raster, const std::string& dtype) {
  const std::size_t n = raster.width() * raster.height();
  const std::size_t elem = dtype_size(dtype);
  if (elem == 0) throw Error(ErrorKind::IoError, fmt::format("unsupported raster dtype '{}'", dtype));
  std::string data(n * raster.band_count() * elem, '\0');
  for (std::size_t b = 0; b < raster.band_count(); ++b) {
    const auto& src = raster.band(b);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t at = (b * n + i) * elem;
      if (elem == 1) {
        data[at] = static_cast<char>(static_cast<unsigned char>(std::clamp(std::lround(src[i]), 0l, 255l)));
      } else if (elem == 4) {
        const auto f = static_cast<float>(src[i]);
        std::memcpy(data.data() + at, &f, 4);
      } else {
        std::memcpy(data.data() + at, &src[i], 8);
      }
    }
  }
  json meta = {{"origin", {raster.origin_x(), raster.origin_y()}},
               {"cell_size", raster.cell_size()},
               {"width", raster.width()},
               {"height", raster.height()},
               {"bands", raster.band_count()},
               {"nodata", raster.nodata() ? json(*raster.nodata()) : json(nullptr)},
               {"dtype", dtype}};
  write_text(path, data);
  write_text(sidecar_path(path), meta.dump(2) + "\n");
}

WorldFile read_world_file(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::array<double, 6> v{};
  for (auto& x : v)
    if (!(in >> x)) throw Error(ErrorKind::DataError, fmt::format("{}: world file needs six numbers", path.string()));
  // Order: A (x size), D, B (rotations), E (negative y size), C, F (upper-left pixel center).
  if (v[1] != 0.0 || v[2] != 0.0) throw Error(ErrorKind::DataError, "rotated world files are not supported");
  if (!(v[0] > 0.0) || std::abs(v[0] + v[3]) > 1e-9 * v[0])
    throw Error(ErrorKind::DataError, "world file must describe square north-up pixels");
  return WorldFile{v[4] - 0.5 * v[0], v[5] + 0.5 * v[0], v[0]};
}

void require_same_crs(const PointCloud& a, const PointCloud& b) {
  if (!a.crs().empty() && !b.crs().empty() && a.crs() != b.crs())
    throw Error(ErrorKind::DataError, fmt::format("CRS mismatch: '{}' vs '{}'", a.crs(), b.crs()));
}

}  // namespace patchqc::io
