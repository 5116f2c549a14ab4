#include "pyrotime/geodata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pyrotime/errors.hpp"

namespace pyrotime::geodata {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Distance (m) within which a pixel center counts as lying on an edge.
constexpr double kEdgeTolerance = 1e-6;

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  std::string out = s.substr(a, b - a);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_double(const std::string& s, const char* what) {
  if (s.empty()) throw std::invalid_argument(std::string("empty ") + what);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument(std::string("malformed ") + what + " '" + s + "'");
  }
  return v;
}

struct Local {
  double x;
  double y;
};

double segment_distance(Local p, Local a, Local b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

void collect_rings(const json& coords, std::vector<std::vector<LatLon>>& rings) {
  for (const json& ring : coords) {
    std::vector<LatLon> r;
    for (const json& pt : ring) {
      if (!pt.is_array() || pt.size() < 2) throw SchemaError("perimeter: malformed coordinate");
      r.push_back({pt[1].get<double>(), pt[0].get<double>()});
    }
    rings.push_back(std::move(r));
  }
}

void collect_geometry(const json& g, std::vector<std::vector<LatLon>>& rings) {
  const std::string type = g.at("type").get<std::string>();
  if (type == "Polygon") {
    collect_rings(g.at("coordinates"), rings);
  } else if (type == "MultiPolygon") {
    for (const json& poly : g.at("coordinates")) collect_rings(poly, rings);
  } else {
    throw SchemaError("perimeter: unsupported geometry type " + type);
  }
}

}  // namespace

std::string to_string(Confidence c) {
  switch (c) {
    case Confidence::low:
      return "low";
    case Confidence::nominal:
      return "nominal";
    case Confidence::high:
      return "high";
  }
  return "?";
}

Confidence parse_confidence(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "low") return Confidence::low;
  if (t == "nominal") return Confidence::nominal;
  if (t == "high") return Confidence::high;
  throw std::invalid_argument("unknown confidence label '" + text + "'");
}

Timestamp parse_timestamp(const std::string& raw) {
  const std::string text = trim(raw);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, used = 0;
  bool ok = false;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &used) == 3 &&
      static_cast<std::size_t>(used) == text.size()) {
    ok = true;
  } else {
    char sep = 0;
    int n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &s, &used);
    if (n == 7 && (sep == 'T' || sep == ' ')) {
      ok = true;
    } else {
      s = 0;
      n = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &used);
      ok = n == 6 && (sep == 'T' || sep == ' ');
    }
    const std::string rest = ok ? text.substr(static_cast<std::size_t>(used)) : "";
    ok = ok && (rest.empty() || rest == "Z" || rest == "z");
  }
  const std::chrono::year_month_day ymd{std::chrono::year(y), std::chrono::month(mo),
                                        std::chrono::day(d)};
  if (!ok || !ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) {
    throw std::invalid_argument("malformed timestamp '" + raw + "'");
  }
  return std::chrono::sys_days(ymd) + std::chrono::hours(h) + std::chrono::minutes(mi) +
         std::chrono::seconds(s);
}

std::vector<AfDetection> parse_af_csv_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> col;
  bool have_header = false;
  std::vector<AfDetection> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line = line.substr(3);
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (!have_header) {
      for (std::size_t k = 0; k < fields.size(); ++k) col[lower(fields[k])] = k;
      for (const char* name : {"lat", "lon", "time_utc", "confidence"}) {
        if (!col.count(name)) throw SchemaError(std::string("AF CSV: missing column '") + name + "'");
      }
      have_header = true;
      continue;
    }
    try {
      auto field = [&](const char* name) -> const std::string& {
        const std::size_t k = col.at(name);
        if (k >= fields.size()) throw std::invalid_argument(std::string("missing ") + name);
        return fields[k];
      };
      AfDetection d;
      d.lat = parse_double(field("lat"), "latitude");
      d.lon = parse_double(field("lon"), "longitude");
      if (std::abs(d.lat) > 90.0) throw std::invalid_argument("latitude out of range");
      if (std::abs(d.lon) > 180.0) throw std::invalid_argument("longitude out of range");
      d.time_utc = parse_timestamp(field("time_utc"));
      d.confidence = parse_confidence(field("confidence"));
      out.push_back(d);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

std::vector<AfDetection> parse_af_csv(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_af_csv_text(ss.str());
}

std::set<Confidence> parse_tiers(const std::string& text) {
  std::set<Confidence> out;
  std::string cur;
  std::istringstream is(text);
  while (std::getline(is, cur, '+')) out.insert(parse_confidence(cur));
  if (out.empty()) throw std::invalid_argument("no confidence tiers given");
  return out;
}

NormalizedField grid_detections(const std::vector<AfDetection>& detections, const GridSpec& spec,
                                Timestamp day_start, const std::set<Confidence>& tiers,
                                double window_h, double horizon, GriddingStats* stats) {
  spec.validate();
  if (!(horizon > 0.0)) throw std::invalid_argument("grid_detections: horizon must be positive");
  if (!(window_h >= 0.0 && window_h <= horizon)) {
    throw std::invalid_argument("grid_detections: window must lie in [0, horizon]");
  }
  GriddingStats st;
  std::vector<double> hours(spec.pixel_count(), kBackground);
  for (const AfDetection& d : detections) {
    if (!tiers.count(d.confidence)) {
      ++st.other_tier;
      continue;
    }
    const double h = std::chrono::duration<double>(d.time_utc - day_start).count() / 3600.0;
    if (h < 0.0 || h > window_h) {
      ++st.outside_window;
      continue;
    }
    PixelIndex p;
    try {
      p = latlon_to_pixel(spec, d.lat, d.lon);
    } catch (const std::out_of_range&) {
      ++st.outside_domain;
      continue;
    }
    ++st.used;
    double& cell = hours[static_cast<std::size_t>(p.j) * spec.nx + p.i];
    cell = std::min(cell, h);
  }
  if (stats) *stats = st;
  return normalize(ArrivalField(spec, std::move(hours)), horizon);
}

void PerimeterPolygon::validate() const {
  if (rings.empty()) throw std::invalid_argument("perimeter: no rings");
  for (const auto& r : rings) {
    if (r.size() < 4) throw std::invalid_argument("perimeter: ring has fewer than 3 vertices");
    if (r.front().lat != r.back().lat || r.front().lon != r.back().lon) {
      throw std::invalid_argument("perimeter: ring is not closed");
    }
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) pts.emplace_back(r[k].lat, r[k].lon);
    std::sort(pts.begin(), pts.end());
    if (std::unique(pts.begin(), pts.end()) - pts.begin() < 3) {
      throw std::invalid_argument("perimeter: ring has fewer than 3 distinct vertices");
    }
    for (const LatLon& p : r) {
      if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || std::abs(p.lat) > 90.0) {
        throw std::invalid_argument("perimeter: invalid coordinate");
      }
    }
  }
}

PerimeterPolygon parse_perimeter(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("perimeter: ") + e.what());
  }
  PerimeterPolygon p;
  try {
    const std::string type = j.at("type").get<std::string>();
    const json* props = nullptr;
    if (type == "FeatureCollection") {
      for (const json& f : j.at("features")) {
        collect_geometry(f.at("geometry"), p.rings);
        if (!props && f.contains("properties") && f["properties"].is_object() &&
            f["properties"].contains("observed_time_hours")) {
          props = &f["properties"];
        }
      }
    } else if (type == "Feature") {
      collect_geometry(j.at("geometry"), p.rings);
      if (j.contains("properties")) props = &j["properties"];
    } else {
      collect_geometry(j, p.rings);
      if (j.contains("properties")) props = &j["properties"];
    }
    if (!props || !props->contains("observed_time_hours")) {
      throw SchemaError("perimeter: missing observed_time_hours property");
    }
    p.observed_time_h = props->at("observed_time_hours").get<double>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("perimeter: ") + e.what());
  }
  p.validate();
  return p;
}

PerimeterPolygon load_perimeter(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_perimeter(ss.str());
}

std::string perimeter_to_geojson(const PerimeterPolygon& poly) {
  json rings = json::array();
  for (const auto& r : poly.rings) {
    json ring = json::array();
    for (const LatLon& p : r) ring.push_back({p.lon, p.lat});
    rings.push_back(ring);
  }
  json j = {{"type", "Feature"},
            {"properties", {{"observed_time_hours", poly.observed_time_h}}},
            {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}};
  return j.dump(1);
}

BurnMask rasterize_perimeter(const PerimeterPolygon& poly, const GridSpec& spec) {
  poly.validate();
  spec.validate();
  std::vector<std::pair<Local, Local>> edges;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& r : poly.rings) {
    std::vector<Local> pts;
    for (const LatLon& p : r) {
      const LocalXY xy = latlon_to_local(spec, p.lat, p.lon);
      pts.push_back({xy.east, xy.north});
      xmin = std::min(xmin, xy.east);
      xmax = std::max(xmax, xy.east);
      ymin = std::min(ymin, xy.north);
      ymax = std::max(ymax, xy.north);
    }
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) edges.emplace_back(pts[k], pts[k + 1]);
  }
  const LocalXY lo = pixel_center(spec, 0, spec.ny - 1);
  const LocalXY hi = pixel_center(spec, spec.nx - 1, 0);
  const double half = 0.5 * spec.resolution;
  if (xmax < lo.east - half || xmin > hi.east + half || ymax < lo.north - half ||
      ymin > hi.north + half) {
    throw std::invalid_argument("rasterize_perimeter: polygon does not overlap the grid");
  }

  BurnMask mask(spec);
  std::vector<double> xs;
  const double x0 = pixel_center(spec, 0, 0).east;
  const double res = spec.resolution;
  auto column_range = [&](double a, double b, int& i0, int& i1) {
    i0 = std::max(0, static_cast<int>(std::ceil((a - x0) / res)));
    i1 = std::min(spec.nx - 1, static_cast<int>(std::floor((b - x0) / res)));
  };
  for (int j = 0; j < spec.ny; ++j) {
    const double y = pixel_center(spec, 0, j).north;
    // Even-odd fill from crossings of the horizontal line through the centers.
    xs.clear();
    for (const auto& [a, b] : edges) {
      if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      int i0, i1;
      column_range(xs[k], xs[k + 1], i0, i1);
      for (int i = i0; i <= i1; ++i) {
        const double x = pixel_center(spec, i, j).east;
        if (x > xs[k] && x < xs[k + 1]) mask(i, j) = 1;
      }
    }
    // Centers on an edge are inside.
    for (const auto& [a, b] : edges) {
      if (std::min(a.y, b.y) > y + kEdgeTolerance || std::max(a.y, b.y) < y - kEdgeTolerance) continue;
      double ea = std::min(a.x, b.x), eb = std::max(a.x, b.x);
      if (std::abs(b.y - a.y) > kEdgeTolerance) {
        const double t0 = std::clamp((y - kEdgeTolerance - a.y) / (b.y - a.y), 0.0, 1.0);
        const double t1 = std::clamp((y + kEdgeTolerance - a.y) / (b.y - a.y), 0.0, 1.0);
        ea = std::min(a.x + t0 * (b.x - a.x), a.x + t1 * (b.x - a.x));
        eb = std::max(a.x + t0 * (b.x - a.x), a.x + t1 * (b.x - a.x));
      }
      int i0, i1;
      column_range(ea - kEdgeTolerance, eb + kEdgeTolerance, i0, i1);
      for (int i = i0; i <= i1; ++i) {
        if (segment_distance({pixel_center(spec, i, j).east, y}, a, b) <= kEdgeTolerance) mask(i, j) = 1;
      }
    }
  }
  return mask;
}

}  // namespace pyrotime::geodata
