#include "pyrotime/farr.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "pyrotime/errors.hpp"

namespace pyrotime {

namespace {

using nlohmann::json;

void put_le32(std::string& out, std::uint32_t bits) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

std::uint32_t get_le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

template <typename T>
T required(const json& h, const char* key) {
  if (!h.contains(key)) throw SchemaError(std::string("FARR header missing key '") + key + "'");
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("FARR header key '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string encode_farr(const FarrHeader& header, const std::vector<float>& values) {
  if (values.size() != header.spec.pixel_count()) {
    throw std::invalid_argument("FARR payload size does not match header grid");
  }
  json h;
  h["nx"] = header.spec.nx;
  h["ny"] = header.spec.ny;
  h["resolution_m"] = header.spec.resolution;
  h["origin_lat"] = header.spec.origin_lat;
  h["origin_lon"] = header.spec.origin_lon;
  h["units"] = header.units;
  h["background"] = header.background ? json(*header.background) : json(nullptr);
  h["row_order"] = "north_first";
  std::string out = h.dump();
  out.push_back('\n');
  out.reserve(out.size() + 4 * values.size());
  for (float v : values) put_le32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FarrRaster decode_farr(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw DataError("FARR: missing header line");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw DataError(std::string("FARR: header is not valid JSON: ") + e.what());
  }
  if (!h.is_object()) throw DataError("FARR: header is not a JSON object");
  FarrRaster r;
  r.header.spec.nx = required<int>(h, "nx");
  r.header.spec.ny = required<int>(h, "ny");
  r.header.spec.resolution = required<double>(h, "resolution_m");
  r.header.spec.origin_lat = required<double>(h, "origin_lat");
  r.header.spec.origin_lon = required<double>(h, "origin_lon");
  r.header.units = required<std::string>(h, "units");
  if (!h.contains("background")) throw SchemaError("FARR header missing key 'background'");
  if (!h["background"].is_null()) r.header.background = required<double>(h, "background");
  if (h.contains("row_order") && h["row_order"] != "north_first") {
    throw SchemaError("FARR: unsupported row_order");
  }
  if (r.header.spec.nx <= 0 || r.header.spec.ny <= 0) throw DataError("FARR: bad dimensions");
  const std::size_t n = r.header.spec.pixel_count();
  if (bytes.size() - nl - 1 != 4 * n) {
    throw DataError("FARR: payload holds " + std::to_string(bytes.size() - nl - 1) +
                    " bytes, expected " + std::to_string(4 * n));
  }
  r.values.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (std::size_t k = 0; k < n; ++k) r.values[k] = std::bit_cast<float>(get_le32(p + 4 * k));
  return r;
}

void write_farr(const std::filesystem::path& path, const FarrHeader& header,
                const std::vector<float>& values) {
  const std::string bytes = encode_farr(header, values);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

FarrRaster read_farr(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open raster " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_farr(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_arrival(const std::filesystem::path& path, const ArrivalField& field, double horizon) {
  std::vector<float> v(field.size());
  for (std::size_t k = 0; k < field.size(); ++k) {
    v[k] = is_background(field[k]) ? static_cast<float>(horizon) : static_cast<float>(field[k]);
  }
  write_farr(path, {field.spec(), farr_units::kHours, horizon}, v);
}

ArrivalField load_arrival(const std::filesystem::path& path) {
  FarrRaster r = read_farr(path);
  if (r.header.units != farr_units::kHours) {
    throw DataError(path.string() + ": expected units 'hours', got '" + r.header.units + "'");
  }
  std::vector<double> v(r.values.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double x = r.values[k];
    v[k] = (r.header.background && x >= static_cast<float>(*r.header.background)) ? kBackground : x;
  }
  return ArrivalField(r.header.spec, std::move(v));
}

void save_normalized(const std::filesystem::path& path, const NormalizedField& field) {
  std::vector<float> v(field.size());
  for (std::size_t k = 0; k < field.size(); ++k) v[k] = static_cast<float>(field[k]);
  write_farr(path, {field.spec(), farr_units::kNormalized, 1.0}, v);
}

NormalizedField load_normalized(const std::filesystem::path& path) {
  FarrRaster r = read_farr(path);
  if (r.header.units != farr_units::kNormalized) {
    throw DataError(path.string() + ": expected units 'normalized', got '" + r.header.units + "'");
  }
  std::vector<double> v(r.values.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double x = r.values[k];
    if (!(x >= 0.0 && x <= 1.0)) throw DataError(path.string() + ": normalized value outside [0,1]");
    v[k] = x;
  }
  return NormalizedField(r.header.spec, std::move(v));
}

void save_hours(const std::filesystem::path& path, const Raster<double>& field) {
  std::vector<float> v(field.size());
  for (std::size_t k = 0; k < field.size(); ++k) v[k] = static_cast<float>(field[k]);
  write_farr(path, {field.spec(), farr_units::kHours, std::nullopt}, v);
}

void save_categories(const std::filesystem::path& path, const Raster<std::uint8_t>& field) {
  std::vector<float> v(field.size());
  for (std::size_t k = 0; k < field.size(); ++k) v[k] = static_cast<float>(field[k]);
  write_farr(path, {field.spec(), farr_units::kCategory, std::nullopt}, v);
}

Raster<std::uint8_t> load_categories(const std::filesystem::path& path) {
  FarrRaster r = read_farr(path);
  if (r.header.units != farr_units::kCategory) {
    throw DataError(path.string() + ": expected units 'category'");
  }
  std::vector<std::uint8_t> v(r.values.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    const float x = r.values[k];
    if (!(x >= 0.0f && x <= 255.0f) || x != std::floor(x)) {
      throw DataError(path.string() + ": category value is not a small integer");
    }
    v[k] = static_cast<std::uint8_t>(x);
  }
  return Raster<std::uint8_t>(r.header.spec, std::move(v));
}

}  // namespace pyrotime
