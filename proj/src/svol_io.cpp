// .svol: a UTF-8 JSON header, one NUL byte, then the raw little-endian
// payload in x-fastest order.
//
//   {"dims":[nx,ny,nz],"elem":"f32","kind":"ct","origin_mm":[..],"spacing_mm":[..]}\0<payload>

#include "echosim/errors.hpp"
#include "echosim/volume.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace echosim {

namespace {

using nlohmann::json;

std::size_t elem_size(ElemType e) {
  switch (e) {
    case ElemType::f32: return 4;
    case ElemType::u8: return 1;
    case ElemType::u16: return 2;
  }
  return 0;
}

ElemType parse_elem(const std::string& s) {
  if (s == "f32") return ElemType::f32;
  if (s == "u8") return ElemType::u8;
  if (s == "u16") return ElemType::u16;
  throw UnsupportedElementError("unsupported element type '" + s + "'");
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

json header_of(const Volume& v) {
  const GridGeometry& g = v.geometry;
  return json{{"dims", {g.dims[0], g.dims[1], g.dims[2]}},
              {"spacing_mm", {g.spacing.x(), g.spacing.y(), g.spacing.z()}},
              {"origin_mm", {g.origin.x(), g.origin.y(), g.origin.z()}},
              {"elem", to_string(v.elem)},
              {"kind", to_string(v.kind)}};
}

void encode_payload(const Volume& v, std::vector<std::uint8_t>& out) {
  out.reserve(out.size() + v.geometry.voxel_count() * elem_size(v.elem));
  if (v.kind == VolumeKind::ct) {
    for (float s : v.scalars) {
      switch (v.elem) {
        case ElemType::f32: put_le<float>(out, s); break;
        case ElemType::u8: put_le<std::uint8_t>(out, static_cast<std::uint8_t>(s)); break;
        case ElemType::u16: put_le<std::uint16_t>(out, static_cast<std::uint16_t>(s)); break;
      }
    }
  } else {
    for (Label l : v.labels) {
      if (v.elem == ElemType::u8) {
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(l));
      } else {
        put_le<std::uint16_t>(out, l);
      }
    }
  }
}

std::array<double, 3> read_vec3(const json& h, const char* key) {
  if (!h.contains(key) || !h[key].is_array() || h[key].size() != 3) {
    throw MalformedHeaderError(std::string("header field '") + key + "' must be an array of 3 numbers");
  }
  std::array<double, 3> out{};
  for (int a = 0; a < 3; ++a) {
    if (!h[key][a].is_number()) {
      throw MalformedHeaderError(std::string("header field '") + key + "' must hold numbers");
    }
    out[a] = h[key][a].get<double>();
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_svol(const Volume& v) {
  v.validate();
  const std::string header = header_of(v).dump();
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.push_back(0);
  encode_payload(v, out);
  return out;
}

Volume decode_svol(const std::vector<std::uint8_t>& bytes) {
  const auto nul = std::find(bytes.begin(), bytes.end(), std::uint8_t{0});
  if (nul == bytes.end()) throw MalformedHeaderError("svol header is not NUL-terminated");
  const std::string text(bytes.begin(), nul);

  json h;
  try {
    h = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedHeaderError(std::string("svol header is not valid JSON: ") + e.what());
  }
  if (!h.is_object()) throw MalformedHeaderError("svol header must be a JSON object");
  for (const char* key : {"dims", "spacing_mm", "origin_mm", "elem", "kind"}) {
    if (!h.contains(key)) throw MalformedHeaderError(std::string("svol header lacks '") + key + "'");
  }
  if (!h["elem"].is_string() || !h["kind"].is_string()) {
    throw MalformedHeaderError("svol 'elem' and 'kind' must be strings");
  }

  Volume v;
  const std::string kind = h["kind"].get<std::string>();
  if (kind == "ct") {
    v.kind = VolumeKind::ct;
  } else if (kind == "label") {
    v.kind = VolumeKind::label;
  } else {
    throw MalformedHeaderError("svol 'kind' must be \"ct\" or \"label\"");
  }
  v.elem = parse_elem(h["elem"].get<std::string>());
  if (v.kind == VolumeKind::label && v.elem == ElemType::f32) {
    throw UnsupportedElementError("label volumes must be u8 or u16");
  }

  const auto dims = read_vec3(h, "dims");
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1 || dims[a] != std::floor(dims[a]) || dims[a] > 1e6) {
      throw MalformedHeaderError("svol 'dims' must be positive integers");
    }
    v.geometry.dims[a] = static_cast<int>(dims[a]);
  }
  const auto spacing = read_vec3(h, "spacing_mm");
  const auto origin = read_vec3(h, "origin_mm");
  v.geometry.spacing = Vec3(spacing[0], spacing[1], spacing[2]);
  v.geometry.origin = Vec3(origin[0], origin[1], origin[2]);
  try {
    v.geometry.validate();
  } catch (const ConfigError& e) {
    throw MalformedHeaderError(e.what());
  }

  const std::size_t n = v.geometry.voxel_count();
  const std::size_t es = elem_size(v.elem);
  const std::uint8_t* payload = bytes.data() + (nul - bytes.begin()) + 1;
  const std::size_t payload_bytes = static_cast<std::size_t>(bytes.end() - nul) - 1;
  if (payload_bytes != n * es) {
    throw PayloadMismatchError("svol payload holds " + std::to_string(payload_bytes) + " bytes, header implies " +
                               std::to_string(n * es) + " (" + std::to_string(n) + " elements)");
  }

  if (v.kind == VolumeKind::ct) {
    v.scalars.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* p = payload + i * es;
      switch (v.elem) {
        case ElemType::f32: v.scalars[i] = get_le<float>(p); break;
        case ElemType::u8: v.scalars[i] = static_cast<float>(*p); break;
        case ElemType::u16: v.scalars[i] = static_cast<float>(get_le<std::uint16_t>(p)); break;
      }
    }
  } else {
    v.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint8_t* p = payload + i * es;
      v.labels[i] = v.elem == ElemType::u8 ? Label{*p} : get_le<std::uint16_t>(p);
    }
  }
  return v;
}

Volume load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open volume file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_svol(bytes);
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  const auto bytes = encode_svol(v);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write volume file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

std::uint64_t payload_hash(const Volume& v) {
  std::vector<std::uint8_t> payload;
  encode_payload(v, payload);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : payload) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_landmarks(const LandmarkSet& landmarks, const std::filesystem::path& path) {
  json poses = json::object();
  for (const auto& [name, pose] : landmarks) {
    const Quaternion q = pose.quaternion();
    poses[name] = {{"position", {pose.position().x(), pose.position().y(), pose.position().z()}},
                   {"quaternion_wxyz", {q.w, q.x, q.y, q.z}}};
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write landmarks file " + path.string());
  out << json{{"poses", poses}}.dump(2) << "\n";
}

LandmarkSet load_landmarks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open landmarks file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("landmarks " + path.string() + ": " + e.what());
  }
  LandmarkSet out;
  if (!j.contains("poses") || !j["poses"].is_object()) throw DataError("landmarks file lacks a 'poses' object");
  for (const auto& [name, entry] : j["poses"].items()) {
    try {
      const auto p = entry.at("position").get<std::array<double, 3>>();
      const auto q = entry.at("quaternion_wxyz").get<std::array<double, 4>>();
      out[name] = Pose::from_quaternion(Vec3(p[0], p[1], p[2]), Quaternion{q[0], q[1], q[2], q[3]});
    } catch (const json::exception& e) {
      throw DataError("landmark '" + name + "': " + e.what());
    }
  }
  return out;
}

}  // namespace echosim
