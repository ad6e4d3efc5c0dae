#include "cubedn/store.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cubedn::store {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kCubeMagic[4] = {'C', 'D', 'N', 'C'};
constexpr char kWeightMagic[4] = {'C', 'D', 'N', 'W'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <class U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      fail(ErrorCode::TruncatedPayload, origin_ + ": file ends inside " + what + " (offset " +
                                            std::to_string(pos_) + ", need " + std::to_string(n) +
                                            " bytes, have " + std::to_string(in_.size() - pos_) + ")");
    }
  }
  template <class U>
  U uint(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(uint<std::uint32_t>(what)); }
  double f64(const char* what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void magic(const char (&expected)[4]) {
    // A prefix of the magic (including an empty file) reads as truncation.
    const std::size_t have = std::min<std::size_t>(in_.size(), 4);
    if (have < 4 && (have == 0 || std::memcmp(in_.data(), expected, have) == 0)) {
      fail(ErrorCode::TruncatedPayload, origin_ + ": file ends inside the magic");
    }
    if (std::memcmp(in_.data(), expected, 4) != 0) {
      fail(ErrorCode::BadMagic, origin_ + ": expected magic \"" + std::string(expected, 4) + "\"");
    }
    pos_ = 4;
  }
  bool done() const { return pos_ == in_.size(); }
  const std::string& origin() const { return origin_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::string origin_;
  std::size_t pos_ = 0;
};

// Guards against absurd headers before allocating.
std::size_t checked_count(const Shape& dims, std::size_t elem, std::size_t available,
                          const std::string& origin) {
  std::size_t n = 1;
  for (auto d : dims) {
    if (d != 0 && n > available / d) {
      fail(ErrorCode::TruncatedPayload, origin + ": dims " + shape_string(dims) + " exceed file size");
    }
    n *= d;
  }
  if (n > available / elem) {
    fail(ErrorCode::TruncatedPayload, origin + ": payload of " + std::to_string(n * elem) +
                                          " bytes, only " + std::to_string(available) + " present");
  }
  return n;
}

}  // namespace

std::vector<std::uint8_t> encode_cube(const Tensor<float>& cube) {
  if (cube.rank() == 0) fail(ErrorCode::InvalidArgument, "cannot store a rank-0 cube");
  Writer w;
  w.bytes(kCubeMagic, 4);
  w.uint<std::uint32_t>(kCubeVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(cube.rank()));
  w.uint<std::uint32_t>(kFloat32);
  for (auto d : cube.shape()) w.uint<std::uint64_t>(d);
  for (float v : cube.values()) w.f32(v);
  return w.take();
}

Tensor<float> decode_cube(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  r.magic(kCubeMagic);
  const auto version = r.uint<std::uint32_t>("version");
  if (version != kCubeVersion) {
    fail(ErrorCode::VersionMismatch, origin + ": cube format version " + std::to_string(version) +
                                         ", expected " + std::to_string(kCubeVersion));
  }
  const auto ndim = r.uint<std::uint32_t>("dim count");
  const auto dtype = r.uint<std::uint32_t>("element type");
  if (dtype != kFloat32) {
    fail(ErrorCode::VersionMismatch, origin + ": unsupported element type " + std::to_string(dtype));
  }
  if (ndim == 0 || ndim > 8) fail(ErrorCode::TruncatedPayload, origin + ": bad dim count " + std::to_string(ndim));
  Shape dims(ndim);
  for (auto& d : dims) d = r.uint<std::uint64_t>("dims");
  const std::size_t header = 16 + 8 * ndim;
  const std::size_t n = checked_count(dims, 4, bytes.size() - header, origin);
  std::vector<float> data(n);
  for (auto& v : data) v = r.f32("payload");
  if (!r.done()) {
    fail(ErrorCode::TruncatedPayload, origin + ": " + std::to_string(bytes.size() - header - 4 * n) +
                                          " trailing bytes after payload");
  }
  return Tensor<float>(std::move(dims), std::move(data));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::Io, "read error on " + path.string());
  return bytes;
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  // Write to a sibling temp file and rename so readers never see partial data.
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::Io, "write error on " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_cube(const fs::path& path, const Tensor<float>& cube) { write_file(path, encode_cube(cube)); }

Tensor<float> read_cube(const fs::path& path) { return decode_cube(read_file(path), path.string()); }

Tensor<float> to_float(const Tensor<double>& t) {
  std::vector<float> v(t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(t[i]);
  return Tensor<float>(t.shape(), std::move(v));
}

Tensor<double> to_double(const Tensor<float>& t) {
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = t[i];
  return Tensor<double>(t.shape(), std::move(v));
}

std::vector<std::uint8_t> encode_weights(const model::Network& net) {
  Writer w;
  w.bytes(kWeightMagic, 4);
  w.uint<std::uint32_t>(kWeightVersion);
  const std::string spec = net.spec().to_json();
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(spec.size()));
  w.bytes(spec.data(), spec.size());
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(net.params().size()));
  for (const auto& p : net.params()) {
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) w.uint<std::uint64_t>(d);
  }
  for (const auto& p : net.params()) {
    for (double v : p.value) w.f64(v);
  }
  return w.take();
}

model::Network decode_weights(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  r.magic(kWeightMagic);
  const auto version = r.uint<std::uint32_t>("version");
  if (version != kWeightVersion) {
    fail(ErrorCode::VersionMismatch, origin + ": weight format version " + std::to_string(version) +
                                         ", expected " + std::to_string(kWeightVersion));
  }
  const auto spec_len = r.uint<std::uint32_t>("spec length");
  const auto spec = model::NetworkSpec::from_json(r.str(spec_len, "network spec"));
  const auto count = r.uint<std::uint32_t>("tensor count");
  std::vector<model::Param> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    model::Param p;
    p.name = r.str(r.uint<std::uint32_t>("name length"), "tensor name");
    const auto ndim = r.uint<std::uint32_t>("tensor rank");
    if (ndim > 8) fail(ErrorCode::TruncatedPayload, origin + ": bad rank for " + p.name);
    p.shape.resize(ndim);
    for (auto& d : p.shape) d = r.uint<std::uint64_t>("tensor dims");
    params.push_back(std::move(p));
  }
  for (auto& p : params) {
    p.value.resize(checked_count(p.shape, 8, bytes.size(), origin));
    for (auto& v : p.value) v = r.f64("weights payload");
  }
  if (!r.done()) fail(ErrorCode::TruncatedPayload, origin + ": trailing bytes after weights");
  return model::Network(spec, std::move(params));
}

void write_weights(const fs::path& path, const model::Network& net) { write_file(path, encode_weights(net)); }

model::Network read_weights(const fs::path& path) { return decode_weights(read_file(path), path.string()); }

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // "-0.000000" and "0.000000" must not both appear for the same value class.
  if (std::strcmp(buf, "-0.000000") == 0) return "0.000000";
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t line, const char* field) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    fail(ErrorCode::Config, "detections line " + std::to_string(line) + ": bad " + field + " '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_detections(const std::vector<FrameDetections>& frames) {
  std::vector<const FrameDetections*> order;
  for (const auto& f : frames) order.push_back(&f);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* x, const auto* y) { return x->frame_id < y->frame_id; });
  std::string out = std::string(kDetectionHeader) + "\n";
  for (const auto* f : order) {
    for (const auto& d : f->detections) {
      out += std::to_string(f->frame_id) + "," + std::string(to_string(d.cls)) + "," +
             std::to_string(d.bins.r) + "," + std::to_string(d.bins.a) + "," + std::to_string(d.bins.e) +
             "," + fixed6(d.confidence) + "," + fixed6(d.cartesian.x) + "," + fixed6(d.cartesian.y) +
             "," + fixed6(d.cartesian.z) + "\n";
    }
  }
  return out;
}

std::vector<FrameDetections> parse_detections(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kDetectionHeader) {
    fail(ErrorCode::Config, std::string("detections file must start with header '") + kDetectionHeader + "'");
  }
  std::vector<FrameDetections> frames;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != 9) {
      fail(ErrorCode::Config, "detections line " + std::to_string(lineno) + ": expected 9 fields, got " +
                                  std::to_string(f.size()));
    }
    postproc::Detection d;
    const auto id = parse_number<std::size_t>(f[0], lineno, "frame_id");
    try {
      d.cls = parse_class(f[1]);
    } catch (const Error& e) {
      fail(ErrorCode::Config, "detections line " + std::to_string(lineno) + ": " + e.what());
    }
    d.bins = {parse_number<int>(f[2], lineno, "r"), parse_number<int>(f[3], lineno, "a"),
              parse_number<int>(f[4], lineno, "e")};
    d.confidence = parse_number<double>(f[5], lineno, "confidence");
    d.cartesian = {parse_number<double>(f[6], lineno, "x"), parse_number<double>(f[7], lineno, "y"),
                   parse_number<double>(f[8], lineno, "z")};
    if (frames.empty() || frames.back().frame_id != id) frames.push_back({id, {}});
    frames.back().detections.push_back(d);
  }
  return frames;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  fail(ErrorCode::Config, "unknown split '" + std::string(s) + "' (train, val, test)");
}

std::vector<const ManifestFrame*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestFrame*> out;
  for (const auto& f : frames) {
    if (f.split == s) out.push_back(&f);
  }
  return out;
}

const ManifestFrame* DatasetManifest::find(std::size_t id) const {
  for (const auto& f : frames) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

namespace {

json vec_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

Vec3 json_vec(const json& j) {
  if (!j.is_array() || j.size() != 3) fail(ErrorCode::Config, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
      fail(ErrorCode::Config, std::string("unknown key '") + key + "' in " + where);
    }
  }
}

}  // namespace

std::string DatasetManifest::to_json() const {
  json frames_j = json::array();
  for (const auto& f : frames) {
    json labels = json::array();
    for (const auto& l : f.labels) {
      labels.push_back({{"class", std::string(cubedn::to_string(l.cls))},
                        {"position", vec_json(l.position)},
                        {"velocity", vec_json(l.velocity)}});
    }
    json fj = {{"id", f.id},
               {"sequence", f.sequence},
               {"split", std::string(store::to_string(f.split))},
               {"horizontal", f.horizontal},
               {"vertical", f.vertical},
               {"labels", labels}};
    if (!f.fused.empty()) fj["fused"] = f.fused;
    frames_j.push_back(std::move(fj));
  }
  json j = {{"format", "cubedn-manifest"}, {"version", 1}, {"frames", frames_j}};
  j["radar"] = radar_json.empty() ? json::object() : json::parse(radar_json);
  return j.dump(1) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    reject_unknown(j, {"format", "version", "frames", "radar"}, "manifest");
    if (j.value("format", "") != "cubedn-manifest") fail(ErrorCode::Config, "not a dataset manifest");
    if (j.value("version", 0) != 1) fail(ErrorCode::VersionMismatch, "unsupported manifest version");
    if (j.contains("radar")) m.radar_json = j["radar"].dump();
    for (const auto& fj : j.at("frames")) {
      reject_unknown(fj, {"id", "sequence", "split", "horizontal", "vertical", "fused", "labels"},
                     "manifest frame");
      ManifestFrame f;
      f.id = fj.at("id").get<std::size_t>();
      f.sequence = fj.value("sequence", std::size_t{0});
      f.split = parse_split(fj.at("split").get<std::string>());
      f.horizontal = fj.at("horizontal").get<std::string>();
      f.vertical = fj.at("vertical").get<std::string>();
      f.fused = fj.value("fused", std::string{});
      for (const auto& lj : fj.value("labels", json::array())) {
        reject_unknown(lj, {"class", "position", "velocity"}, "label");
        f.labels.push_back({parse_class(lj.at("class").get<std::string>()), json_vec(lj.at("position")),
                            lj.contains("velocity") ? json_vec(lj["velocity"]) : Vec3{}});
      }
      m.frames.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("manifest: ") + e.what());
  }
  return m;
}

void DatasetManifest::validate(const fs::path& root) const {
  std::set<std::size_t> ids;
  for (const auto& f : frames) {
    if (!ids.insert(f.id).second) {
      fail(ErrorCode::Config, "manifest frame id " + std::to_string(f.id) + " appears twice");
    }
    for (const auto* p : {&f.horizontal, &f.vertical, &f.fused}) {
      if (p->empty()) {
        if (p != &f.fused) fail(ErrorCode::Config, "frame " + std::to_string(f.id) + " lacks a cube path");
        continue;
      }
      if (!fs::exists(root / *p)) {
        fail(ErrorCode::Io, "frame " + std::to_string(f.id) + ": missing file " + (root / *p).string());
      }
    }
  }
}

void write_manifest(const fs::path& path, const DatasetManifest& m) { write_text(path, m.to_json()); }

DatasetManifest read_manifest(const fs::path& path) {
  auto m = DatasetManifest::from_json(read_text(path));
  m.validate(path.parent_path());
  return m;
}

}  // namespace cubedn::store
