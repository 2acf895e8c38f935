#include "coopfuse/cpm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace coopfuse {
namespace {

constexpr char kMagic[4] = {'C', 'P', 'M', '1'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderSize = 36;
constexpr std::size_t kProposalSize = 15;
constexpr std::size_t kCorrectionSize = 5;
constexpr double kPosQuantum = 0.01;    // m
constexpr double kYawQuantum = 1e-4;    // rad
constexpr long kYawHalfTurn = 31416;    // round(pi / kYawQuantum)

struct Writer {
  std::vector<std::uint8_t> out;

  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
};

struct Reader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size()) throw DecodeError(pos, std::string("truncated ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return buf[pos++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(buf[pos] | (buf[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::int16_t i16(const char* what) { return static_cast<std::int16_t>(u16(what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
};

std::int16_t quant_pos(double v, const std::string& field) {
  if (!std::isfinite(v)) throw EncodeError(field, field + ": non-finite value");
  long long q = std::llround(v / kPosQuantum);
  if (q < std::numeric_limits<std::int16_t>::min() || q > std::numeric_limits<std::int16_t>::max())
    throw EncodeError(field, field + ": value " + std::to_string(v) + " outside encodable range");
  return static_cast<std::int16_t>(q);
}

std::int16_t quant_yaw(double r, const std::string& field) {
  if (!std::isfinite(r)) throw EncodeError(field, field + ": non-finite heading");
  long long q = std::llround(r / kYawQuantum);
  if (q == -kYawHalfTurn) q = kYawHalfTurn;
  if (q < -kYawHalfTurn || q > kYawHalfTurn)
    throw EncodeError(field, field + ": heading outside (-pi, pi]");
  return static_cast<std::int16_t>(q);
}

std::uint8_t quant_score(double s, const std::string& field) {
  if (!std::isfinite(s) || s < 0.0 || s > 1.0)
    throw EncodeError(field, field + ": score outside [0, 1]");
  return static_cast<std::uint8_t>(std::llround(s * 255.0));
}

}  // namespace

std::size_t cpm_size(const Cpm& m) {
  if (m.proposals.size() > 0xffff) throw EncodeError("n_prop", "n_prop: proposal count exceeds u16");
  if (m.keypoints.coords.size() > 0xffff) throw EncodeError("n_kpts", "n_kpts: keypoint count exceeds u16");
  if (m.correction_points.size() > 0xffff) throw EncodeError("n_corr", "n_corr: correction point count exceeds u16");
  if (m.keypoints.n_ch < 0 || m.keypoints.n_ch > 255) throw EncodeError("n_ch", "n_ch: channel count exceeds u8");
  return kHeaderSize + kProposalSize * m.proposals.size() +
         (6 + static_cast<std::size_t>(m.keypoints.n_ch)) * m.keypoints.coords.size() +
         kCorrectionSize * m.correction_points.size();
}

std::vector<std::uint8_t> encode_cpm(const Cpm& m) {
  std::size_t total = cpm_size(m);
  const std::size_t n_kpts = m.keypoints.coords.size();
  const int n_ch = m.keypoints.n_ch;
  if (m.keypoints.features.size() != n_kpts * static_cast<std::size_t>(n_ch))
    throw EncodeError("features", "features: size is not n_kpts * n_ch");
  if (!std::isfinite(m.pose.x) || !std::isfinite(m.pose.y) || !std::isfinite(m.pose.yaw))
    throw EncodeError("pose", "pose: non-finite field");

  float feat_offset = 0.0f;
  float feat_scale = 0.0f;
  if (!m.keypoints.features.empty()) {
    float lo = m.keypoints.features[0], hi = m.keypoints.features[0];
    for (float f : m.keypoints.features) {
      if (!std::isfinite(f)) throw EncodeError("features", "features: non-finite value");
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
    feat_offset = lo;
    double spread = static_cast<double>(hi) - static_cast<double>(lo);
    feat_scale = spread > 0.0 ? static_cast<float>(spread / 255.0) : 0.0f;
  }

  Writer w;
  w.out.reserve(total);
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kVersion);
  w.u32(m.sender_id);
  w.f32(static_cast<float>(m.pose.x));
  w.f32(static_cast<float>(m.pose.y));
  w.f32(static_cast<float>(m.pose.yaw));
  w.u16(static_cast<std::uint16_t>(m.proposals.size()));
  w.u16(static_cast<std::uint16_t>(n_kpts));
  w.u16(static_cast<std::uint16_t>(m.correction_points.size()));
  w.u8(static_cast<std::uint8_t>(n_ch));
  w.f32(feat_offset);
  w.f32(feat_scale);

  for (std::size_t i = 0; i < m.proposals.size(); ++i) {
    const Detection& d = m.proposals[i];
    const std::string tag = "proposal[" + std::to_string(i) + "]";
    w.i16(quant_pos(d.box.x, tag + ".x"));
    w.i16(quant_pos(d.box.y, tag + ".y"));
    w.i16(quant_pos(d.box.z, tag + ".z"));
    w.i16(quant_pos(d.box.w, tag + ".w"));
    w.i16(quant_pos(d.box.l, tag + ".l"));
    w.i16(quant_pos(d.box.h, tag + ".h"));
    w.i16(quant_yaw(d.box.r, tag + ".r"));
    w.u8(quant_score(d.score, tag + ".score"));
  }

  for (std::size_t i = 0; i < n_kpts; ++i) {
    const Vec3& p = m.keypoints.coords[i];
    const std::string tag = "keypoint[" + std::to_string(i) + "]";
    w.i16(quant_pos(p.x, tag + ".x"));
    w.i16(quant_pos(p.y, tag + ".y"));
    w.i16(quant_pos(p.z, tag + ".z"));
    for (int c = 0; c < n_ch; ++c) {
      double f = m.keypoints.features[i * static_cast<std::size_t>(n_ch) + static_cast<std::size_t>(c)];
      long long b = 0;
      if (feat_scale > 0.0f)
        b = std::llround((f - static_cast<double>(feat_offset)) / static_cast<double>(feat_scale));
      w.u8(static_cast<std::uint8_t>(std::clamp(b, 0ll, 255ll)));
    }
  }

  for (std::size_t i = 0; i < m.correction_points.size(); ++i) {
    const LandmarkPoint& p = m.correction_points[i];
    const std::string tag = "correction[" + std::to_string(i) + "]";
    w.u8(static_cast<std::uint8_t>(p.cls));
    w.i16(quant_pos(p.x, tag + ".x"));
    w.i16(quant_pos(p.y, tag + ".y"));
  }
  return std::move(w.out);
}

Cpm decode_cpm(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw DecodeError(0, "bad magic");
  r.pos = 4;
  std::uint8_t version = r.u8("version");
  if (version != kVersion)
    throw DecodeError(4, "unsupported version " + std::to_string(version));

  Cpm m;
  m.sender_id = r.u32("sender_id");
  m.pose.x = r.f32("pose.x");
  m.pose.y = r.f32("pose.y");
  m.pose.yaw = r.f32("pose.yaw");
  if (!std::isfinite(m.pose.x) || !std::isfinite(m.pose.y) || !std::isfinite(m.pose.yaw))
    throw DecodeError(9, "non-finite pose");
  std::uint16_t n_prop = r.u16("n_prop");
  std::uint16_t n_kpts = r.u16("n_kpts");
  std::uint16_t n_corr = r.u16("n_corr");
  std::uint8_t n_ch = r.u8("n_ch");
  std::size_t scale_pos = r.pos + 4;
  float feat_offset = r.f32("feat_offset");
  float feat_scale = r.f32("feat_scale");
  if (!std::isfinite(feat_offset) || !std::isfinite(feat_scale) || feat_scale < 0.0f)
    throw DecodeError(scale_pos, "invalid feature scale");

  m.proposals.reserve(n_prop);
  for (std::uint16_t i = 0; i < n_prop; ++i) {
    Detection d;
    d.box.x = r.i16("proposal") * kPosQuantum;
    d.box.y = r.i16("proposal") * kPosQuantum;
    d.box.z = r.i16("proposal") * kPosQuantum;
    d.box.w = r.i16("proposal") * kPosQuantum;
    d.box.l = r.i16("proposal") * kPosQuantum;
    d.box.h = r.i16("proposal") * kPosQuantum;
    d.box.r = normalize_angle(r.i16("proposal") * kYawQuantum);
    d.score = r.u8("proposal") / 255.0;
    m.proposals.push_back(d);
  }

  m.keypoints.n_ch = n_ch;
  m.keypoints.coords.reserve(n_kpts);
  m.keypoints.features.reserve(static_cast<std::size_t>(n_kpts) * n_ch);
  for (std::uint16_t i = 0; i < n_kpts; ++i) {
    Vec3 p;
    p.x = r.i16("keypoint") * kPosQuantum;
    p.y = r.i16("keypoint") * kPosQuantum;
    p.z = r.i16("keypoint") * kPosQuantum;
    m.keypoints.coords.push_back(p);
    for (std::uint8_t c = 0; c < n_ch; ++c) {
      std::uint8_t b = r.u8("keypoint feature");
      m.keypoints.features.push_back(static_cast<float>(
          static_cast<double>(feat_offset) + b * static_cast<double>(feat_scale)));
    }
  }

  m.correction_points.reserve(n_corr);
  for (std::uint16_t i = 0; i < n_corr; ++i) {
    std::size_t cls_pos = r.pos;
    std::uint8_t cls = r.u8("correction point");
    if (cls > 2) throw DecodeError(cls_pos, "unknown landmark class " + std::to_string(cls));
    LandmarkPoint p;
    p.cls = static_cast<LandmarkClass>(cls);
    p.x = r.i16("correction point") * kPosQuantum;
    p.y = r.i16("correction point") * kPosQuantum;
    m.correction_points.push_back(p);
  }

  if (r.pos != bytes.size())
    throw DecodeError(r.pos, "trailing bytes after message");
  return m;
}

std::size_t gridmap_size_dense(const GridMapPayload& g) {
  return 16 + static_cast<std::size_t>(g.width_cells) * static_cast<std::size_t>(g.height_cells) *
                  static_cast<std::size_t>(g.n_ch);
}

std::size_t gridmap_size_sparse(const GridMapPayload& g) {
  std::size_t cell_values = static_cast<std::size_t>(g.n_ch);
  std::size_t nnz = 0;
  if (cell_values > 0) {
    std::size_t n_cells = static_cast<std::size_t>(g.width_cells) * static_cast<std::size_t>(g.height_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
      for (std::size_t k = 0; k < cell_values; ++k) {
        if (g.values[c * cell_values + k] != 0.0f) {
          ++nnz;
          break;
        }
      }
    }
  }
  return 16 + nnz * (4 + cell_values);
}

GridMapPayload gridmap_equivalent(const Cpm& m, double range, double cell_size) {
  if (!(range > 0.0) || !(cell_size > 0.0))
    throw std::invalid_argument("gridmap_equivalent: non-positive range or cell size");
  GridMapPayload g;
  int n = static_cast<int>(std::ceil(2.0 * range / cell_size));
  g.width_cells = n;
  g.height_cells = n;
  g.n_ch = m.keypoints.n_ch;
  g.values.assign(static_cast<std::size_t>(n) * n * std::max(g.n_ch, 0), 0.0f);
  for (const Vec3& p : m.keypoints.coords) {
    int ix = static_cast<int>(std::floor((p.x + range) / cell_size));
    int iy = static_cast<int>(std::floor((p.y + range) / cell_size));
    if (ix < 0 || ix >= n || iy < 0 || iy >= n) continue;
    std::size_t cell = static_cast<std::size_t>(iy) * n + static_cast<std::size_t>(ix);
    for (int c = 0; c < g.n_ch; ++c) g.values[cell * g.n_ch + static_cast<std::size_t>(c)] = 1.0f;
  }
  return g;
}

void write_cpm_container(const std::filesystem::path& path, const std::vector<Cpm>& cpms) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const Cpm& m : cpms) {
    std::vector<std::uint8_t> bytes = encode_cpm(m);
    std::uint32_t len = static_cast<std::uint32_t>(bytes.size());
    std::uint8_t hdr[4];
    for (int i = 0; i < 4; ++i) hdr[i] = static_cast<std::uint8_t>((len >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(hdr), 4);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<Cpm> read_cpm_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  std::vector<Cpm> out;
  std::size_t pos = 0;
  while (pos < data.size()) {
    if (pos + 4 > data.size()) throw DecodeError(pos, "truncated record length");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    if (pos + len > data.size()) throw DecodeError(pos, "truncated record");
    std::vector<std::uint8_t> rec(data.begin() + static_cast<std::ptrdiff_t>(pos),
                                  data.begin() + static_cast<std::ptrdiff_t>(pos + len));
    try {
      out.push_back(decode_cpm(rec));
    } catch (const DecodeError& e) {
      throw DecodeError(pos + e.offset(), "record " + std::to_string(out.size()) + ": " + e.what());
    }
    pos += len;
  }
  return out;
}

}  // namespace coopfuse
