#include "bimreg/descriptor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.hpp"
#include "bimreg/error.hpp"

namespace bimreg {

using detail::read_le;
using detail::write_le;

namespace {

constexpr std::array<std::array<int, 3>, 6> kPermutations{{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};

std::int32_t bin_of(double value, double res) {
  return static_cast<std::int32_t>(std::floor(value / res));
}

double angle_to_walls_deg(const Vec2& side, const Corner& anchor) {
  return rad2deg(std::min(acute_angle(side, anchor.wall_a.direction()),
                          acute_angle(side, anchor.wall_b.direction())));
}

}  // namespace

std::size_t DescriptorKeyHash::operator()(const DescriptorKey& key) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::int32_t b : key.bins) {
    h ^= static_cast<std::uint32_t>(b);
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 29;
  }
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 32;
  return static_cast<std::size_t>(h);
}

DescriptorKey quantize(const TriangleDescriptor& d, double side_res,
                       double angle_res_deg) {
  DescriptorKey key;
  for (int i = 0; i < 3; ++i) {
    key.bins[i] = bin_of(d.sides[i], side_res);
    key.bins[3 + i] = bin_of(d.angles_deg[i], angle_res_deg);
  }
  return key;
}

double min_interior_angle_deg(const Point2& a, const Point2& b, const Point2& c) {
  auto angle_at = [](const Point2& p, const Point2& q, const Point2& r) {
    const Vec2 u = q - p, v = r - p;
    const double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0));
  };
  return rad2deg(std::min({angle_at(a, b, c), angle_at(b, c, a), angle_at(c, a, b)}));
}

std::vector<TripletIndex> build_triplets(std::span<const Corner> corners,
                                         double max_side_m, double min_angle_deg) {
  if (!(max_side_m > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "max side length must be positive");
  }
  const std::size_t n = corners.size();
  std::vector<std::vector<std::uint32_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if ((corners[i].position - corners[j].position).norm() <= max_side_m) {
        neighbours[i].push_back(static_cast<std::uint32_t>(j));
      }
    }
  }
  std::vector<TripletIndex> out;
  std::vector<bool> is_neighbour(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t j : neighbours[i]) {
      for (std::uint32_t k : neighbours[j]) is_neighbour[k] = true;
      for (std::uint32_t k : neighbours[i]) {
        if (k <= j || !is_neighbour[k]) continue;
        if (min_interior_angle_deg(corners[i].position, corners[j].position,
                                   corners[k].position) < min_angle_deg) {
          continue;
        }
        out.push_back({static_cast<std::uint32_t>(i), j, k});
      }
      for (std::uint32_t k : neighbours[j]) is_neighbour[k] = false;
    }
  }
  return out;
}

TriangleDescriptor describe_ordered(const Corner& a, const Corner& b, const Corner& c) {
  TriangleDescriptor d;
  const Vec2 ab = b.position - a.position;
  const Vec2 bc = c.position - b.position;
  const Vec2 ac = c.position - a.position;
  d.sides = {ab.norm(), bc.norm(), ac.norm()};
  d.angles_deg = {angle_to_walls_deg(ab, a), angle_to_walls_deg(bc, b),
                  angle_to_walls_deg(ac, c)};
  return d;
}

CanonicalDescriptor make_descriptor(const std::array<Corner, 3>& t) {
  const Point2 &p0 = t[0].position, &p1 = t[1].position, &p2 = t[2].position;
  const double area2 = std::abs((p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x());
  const double longest = std::max({(p1 - p0).norm(), (p2 - p1).norm(), (p2 - p0).norm()});
  if (!(longest > 1e-9) || area2 <= 1e-12 * longest * longest) {
    throw Error(ErrorCode::kDegenerateTriplet, "collinear or coincident corners");
  }
  // Side opposite vertex i.
  const std::array<double, 3> opposite{(p2 - p1).norm(), (p2 - p0).norm(), (p1 - p0).norm()};
  std::array<int, 3> by_side{0, 1, 2};
  std::stable_sort(by_side.begin(), by_side.end(),
                   [&](int x, int y) { return opposite[x] < opposite[y]; });
  // |AB| shortest -> C opposite it; |AC| longest -> B opposite it.
  CanonicalDescriptor out;
  out.order = {by_side[1], by_side[2], by_side[0]};
  out.descriptor = describe_ordered(t[out.order[0]], t[out.order[1]], t[out.order[2]]);
  return out;
}

std::vector<std::array<int, 3>> admissible_orders(const std::array<Corner, 3>& t,
                                                  double side_res) {
  const CanonicalDescriptor canonical = make_descriptor(t);
  std::vector<std::array<int, 3>> out{canonical.order};
  for (const auto& perm : kPermutations) {
    if (perm == canonical.order) continue;
    const Point2 &a = t[perm[0]].position, &b = t[perm[1]].position, &c = t[perm[2]].position;
    const std::int32_t ab = bin_of((b - a).norm(), side_res);
    const std::int32_t bc = bin_of((c - b).norm(), side_res);
    const std::int32_t ac = bin_of((c - a).norm(), side_res);
    if (ab <= bc && bc <= ac) out.push_back(perm);
  }
  return out;
}

DescriptorDB::DescriptorDB(double side_res_m, double angle_res_deg, DbSource source,
                           std::string floor_id, std::vector<Corner> corners,
                           std::vector<std::pair<DescriptorKey, TripletIndex>> entries)
    : side_res_(side_res_m),
      angle_res_deg_(angle_res_deg),
      source_(source),
      floor_id_(std::move(floor_id)),
      corners_(std::move(corners)) {
  if (!(side_res_m > 0.0) || !(angle_res_deg > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "descriptor resolutions must be positive");
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  triplets_.reserve(entries.size());
  offsets_.push_back(0);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i == 0 || entries[i].first != entries[i - 1].first) {
      if (i != 0) offsets_.push_back(static_cast<std::uint32_t>(triplets_.size()));
      keys_.push_back(entries[i].first);
    }
    triplets_.push_back(entries[i].second);
  }
  if (!keys_.empty()) offsets_.push_back(static_cast<std::uint32_t>(triplets_.size()));

  const std::size_t capacity = std::bit_ceil(std::max<std::size_t>(16, keys_.size() * 2));
  slots_.assign(capacity, Slot{});
  mask_ = capacity - 1;
  const DescriptorKeyHash hash;
  for (std::size_t k = 0; k < keys_.size(); ++k) {
    std::size_t s = hash(keys_[k]) & mask_;
    while (slots_[s].used) s = (s + 1) & mask_;
    slots_[s] = Slot{keys_[k], static_cast<std::uint32_t>(k), true};
  }
}

DescriptorDB::Bucket DescriptorDB::bucket_at(std::size_t key_index) const {
  return {triplets_.data() + offsets_[key_index],
          offsets_[key_index + 1] - offsets_[key_index]};
}

std::size_t DescriptorDB::unique_triplet_count() const {
  std::vector<TripletIndex> sorted = triplets_;
  for (TripletIndex& t : sorted) std::sort(t.begin(), t.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

DescriptorDB::Bucket DescriptorDB::find(const DescriptorKey& key) const {
  if (keys_.empty()) return {};
  std::size_t s = DescriptorKeyHash{}(key) & mask_;
  while (slots_[s].used) {
    if (slots_[s].key == key) return bucket_at(slots_[s].key_index);
    s = (s + 1) & mask_;
  }
  return {};
}

bool operator==(const DescriptorDB& a, const DescriptorDB& b) {
  if (a.side_res_ != b.side_res_ || a.angle_res_deg_ != b.angle_res_deg_ ||
      a.source_ != b.source_ || a.floor_id_ != b.floor_id_ ||
      a.keys_ != b.keys_ || a.offsets_ != b.offsets_ || a.triplets_ != b.triplets_ ||
      a.corners_.size() != b.corners_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.corners_.size(); ++i) {
    const Corner &x = a.corners_[i], &y = b.corners_[i];
    if (x.position != y.position || !(x.wall_a == y.wall_a) || !(x.wall_b == y.wall_b)) {
      return false;
    }
  }
  return true;
}

DescriptorDB build_db(std::span<const Corner> corners, const DbParams& params,
                      DbSource source, std::string floor_id) {
  if (!(params.side_res_m > 0.0) || !(params.angle_res_deg > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "descriptor resolutions must be positive");
  }
  const auto triplets = build_triplets(corners, params.max_side_m, params.min_angle_deg);
  std::vector<std::pair<DescriptorKey, TripletIndex>> entries;
  entries.reserve(triplets.size() * 2);
  for (const TripletIndex& t : triplets) {
    const std::array<Corner, 3> tri{corners[t[0]], corners[t[1]], corners[t[2]]};
    for (const auto& order : admissible_orders(tri, params.side_res_m)) {
      const TriangleDescriptor d =
          describe_ordered(tri[order[0]], tri[order[1]], tri[order[2]]);
      entries.emplace_back(quantize(d, params.side_res_m, params.angle_res_deg),
                           TripletIndex{t[order[0]], t[order[1]], t[order[2]]});
    }
  }
  return DescriptorDB(params.side_res_m, params.angle_res_deg, source, std::move(floor_id),
                      std::vector<Corner>(corners.begin(), corners.end()),
                      std::move(entries));
}

DescriptorDB build_db(std::span<const Corner> corners, double max_side_m,
                      double side_res_m, double angle_res_deg) {
  DbParams params;
  params.max_side_m = max_side_m;
  params.side_res_m = side_res_m;
  params.angle_res_deg = angle_res_deg;
  return build_db(corners, params);
}

void query_correspondences(const DescriptorDB& src, const DescriptorDB& dst,
                           const std::function<void(const TripletCorrespondence&)>& visit) {
  if (src.side_res() != dst.side_res() || src.angle_res_deg() != dst.angle_res_deg()) {
    throw Error(ErrorCode::kResolutionMismatch,
                "databases were built with different quantisation");
  }
  const auto& sc = src.corners();
  const auto& dc = dst.corners();
  TripletCorrespondence corr;
  for (std::size_t k = 0; k < src.key_count(); ++k) {
    const auto matches = dst.find(src.keys()[k]);
    if (matches.empty()) continue;
    for (const TripletIndex& s : src.bucket_at(k)) {
      for (const TripletIndex& d : matches) {
        for (int v = 0; v < 3; ++v) {
          corr.src[v] = &sc[s[v]];
          corr.dst[v] = &dc[d[v]];
        }
        visit(corr);
      }
    }
  }
}

std::vector<TripletCorrespondence> query_correspondences(const DescriptorDB& src,
                                                         const DescriptorDB& dst) {
  std::vector<TripletCorrespondence> out;
  query_correspondences(src, dst, [&](const TripletCorrespondence& c) { out.push_back(c); });
  return out;
}

namespace {

void write_point(std::ostream& out, const Point2& p) {
  write_le<double>(out, p.x());
  write_le<double>(out, p.y());
}

Point2 read_point(std::istream& in) {
  const double x = read_le<double>(in, "corner");
  const double y = read_le<double>(in, "corner");
  return {x, y};
}

}  // namespace

void serialize_db(const DescriptorDB& db, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write("L2BD", 4);
  write_le<std::uint32_t>(out, kDbVersion);
  write_le<double>(out, db.side_res());
  write_le<double>(out, db.angle_res_deg());
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(db.source()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(db.floor_id().size()));
  out.write(db.floor_id().data(), static_cast<std::streamsize>(db.floor_id().size()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(db.corners().size()));
  for (const Corner& c : db.corners()) {
    write_point(out, c.position);
    write_point(out, c.wall_a.p0());
    write_point(out, c.wall_a.p1());
    write_point(out, c.wall_b.p0());
    write_point(out, c.wall_b.p1());
  }
  write_le<std::uint64_t>(out, db.key_count());
  for (std::size_t k = 0; k < db.key_count(); ++k) {
    for (std::int32_t b : db.keys()[k].bins) write_le<std::int32_t>(out, b);
    const auto bucket = db.bucket_at(k);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(bucket.size));
    for (const TripletIndex& t : bucket) {
      for (std::uint32_t v : t) write_le<std::uint32_t>(out, v);
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

DescriptorDB deserialize_db(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "L2BD", 4) != 0) {
    throw Error(ErrorCode::kVersionMismatch, path.string() + " is not a descriptor database");
  }
  const auto version = read_le<std::uint32_t>(in, "version");
  if (version != kDbVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "unsupported database version " + std::to_string(version));
  }
  const double side_res = read_le<double>(in, "side resolution");
  const double angle_res = read_le<double>(in, "angle resolution");
  const auto source = read_le<std::uint32_t>(in, "source");
  if (source > 1) throw Error(ErrorCode::kParseError, "invalid database source");
  const auto id_len = read_le<std::uint32_t>(in, "floor id");
  if (id_len > 4096) throw Error(ErrorCode::kParseError, "floor id too long");
  std::string floor_id(id_len, '\0');
  if (!in.read(floor_id.data(), id_len)) throw Error(ErrorCode::kParseError, "truncated floor id");

  const auto n_corners = read_le<std::uint32_t>(in, "corner count");
  std::vector<Corner> corners;
  corners.reserve(n_corners);
  for (std::uint32_t i = 0; i < n_corners; ++i) {
    Corner c;
    c.position = read_point(in);
    const Point2 a0 = read_point(in), a1 = read_point(in);
    const Point2 b0 = read_point(in), b1 = read_point(in);
    try {
      c.wall_a = LineSegment2(a0, a1);
      c.wall_b = LineSegment2(b0, b1);
    } catch (const Error&) {
      throw Error(ErrorCode::kParseError, "corner with a degenerate wall");
    }
    corners.push_back(c);
  }

  const auto n_keys = read_le<std::uint64_t>(in, "key count");
  std::vector<std::pair<DescriptorKey, TripletIndex>> entries;
  for (std::uint64_t k = 0; k < n_keys; ++k) {
    DescriptorKey key;
    for (auto& b : key.bins) b = read_le<std::int32_t>(in, "key");
    const auto count = read_le<std::uint32_t>(in, "bucket size");
    if (count == 0) throw Error(ErrorCode::kParseError, "empty bucket");
    for (std::uint32_t t = 0; t < count; ++t) {
      TripletIndex idx;
      for (auto& v : idx) {
        v = read_le<std::uint32_t>(in, "triplet");
        if (v >= n_corners) throw Error(ErrorCode::kParseError, "corner index out of range");
      }
      entries.emplace_back(key, idx);
    }
  }
  return DescriptorDB(side_res, angle_res, static_cast<DbSource>(source), std::move(floor_id),
                      std::move(corners), std::move(entries));
}

}  // namespace bimreg
