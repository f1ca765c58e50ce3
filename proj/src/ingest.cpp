#include "bimreg/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "binary_io.hpp"
#include "bimreg/error.hpp"

namespace bimreg {

namespace {

using detail::read_le;
using detail::write_le;
using VoxelKey = std::tuple<std::int64_t, std::int64_t, std::int64_t>;

VoxelKey voxel_of(const Point3& p, double size) {
  return {static_cast<std::int64_t>(std::floor(p.x() / size)),
          static_cast<std::int64_t>(std::floor(p.y() / size)),
          static_cast<std::int64_t>(std::floor(p.z() / size))};
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

void ScanSequence::validate() const {
  if (scans.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "scan sequence is empty");
  }
  if (scans.size() != poses.size()) {
    throw Error(ErrorCode::kInvalidArgument, "scan and pose counts differ");
  }
  for (std::size_t i = 1; i < scans.size(); ++i) {
    if (!(scans[i].timestamp > scans[i - 1].timestamp)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "scan timestamps must be strictly increasing");
    }
  }
  if (std::abs(gravity.norm() - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidArgument, "gravity must be a unit vector");
  }
}

std::vector<Point3> voxel_downsample(std::span<const Point3> points,
                                     double voxel_size) {
  if (!(voxel_size > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "voxel size must be positive");
  }
  std::map<VoxelKey, std::pair<Point3, std::size_t>> voxels;
  for (const Point3& p : points) {
    auto& [sum, count] = voxels.try_emplace(voxel_of(p, voxel_size),
                                            Point3::Zero(), 0).first->second;
    sum += p;
    ++count;
  }
  std::vector<Point3> out;
  out.reserve(voxels.size());
  for (const auto& [key, acc] : voxels) {
    out.push_back(acc.first / static_cast<double>(acc.second));
  }
  return out;
}

Submap accumulate_submap(const ScanSequence& seq, double voxel_size,
                         double min_travel_m) {
  seq.validate();
  if (!(voxel_size > 0.0) || !(min_travel_m > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "voxel size and travel distance must be positive");
  }
  double travelled = 0.0;
  std::size_t used = seq.scans.size();
  for (std::size_t k = 1; k < seq.poses.size(); ++k) {
    travelled += (seq.poses[k].translation() - seq.poses[k - 1].translation()).norm();
    if (travelled >= min_travel_m) {
      used = k + 1;
      break;
    }
  }
  if (travelled < min_travel_m) {
    throw Error(ErrorCode::kInsufficientTravel,
                "trajectory covers " + format_double(travelled) + " m, need " +
                    format_double(min_travel_m) + " m");
  }

  std::vector<Point3> world;
  for (std::size_t k = 0; k < used; ++k) {
    for (const Point3& p : seq.scans[k].points) {
      world.push_back(seq.poses[k] * p);
    }
  }
  Submap submap;
  submap.points = voxel_downsample(world, voxel_size);
  submap.gravity = seq.gravity;
  submap.source_span_m = travelled;
  return submap;
}

void save_submap(const Submap& submap, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write("L2B1", 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(submap.points.size()));
  for (int i = 0; i < 3; ++i) write_le<float>(out, static_cast<float>(submap.gravity[i]));
  for (const Point3& p : submap.points) {
    for (int i = 0; i < 3; ++i) write_le<float>(out, static_cast<float>(p[i]));
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

Submap load_submap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "L2B1", 4) != 0) {
    throw Error(ErrorCode::kVersionMismatch, path.string() + " is not an L2B1 point cloud");
  }
  const auto count = read_le<std::uint32_t>(in, "point count");
  Submap submap;
  for (int i = 0; i < 3; ++i) submap.gravity[i] = read_le<float>(in, "gravity");
  submap.points.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    Point3 p;
    for (int i = 0; i < 3; ++i) p[i] = read_le<float>(in, "points");
    submap.points.push_back(p);
  }
  return submap;
}

std::vector<WallModel> parse_building(std::istream& in) {
  std::vector<WallModel> floors;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view row(line);
    if (const auto hash = row.find('#'); hash != std::string_view::npos) {
      row = row.substr(0, hash);
    }
    row = trim(row);
    if (row.empty()) continue;
    const auto tokens = split_ws(row);
    if (tokens[0] == "floor") {
      if (tokens.size() != 2) fail("expected 'floor <id>'");
      std::string id(tokens[1]);
      if (!seen.insert(id).second) fail("duplicate floor id '" + id + "'");
      floors.push_back(WallModel{id, {}, {}});
      continue;
    }
    if (tokens.size() != 4) fail("expected 'x1 y1 x2 y2', got '" + std::string(row) + "'");
    double v[4];
    for (int i = 0; i < 4; ++i) {
      const auto tok = tokens[i];
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v[i]);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() ||
          !std::isfinite(v[i])) {
        fail("invalid number '" + std::string(tok) + "'");
      }
    }
    if (floors.empty()) {
      seen.insert("0");
      floors.push_back(WallModel{"0", {}, {}});
    }
    const Point2 a(v[0], v[1]), b(v[2], v[3]);
    if (a == b) fail("zero-length wall");
    floors.back().walls.emplace_back(a, b);
  }
  if (floors.empty()) throw Error(ErrorCode::kEmptyModel, "no walls in model");
  for (const WallModel& f : floors) {
    if (f.walls.empty()) {
      throw Error(ErrorCode::kEmptyModel, "floor '" + f.floor_id + "' has no walls");
    }
  }
  return floors;
}

std::vector<WallModel> load_building(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return parse_building(in);
}

void write_building(std::ostream& out, std::span<const WallModel> floors) {
  out << "# x1 y1 x2 y2 (meters)\n";
  for (const WallModel& f : floors) {
    out << "floor " << f.floor_id << '\n';
    for (const LineSegment2& w : f.walls) {
      out << format_double(w.p0().x()) << ' ' << format_double(w.p0().y()) << ' '
          << format_double(w.p1().x()) << ' ' << format_double(w.p1().y()) << '\n';
    }
  }
}

void save_building(std::span<const WallModel> floors,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  write_building(out, floors);
}

WallModel load_wall_model(const std::filesystem::path& path,
                          const std::string& floor_id) {
  auto floors = load_building(path);
  if (floor_id.empty()) return std::move(floors.front());
  for (WallModel& f : floors) {
    if (f.floor_id == floor_id) return std::move(f);
  }
  throw Error(ErrorCode::kEmptyModel,
              "floor '" + floor_id + "' not found in " + path.string());
}

void save_wall_model(const WallModel& model, const std::filesystem::path& path) {
  save_building(std::span<const WallModel>(&model, 1), path);
}

void save_pose(const Se2Pose& pose, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << format_double(pose.x) << ' ' << format_double(pose.y) << ' '
      << format_double(pose.yaw) << '\n';
}

Se2Pose load_pose(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  const auto tokens = split_ws(trim(line));
  if (tokens.size() != 3) {
    throw Error(ErrorCode::kParseError, path.string() + ": expected 'x y yaw'");
  }
  double v[3];
  for (int i = 0; i < 3; ++i) {
    const auto res = std::from_chars(tokens[i].data(),
                                     tokens[i].data() + tokens[i].size(), v[i]);
    if (res.ec != std::errc()) {
      throw Error(ErrorCode::kParseError, path.string() + ": invalid number");
    }
  }
  return {v[0], v[1], v[2]};
}

void write_deviation_log(std::ostream& out, const DeviationLog& log) {
  auto list = [&](const char* name, const std::vector<std::size_t>& ids) {
    out << name;
    for (std::size_t id : ids) out << ' ' << id;
    out << '\n';
  };
  list("visible_walls", log.visible_walls);
  list("dropped_walls", log.dropped_walls);
  list("biased_walls", log.biased_walls);
  out << "wall_points " << log.wall_points << '\n'
      << "ground_points " << log.ground_points << '\n'
      << "clutter_points " << log.clutter_points << '\n';
  for (const LineSegment2& c : log.clutter) {
    out << "clutter " << format_double(c.p0().x()) << ' ' << format_double(c.p0().y())
        << ' ' << format_double(c.p1().x()) << ' ' << format_double(c.p1().y()) << '\n';
  }
}

}  // namespace bimreg
