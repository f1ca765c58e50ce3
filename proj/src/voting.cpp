#include "bimreg/voting.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <unordered_set>

#include "bimreg/error.hpp"

namespace bimreg {

std::size_t CellIndexHash::operator()(const CellIndex& c) const noexcept {
  std::uint64_t h = static_cast<std::uint32_t>(c.ix);
  h = h * 0x9e3779b97f4a7c15ULL + static_cast<std::uint32_t>(c.iy);
  h = h * 0x9e3779b97f4a7c15ULL + static_cast<std::uint32_t>(c.iyaw);
  h ^= h >> 31;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 29;
  return static_cast<std::size_t>(h);
}

void VoteCell::add(const Se2Pose& p) {
  ++votes;
  sum_x += p.x;
  sum_y += p.y;
  sum_cos += std::cos(p.yaw);
  sum_sin += std::sin(p.yaw);
}

void VoteCell::merge(const VoteCell& o) {
  votes += o.votes;
  sum_x += o.sum_x;
  sum_y += o.sum_y;
  sum_cos += o.sum_cos;
  sum_sin += o.sum_sin;
}

Se2Pose VoteCell::mean() const {
  const double n = std::max<double>(votes, 1.0);
  return {sum_x / n, sum_y / n, std::atan2(sum_sin, sum_cos)};
}

VoteGrid::VoteGrid(double xy_res_m, double yaw_res_rad)
    : xy_res_(xy_res_m), yaw_res_(yaw_res_rad) {
  if (!(xy_res_m > 0.0) || !(yaw_res_rad > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "vote grid resolutions must be positive");
  }
  yaw_bins_ = static_cast<std::int32_t>(std::ceil(2.0 * kPi / yaw_res_rad - 1e-9));
}

CellIndex VoteGrid::cell_of(const Se2Pose& pose) const {
  CellIndex c;
  c.ix = static_cast<std::int32_t>(std::floor(pose.x / xy_res_));
  c.iy = static_cast<std::int32_t>(std::floor(pose.y / xy_res_));
  c.iyaw = std::clamp(static_cast<std::int32_t>(std::floor((pose.yaw + kPi) / yaw_res_)), 0,
                      yaw_bins_ - 1);
  return c;
}

Se2Pose VoteGrid::cell_center(const CellIndex& c) const {
  const double yaw_lo = c.iyaw * yaw_res_ - kPi;
  const double yaw_hi = std::min((c.iyaw + 1) * yaw_res_ - kPi, kPi);
  return {(c.ix + 0.5) * xy_res_, (c.iy + 0.5) * xy_res_, 0.5 * (yaw_lo + yaw_hi)};
}

CellIndex VoteGrid::offset(const CellIndex& c, int dx, int dy, int dyaw) const {
  std::int32_t yaw = (c.iyaw + dyaw) % yaw_bins_;
  if (yaw < 0) yaw += yaw_bins_;
  return {c.ix + dx, c.iy + dy, yaw};
}

void VoteGrid::add(const Se2Pose& pose) {
  cells_[cell_of(pose)].add(pose);
  ++total_;
}

void VoteGrid::merge(const VoteGrid& other) {
  if (other.xy_res_ != xy_res_ || other.yaw_res_ != yaw_res_) {
    throw Error(ErrorCode::kInvalidArgument, "cannot merge grids of different resolution");
  }
  for (const auto& [idx, cell] : other.cells_) cells_[idx].merge(cell);
  total_ += other.total_;
}

const VoteCell* VoteGrid::find(const CellIndex& cell) const {
  const auto it = cells_.find(cell);
  return it == cells_.end() ? nullptr : &it->second;
}

std::uint32_t VoteGrid::votes_at(const CellIndex& cell) const {
  const VoteCell* c = find(cell);
  return c ? c->votes : 0;
}

std::vector<std::pair<CellIndex, VoteCell>> VoteGrid::sorted_cells() const {
  std::vector<std::pair<CellIndex, VoteCell>> out(cells_.begin(), cells_.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

bool cast_vote(const TripletCorrespondence& corr, VoteGrid& grid, double residual_max_m) {
  const std::array<Point2, 3> src{corr.src[0]->position, corr.src[1]->position,
                                  corr.src[2]->position};
  const std::array<Point2, 3> dst{corr.dst[0]->position, corr.dst[1]->position,
                                  corr.dst[2]->position};
  Se2Fit fit;
  try {
    fit = solve_se2(src, dst);
  } catch (const Error&) {
    return false;
  }
  if (!(fit.rms_residual <= residual_max_m)) return false;
  grid.add(fit.pose);
  return true;
}

CastStats cast_votes(std::span<const TripletCorrespondence> correspondences, VoteGrid& grid,
                     double residual_max_m) {
  CastStats stats;
  for (const TripletCorrespondence& c : correspondences) {
    ++stats.correspondences;
    if (cast_vote(c, grid, residual_max_m)) ++stats.accepted;
  }
  return stats;
}

CastStats cast_votes(const DescriptorDB& src, const DescriptorDB& dst, VoteGrid& grid,
                     double residual_max_m) {
  CastStats stats;
  query_correspondences(src, dst, [&](const TripletCorrespondence& c) {
    ++stats.correspondences;
    if (cast_vote(c, grid, residual_max_m)) ++stats.accepted;
  });
  return stats;
}

namespace {

std::vector<CellIndex> neighbourhood(const VoteGrid& grid, const CellIndex& c,
                                     bool include_self) {
  std::vector<CellIndex> out;
  out.reserve(27);
  for (int dyaw = -1; dyaw <= 1; ++dyaw) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (!include_self && dx == 0 && dy == 0 && dyaw == 0) continue;
        out.push_back(grid.offset(c, dx, dy, dyaw));
      }
    }
  }
  // Tiny yaw axes wrap onto themselves.
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (!include_self) std::erase(out, c);
  return out;
}

struct Scored {
  CellIndex cell;
  std::uint32_t count;
};

}  // namespace

std::vector<PoseCandidate> hierarchical_vote(const VoteGrid& grid, const VotingParams& params) {
  if (grid.empty()) throw Error(ErrorCode::kEmptyGrid, "no votes were cast");
  if (!(params.top_l >= params.top_k && params.top_k >= params.top_j && params.top_j >= 1)) {
    throw Error(ErrorCode::kInvalidArgument, "voting requires L >= K >= J >= 1");
  }
  auto ranked_before = [](const Scored& a, const Scored& b) {
    return a.count != b.count ? a.count > b.count : a.cell < b.cell;
  };

  // 1. Broad filtering on each cell's own count.
  std::vector<Scored> cells;
  cells.reserve(grid.cell_count());
  for (const auto& [idx, cell] : grid.sorted_cells()) cells.push_back({idx, cell.votes});
  const std::size_t l = std::min(params.top_l, cells.size());
  std::partial_sort(cells.begin(), cells.begin() + l, cells.end(), ranked_before);
  cells.resize(l);

  // 2. Neighbourhood refinement over the full grid.
  for (Scored& s : cells) {
    std::uint32_t sum = 0;
    for (const CellIndex& n : neighbourhood(grid, s.cell, true)) sum += grid.votes_at(n);
    s.count = sum;
  }
  const std::size_t k = std::min(params.top_k, cells.size());
  std::partial_sort(cells.begin(), cells.begin() + k, cells.end(), ranked_before);
  cells.resize(k);

  // 3. Region growing; `cells` is now ordered best-first, so each cluster is
  // seeded from its own peak and clusters come out in rank order.
  std::unordered_map<CellIndex, std::size_t, CellIndexHash> member;
  for (std::size_t i = 0; i < cells.size(); ++i) member.emplace(cells[i].cell, i);
  std::vector<bool> visited(cells.size(), false);
  std::vector<PoseCandidate> out;
  for (std::size_t seed = 0; seed < cells.size() && out.size() < params.top_j; ++seed) {
    if (visited[seed]) continue;
    VoteCell acc;
    std::uint32_t size = 0;
    std::deque<std::size_t> queue{seed};
    visited[seed] = true;
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      ++size;
      if (const VoteCell* c = grid.find(cells[i].cell)) acc.merge(*c);
      for (const CellIndex& n : neighbourhood(grid, cells[i].cell, false)) {
        const auto it = member.find(n);
        if (it != member.end() && !visited[it->second]) {
          visited[it->second] = true;
          queue.push_back(it->second);
        }
      }
    }
    PoseCandidate cand;
    cand.pose = acc.mean();
    cand.votes = acc.votes;
    cand.score = cells[seed].count;
    cand.cluster_size = size;
    cand.peak = cells[seed].cell;
    out.push_back(cand);
  }
  return out;
}

std::vector<PoseCandidate> hierarchical_vote(const VoteGrid& grid, std::size_t top_l,
                                             std::size_t top_k, std::size_t top_j) {
  return hierarchical_vote(grid, VotingParams{top_l, top_k, top_j});
}

PoseCandidate vanilla_vote(const VoteGrid& grid) {
  if (grid.empty()) throw Error(ErrorCode::kEmptyGrid, "no votes were cast");
  const auto cells = grid.sorted_cells();
  const auto* best = &cells.front();
  for (const auto& c : cells) {
    if (c.second.votes > best->second.votes) best = &c;
  }
  PoseCandidate cand;
  cand.pose = best->second.mean();
  cand.votes = best->second.votes;
  cand.score = best->second.votes;
  cand.cluster_size = 1;
  cand.peak = best->first;
  return cand;
}

void write_candidates_csv(std::ostream& out, std::span<const PoseCandidate> candidates) {
  out << "x,y,yaw_deg,votes\n";
  for (const PoseCandidate& c : candidates) {
    out << c.pose.x << ',' << c.pose.y << ',' << rad2deg(c.pose.yaw) << ',' << c.votes << '\n';
  }
}

}  // namespace bimreg
