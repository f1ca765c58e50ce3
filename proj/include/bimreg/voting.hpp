#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "bimreg/descriptor.hpp"
#include "bimreg/geometry.hpp"

namespace bimreg {

struct CellIndex {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iyaw = 0;
  auto operator<=>(const CellIndex&) const = default;
};

struct CellIndexHash {
  std::size_t operator()(const CellIndex& c) const noexcept;
};

/// Vote count plus the running sum of the continuous poses that fell in it.
struct VoteCell {
  std::uint32_t votes = 0;
  double sum_x = 0.0;
  double sum_y = 0.0;
  double sum_cos = 0.0;
  double sum_sin = 0.0;

  void add(const Se2Pose& p);
  void merge(const VoteCell& other);
  Se2Pose mean() const;
};

/// Sparse SE(2) Hough accumulator. The yaw axis is circular.
class VoteGrid {
 public:
  VoteGrid(double xy_res_m, double yaw_res_rad);

  double xy_res() const { return xy_res_; }
  double yaw_res() const { return yaw_res_; }
  std::int32_t yaw_bins() const { return yaw_bins_; }

  CellIndex cell_of(const Se2Pose& pose) const;
  Se2Pose cell_center(const CellIndex& cell) const;
  /// Neighbour index with the yaw offset wrapped around.
  CellIndex offset(const CellIndex& cell, int dx, int dy, int dyaw) const;

  void add(const Se2Pose& pose);
  /// Cell-wise addition; resolutions must match.
  void merge(const VoteGrid& other);

  const VoteCell* find(const CellIndex& cell) const;
  std::uint32_t votes_at(const CellIndex& cell) const;
  std::size_t cell_count() const { return cells_.size(); }
  std::uint64_t total_votes() const { return total_; }
  bool empty() const { return cells_.empty(); }

  /// Cells sorted by index, for deterministic iteration.
  std::vector<std::pair<CellIndex, VoteCell>> sorted_cells() const;

 private:
  double xy_res_;
  double yaw_res_;
  std::int32_t yaw_bins_;
  std::unordered_map<CellIndex, VoteCell, CellIndexHash> cells_;
  std::uint64_t total_ = 0;
};

struct CastStats {
  std::uint64_t correspondences = 0;
  std::uint64_t accepted = 0;
};

/// Solves each correspondence in closed form and votes for the result when
/// its RMS residual is at most `residual_max_m`.
CastStats cast_votes(std::span<const TripletCorrespondence> correspondences, VoteGrid& grid,
                     double residual_max_m);
/// Streams the correspondences of `src` against `dst` straight into the grid.
CastStats cast_votes(const DescriptorDB& src, const DescriptorDB& dst, VoteGrid& grid,
                     double residual_max_m);
/// Returns true and votes when the correspondence is accepted.
bool cast_vote(const TripletCorrespondence& corr, VoteGrid& grid, double residual_max_m);

struct PoseCandidate {
  Se2Pose pose;
  std::uint32_t votes = 0;  // raw votes in the cluster's cells
  std::uint32_t score = 0;  // best 3x3x3 merged count in the cluster
  std::uint32_t cluster_size = 0;
  CellIndex peak;
};

struct VotingParams {
  std::size_t top_l = 10000;
  std::size_t top_k = 5000;
  std::size_t top_j = 1500;
};

/// Three-stage candidate extraction: top-L cells by own count, top-K of
/// those by 3x3x3 neighbourhood sum, then 26-connected region growing with
/// clusters ranked by their best neighbourhood sum. Throws EmptyGrid.
std::vector<PoseCandidate> hierarchical_vote(const VoteGrid& grid, const VotingParams& params);
std::vector<PoseCandidate> hierarchical_vote(const VoteGrid& grid, std::size_t top_l,
                                             std::size_t top_k, std::size_t top_j);

/// The single cell with the most votes (ties: smallest index).
PoseCandidate vanilla_vote(const VoteGrid& grid);

/// "x y yaw_deg votes" CSV for the given candidates.
void write_candidates_csv(std::ostream& out, std::span<const PoseCandidate> candidates);

}  // namespace bimreg
