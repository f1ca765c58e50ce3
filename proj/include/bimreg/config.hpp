#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "bimreg/descriptor.hpp"
#include "bimreg/line_corner.hpp"
#include "bimreg/plane_seg.hpp"
#include "bimreg/verify.hpp"
#include "bimreg/voting.hpp"

namespace bimreg {

struct PipelineConfig {
  // submap accumulation
  double voxel_size = 0.8;
  double travel_m = 15.0;
  // plane segmentation
  double plane_voxel = 2.0;
  double sigma_lambda = 10.0;
  int plane_max_depth = 6;
  double plane_max_rms_m = 0.1;
  double merge_normal_deg = 10.0;
  double merge_dist_m = 0.1;
  double classify_angle_deg = 15.0;
  // lines and corners
  double raster_scale = 60.0;
  int min_segment_px = 30;
  double hough_rho_px = 1.0;
  double hough_theta_deg = 1.0;
  int hough_gap_px = 5;
  double segment_merge_tol_m = 0.3;
  double segment_merge_angle_deg = 5.0;
  double extend_m = 1.0;
  double nms_radius_m = 0.5;
  double corner_min_angle_deg = 15.0;
  // descriptors
  double side_res = 0.5;
  double angle_res_deg = 3.0;
  double max_side = 30.0;
  double triplet_min_angle_deg = 10.0;
  // voting
  double xy_res = 0.15;
  double yaw_res_deg = 1.0;
  std::size_t top_l = 10000;
  std::size_t top_k = 5000;
  std::size_t top_j = 1500;
  double residual_max_m = 0.3;
  std::string voting = "hierarchical";  // or "vanilla"
  // verification
  double score_res = 0.2;
  int kernel = 5;
  double lambda = 0.5;
  double score_grid_m = 0.1;
  std::string score_variant = "full";  // award_only, free_free, occupied_free
  double min_confidence = 0.5;
  // execution
  int threads = 1;

  /// Throws InvalidArgument when a value is out of range.
  void validate() const;

  PlaneSegParams plane_params() const;
  HoughParams hough_params() const;
  CornerParams corner_params() const;
  DbParams db_params() const;
  VotingParams voting_params() const;
  ScoreVariant variant() const;
};

/// Every key accepted by set_config_value, in declaration order.
const std::vector<std::string>& config_keys();

/// Throws InvalidArgument for unknown keys or unparsable values.
void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const PipelineConfig& cfg, std::string_view key);

ScoreVariant parse_score_variant(std::string_view name);

/// "key = value" lines; blank lines and '#' comments are ignored.
void parse_config(std::istream& in, PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

/// Writes every key, each line prefixed by `prefix`.
void write_config(std::ostream& out, const PipelineConfig& cfg, std::string_view prefix = "");

}  // namespace bimreg
