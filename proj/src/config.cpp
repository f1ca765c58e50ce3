#include "bimreg/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <variant>

#include "bimreg/error.hpp"

namespace bimreg {

namespace {

using Member = std::variant<double PipelineConfig::*, int PipelineConfig::*,
                            std::size_t PipelineConfig::*, std::string PipelineConfig::*>;

struct Field {
  std::string name;
  Member member;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"voxel_size", &PipelineConfig::voxel_size},
      {"travel_m", &PipelineConfig::travel_m},
      {"plane_voxel", &PipelineConfig::plane_voxel},
      {"sigma_lambda", &PipelineConfig::sigma_lambda},
      {"plane_max_depth", &PipelineConfig::plane_max_depth},
      {"plane_max_rms_m", &PipelineConfig::plane_max_rms_m},
      {"merge_normal_deg", &PipelineConfig::merge_normal_deg},
      {"merge_dist_m", &PipelineConfig::merge_dist_m},
      {"classify_angle_deg", &PipelineConfig::classify_angle_deg},
      {"raster_scale", &PipelineConfig::raster_scale},
      {"min_segment_px", &PipelineConfig::min_segment_px},
      {"hough_rho_px", &PipelineConfig::hough_rho_px},
      {"hough_theta_deg", &PipelineConfig::hough_theta_deg},
      {"hough_gap_px", &PipelineConfig::hough_gap_px},
      {"segment_merge_tol_m", &PipelineConfig::segment_merge_tol_m},
      {"segment_merge_angle_deg", &PipelineConfig::segment_merge_angle_deg},
      {"extend_m", &PipelineConfig::extend_m},
      {"nms_radius_m", &PipelineConfig::nms_radius_m},
      {"corner_min_angle_deg", &PipelineConfig::corner_min_angle_deg},
      {"side_res", &PipelineConfig::side_res},
      {"angle_res_deg", &PipelineConfig::angle_res_deg},
      {"max_side", &PipelineConfig::max_side},
      {"triplet_min_angle_deg", &PipelineConfig::triplet_min_angle_deg},
      {"xy_res", &PipelineConfig::xy_res},
      {"yaw_res_deg", &PipelineConfig::yaw_res_deg},
      {"top_l", &PipelineConfig::top_l},
      {"top_k", &PipelineConfig::top_k},
      {"top_j", &PipelineConfig::top_j},
      {"residual_max_m", &PipelineConfig::residual_max_m},
      {"voting", &PipelineConfig::voting},
      {"score_res", &PipelineConfig::score_res},
      {"kernel", &PipelineConfig::kernel},
      {"lambda", &PipelineConfig::lambda},
      {"score_grid_m", &PipelineConfig::score_grid_m},
      {"score_variant", &PipelineConfig::score_variant},
      {"min_confidence", &PipelineConfig::min_confidence},
      {"threads", &PipelineConfig::threads},
  };
  return table;
}

const Field& field(std::string_view key) {
  const auto& table = fields();
  const auto it = std::find_if(table.begin(), table.end(),
                               [&](const Field& f) { return f.name == key; });
  if (it == table.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
  }
  return *it;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "bad value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, what);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.push_back(f.name);
    return k;
  }();
  return keys;
}

void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  const Field& f = field(key);
  value = trim(value);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          cfg.*member = std::string(value);
        } else {
          cfg.*member = parse_number<T>(key, value);
        }
      },
      f.member);
}

std::string get_config_value(const PipelineConfig& cfg, std::string_view key) {
  const Field& f = field(key);
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cvref_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return cfg.*member;
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(cfg.*member);
        } else {
          return std::to_string(cfg.*member);
        }
      },
      f.member);
}

ScoreVariant parse_score_variant(std::string_view name) {
  if (name == "full") return ScoreVariant::kFull;
  if (name == "award_only") return ScoreVariant::kAwardOnly;
  if (name == "free_free") return ScoreVariant::kFreeFreeAward;
  if (name == "occupied_free") return ScoreVariant::kOccupiedFreePenalty;
  throw Error(ErrorCode::kInvalidArgument, "unknown score variant '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  for (const Field& f : fields()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(this->*member)>;
          if constexpr (!std::is_same_v<T, std::string>) {
            require(this->*member > T{0}, f.name + " must be positive");
          }
        },
        f.member);
  }
  require(sigma_lambda > 1.0, "sigma_lambda must exceed 1");
  require(top_l >= top_k && top_k >= top_j, "top_l >= top_k >= top_j is required");
  require(kernel >= 1, "kernel must be >= 1");
  require(voting == "hierarchical" || voting == "vanilla",
          "voting must be 'hierarchical' or 'vanilla'");
  parse_score_variant(score_variant);
}

PlaneSegParams PipelineConfig::plane_params() const {
  return {plane_voxel, sigma_lambda, plane_max_depth, plane_max_rms_m};
}

HoughParams PipelineConfig::hough_params() const {
  HoughParams p;
  p.rho_px = hough_rho_px;
  p.theta_deg = hough_theta_deg;
  p.gap_px = hough_gap_px;
  return p;
}

CornerParams PipelineConfig::corner_params() const {
  return {extend_m, nms_radius_m, corner_min_angle_deg};
}

DbParams PipelineConfig::db_params() const {
  return {max_side, side_res, angle_res_deg, triplet_min_angle_deg};
}

VotingParams PipelineConfig::voting_params() const { return {top_l, top_k, top_j}; }

ScoreVariant PipelineConfig::variant() const { return parse_score_variant(score_variant); }

void parse_config(std::istream& in, PipelineConfig& cfg) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kParseError,
                  "config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  PipelineConfig cfg;
  parse_config(in, cfg);
  return cfg;
}

void write_config(std::ostream& out, const PipelineConfig& cfg, std::string_view prefix) {
  for (const Field& f : fields()) {
    out << prefix << f.name << " = " << get_config_value(cfg, f.name) << '\n';
  }
}

}  // namespace bimreg
