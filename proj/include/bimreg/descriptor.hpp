#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bimreg/geometry.hpp"

namespace bimreg {

/// Sorted side lengths |AB| <= |BC| <= |AC| and the acute angles (degrees)
/// between each side and the walls meeting at its anchor corner
/// (alpha: AB at A, beta: BC at B, gamma: AC at C).
struct TriangleDescriptor {
  std::array<double, 3> sides{};
  std::array<double, 3> angles_deg{};
};

struct DescriptorKey {
  std::array<std::int32_t, 6> bins{};
  auto operator<=>(const DescriptorKey&) const = default;
};

struct DescriptorKeyHash {
  std::size_t operator()(const DescriptorKey& key) const noexcept;
};

DescriptorKey quantize(const TriangleDescriptor& d, double side_res,
                       double angle_res_deg);

/// Vertex indices into a corner table, in (A, B, C) order.
using TripletIndex = std::array<std::uint32_t, 3>;

/// All 3-cliques of the graph joining corners closer than `max_side_m`,
/// dropping triangles whose smallest interior angle is below
/// `min_angle_deg`. Indices ascend within each triplet.
std::vector<TripletIndex> build_triplets(std::span<const Corner> corners,
                                         double max_side_m, double min_angle_deg);

double min_interior_angle_deg(const Point2& a, const Point2& b, const Point2& c);

/// Descriptor of the triangle with the given vertex labelling, no sorting.
TriangleDescriptor describe_ordered(const Corner& a, const Corner& b, const Corner& c);

struct CanonicalDescriptor {
  TriangleDescriptor descriptor;
  std::array<int, 3> order{};  // positions in the input forming A, B, C
};

/// Relabels the triplet so the sides ascend and describes it. Throws
/// DegenerateTriplet for collinear or coincident vertices.
CanonicalDescriptor make_descriptor(const std::array<Corner, 3>& triplet);

/// Every labelling whose quantised sides are non-decreasing (AB, BC, AC).
/// Contains the canonical labelling first.
std::vector<std::array<int, 3>> admissible_orders(const std::array<Corner, 3>& triplet,
                                                  double side_res);

enum class DbSource : std::uint32_t { kSubmap = 0, kModel = 1 };

struct DbParams {
  double max_side_m = 30.0;
  double side_res_m = 0.5;
  double angle_res_deg = 3.0;
  double min_angle_deg = 10.0;
};

/// Hash database from quantised descriptor keys to corner triplets. Immutable
/// once built; lookups probe a flat open-addressing table.
class DescriptorDB {
 public:
  struct Bucket {
    const TripletIndex* data = nullptr;
    std::size_t size = 0;
    const TripletIndex* begin() const { return data; }
    const TripletIndex* end() const { return data + size; }
    bool empty() const { return size == 0; }
  };

  DescriptorDB() = default;
  DescriptorDB(double side_res_m, double angle_res_deg, DbSource source,
               std::string floor_id, std::vector<Corner> corners,
               std::vector<std::pair<DescriptorKey, TripletIndex>> entries);

  double side_res() const { return side_res_; }
  double angle_res_deg() const { return angle_res_deg_; }
  DbSource source() const { return source_; }
  const std::string& floor_id() const { return floor_id_; }
  const std::vector<Corner>& corners() const { return corners_; }

  std::size_t key_count() const { return keys_.size(); }
  /// Stored entries; a triangle with tied side bins is stored once per
  /// admissible labelling.
  std::size_t triplet_count() const { return triplets_.size(); }
  /// Distinct corner triangles regardless of labelling.
  std::size_t unique_triplet_count() const;
  /// Keys in ascending order.
  const std::vector<DescriptorKey>& keys() const { return keys_; }

  Bucket find(const DescriptorKey& key) const;
  Bucket bucket_at(std::size_t key_index) const;

  friend bool operator==(const DescriptorDB& a, const DescriptorDB& b);

 private:
  struct Slot {
    DescriptorKey key;
    std::uint32_t key_index = 0;
    bool used = false;
  };

  double side_res_ = 0.5;
  double angle_res_deg_ = 3.0;
  DbSource source_ = DbSource::kModel;
  std::string floor_id_;
  std::vector<Corner> corners_;
  std::vector<DescriptorKey> keys_;
  std::vector<std::uint32_t> offsets_;  // keys_.size() + 1 entries
  std::vector<TripletIndex> triplets_;
  std::vector<Slot> slots_;
  std::size_t mask_ = 0;
};

DescriptorDB build_db(std::span<const Corner> corners, const DbParams& params,
                      DbSource source = DbSource::kModel, std::string floor_id = "0");
DescriptorDB build_db(std::span<const Corner> corners, double max_side_m,
                      double side_res_m, double angle_res_deg);

/// Vertex-aligned pair of triplets sharing one key. Pointers refer into the
/// corner tables of the queried databases.
struct TripletCorrespondence {
  std::array<const Corner*, 3> src{};
  std::array<const Corner*, 3> dst{};
};

/// Visits the cross product of src x dst buckets for every key present in
/// both databases; src keys are visited in ascending order. Throws
/// ResolutionMismatch when the databases were quantised differently.
void query_correspondences(const DescriptorDB& src, const DescriptorDB& dst,
                           const std::function<void(const TripletCorrespondence&)>& visit);
std::vector<TripletCorrespondence> query_correspondences(const DescriptorDB& src,
                                                         const DescriptorDB& dst);

inline constexpr std::uint32_t kDbVersion = 1;

void serialize_db(const DescriptorDB& db, const std::filesystem::path& path);
DescriptorDB deserialize_db(const std::filesystem::path& path);

}  // namespace bimreg
