#pragma once

#include "twoscale/core_data.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace twoscale::reho {

// Mid-rank transform: ranks are 1..N and tied values share the average rank.
std::vector<double> rank_transform(std::span<const double> series);

// Kendall's W for m rank rows over N items, with the tie correction in the
// denominator. Throws Error(DegenerateInput) if the denominator is not
// positive (every row fully tied) or fewer than 2 rows / 2 items are given.
double kendall_w(std::span<const std::vector<double>> rank_rows);

struct VoxelBlock {
  std::array<std::size_t, 3> dims{1, 1, 1};
  // Voxel (x, y, z) lives at index x + X * (y + Y * z).
  std::vector<std::vector<double>> series;
  std::size_t region_id = 0;

  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims[0] * (y + dims[1] * z);
  }
};

struct RehoMap {
  std::array<std::size_t, 3> dims{1, 1, 1};
  std::vector<double> w;      // 0 where undefined
  std::vector<bool> defined;
  std::size_t region_id = 0;
};

struct RehoOptions {
  // Include the voxel itself in its cluster (27 rankers in the interior).
  bool include_center = true;
};

// Per-voxel W over the voxel's in-bounds 26-neighbourhood. Voxels whose
// cluster has fewer than 2 members, or whose cluster is fully tied, are left
// undefined.
RehoMap reho_map(const VoxelBlock& block, const RehoOptions& options = {});

// Mean series over voxels whose W reaches the mean of the defined W values.
// Throws Error(NoDefinedReho) if no voxel has a defined W.
RoiTimeSeries select_representative(const VoxelBlock& block, const RehoMap& map);

// CSV with columns x,y,z followed by the samples, one row per voxel. A header
// row is optional. Every grid position up to the maximum coordinates must be
// present exactly once.
VoxelBlock read_voxel_block(const std::filesystem::path& path);
void write_reho_map(const std::filesystem::path& path, const RehoMap& map);

}  // namespace twoscale::reho
