#include "twoscale/reho.hpp"

#include "twoscale/csv.hpp"
#include "twoscale/error.hpp"
#include "twoscale/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace twoscale::reho {

std::vector<double> rank_transform(std::span<const double> series) {
  const std::size_t n = series.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return series[a] < series[b]; });
  std::vector<double> ranks(n);
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && series[order[end]] == series[order[start]]) ++end;
    // Positions start..end-1 hold ranks start+1..end; their mean is exact in
    // binary (a half-integer).
    const double mid = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = mid;
    start = end;
  }
  return ranks;
}

namespace {

// Sum over tie groups of (g^3 - g) for one rank row.
double tie_term(const std::vector<double>& ranks) {
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  std::size_t start = 0;
  while (start < sorted.size()) {
    std::size_t end = start + 1;
    while (end < sorted.size() && sorted[end] == sorted[start]) ++end;
    const double g = static_cast<double>(end - start);
    total += g * g * g - g;
    start = end;
  }
  return total;
}

}  // namespace

double kendall_w(std::span<const std::vector<double>> rank_rows) {
  const std::size_t m = rank_rows.size();
  if (m < 2) throw Error(ErrorCode::DegenerateInput, "Kendall W needs at least 2 rank rows");
  const std::size_t n = rank_rows.front().size();
  if (n < 2) throw Error(ErrorCode::DegenerateInput, "Kendall W needs at least 2 items");
  std::vector<double> column_sums(n, 0.0);
  double ties = 0.0;
  for (const auto& row : rank_rows) {
    if (row.size() != n) throw Error(ErrorCode::LengthMismatch, "rank rows differ in length");
    for (std::size_t t = 0; t < n; ++t) column_sums[t] += row[t];
    ties += tie_term(row);
  }
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);
  const double mean = md * (nd + 1.0) / 2.0;
  double s = 0.0;
  for (double r : column_sums) s += (r - mean) * (r - mean);
  const double denom = md * md * (nd * nd * nd - nd) - md * ties;
  if (!(denom > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "Kendall W undefined: every rank row is fully tied");
  }
  return std::clamp(12.0 * s / denom, 0.0, 1.0);
}

RehoMap reho_map(const VoxelBlock& block, const RehoOptions& options) {
  const auto [nx, ny, nz] = block.dims;
  if (nx == 0 || ny == 0 || nz == 0 || block.series.size() != block.voxel_count()) {
    throw Error(ErrorCode::InvalidArgument, "voxel block dimensions do not match its series");
  }
  std::vector<std::vector<double>> ranks(block.series.size());
  parallel_for(block.series.size(), [&](std::size_t v) { ranks[v] = rank_transform(block.series[v]); });

  RehoMap map;
  map.dims = block.dims;
  map.region_id = block.region_id;
  map.w.assign(block.voxel_count(), 0.0);
  std::vector<char> defined(block.voxel_count(), 0);

  parallel_for(block.voxel_count(), [&](std::size_t v) {
    const std::size_t x = v % nx;
    const std::size_t y = (v / nx) % ny;
    const std::size_t z = v / (nx * ny);
    std::vector<std::vector<double>> cluster;
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0 && !options.include_center) continue;
          const long long cx = static_cast<long long>(x) + dx;
          const long long cy = static_cast<long long>(y) + dy;
          const long long cz = static_cast<long long>(z) + dz;
          if (cx < 0 || cy < 0 || cz < 0 || cx >= static_cast<long long>(nx) ||
              cy >= static_cast<long long>(ny) || cz >= static_cast<long long>(nz)) {
            continue;
          }
          cluster.push_back(ranks[block.index(cx, cy, cz)]);
        }
      }
    }
    if (cluster.size() < 2) return;
    try {
      map.w[v] = kendall_w(cluster);
      defined[v] = 1;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateInput) throw;
    }
  });
  map.defined.assign(defined.begin(), defined.end());
  return map;
}

RoiTimeSeries select_representative(const VoxelBlock& block, const RehoMap& map) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < map.w.size(); ++v) {
    if (map.defined[v]) {
      total += map.w[v];
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorCode::NoDefinedReho, "no voxel has a defined ReHo value");
  const double threshold = total / static_cast<double>(count);

  std::vector<std::size_t> candidates;
  double best = -1.0;
  std::size_t best_voxel = 0;
  for (std::size_t v = 0; v < map.w.size(); ++v) {
    if (!map.defined[v]) continue;
    if (map.w[v] >= threshold) candidates.push_back(v);
    if (map.w[v] > best) {
      best = map.w[v];
      best_voxel = v;
    }
  }
  // The mean can round above every value when all W are equal.
  if (candidates.empty()) candidates.push_back(best_voxel);

  const std::size_t n = block.series.front().size();
  RoiTimeSeries out;
  out.roi_id = block.region_id;
  out.values.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (std::size_t v : candidates) sum += block.series[v][t];
    out.values[t] = sum / static_cast<double>(candidates.size());
  }
  return out;
}

VoxelBlock read_voxel_block(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path, false);
  std::vector<std::vector<std::string>> rows = table.rows;
  if (!rows.empty() && !try_parse_double(rows.front().at(0))) rows.erase(rows.begin());
  if (rows.empty()) throw Error(ErrorCode::ParseError, path.string() + ": no voxel rows");

  struct Parsed {
    std::array<std::size_t, 3> pos;
    std::vector<double> values;
  };
  std::vector<Parsed> parsed;
  std::array<std::size_t, 3> dims{0, 0, 0};
  std::size_t n = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string ctx = path.string() + " row " + std::to_string(r);
    if (row.size() < 5) throw Error(ErrorCode::ParseError, ctx + ": need x,y,z and at least 2 samples");
    Parsed p;
    for (int a = 0; a < 3; ++a) {
      const long long c = parse_integer(row[a], ctx);
      if (c < 0) throw Error(ErrorCode::ParseError, ctx + ": negative coordinate");
      p.pos[a] = static_cast<std::size_t>(c);
      dims[a] = std::max(dims[a], p.pos[a] + 1);
    }
    for (std::size_t k = 3; k < row.size(); ++k) {
      const double value = parse_double(row[k], ctx);
      if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteSample, ctx + ": non-finite sample");
      p.values.push_back(value);
    }
    if (r == 0) n = p.values.size();
    if (p.values.size() != n) throw Error(ErrorCode::LengthMismatch, ctx + ": series length differs");
    parsed.push_back(std::move(p));
  }

  VoxelBlock block;
  block.dims = dims;
  block.series.assign(block.voxel_count(), {});
  for (auto& p : parsed) {
    auto& slot = block.series[block.index(p.pos[0], p.pos[1], p.pos[2])];
    if (!slot.empty()) throw Error(ErrorCode::ParseError, path.string() + ": duplicate voxel");
    slot = std::move(p.values);
  }
  for (const auto& s : block.series) {
    if (s.empty()) throw Error(ErrorCode::ParseError, path.string() + ": voxel grid has gaps");
  }
  return block;
}

void write_reho_map(const std::filesystem::path& path, const RehoMap& map) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << "x,y,z,w,defined\n";
  const auto [nx, ny, nz] = map.dims;
  for (std::size_t z = 0; z < nz; ++z) {
    for (std::size_t y = 0; y < ny; ++y) {
      for (std::size_t x = 0; x < nx; ++x) {
        const std::size_t v = x + nx * (y + ny * z);
        out << x << ',' << y << ',' << z << ',' << format_double(map.w[v]) << ','
            << (map.defined[v] ? 1 : 0) << '\n';
      }
    }
  }
}

}  // namespace twoscale::reho
